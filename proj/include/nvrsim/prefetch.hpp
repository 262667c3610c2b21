/*
 * Copyright 2026 The nvr-sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/**
 * @file prefetch.hpp
 * @brief Snoop/issue contract, the NVR component tables and the prefetch engines.
 *
 * Engines never touch the demand path. They see a read-only stream of
 * SnoopEvents and a const view of the hierarchy (for residency probes), and
 * return MemRequests that the driver injects.
 */

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nvrsim/memory.hpp"
#include "nvrsim/workload.hpp"

namespace nvrsim {

enum class SnoopSource : std::uint8_t { CpuBranch, NpuLoad, SparseUnitRegs };

/// Sparse-unit registers as seen by the snooper after an Align op.
struct SparseRegs {
  Addr ss_start = 0;
  std::uint32_t shift = 0;
  std::uint32_t vector_bytes = 0;
  Addr idx_base = 0;            // start of the index array
  std::uint32_t idx_bytes = 4;
  std::uint64_t idx_total = 0;  // entries in the index array, 0 if unknown
  Addr idx_addr = 0;            // address of the index vector just decoded
  std::uint32_t idx_count = 0;  // lanes in that index vector
  bool has_rowptr = false;
  Addr rowptr_base = 0;
  std::uint64_t rows = 0;
  std::uint64_t row = 0;        // current row (rowptr loads seen - 1)
  std::uint64_t window_lo = 0;  // rowptr[row]
  std::uint64_t window_hi = 0;  // rowptr[row + 1]
};

struct SnoopEvent {
  SnoopSource source = SnoopSource::NpuLoad;
  Addr pc = 0;
  Cycle cycle = 0;
  const TraceEvent* event = nullptr;  // CpuBranch / NpuLoad
  SparseRegs regs{};                  // SparseUnitRegs
};

struct PrefetcherConfig {
  std::string kind = "none";  // none, zero, stream, imp, dvr, nvr
  std::uint32_t degree = 4;
  std::uint32_t confidence_threshold = 2;
  bool nvr_fuzzy_overfetch = true;
  std::uint32_t table_entries = 16;
  std::uint32_t lookahead_chains = 0;  // 0 = 8 x vector width
  std::uint32_t vector_width = 16;

  void validate() const;
};

/// Driver-side context handed to step(): what the engine may observe.
struct StepContext {
  Cycle now = 0;
  bool load_in_flight = false;
  /// Sparse-unit idle cycles available to speculative work since the last step.
  Cycle idle_cycles = 0;
};

class Prefetcher {
 public:
  virtual ~Prefetcher() = default;
  virtual std::string_view name() const = 0;
  virtual void snoop(const SnoopEvent& ev) = 0;
  /// Demand outcome of a load, after it has been presented to the hierarchy.
  virtual void on_demand_result(const TraceEvent&, bool /*missed*/, Cycle) {}
  virtual std::vector<MemRequest> step(const StepContext& ctx, const MemoryHierarchy& mem) = 0;
  /// Speculative chain evaluations performed (NVR only).
  virtual std::uint64_t evaluations() const { return 0; }
};

/// Null for kind "none". The image is the functional view used to read index values once they are on chip.
std::unique_ptr<Prefetcher> make_prefetcher(const PrefetcherConfig& cfg, const MemoryImage& image);
std::unique_ptr<Prefetcher> make_nvr_engine(const PrefetcherConfig& cfg, const MemoryImage& image);

// ---------------------------------------------------------------------------
// Component tables
// ---------------------------------------------------------------------------

struct RptEntry {
  Addr pc = 0;
  Addr prev_addr = 0;
  std::int64_t stride = 0;
  Addr last_prefetch_addr = 0;
  std::uint8_t stride_confidence = 0;  // 2-bit saturating
  std::uint32_t entry_id = 0;
  bool valid = false;
  bool has_stride = false;
  std::uint64_t lru = 0;
};

/// Reference prediction table (stride detector).
class RptTable {
 public:
  explicit RptTable(std::uint32_t entries = 16, std::uint32_t threshold = 2) : entries_(entries), threshold_(threshold) {
    table_.resize(entries);
  }
  /// Trains on one access; returns the updated entry.
  RptEntry& update(Addr pc, Addr addr);
  RptEntry* find(Addr pc);
  bool confident(const RptEntry& e) const { return e.has_stride && e.stride_confidence >= threshold_; }
  /// last_prefetch_addr + stride * {1..count}; advances last_prefetch_addr. Empty when unconfident.
  std::vector<Addr> sd_predict(Addr pc, std::uint32_t count);

 private:
  std::uint32_t entries_;
  std::uint32_t threshold_;
  std::vector<RptEntry> table_;
  std::uint64_t stamp_ = 0;
};

struct IptEntry {
  Addr pc = 0;
  Addr ss_start = 0;
  std::uint32_t ss_offset = 0;
  std::uint64_t lpi = 0;
  std::uint32_t vector_size = 0;
  std::uint32_t stride = 0;  // shift amount
  bool valid = false;
  std::uint32_t entry_id = 0;
};

/// Indirect pattern table (sparse chain detector).
class IptTable {
 public:
  explicit IptTable(std::uint32_t entries = 32) : table_(entries) {}
  IptEntry& refresh(Addr pc, Addr ss_start, std::uint32_t stride, std::uint32_t vector_size);
  IptEntry* find(Addr pc);
  /// ss_start + (w << stride) per value; lpi becomes the last value.
  std::vector<Addr> scd_predict(Addr pc, const std::vector<std::uint64_t>& w_values);

 private:
  std::vector<IptEntry> table_;
  std::uint32_t next_ = 0;
};

enum class BoundMode : std::uint8_t { Static, Sparse };

struct SstEntry {
  Addr pc = 0;
  std::uint64_t loop_boundary = 0;
  std::uint64_t iteration_counter = 0;
  std::int64_t increment = 0;
  std::uint8_t boundary_confidence = 0;  // 4-bit
  bool sparse_mode = false;
  std::uint8_t level_confidence = 0;  // 2-bit
  std::uint8_t level = 0;
  std::uint32_t entry_id = 0;
  bool valid = false;
  std::uint64_t window_lo = 0;
  std::uint64_t window_hi = 0;
  bool has_window = false;
};

struct BoundPrediction {
  std::uint64_t bound = 0;
  BoundMode mode = BoundMode::Static;
  bool bounded = false;  // false: no entry, or nothing confident yet
};

/// Sparse structure table (loop bound detector).
class SstTable {
 public:
  explicit SstTable(std::uint32_t entries = 16, std::uint32_t threshold = 2) : table_(entries), threshold_(threshold) {}
  /// Branch snoop: loop-bound register value at `pc`.
  SstEntry& observe_branch(Addr pc, std::uint8_t level, std::uint64_t iter, std::uint64_t bound);
  /// Sparse-register snoop: the rowptr window of the loop at `pc`.
  void observe_window(Addr pc, std::uint64_t lo, std::uint64_t hi);
  SstEntry* find(Addr pc);
  const SstEntry* find_level(std::uint8_t level) const;
  BoundPrediction lbd_bound(Addr pc) const;
  /// Clamps a prefetch run to the predicted bound (unbounded: one vector width).
  std::uint64_t clamp_run(Addr pc, std::uint64_t requested, std::uint32_t vector_width) const;

 private:
  SstEntry& slot(Addr pc);
  std::vector<SstEntry> table_;
  std::uint32_t threshold_;
  std::uint32_t next_ = 0;
};

/// One emitted vector prefetch: up to N distinct lines, issued at `cycle`.
struct VmigBundle {
  Cycle cycle = 0;
  std::vector<Addr> lines;
};

/**
 * IRU -> PIE -> VIGU, one stage per cycle. Chain batch b enters the IRU at
 * now + b and leaves the VIGU at now + b + 2.
 */
class Vmig {
 public:
  explicit Vmig(std::uint32_t lanes = 16) : lanes_(lanes) {}
  std::uint32_t lanes() const { return lanes_; }
  /// Bundles line addresses (consecutive duplicates removed) into <= N-line vector prefetches.
  std::vector<VmigBundle> generate(const std::vector<Addr>& chain_lines, Cycle now) const;
  /// Cycle at which the last of `batches` bundles leaves the pipeline, relative to entry.
  static Cycle pipeline_latency(std::size_t batches) { return batches == 0 ? 0 : batches + 2; }

 private:
  std::uint32_t lanes_;
};

/// Learns addr = base + index * scale from (index value, address) pairs.
class IndirectPatternLearner {
 public:
  /// Index vector just loaded at `idx_addr` with its values.
  void observe_index(Addr idx_addr, const std::vector<std::uint64_t>& values);
  /// Indirect load; pairs it with the pending index vector if one is waiting.
  void observe_indirect(const TraceEvent& e);
  bool confident() const { return confidence_ >= 2 && scale_ > 0; }
  Addr predict(std::uint64_t index) const { return base_ + index * static_cast<Addr>(scale_); }
  std::int64_t scale() const { return scale_; }
  Addr base() const { return base_; }
  /// Contiguous bytes the gather touches per index: lanes x element size, or one element when lane-wise.
  std::uint32_t span_bytes() const { return span_; }
  bool lane_wise() const { return lane_wise_; }
  const std::vector<std::uint64_t>& last_values() const { return last_values_; }
  Addr last_index_addr() const { return last_idx_addr_; }

 private:
  bool verify(std::uint64_t v, Addr a) const { return scale_ > 0 && predict(v) == a; }
  std::vector<std::pair<std::uint64_t, Addr>> pairs_;
  std::vector<std::uint64_t> last_values_;
  Addr last_idx_addr_ = 0;
  bool pending_ = false;
  std::int64_t scale_ = 0;
  Addr base_ = 0;
  std::uint32_t confidence_ = 0;
  std::uint32_t span_ = 0;
  bool lane_wise_ = true;
};

// ---------------------------------------------------------------------------
// Hardware overhead
// ---------------------------------------------------------------------------

struct OverheadRow {
  std::string component;
  std::uint64_t bits = 0;
  std::string formula;
  std::uint64_t table_bits = 0;  // value printed in the reference table
};

struct OverheadReport {
  std::vector<OverheadRow> rows;
  std::uint64_t total_bits = 0;
  double total_kib = 0.0;
  double table_total_kib = 9.72;
  std::uint32_t nsb_kib = 16;
};

/// Per-field bit sums; `n` is the number of parallel entries per table bank.
OverheadReport hardware_overhead(std::uint32_t n);

}  // namespace nvrsim
