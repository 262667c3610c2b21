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
 * @file npu.hpp
 * @brief Trace replay on a vector NPU with batch-stall semantics and a sparse unit.
 *
 * A vector load completes when its slowest lane is served; nothing behind it
 * proceeds in InOrder mode. IdealOoO lets loads run ahead of compute by up to
 * rob_entries batches.
 */

#pragma once

#include <string_view>
#include <vector>

#include "nvrsim/memory.hpp"
#include "nvrsim/prefetch.hpp"
#include "nvrsim/workload.hpp"

namespace nvrsim {

enum class ExecMode : std::uint8_t { InOrder, IdealOoO };
std::string_view to_string(ExecMode m);
ExecMode parse_exec_mode(std::string_view s);

struct NpuConfig {
  std::uint32_t vector_width = 16;
  ExecMode exec_mode = ExecMode::InOrder;
  std::uint32_t element_bits = 32;
  std::uint32_t rob_entries = 4;
  std::uint32_t sparse_unit_latency = 2;
  std::uint32_t compute_cycles_per_group = 1;
  bool record_batches = false;

  void validate() const;
};

struct Interval {
  Cycle start = 0;
  Cycle end = 0;
  bool operator==(const Interval&) const = default;
};

enum class SparseOp : std::uint8_t { Align, Skip, Tile };

struct SparseUnitState {
  Cycle busy_until = 0;
  std::uint64_t row = 0;
  std::uint64_t window_lo = 0;
  std::uint64_t window_hi = 0;
  Addr idx_addr = 0;
  std::uint32_t idx_count = 0;
  Addr ss_start = 0;
  std::uint32_t stride = 0;
  std::vector<Interval> busy;
};

struct SparseOpResult {
  std::vector<std::uint64_t> indices;
  std::size_t tiles = 0;
  std::size_t padded_lanes = 0;
  Cycle done_cycle = 0;
};

/**
 * Align: gather positions of the non-zeros (operands are the W-row column
 * indices); Skip: empty stream when the row has no non-zeros, else pass-through;
 * Tile: split operands into `tile_width` chunks, padding the last.
 */
SparseOpResult sparse_unit_execute(SparseUnitState& su, SparseOp kind, const std::vector<std::uint64_t>& operands,
                                   Cycle now, std::uint32_t latency, std::uint32_t tile_width = 16);

/// Complement of the (sorted, disjoint) busy intervals within [0, total).
std::vector<Interval> idle_windows(const std::vector<Interval>& busy, Cycle total);
/// Idle cycles of `busy` within [from, to).
Cycle idle_cycles_in(const std::vector<Interval>& busy, Cycle from, Cycle to);

struct BatchRecord {
  std::uint64_t id = 0;
  std::vector<Addr> lane_addresses;
  Cycle all_ready_cycle = 0;
  Cycle stall_cycles = 0;
  bool any_miss = false;
};

struct SimReport {
  Cycle total_cycles = 0;
  Cycle base_exec_cycles = 0;
  Cycle miss_stall_cycles = 0;
  double overall_miss_rate = 0.0;
  double per_batch_miss_rate = 0.0;
  std::uint64_t load_batches = 0;
  std::uint64_t missed_batches = 0;
  std::uint64_t lanes = 0;
  std::uint64_t missed_lanes = 0;
  std::uint64_t lanes_in_missed_batches = 0;
  std::uint64_t off_chip_bytes = 0;
  /// Loads whose slowest line was served by L2 / DRAM.
  std::uint64_t worst_l2_batches = 0;
  std::uint64_t worst_dram_batches = 0;
  /// Cycles spent waiting on loads and issuing stores.
  Cycle io_cycles = 0;
  std::uint64_t load_bytes = 0;
  std::uint64_t store_bytes = 0;
  std::uint64_t compute_ops = 0;  // MAC lanes issued
  std::vector<std::uint64_t> miss_histogram;  // index = missed lanes in a batch
  BandwidthLedger ledger;
  DemandStats demand;
  PrefetchAccounting prefetch;
  std::uint64_t nvr_evaluations = 0;
  std::vector<Interval> sparse_busy;
  std::vector<BatchRecord> batches;

  /// Demand line misses (the quantity coverage is computed over).
  std::uint64_t demand_misses() const { return demand.misses; }
};

/// Replays `trace`. `prefetcher` may be null. The hierarchy is advanced in place.
SimReport execute(const Trace& trace, MemoryHierarchy& mem, Prefetcher* prefetcher, const NpuConfig& cfg,
                  const SparseProgram& program);

}  // namespace nvrsim
