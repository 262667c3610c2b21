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
 * @file memory.hpp
 * @brief Timestamped memory hierarchy: optional NSB, L1, L2 with MSHRs, FIFO DRAM.
 *
 * Lines carry the cycle at which their fill completes, so a request that finds
 * a line "present but not ready" is an in-flight hit and coalesces onto the
 * outstanding fill. DRAM is a single FIFO server with a per-cycle byte budget.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "nvrsim/common.hpp"

namespace nvrsim {

struct CacheConfig {
  std::uint64_t capacity_bytes = 0;
  std::uint32_t line_bytes = 64;
  std::uint32_t ways = 1;
  std::uint32_t hit_latency_cycles = 1;
  std::uint32_t mshr_entries = 32;

  std::uint64_t sets() const { return capacity_bytes / (std::uint64_t{line_bytes} * ways); }
  void validate(const std::string& name) const;
};

struct NsbConfig : CacheConfig {
  bool enabled = false;
};

struct DramConfig {
  std::uint32_t latency_cycles = 100;
  std::uint32_t bandwidth_bytes_per_cycle = 64;
  void validate() const;
};

struct HierarchyConfig {
  CacheConfig l1;
  CacheConfig l2;
  NsbConfig nsb;
  DramConfig dram;

  /// L1 32 KiB 4-way, L2 256 KiB 8-way, NSB 16 KiB 16-way (disabled), 64 B lines.
  static HierarchyConfig defaults();
  void validate() const;
};

enum class ReqKind : std::uint8_t { DemandLoad, DemandStore, Prefetch };
enum class Origin : std::uint8_t { NPU, NVR, BaselinePrefetcher };
enum class HitLevel : std::uint8_t { NSB, L1, L2, DRAM };
/// Where a prefetch is installed. NVR prefetches also fill the NSB when it is enabled.
enum class FillTarget : std::uint8_t { L1, L2 };

std::string_view to_string(HitLevel h);

struct MemRequest {
  Addr address = 0;
  std::uint32_t size_bytes = 1;
  ReqKind kind = ReqKind::DemandLoad;
  Origin origin = Origin::NPU;
  Cycle issue_cycle = 0;
  FillTarget target = FillTarget::L2;
};

struct AccessResult {
  Cycle served_at = 0;
  HitLevel hit_level = HitLevel::DRAM;
  bool coalesced = false;
  /// Prefetch only: not performed (already resident, or no MSHR free).
  bool dropped = false;
};

/// Set-associative, LRU, timestamped cache array.
class Cache {
 public:
  struct Line {
    Addr line = 0;
    bool valid = false;
    bool dirty = false;
    Cycle ready = 0;
    std::uint64_t lru = 0;
  };

  Cache() = default;
  explicit Cache(const CacheConfig& cfg);

  Line* find(Addr line);
  const Line* find(Addr line) const;
  void touch(Line& l) { l.lru = ++stamp_; }
  /// Installs `line`; returns the evicted victim, if a valid line was displaced.
  std::optional<Line> insert(Addr line, Cycle ready, bool dirty);
  const CacheConfig& config() const { return cfg_; }
  bool enabled() const { return cfg_.capacity_bytes > 0; }

 private:
  CacheConfig cfg_{};
  std::uint64_t sets_ = 0;
  std::vector<Line> lines_;
  std::uint64_t stamp_ = 0;
};

/// Outstanding-miss table. One entry per in-flight line; entries retire at their fill cycle.
class MshrFile {
 public:
  struct Entry {
    Addr line = 0;
    Cycle ready = 0;
    bool is_prefetch = false;
    std::uint32_t waiters = 1;
  };

  MshrFile() = default;
  explicit MshrFile(std::uint32_t capacity) : capacity_(capacity) {}

  void retire(Cycle now);
  Entry* find(Addr line);
  bool full() const { return entries_.size() >= capacity_; }
  /// Earliest fill cycle among outstanding entries (requires !empty()).
  Cycle earliest_ready() const;
  void allocate(Addr line, Cycle ready, bool is_prefetch);
  std::size_t size() const { return entries_.size(); }
  std::size_t outstanding(Cycle now) const;
  std::uint32_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::uint32_t capacity_ = 1;
  std::vector<Entry> entries_;
};

struct BoundaryLedger {
  std::uint64_t demand_bytes = 0;
  std::uint64_t prefetch_bytes = 0;
  std::uint64_t writeback_bytes = 0;
};

/// Byte accounting at the NPU-side/L2 boundary and the L2/DRAM (off-chip) boundary.
struct BandwidthLedger {
  BoundaryLedger npu_l2;
  BoundaryLedger offchip;
  std::uint64_t dram_reads = 0;
};

struct DemandStats {
  std::uint64_t loads = 0;
  std::uint64_t stores = 0;
  std::uint64_t nsb_hits = 0;
  std::uint64_t l1_hits = 0;
  std::uint64_t l2_hits = 0;
  std::uint64_t misses = 0;     // served by DRAM, including coalesced in-flight hits
  std::uint64_t coalesced = 0;
  std::uint64_t mshr_stall_cycles = 0;
};

struct PrefetchAccounting {
  std::uint64_t issued = 0;
  std::uint64_t useful = 0;   // demanded before leaving the hierarchy
  std::uint64_t late = 0;     // demanded while still in flight (subset of useful)
  std::uint64_t dropped = 0;  // no MSHR available
  std::uint64_t redundant = 0;  // already resident, not issued
};

class MemoryHierarchy {
 public:
  explicit MemoryHierarchy(const HierarchyConfig& cfg);

  /// Empty caches and MSHRs, cycle 0, zeroed ledgers.
  static MemoryHierarchy reset_and_configure(const HierarchyConfig& cfg) { return MemoryHierarchy(cfg); }

  /// Requests spanning several lines are split; the result reports the slowest line.
  AccessResult access(const MemRequest& req);

  /// True if some level holds `addr`'s line with its fill complete by `now`.
  bool probe_ready(Addr addr, Cycle now) const;
  bool resident(Addr addr) const;
  /// MSHRs at the off-chip boundary still free at `now`.
  std::uint32_t mshr_free(Cycle now) const;

  const BandwidthLedger& bandwidth_ledger() const { return ledger_; }
  const DemandStats& demand_stats() const { return demand_; }
  const PrefetchAccounting& prefetch_accounting() const { return pf_; }
  const HierarchyConfig& config() const { return cfg_; }
  std::uint32_t line_bytes() const { return cfg_.l2.line_bytes; }
  Addr line_of(Addr a) const { return a / cfg_.l2.line_bytes; }
  /// Latency of an all-hit load at the first NPU-side level.
  std::uint32_t first_level_latency() const;

 private:
  AccessResult access_line(Addr line, const MemRequest& req);
  AccessResult demand_load(Addr line, Cycle t);
  AccessResult demand_store(Addr line, Cycle t);
  AccessResult prefetch(Addr line, const MemRequest& req);
  Cycle dram_fetch(Addr line, Cycle t, bool is_prefetch, bool& stalled_out);
  void fill(Cache& c, Addr line, Cycle ready, bool dirty);
  void note_eviction(const Cache::Line& victim, Cache& from);
  void on_demand_touch(Addr line, Cycle ready, Cycle t);
  bool anywhere(Addr line) const;

  HierarchyConfig cfg_;
  Cache nsb_;
  Cache l1_;
  Cache l2_;
  MshrFile mshr_;
  MshrFile nsb_mshr_;
  Cycle dram_free_ = 0;
  BandwidthLedger ledger_;
  DemandStats demand_;
  PrefetchAccounting pf_;
  std::unordered_set<Addr> pf_lines_;  // prefetched lines not yet demanded
};

}  // namespace nvrsim
