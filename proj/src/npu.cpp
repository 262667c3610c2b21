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

#include "nvrsim/npu.hpp"

#include <algorithm>

namespace nvrsim {

std::string_view to_string(ExecMode m) { return m == ExecMode::InOrder ? "InOrder" : "IdealOoO"; }

ExecMode parse_exec_mode(std::string_view s) {
  if (s == "InOrder" || s == "inorder" || s == "in_order") return ExecMode::InOrder;
  if (s == "IdealOoO" || s == "ideal_ooo" || s == "ooo") return ExecMode::IdealOoO;
  throw ConfigError("npu.exec_mode: expected InOrder or IdealOoO, got '" + std::string(s) + "'");
}

void NpuConfig::validate() const {
  if (vector_width == 0) throw ConfigError("npu.vector_width must be >= 1");
  if (rob_entries == 0) throw ConfigError("npu.rob_entries must be >= 1");
  if (element_bits != 8 && element_bits != 16 && element_bits != 32)
    throw ConfigError("npu.element_bits must be 8, 16 or 32");
  if (compute_cycles_per_group == 0) throw ConfigError("npu.compute_cycles_per_group must be >= 1");
}

SparseOpResult sparse_unit_execute(SparseUnitState& su, SparseOp kind, const std::vector<std::uint64_t>& operands,
                                   Cycle now, std::uint32_t latency, std::uint32_t tile_width) {
  SparseOpResult r;
  const Cycle start = std::max(now, su.busy_until);
  r.done_cycle = start + latency;
  if (latency > 0) {
    if (!su.busy.empty() && su.busy.back().end == start)
      su.busy.back().end = r.done_cycle;
    else
      su.busy.push_back({start, r.done_cycle});
  }
  su.busy_until = r.done_cycle;
  switch (kind) {
    case SparseOp::Align:
    case SparseOp::Skip:
      r.indices = operands;
      r.tiles = operands.empty() ? 0 : 1;
      break;
    case SparseOp::Tile: {
      if (tile_width == 0) throw ConfigError("tile width must be >= 1");
      r.indices = operands;
      r.tiles = ceil_div(operands.size(), tile_width);
      r.padded_lanes = r.tiles * tile_width - operands.size();
      break;
    }
  }
  if (!operands.empty()) su.idx_count = static_cast<std::uint32_t>(operands.size());
  return r;
}

std::vector<Interval> idle_windows(const std::vector<Interval>& busy, Cycle total) {
  std::vector<Interval> out;
  Cycle cur = 0;
  for (const auto& b : busy) {
    const Cycle s = std::min(b.start, total);
    if (s > cur) out.push_back({cur, s});
    cur = std::max(cur, std::min(b.end, total));
  }
  if (cur < total) out.push_back({cur, total});
  return out;
}

Cycle idle_cycles_in(const std::vector<Interval>& busy, Cycle from, Cycle to) {
  if (to <= from) return 0;
  Cycle busy_len = 0;
  // Busy intervals are appended in time order; only the tail can overlap a recent window.
  for (auto it = busy.rbegin(); it != busy.rend() && it->end > from; ++it) {
    const Cycle s = std::max(it->start, from), e = std::min(it->end, to);
    if (e > s) busy_len += e - s;
  }
  return (to - from) - std::min(busy_len, to - from);
}

namespace {

struct LoadOutcome {
  Cycle done = 0;
  bool any_miss = false;
  std::uint32_t missed_lanes = 0;
  HitLevel worst = HitLevel::NSB;
};

class Driver {
 public:
  Driver(MemoryHierarchy& mem, Prefetcher* pf, const NpuConfig& cfg, const SparseProgram& prog)
      : mem_(mem), pf_(pf), cfg_(cfg), prog_(prog) {
    rep_.miss_histogram.assign(cfg.vector_width + 1, 0);
  }

  void snoop_branch(const TraceEvent& e, Cycle t) {
    if (pf_) pf_->snoop({SnoopSource::CpuBranch, e.pc, t, &e, {}});
  }

  /// Runs the Align op for an indirect load that follows an index load; returns its done cycle.
  Cycle align(const TraceEvent& e, Cycle t) {
    auto r = sparse_unit_execute(su_, SparseOp::Align, pending_values_, t, cfg_.sparse_unit_latency,
                                 cfg_.vector_width);
    su_.idx_addr = pending_idx_addr_;
    su_.stride = prog_.shift;
    if (!pending_values_.empty() && !e.addresses.empty()) {
      const Addr off = Addr{pending_values_[0]} << prog_.shift;
      if (e.addresses[0] >= off) su_.ss_start = e.addresses[0] - off;
    }
    pending_ = false;
    if (pf_) {
      SnoopEvent s;
      s.source = SnoopSource::SparseUnitRegs;
      s.pc = e.pc;
      s.cycle = r.done_cycle;
      s.regs.ss_start = su_.ss_start;
      s.regs.shift = prog_.shift;
      s.regs.vector_bytes = prog_.vector_bytes;
      s.regs.idx_base = prog_.idx_base;
      s.regs.idx_bytes = prog_.idx_bytes;
      s.regs.idx_total = prog_.idx_total;
      s.regs.idx_addr = su_.idx_addr;
      s.regs.idx_count = static_cast<std::uint32_t>(pending_values_.size());
      s.regs.has_rowptr = prog_.has_rowptr;
      s.regs.rowptr_base = prog_.rowptr_base;
      s.regs.rows = prog_.rows;
      s.regs.row = su_.row;
      s.regs.window_lo = su_.window_lo;
      s.regs.window_hi = su_.window_hi;
      pf_->snoop(s);
    }
    return r.done_cycle;
  }

  bool needs_align(const TraceEvent& e) const { return e.is_indirect && pending_; }

  LoadOutcome load(const TraceEvent& e, Cycle t) {
    if (pf_) pf_->snoop({SnoopSource::NpuLoad, e.pc, t, &e, {}});
    LoadOutcome o;
    o.done = t + mem_.first_level_latency();
    lines_.clear();
    for (Addr a : e.addresses) {
      const Addr line = mem_.line_of(a);
      auto it = std::find_if(lines_.begin(), lines_.end(), [&](const auto& p) { return p.first == line; });
      AccessResult r;
      if (it == lines_.end()) {
        MemRequest q;
        q.address = a;
        q.size_bytes = 1;
        q.issue_cycle = t;
        r = mem_.access(q);
        lines_.emplace_back(line, r);
      } else {
        r = it->second;
      }
      const bool miss = r.hit_level == HitLevel::DRAM;
      o.any_miss = o.any_miss || miss;
      o.missed_lanes += miss ? 1 : 0;
      o.done = std::max(o.done, r.served_at);
      o.worst = std::max(o.worst, r.hit_level);
    }
    if (pf_) pf_->on_demand_result(e, o.any_miss, t);

    const std::uint32_t eb = cfg_.element_bits / 8;
    rep_.load_batches += 1;
    rep_.lanes += e.lanes;
    rep_.missed_lanes += o.missed_lanes;
    rep_.load_bytes += std::uint64_t{e.lanes} * eb;
    if (o.any_miss) {
      rep_.missed_batches += 1;
      rep_.lanes_in_missed_batches += e.lanes;
    }
    if (o.worst == HitLevel::L2) ++rep_.worst_l2_batches;
    if (o.worst == HitLevel::DRAM) ++rep_.worst_dram_batches;
    rep_.miss_histogram[std::min<std::size_t>(o.missed_lanes, cfg_.vector_width)] += 1;
    rep_.io_cycles += o.done - t;
    if (cfg_.record_batches)
      rep_.batches.push_back({rep_.load_batches - 1, e.addresses, o.done,
                              o.done - (t + mem_.first_level_latency()), o.any_miss});

    if (e.region == Region::RowPtr && e.values.size() >= 2) {
      su_.row = rowptr_loads_++;
      su_.window_lo = e.values[0];
      su_.window_hi = e.values[1];
    }
    if (e.region == Region::ColIdx && !e.values.empty()) {
      pending_ = true;
      pending_values_ = e.values;
      pending_idx_addr_ = e.addresses.front();
    }
    return o;
  }

  void run_prefetcher(Cycle t, Cycle until) {
    if (!pf_) return;
    StepContext ctx;
    ctx.now = t;
    ctx.load_in_flight = true;
    ctx.idle_cycles = idle_cycles_in(su_.busy, t, std::max(until, t + 1));
    for (const auto& q : pf_->step(ctx, mem_)) mem_.access(q);
  }

  void store(const TraceEvent& e, Cycle t) {
    lines_.clear();
    for (Addr a : e.addresses) {
      const Addr line = mem_.line_of(a);
      if (std::any_of(lines_.begin(), lines_.end(), [&](const auto& p) { return p.first == line; })) continue;
      MemRequest q;
      q.address = a;
      q.kind = ReqKind::DemandStore;
      q.issue_cycle = t;
      lines_.emplace_back(line, mem_.access(q));
    }
    rep_.store_bytes += std::uint64_t{e.lanes} * (cfg_.element_bits / 8);
    rep_.io_cycles += 1;
  }

  Cycle compute_cost(const TraceEvent& e) const {
    return ceil_div(std::max<std::uint32_t>(e.lanes, 1), cfg_.vector_width) * cfg_.compute_cycles_per_group;
  }

  SimReport finish(Cycle total) {
    rep_.total_cycles = total;
    rep_.overall_miss_rate = rep_.lanes ? static_cast<double>(rep_.missed_lanes) / rep_.lanes : 0.0;
    rep_.per_batch_miss_rate = rep_.lanes ? static_cast<double>(rep_.lanes_in_missed_batches) / rep_.lanes : 0.0;
    rep_.ledger = mem_.bandwidth_ledger();
    rep_.demand = mem_.demand_stats();
    rep_.prefetch = mem_.prefetch_accounting();
    rep_.off_chip_bytes =
        rep_.ledger.offchip.demand_bytes + rep_.ledger.offchip.prefetch_bytes + rep_.ledger.offchip.writeback_bytes;
    rep_.nvr_evaluations = pf_ ? pf_->evaluations() : 0;
    rep_.sparse_busy = su_.busy;
    return std::move(rep_);
  }

  SimReport& report() { return rep_; }
  const MemoryHierarchy& mem() const { return mem_; }

 private:
  MemoryHierarchy& mem_;
  Prefetcher* pf_;
  const NpuConfig& cfg_;
  const SparseProgram& prog_;
  SparseUnitState su_;
  SimReport rep_;
  bool pending_ = false;
  std::vector<std::uint64_t> pending_values_;
  Addr pending_idx_addr_ = 0;
  std::uint64_t rowptr_loads_ = 0;
  std::vector<std::pair<Addr, AccessResult>> lines_;
};

void check_event(const TraceEvent& e) {
  const bool mem = e.kind == EventKind::VectorLoad || e.kind == EventKind::VectorStore;
  if (mem && (e.lanes == 0 || e.addresses.size() != e.lanes))
    throw ConfigError("malformed trace event: lane count does not match addresses");
  if (!mem && !e.addresses.empty()) throw ConfigError("malformed trace event: addresses on a non-memory event");
}

SimReport run_in_order(const Trace& trace, Driver& d) {
  Cycle t = 0, base = 0, stall = 0;
  const Cycle first = d.mem().first_level_latency();
  for (const auto& e : trace) {
    check_event(e);
    switch (e.kind) {
      case EventKind::Branch:
        d.snoop_branch(e, t);
        break;
      case EventKind::VectorLoad: {
        if (d.needs_align(e)) {
          const Cycle done = d.align(e, t);
          base += done - t;
          t = done;
        }
        const auto o = d.load(e, t);
        d.run_prefetcher(t, o.done);
        base += first;
        stall += o.done - (t + first);
        t = o.done;
        break;
      }
      case EventKind::VectorStore:
        d.store(e, t);
        base += 1;
        t += 1;
        break;
      case EventKind::Compute: {
        const Cycle c = d.compute_cost(e);
        d.report().compute_ops += e.lanes;
        base += c;
        t += c;
        break;
      }
    }
  }
  auto& r = d.report();
  r.base_exec_cycles = base;
  r.miss_stall_cycles = stall;
  return d.finish(t);
}

SimReport run_ideal_ooo(const Trace& trace, Driver& d, std::uint32_t rob) {
  const Cycle first = d.mem().first_level_latency();
  Cycle front = 0;          // in-order issue point
  Cycle compute_free = 0;   // MAC array free
  Cycle batch_ready = 0;    // slowest load of the batch being assembled
  Cycle index_ready = 0;
  Cycle last_done = 0;
  Cycle base = 0, stall = 0;
  std::vector<Cycle> batch_done;  // compute completion per batch
  for (const auto& e : trace) {
    check_event(e);
    switch (e.kind) {
      case EventKind::Branch:
        d.snoop_branch(e, front);
        break;
      case EventKind::VectorLoad: {
        Cycle t = front;
        if (batch_done.size() >= rob) t = std::max(t, batch_done[batch_done.size() - rob]);
        if (d.needs_align(e)) t = d.align(e, std::max(t, index_ready));
        const auto o = d.load(e, t);
        d.run_prefetcher(t, o.done);
        base += first;
        batch_ready = std::max(batch_ready, o.done);
        if (e.region == Region::ColIdx) index_ready = o.done;
        last_done = std::max(last_done, o.done);
        front = t + 1;
        break;
      }
      case EventKind::VectorStore: {
        const Cycle t = std::max(front, compute_free);
        d.store(e, t);
        base += 1;
        last_done = std::max(last_done, t + 1);
        break;
      }
      case EventKind::Compute: {
        const Cycle c = d.compute_cost(e);
        d.report().compute_ops += e.lanes;
        const Cycle earliest = std::max(compute_free, front);
        const Cycle start = std::max(earliest, batch_ready);
        stall += start - earliest;
        base += c;
        compute_free = start + c;
        batch_done.push_back(compute_free);
        batch_ready = 0;
        break;
      }
    }
  }
  auto& r = d.report();
  r.base_exec_cycles = base;
  r.miss_stall_cycles = stall;
  return d.finish(std::max({front, compute_free, last_done}));
}

}  // namespace

SimReport execute(const Trace& trace, MemoryHierarchy& mem, Prefetcher* prefetcher, const NpuConfig& cfg,
                  const SparseProgram& program) {
  cfg.validate();
  Driver d(mem, prefetcher, cfg, program);
  return cfg.exec_mode == ExecMode::InOrder ? run_in_order(trace, d) : run_ideal_ooo(trace, d, cfg.rob_entries);
}

}  // namespace nvrsim
