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

#include "nvrsim/memory.hpp"

#include <algorithm>

namespace nvrsim {

std::string_view to_string(HitLevel h) {
  switch (h) {
    case HitLevel::NSB: return "NSB";
    case HitLevel::L1: return "L1";
    case HitLevel::L2: return "L2";
    case HitLevel::DRAM: return "DRAM";
  }
  return "?";
}

void CacheConfig::validate(const std::string& name) const {
  if (ways == 0) throw ConfigError(name + ": ways must be >= 1");
  if (line_bytes == 0 || !is_pow2(line_bytes)) throw ConfigError(name + ": line_bytes must be a power of two");
  if (mshr_entries == 0) throw ConfigError(name + ": mshr_entries must be >= 1");
  if (capacity_bytes == 0 || capacity_bytes % (std::uint64_t{line_bytes} * ways) != 0)
    throw ConfigError(name + ": capacity must be a positive multiple of line_bytes x ways");
}

void DramConfig::validate() const {
  if (latency_cycles == 0 || bandwidth_bytes_per_cycle == 0)
    throw ConfigError("dram: latency and bandwidth must be > 0");
}

HierarchyConfig HierarchyConfig::defaults() {
  HierarchyConfig c;
  c.l1 = {32 * 1024, 64, 4, 1, 32};
  c.l2 = {256 * 1024, 64, 8, 10, 32};
  c.nsb.capacity_bytes = 16 * 1024;
  c.nsb.line_bytes = 64;
  c.nsb.ways = 16;
  c.nsb.hit_latency_cycles = 1;
  c.nsb.mshr_entries = 32;
  c.nsb.enabled = false;
  c.dram = {100, 64};
  return c;
}

void HierarchyConfig::validate() const {
  l1.validate("l1");
  l2.validate("l2");
  if (nsb.enabled) nsb.validate("nsb");
  dram.validate();
  if (l1.line_bytes != l2.line_bytes || (nsb.enabled && nsb.line_bytes != l2.line_bytes))
    throw ConfigError("all levels must share one line size");
}

// ---------------------------------------------------------------------------

Cache::Cache(const CacheConfig& cfg) : cfg_(cfg), sets_(cfg.sets()), lines_(sets_ * cfg.ways) {}

Cache::Line* Cache::find(Addr line) {
  if (sets_ == 0) return nullptr;
  Line* set = &lines_[(line % sets_) * cfg_.ways];
  for (std::uint32_t w = 0; w < cfg_.ways; ++w)
    if (set[w].valid && set[w].line == line) return &set[w];
  return nullptr;
}

const Cache::Line* Cache::find(Addr line) const { return const_cast<Cache*>(this)->find(line); }

std::optional<Cache::Line> Cache::insert(Addr line, Cycle ready, bool dirty) {
  Line* set = &lines_[(line % sets_) * cfg_.ways];
  Line* victim = &set[0];
  for (std::uint32_t w = 0; w < cfg_.ways; ++w) {
    if (!set[w].valid) {
      victim = &set[w];
      break;
    }
    if (set[w].lru < victim->lru) victim = &set[w];
  }
  std::optional<Line> out;
  if (victim->valid) out = *victim;
  *victim = Line{line, true, dirty, ready, ++stamp_};
  return out;
}

// ---------------------------------------------------------------------------

void MshrFile::retire(Cycle now) {
  std::erase_if(entries_, [now](const Entry& e) { return e.ready <= now; });
}

MshrFile::Entry* MshrFile::find(Addr line) {
  for (auto& e : entries_)
    if (e.line == line) return &e;
  return nullptr;
}

Cycle MshrFile::earliest_ready() const {
  Cycle best = entries_.front().ready;
  for (const auto& e : entries_) best = std::min(best, e.ready);
  return best;
}

void MshrFile::allocate(Addr line, Cycle ready, bool is_prefetch) {
  entries_.push_back({line, ready, is_prefetch, 1});
}

std::size_t MshrFile::outstanding(Cycle now) const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [now](const Entry& e) { return e.ready > now; }));
}

// ---------------------------------------------------------------------------

MemoryHierarchy::MemoryHierarchy(const HierarchyConfig& cfg)
    : cfg_((cfg.validate(), cfg)),
      nsb_(cfg.nsb.enabled ? Cache(cfg.nsb) : Cache()),
      l1_(cfg.l1),
      l2_(cfg.l2),
      mshr_(cfg.l2.mshr_entries),
      nsb_mshr_(cfg.nsb.enabled ? cfg.nsb.mshr_entries : 1) {}

std::uint32_t MemoryHierarchy::first_level_latency() const {
  return cfg_.nsb.enabled ? std::min(cfg_.nsb.hit_latency_cycles, cfg_.l1.hit_latency_cycles)
                          : cfg_.l1.hit_latency_cycles;
}

bool MemoryHierarchy::anywhere(Addr line) const {
  return l2_.find(line) || l1_.find(line) || (nsb_.enabled() && nsb_.find(line));
}

bool MemoryHierarchy::resident(Addr addr) const { return anywhere(line_of(addr)); }

bool MemoryHierarchy::probe_ready(Addr addr, Cycle now) const {
  const Addr line = line_of(addr);
  for (const Cache* c : {&l2_, &l1_, &nsb_}) {
    if (!c->enabled()) continue;
    if (const auto* l = c->find(line); l && l->ready <= now) return true;
  }
  return false;
}

std::uint32_t MemoryHierarchy::mshr_free(Cycle now) const {
  const auto busy = mshr_.outstanding(now);
  return busy >= mshr_.capacity() ? 0u : static_cast<std::uint32_t>(mshr_.capacity() - busy);
}

void MemoryHierarchy::note_eviction(const Cache::Line& victim, Cache& from) {
  if (victim.dirty) {
    if (&from == &l1_) {
      ledger_.npu_l2.writeback_bytes += line_bytes();
      if (auto* l = l2_.find(victim.line)) {
        l->dirty = true;
      } else if (auto v = l2_.insert(victim.line, victim.ready, true)) {
        note_eviction(*v, l2_);
      }
    } else if (&from == &l2_) {
      ledger_.offchip.writeback_bytes += line_bytes();
    }
  }
  if (pf_lines_.count(victim.line) && !anywhere(victim.line)) pf_lines_.erase(victim.line);
}

void MemoryHierarchy::fill(Cache& c, Addr line, Cycle ready, bool dirty) {
  if (!c.enabled()) return;
  if (auto* l = c.find(line)) {
    l->ready = std::min(l->ready, ready);
    l->dirty = l->dirty || dirty;
    c.touch(*l);
    return;
  }
  if (auto v = c.insert(line, ready, dirty)) note_eviction(*v, c);
}

void MemoryHierarchy::on_demand_touch(Addr line, Cycle ready, Cycle t) {
  auto it = pf_lines_.find(line);
  if (it == pf_lines_.end()) return;
  ++pf_.useful;
  if (ready > t) ++pf_.late;
  pf_lines_.erase(it);
}

Cycle MemoryHierarchy::dram_fetch(Addr line, Cycle t, bool is_prefetch, bool& stalled_out) {
  stalled_out = false;
  mshr_.retire(t);
  if (mshr_.full()) {
    stalled_out = true;
    const Cycle free_at = mshr_.earliest_ready();
    demand_.mshr_stall_cycles += free_at - t;
    t = free_at;
    mshr_.retire(t);
  }
  const Cycle xfer = ceil_div(line_bytes(), cfg_.dram.bandwidth_bytes_per_cycle);
  const Cycle start = std::max(t, dram_free_);
  dram_free_ = start + xfer;
  const Cycle done = start + cfg_.dram.latency_cycles;
  mshr_.allocate(line, done, is_prefetch);
  ++ledger_.dram_reads;
  (is_prefetch ? ledger_.offchip.prefetch_bytes : ledger_.offchip.demand_bytes) += line_bytes();
  return done;
}

AccessResult MemoryHierarchy::demand_load(Addr line, Cycle t0) {
  ++demand_.loads;
  Cycle t = t0;
  const bool nsb_on = nsb_.enabled();
  auto done = [&](Cache::Line& l, Cache& c, HitLevel level) {
    c.touch(l);
    on_demand_touch(line, l.ready, t);
    AccessResult r;
    r.served_at = std::max(t, l.ready);
    r.coalesced = l.ready > t;
    r.hit_level = r.coalesced ? HitLevel::DRAM : level;
    return r;
  };
  auto tally = [&](const AccessResult& r) {
    switch (r.hit_level) {
      case HitLevel::NSB: ++demand_.nsb_hits; break;
      case HitLevel::L1: ++demand_.l1_hits; break;
      case HitLevel::L2: ++demand_.l2_hits; break;
      case HitLevel::DRAM: ++demand_.misses; break;
    }
    if (r.coalesced) ++demand_.coalesced;
    return r;
  };

  // The NSB sits beside L1 and is probed in the same cycle; an NSB miss adds nothing to an L1 hit.
  if (nsb_on) {
    t = t0 + cfg_.nsb.hit_latency_cycles;
    if (auto* l = nsb_.find(line)) return tally(done(*l, nsb_, HitLevel::NSB));
  }
  t = t0 + std::max(cfg_.l1.hit_latency_cycles, nsb_on ? cfg_.nsb.hit_latency_cycles : 0u);
  if (auto* l = l1_.find(line)) {
    auto r = tally(done(*l, l1_, HitLevel::L1));
    if (nsb_on) fill(nsb_, line, r.served_at, false);
    return r;
  }
  ledger_.npu_l2.demand_bytes += line_bytes();
  t += cfg_.l2.hit_latency_cycles;
  if (auto* l = l2_.find(line)) {
    auto r = tally(done(*l, l2_, HitLevel::L2));
    if (auto* e = mshr_.find(line); e && r.coalesced) ++e->waiters;
    fill(l1_, line, r.served_at, false);
    if (nsb_on) fill(nsb_, line, r.served_at, false);
    return r;
  }
  AccessResult r;
  r.hit_level = HitLevel::DRAM;
  mshr_.retire(t);
  if (auto* e = mshr_.find(line)) {
    // Line dropped out of L2 while its fill is still outstanding.
    ++e->waiters;
    r.served_at = e->ready;
    r.coalesced = true;
  } else {
    bool stalled = false;
    r.served_at = dram_fetch(line, t, false, stalled);
  }
  on_demand_touch(line, r.served_at, t);
  fill(l2_, line, r.served_at, false);
  fill(l1_, line, r.served_at, false);
  if (nsb_on) fill(nsb_, line, r.served_at, false);
  return tally(r);
}

AccessResult MemoryHierarchy::demand_store(Addr line, Cycle t) {
  ++demand_.stores;
  t += cfg_.l1.hit_latency_cycles;
  // Write-allocate without fetch: stores write whole vectors into the NPU-side L1.
  fill(l1_, line, t, true);
  AccessResult r;
  r.served_at = t;
  r.hit_level = HitLevel::L1;
  return r;
}

AccessResult MemoryHierarchy::prefetch(Addr line, const MemRequest& req) {
  AccessResult r;
  r.hit_level = HitLevel::DRAM;
  const bool to_l1 = req.target == FillTarget::L1;
  const bool to_nsb = nsb_.enabled() && req.origin == Origin::NVR;
  const bool need_l1 = to_l1 && !l1_.find(line);
  const bool need_nsb = to_nsb && !nsb_.find(line);
  auto* in_l2 = l2_.find(line);
  if (in_l2 && !need_l1 && !need_nsb) {
    // A prefetch lookup that hits still refreshes recency.
    l2_.touch(*in_l2);
    ++pf_.redundant;
    r.dropped = true;
    return r;
  }
  const Cycle t = req.issue_cycle;
  if (in_l2) {
    // On-chip move from L2 into the NPU-side target.
    r.served_at = std::max(t + cfg_.l2.hit_latency_cycles, in_l2->ready);
    r.hit_level = HitLevel::L2;
    ledger_.npu_l2.prefetch_bytes += line_bytes();
  } else {
    mshr_.retire(t);
    if (auto* e = mshr_.find(line)) {
      r.served_at = e->ready;
      r.coalesced = true;
      fill(l2_, line, r.served_at, false);
    } else {
      if (mshr_.full()) {
        ++pf_.dropped;
        r.dropped = true;
        return r;
      }
      bool stalled = false;
      r.served_at = dram_fetch(line, t, true, stalled);
      fill(l2_, line, r.served_at, false);
    }
    if (need_l1 || need_nsb) ledger_.npu_l2.prefetch_bytes += line_bytes();
  }
  if (need_l1) fill(l1_, line, r.served_at, false);
  if (need_nsb) fill(nsb_, line, r.served_at, false);
  ++pf_.issued;
  pf_lines_.insert(line);
  return r;
}

AccessResult MemoryHierarchy::access_line(Addr line, const MemRequest& req) {
  switch (req.kind) {
    case ReqKind::DemandLoad: return demand_load(line, req.issue_cycle);
    case ReqKind::DemandStore: return demand_store(line, req.issue_cycle);
    case ReqKind::Prefetch: return prefetch(line, req);
  }
  return {};
}

AccessResult MemoryHierarchy::access(const MemRequest& req) {
  if (req.address > kAddrMask) throw ConfigError("request address outside the 48-bit space");
  const Addr first = line_of(req.address);
  const Addr last = line_of(req.address + std::max<std::uint32_t>(req.size_bytes, 1) - 1);
  AccessResult agg;
  bool any = false;
  for (Addr l = first; l <= last; ++l) {
    auto r = access_line(l, req);
    if (!any) {
      agg = r;
      any = true;
      continue;
    }
    agg.dropped = agg.dropped && r.dropped;
    if (r.served_at >= agg.served_at) {
      agg.served_at = r.served_at;
      agg.coalesced = r.coalesced;
    }
    agg.hit_level = std::max(agg.hit_level, r.hit_level);
  }
  return agg;
}

}  // namespace nvrsim
