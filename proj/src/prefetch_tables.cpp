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

#include <algorithm>
#include <set>

#include "nvrsim/prefetch.hpp"

namespace nvrsim {

void PrefetcherConfig::validate() const {
  static const std::set<std::string> kinds{"none", "zero", "stream", "imp", "dvr", "nvr"};
  if (!kinds.count(kind)) throw ConfigError("prefetcher.kind: unknown engine '" + kind + "'");
  if (degree == 0) throw ConfigError("prefetcher.degree must be >= 1");
  if (confidence_threshold == 0 || confidence_threshold > 3)
    throw ConfigError("prefetcher.confidence_threshold must be in [1,3]");
  if (table_entries == 0) throw ConfigError("prefetcher.table_entries must be >= 1");
  if (vector_width == 0) throw ConfigError("prefetcher.vector_width must be >= 1");
}

// --- RPT --------------------------------------------------------------------

RptEntry* RptTable::find(Addr pc) {
  for (auto& e : table_)
    if (e.valid && e.pc == pc) return &e;
  return nullptr;
}

RptEntry& RptTable::update(Addr pc, Addr addr) {
  RptEntry* e = find(pc);
  if (!e) {
    e = &*std::min_element(table_.begin(), table_.end(), [](const RptEntry& a, const RptEntry& b) {
      if (a.valid != b.valid) return !a.valid;
      return a.lru < b.lru;
    });
    const auto id = static_cast<std::uint32_t>(e - table_.data());
    *e = RptEntry{};
    e->pc = pc;
    e->prev_addr = addr;
    e->last_prefetch_addr = addr;
    e->entry_id = id;
    e->valid = true;
    e->lru = ++stamp_;
    return *e;
  }
  e->lru = ++stamp_;
  const auto delta = static_cast<std::int64_t>(addr - e->prev_addr);
  if (!e->has_stride) {
    e->stride = delta;
    e->has_stride = true;
    e->stride_confidence = 1;
  } else if (delta == e->stride) {
    e->stride_confidence = static_cast<std::uint8_t>(std::min(3, e->stride_confidence + 1));
  } else {
    if (e->stride_confidence > 0) --e->stride_confidence;
    if (e->stride_confidence == 0) {
      e->stride = delta;
      e->last_prefetch_addr = addr;
    }
  }
  e->prev_addr = addr;
  // The prefetch pointer never trails the demand stream.
  const bool behind = e->stride >= 0 ? e->last_prefetch_addr < addr : e->last_prefetch_addr > addr;
  if (behind) e->last_prefetch_addr = addr;
  return *e;
}

std::vector<Addr> RptTable::sd_predict(Addr pc, std::uint32_t count) {
  RptEntry* e = find(pc);
  if (!e || !confident(*e) || e->stride == 0) return {};
  std::vector<Addr> out(count);
  for (std::uint32_t i = 0; i < count; ++i)
    out[i] = e->last_prefetch_addr + static_cast<Addr>(e->stride * static_cast<std::int64_t>(i + 1));
  if (count) e->last_prefetch_addr = out.back();
  return out;
}

// --- IPT --------------------------------------------------------------------

IptEntry* IptTable::find(Addr pc) {
  for (auto& e : table_)
    if (e.valid && e.pc == pc) return &e;
  return nullptr;
}

IptEntry& IptTable::refresh(Addr pc, Addr ss_start, std::uint32_t stride, std::uint32_t vector_size) {
  IptEntry* e = find(pc);
  if (!e) {
    e = &table_[next_];
    *e = IptEntry{};
    e->entry_id = next_;
    next_ = (next_ + 1) % static_cast<std::uint32_t>(table_.size());
  }
  e->pc = pc;
  e->ss_offset = static_cast<std::uint32_t>(ss_start > e->ss_start ? ss_start - e->ss_start : 0) & 0x3ff;
  e->ss_start = ss_start;
  e->stride = stride;
  e->vector_size = vector_size;
  e->valid = true;
  return *e;
}

std::vector<Addr> IptTable::scd_predict(Addr pc, const std::vector<std::uint64_t>& w_values) {
  IptEntry* e = find(pc);
  if (!e) return {};
  std::vector<Addr> out;
  out.reserve(w_values.size());
  for (auto w : w_values) out.push_back(e->ss_start + (w << e->stride));
  if (!w_values.empty()) e->lpi = w_values.back();
  return out;
}

// --- SST --------------------------------------------------------------------

SstEntry* SstTable::find(Addr pc) {
  for (auto& e : table_)
    if (e.valid && e.pc == pc) return &e;
  return nullptr;
}

const SstEntry* SstTable::find_level(std::uint8_t level) const {
  for (const auto& e : table_)
    if (e.valid && e.level == level) return &e;
  return nullptr;
}

SstEntry& SstTable::slot(Addr pc) {
  if (auto* e = find(pc)) return *e;
  SstEntry& e = table_[next_];
  e = SstEntry{};
  e.pc = pc;
  e.valid = true;
  e.entry_id = next_;
  next_ = (next_ + 1) % static_cast<std::uint32_t>(table_.size());
  return e;
}

SstEntry& SstTable::observe_branch(Addr pc, std::uint8_t level, std::uint64_t iter, std::uint64_t bound) {
  const bool fresh = !find(pc);
  SstEntry& e = slot(pc);
  if (fresh) {
    e.loop_boundary = bound;
    e.boundary_confidence = 1;
    e.level = level;
    e.level_confidence = 1;
  } else {
    if (bound == e.loop_boundary) {
      e.boundary_confidence = static_cast<std::uint8_t>(std::min(15, e.boundary_confidence + 1));
    } else {
      // A bound that keeps changing is data dependent: switch to the sparse path.
      if (e.boundary_confidence <= 1) e.sparse_mode = true;
      e.loop_boundary = bound;
      e.boundary_confidence = 1;
    }
    if (level == e.level)
      e.level_confidence = static_cast<std::uint8_t>(std::min(3, e.level_confidence + 1));
    else
      e.level = level, e.level_confidence = 1;
    e.increment = static_cast<std::int64_t>(iter) - static_cast<std::int64_t>(e.iteration_counter);
  }
  e.iteration_counter = iter;
  return e;
}

void SstTable::observe_window(Addr pc, std::uint64_t lo, std::uint64_t hi) {
  SstEntry& e = slot(pc);
  e.window_lo = lo;
  e.window_hi = hi;
  e.has_window = true;
  e.sparse_mode = true;
}

BoundPrediction SstTable::lbd_bound(Addr pc) const {
  const SstEntry* e = const_cast<SstTable*>(this)->find(pc);
  if (!e) return {};
  if (e->sparse_mode && e->has_window) return {e->window_hi - e->window_lo, BoundMode::Sparse, true};
  if (!e->sparse_mode && e->boundary_confidence >= threshold_) return {e->loop_boundary, BoundMode::Static, true};
  return {e->loop_boundary, e->sparse_mode ? BoundMode::Sparse : BoundMode::Static, false};
}

std::uint64_t SstTable::clamp_run(Addr pc, std::uint64_t requested, std::uint32_t vector_width) const {
  const auto p = lbd_bound(pc);
  return std::min<std::uint64_t>(requested, p.bounded ? p.bound : vector_width);
}

// --- VMIG -------------------------------------------------------------------

std::vector<VmigBundle> Vmig::generate(const std::vector<Addr>& chain_lines, Cycle now) const {
  std::vector<VmigBundle> out;
  Addr prev = ~Addr{0};
  for (Addr l : chain_lines) {
    if (l == prev) continue;
    prev = l;
    if (out.empty() || out.back().lines.size() == lanes_) {
      out.push_back({now + 2 + out.size(), {}});
    }
    auto& b = out.back().lines;
    if (std::find(b.begin(), b.end(), l) == b.end()) b.push_back(l);
  }
  return out;
}

// --- Indirect pattern learner -------------------------------------------------

void IndirectPatternLearner::observe_index(Addr idx_addr, const std::vector<std::uint64_t>& values) {
  last_values_ = values;
  last_idx_addr_ = idx_addr;
  pending_ = !values.empty();
}

void IndirectPatternLearner::observe_indirect(const TraceEvent& e) {
  if (!pending_ || e.addresses.empty()) return;
  pending_ = false;
  const auto& a = e.addresses;
  bool contiguous = a.size() > 1;
  const auto step = a.size() > 1 ? a[1] - a[0] : 0;
  for (std::size_t l = 1; l < a.size() && contiguous; ++l) contiguous = a[l] - a[l - 1] == step && step > 0 && step <= 8;
  std::vector<std::pair<std::uint64_t, Addr>> fresh;
  if (contiguous) {
    lane_wise_ = false;
    span_ = static_cast<std::uint32_t>(a.back() - a.front() + step);
    fresh.emplace_back(last_values_[0], a[0]);
  } else {
    lane_wise_ = true;
    span_ = 1;
    for (std::size_t l = 0; l < std::min(a.size(), last_values_.size()); ++l) fresh.emplace_back(last_values_[l], a[l]);
  }
  if (scale_ > 0) {
    const bool ok = std::all_of(fresh.begin(), fresh.end(), [&](const auto& p) { return verify(p.first, p.second); });
    if (ok) {
      confidence_ = std::min(3u, confidence_ + 1);
      return;
    }
    scale_ = 0;
    confidence_ = 0;
    pairs_.clear();
  }
  pairs_.insert(pairs_.end(), fresh.begin(), fresh.end());
  if (pairs_.size() > 32) pairs_.erase(pairs_.begin(), pairs_.end() - 32);
  // Fit on two pairs with distinct indices, then require every stored pair to agree.
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    for (std::size_t j = i + 1; j < pairs_.size(); ++j) {
      const auto [v0, a0] = pairs_[i];
      const auto [v1, a1] = pairs_[j];
      if (v1 == v0) continue;
      const auto dv = static_cast<std::int64_t>(v1 - v0);
      const auto da = static_cast<std::int64_t>(a1 - a0);
      if (da % dv != 0 || da / dv <= 0) {
        pairs_.erase(pairs_.begin(), pairs_.begin() + static_cast<std::ptrdiff_t>(i + 1));
        return;
      }
      scale_ = da / dv;
      base_ = a0 - v0 * static_cast<Addr>(scale_);
      const bool all = std::all_of(pairs_.begin(), pairs_.end(), [&](const auto& p) { return verify(p.first, p.second); });
      if (!all) {
        scale_ = 0;
        pairs_.assign(fresh.begin(), fresh.end());
        return;
      }
      confidence_ = 1;
      return;
    }
  }
}

// --- Hardware overhead --------------------------------------------------------

OverheadReport hardware_overhead(std::uint32_t n) {
  if (n == 0) throw ConfigError("overhead: n must be >= 1");
  const std::uint64_t lg = is_pow2(n) ? log2_floor(n) : log2_floor(n) + 1;
  const std::uint64_t N = n;
  const bool ref = n == 16;
  OverheadReport r;
  auto add = [&](std::string c, std::uint64_t bits, std::string f, std::uint64_t table) {
    r.rows.push_back({std::move(c), bits, std::move(f), ref ? table : 0});
    r.total_bits += bits;
  };
  add("SD", 48 + N * (48 + 8 + lg + 48 + 2), "48 + n*(48 addr + 8 stride + log2n id + 48 last + 2 conf)", 1808);
  add("SCD", 48 + 2 * N * (48 + 1 + lg + 10 + 10 + 4),
      "48 + 2n*(48 ss_start + 1 valid + log2n id + 10 offset + 10 LPI + 4 vsize)", 2464);
  add("LBD", N * (48 + 16 + 16 + 16 + 1 + 2 + 4 + lg),
      "n*(48 pc + 16 iter + 16 incr + 16 bound + 1 mode + 2 level + 4 conf + log2n id)", 3424);
  add("VMIG", 256 + 4 + N * (48 + 64 + 64 + lg + 4), "260 + n*(48 pc + 64 VRF + 64 PIE + log2n id + 4 IRU)", 3204);
  add("Snooper", 48 + 64 + 48 + N * (48 + 10 + 10), "160 + n*(48 + 10 + 10)", 1248);
  r.total_kib = static_cast<double>(r.total_bits) / 8.0 / 1024.0;
  return r;
}

}  // namespace nvrsim
