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

// NVR: snooper-fed runahead over the sparse structure. The cursor walks the
// index array ahead of the demand stream, resolving each chain with the SCD
// formula, bounding rows with the LBD and bundling lines through the VMIG.

#include <algorithm>
#include <deque>

#include "nvrsim/prefetch.hpp"
#include "prefetch_util.hpp"

namespace nvrsim {

namespace {

class NvrPrefetcher final : public Prefetcher {
 public:
  NvrPrefetcher(const PrefetcherConfig& c, const MemoryImage& img)
      : cfg_(c),
        image_(img),
        rpt_(c.table_entries, c.confidence_threshold),
        ipt_(2 * c.table_entries),
        sst_(c.table_entries, c.confidence_threshold),
        vmig_(c.vector_width),
        lookahead_(c.lookahead_chains ? c.lookahead_chains : 8 * c.vector_width) {}

  std::string_view name() const override { return "nvr"; }
  std::uint64_t evaluations() const override { return evaluations_; }

  void snoop(const SnoopEvent& ev) override {
    switch (ev.source) {
      case SnoopSource::CpuBranch:
        if (ev.event) sst_.observe_branch(ev.pc, ev.event->loop_level, ev.event->loop_iter, ev.event->bound_observed);
        break;
      case SnoopSource::NpuLoad:
        if (ev.event && !ev.event->is_indirect && !ev.event->addresses.empty()) {
          track_position(*ev.event);
          train_stream(*ev.event);
        }
        break;
      case SnoopSource::SparseUnitRegs:
        on_regs(ev);
        break;
    }
  }

  std::vector<MemRequest> step(const StepContext& ctx, const MemoryHierarchy& mem) override {
    std::vector<MemRequest> out;
    if (!ctx.load_in_flight) return out;
    const std::uint32_t lb = mem.line_bytes();
    std::uint32_t free = mem.mshr_free(ctx.now);

    auto emit = [&](Addr line, Cycle when) {
      if (free == 0) {
        if (deferred_.size() < defer_cap()) deferred_.push_back(line);
        return;
      }
      if (filter_.seen(line)) return;
      if (!mem.resident(line * lb)) --free;
      out.push_back(line_request(line, lb, when, Origin::NVR, FillTarget::L2));
    };

    // Requests held back by MSHR back-pressure go first.
    while (!deferred_.empty() && free > 0) {
      const Addr l = deferred_.front();
      deferred_.pop_front();
      emit(l, ctx.now);
    }

    to_lines(stream_addrs_, lb);
    for (Addr l : stream_addrs_) emit(l, ctx.now);
    stream_addrs_.clear();

    std::uint64_t budget = ctx.idle_cycles * cfg_.vector_width;
    std::vector<Addr> chain_lines;
    std::vector<Addr> index_lines;
    // The cursor stalls rather than generate lines it has nowhere to hold.
    const std::size_t room = free + (defer_cap() - std::min(defer_cap(), deferred_.size()));
    run_cursor(ctx.now, mem, budget, room, chain_lines, index_lines);
    for (Addr l : index_lines) emit(l, ctx.now);
    for (const auto& b : vmig_.generate(chain_lines, ctx.now))
      for (Addr l : b.lines) emit(l, b.cycle);
    return out;
  }

 private:
  struct Cursor {
    bool valid = false;
    std::uint64_t row = 0;
    std::uint64_t lo = 0, hi = 0;
    std::uint64_t tile = 0;
    Addr ss_start = 0;
    std::uint64_t pos = 0;
    std::uint64_t seq = 0;
  };

  Addr idx_end() const {
    return regs_.idx_total ? regs_.idx_base + regs_.idx_total * regs_.idx_bytes : ~Addr{0};
  }
  Addr rowptr_end() const {
    return regs_.has_rowptr ? regs_.rowptr_base + (regs_.rows + 1) * regs_.idx_bytes : ~Addr{0};
  }
  bool in_index(Addr a) const { return have_regs_ && regs_.idx_total && a >= regs_.idx_base && a < idx_end(); }
  bool in_rowptr(Addr a) const { return have_regs_ && regs_.has_rowptr && a >= regs_.rowptr_base && a < rowptr_end(); }

  /// Index position of the latest index vector and the outer row, from the loads themselves.
  void track_position(const TraceEvent& e) {
    const Addr a0 = e.addresses.front();
    if (in_index(a0)) {
      idx_pos_ = (a0 - regs_.idx_base) / regs_.idx_bytes;
      idx_iter_ = e.loop_iter;
      idx_lanes_ = e.addresses.size();
      have_idx_pos_ = true;
    } else if (in_rowptr(a0)) {
      outer_row_ = (a0 - regs_.rowptr_base) / regs_.idx_bytes;
    }
  }

  /// End of the structure a stream walks: the index or rowptr array, or a value array co-indexed with the index array.
  Addr stream_limit(const TraceEvent& e) const {
    const Addr a0 = e.addresses.front();
    if (in_index(a0)) return idx_end();
    if (in_rowptr(a0)) return rowptr_end();
    const auto& a = e.addresses;
    if (e.loop_level != 0 || !have_idx_pos_ || idx_iter_ != e.loop_iter || a.size() != idx_lanes_ || a.size() < 2)
      return ~Addr{0};
    const Addr elem = a[1] - a[0];
    if (a[1] <= a[0] || a.back() - a.front() != elem * (a.size() - 1)) return ~Addr{0};
    return a0 + (regs_.idx_total - idx_pos_) * elem;
  }

  void train_stream(const TraceEvent& e) {
    if (e.kind != EventKind::VectorLoad) return;
    const Addr a0 = e.addresses.front();
    auto& ent = rpt_.update(e.pc, a0);
    if (!rpt_.confident(ent) || ent.stride == 0) return;
    std::uint64_t depth = lookahead_ / cfg_.vector_width;
    // Outer-loop streams (MoE weights) are clamped to the learned static bound.
    if (e.loop_level > 0) {
      if (const SstEntry* lvl = sst_.find_level(e.loop_level)) {
        const auto p = sst_.lbd_bound(lvl->pc);
        if (p.bounded && p.mode == BoundMode::Static) {
          depth = std::min<std::uint64_t>(depth, std::max<std::uint64_t>(p.bound, 1));
          // In the last outer row the loop end is also the end of the structure.
          if (regs_.has_rowptr && outer_row_ + 1 >= regs_.rows)
            depth = std::min<std::uint64_t>(depth, p.bound > e.loop_iter + 1 ? p.bound - e.loop_iter - 1 : 0);
        }
      }
    }
    const Addr limit = stream_limit(e);
    const auto ahead = static_cast<std::int64_t>(ent.last_prefetch_addr - a0) / ent.stride;
    if (ahead >= static_cast<std::int64_t>(depth)) return;
    const auto count = static_cast<std::uint32_t>(depth - std::max<std::int64_t>(ahead, 0));
    for (Addr p : rpt_.sd_predict(e.pc, count)) {
      const Addr shift = p - a0;
      for (Addr a : e.addresses)
        if (a + shift < limit) stream_addrs_.push_back(a + shift);
    }
  }

  void on_regs(const SnoopEvent& ev) {
    const SparseRegs& r = ev.regs;
    regs_ = r;
    have_regs_ = true;
    ipt_.refresh(ev.pc, r.ss_start, r.shift, r.vector_bytes);
    if (r.has_rowptr) sst_.observe_window(ev.pc, r.window_lo, r.window_hi);
    chain_pc_ = ev.pc;

    // Tile loop: ss_start moving within one row.
    if (r.row != tile_row_ || !tile_seen_) {
      tile_row_ = r.row;
      tile_seen_ = true;
      tile_idx_ = 0;
    } else if (r.ss_start != last_ss_) {
      const auto inc = static_cast<std::int64_t>(r.ss_start - last_ss_);
      ++tile_idx_;
      // A new tile shape means the cursor may have walked rows with the wrong one.
      if (inc != tile_inc_ || tile_idx_ + 1 > tiles_per_row_) cursor_.valid = false;
      tile_inc_ = inc;
      tiles_per_row_ = std::max(tiles_per_row_, tile_idx_ + 1);
    }
    last_ss_ = r.ss_start;

    chains_done_ += r.idx_count;
    if (!cursor_.valid || cursor_.seq < chains_done_) {
      cursor_.valid = true;
      cursor_.row = r.row;
      cursor_.lo = r.window_lo;
      cursor_.hi = r.window_hi;
      cursor_.tile = tile_idx_;
      cursor_.ss_start = r.ss_start;
      cursor_.pos = (r.idx_addr - r.idx_base) / r.idx_bytes + r.idx_count;
      cursor_.seq = chains_done_;
    }
  }

  /// Moves the cursor past the end of its window. False if it must wait or the structure ended.
  bool next_window(Cycle now, const MemoryHierarchy& mem, std::vector<Addr>& index_lines) {
    const std::uint32_t lb = mem.line_bytes();
    if (cursor_.tile + 1 < tiles_per_row_) {
      ++cursor_.tile;
      cursor_.ss_start += static_cast<Addr>(tile_inc_);
      cursor_.pos = cursor_.lo;
      return true;
    }
    const std::uint64_t r = cursor_.row + 1;
    if (r >= regs_.rows) {
      cursor_.valid = false;
      return false;
    }
    const Addr rp = regs_.rowptr_base + (r + 1) * regs_.idx_bytes;
    if (!mem.probe_ready(rp, now)) {
      index_lines.push_back(rp / lb);
      return false;
    }
    if ((rp / lb + 1) * lb < rowptr_end()) index_lines.push_back(rp / lb + 1);
    const auto hi = image_.read(rp);
    if (!hi) {
      cursor_.valid = false;
      return false;
    }
    cursor_.ss_start -= static_cast<Addr>(tile_inc_ * static_cast<std::int64_t>(cursor_.tile));
    cursor_.tile = 0;
    cursor_.row = r;
    cursor_.lo = cursor_.hi;
    cursor_.hi = *hi;
    cursor_.pos = cursor_.lo;
    return true;
  }

  std::size_t defer_cap() const { return 8 * cfg_.vector_width; }

  void run_cursor(Cycle now, const MemoryHierarchy& mem, std::uint64_t budget, std::size_t room,
                  std::vector<Addr>& chain_lines, std::vector<Addr>& index_lines) {
    if (!have_regs_ || !cursor_.valid) return;
    const std::uint32_t lb = mem.line_bytes();
    const auto* ipt = ipt_.find(chain_pc_);
    if (!ipt) return;
    const bool sparse = regs_.has_rowptr;
    const auto bound = sst_.lbd_bound(chain_pc_);
    bool static_confident = false;
    if (!sparse)
      if (const SstEntry* inner = sst_.find_level(0)) static_confident = sst_.lbd_bound(inner->pc).bounded;
    const bool overfetch = cfg_.nvr_fuzzy_overfetch && !(sparse ? bound.bounded : static_confident);
    Addr last_idx_line = ~Addr{0};
    std::uint32_t guard = 0;

    while (budget > 0 && cursor_.valid && cursor_.seq < chains_done_ + lookahead_ &&
           chain_lines.size() + index_lines.size() < room) {
      if (sparse && cursor_.pos >= cursor_.hi) {
        if (!next_window(now, mem, index_lines)) return;
        if (++guard > 4 * lookahead_) return;  // long runs of empty rows
        continue;
      }
      if (regs_.idx_total && cursor_.pos >= regs_.idx_total) {
        cursor_.valid = false;
        return;
      }
      const Addr ia = regs_.idx_base + cursor_.pos * regs_.idx_bytes;
      if (ia / lb != last_idx_line) {
        // Keep the index stream a full lookahead window ahead of the cursor.
        last_idx_line = ia / lb;
        const Addr far = std::min((ia + lookahead_ * regs_.idx_bytes) / lb, (idx_end() - 1) / lb);
        for (Addr l = last_idx_line + 1; l <= far; ++l) index_lines.push_back(l);
      }
      if (!mem.probe_ready(ia, now)) {
        index_lines.push_back(ia / lb);
        return;
      }
      const auto v = image_.read(ia);
      if (!v) {
        cursor_.valid = false;
        return;
      }
      const Addr a = cursor_.ss_start + (*v << regs_.shift);
      const std::uint64_t bytes = std::max<std::uint32_t>(regs_.vector_bytes, 1) * (overfetch ? 2u : 1u);
      for (Addr l = a / lb; l <= (a + bytes - 1) / lb; ++l) chain_lines.push_back(l);
      ++evaluations_;
      --budget;
      ++cursor_.pos;
      ++cursor_.seq;
    }
  }

  PrefetcherConfig cfg_;
  const MemoryImage& image_;
  RptTable rpt_;
  IptTable ipt_;
  SstTable sst_;
  Vmig vmig_;
  std::uint64_t lookahead_;

  SparseRegs regs_{};
  bool have_regs_ = false;
  Addr chain_pc_ = 0;
  std::uint64_t chains_done_ = 0;
  Cursor cursor_;
  std::uint64_t idx_pos_ = 0;
  std::uint64_t idx_iter_ = 0;
  std::size_t idx_lanes_ = 0;
  bool have_idx_pos_ = false;
  std::uint64_t outer_row_ = 0;

  std::uint64_t tile_row_ = 0;
  bool tile_seen_ = false;
  std::uint64_t tile_idx_ = 0;
  std::uint64_t tiles_per_row_ = 1;
  std::int64_t tile_inc_ = 0;
  Addr last_ss_ = 0;

  std::vector<Addr> stream_addrs_;
  std::deque<Addr> deferred_;
  RecentFilter filter_{256};
  std::uint64_t evaluations_ = 0;
};

}  // namespace

std::unique_ptr<Prefetcher> make_nvr_engine(const PrefetcherConfig& cfg, const MemoryImage& image) {
  cfg.validate();
  return std::make_unique<NvrPrefetcher>(cfg, image);
}

}  // namespace nvrsim
