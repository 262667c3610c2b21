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

// Baseline engines: stream (stride), IMP-style indirect, DVR-style vector runahead.

#include <algorithm>

#include "nvrsim/prefetch.hpp"
#include "prefetch_util.hpp"

namespace nvrsim {

namespace {

class ZeroIssuePrefetcher final : public Prefetcher {
 public:
  std::string_view name() const override { return "zero"; }
  void snoop(const SnoopEvent& ev) override { seen_ += ev.event ? 1 : 0; }
  std::vector<MemRequest> step(const StepContext&, const MemoryHierarchy&) override { return {}; }

 private:
  std::uint64_t seen_ = 0;
};

/// Keeps each confident stride stream `depth` vectors ahead of its demand.
class StrideStreams {
 public:
  StrideStreams(std::uint32_t entries, std::uint32_t threshold) : rpt_(entries, threshold) {}

  void train(const TraceEvent& e, std::uint32_t depth, std::vector<Addr>& addrs_out) {
    const Addr a0 = e.addresses.front();
    auto& ent = rpt_.update(e.pc, a0);
    if (!rpt_.confident(ent) || ent.stride == 0) return;
    const std::int64_t s = ent.stride;
    const auto ahead = static_cast<std::int64_t>(ent.last_prefetch_addr - a0) / s;
    if (ahead >= depth) return;
    const auto count = static_cast<std::uint32_t>(depth - std::max<std::int64_t>(ahead, 0));
    for (Addr p : rpt_.sd_predict(e.pc, count)) {
      const Addr shift = p - a0;
      for (Addr a : e.addresses) addrs_out.push_back(a + shift);
    }
  }

  RptTable& rpt() { return rpt_; }

 private:
  RptTable rpt_;
};

class StreamPrefetcher final : public Prefetcher {
 public:
  explicit StreamPrefetcher(const PrefetcherConfig& c) : cfg_(c), streams_(c.table_entries, c.confidence_threshold) {}
  std::string_view name() const override { return "stream"; }

  void snoop(const SnoopEvent& ev) override {
    if (ev.source != SnoopSource::NpuLoad || !ev.event || ev.event->addresses.empty()) return;
    streams_.train(*ev.event, cfg_.degree, pending_);
  }

  std::vector<MemRequest> step(const StepContext& ctx, const MemoryHierarchy& mem) override {
    std::vector<MemRequest> out;
    to_lines(pending_, mem.line_bytes());
    for (Addr l : pending_) {
      if (filter_.seen(l)) continue;
      out.push_back(line_request(l, mem.line_bytes(), ctx.now, Origin::BaselinePrefetcher, FillTarget::L2));
    }
    pending_.clear();
    return out;
  }

 private:
  PrefetcherConfig cfg_;
  StrideStreams streams_;
  std::vector<Addr> pending_;
  RecentFilter filter_{256};
};

/**
 * Index-driven engine without sparse-unit access: learns base + idx * scale
 * from observed (index, address) pairs and prefetches one index vector ahead
 * into L1, one request per element. Other streams go through a stride table.
 */
class ImpPrefetcher final : public Prefetcher {
 public:
  ImpPrefetcher(const PrefetcherConfig& c, const MemoryImage& img)
      : cfg_(c), image_(img), streams_(c.table_entries, c.confidence_threshold) {}
  std::string_view name() const override { return "imp"; }

  void snoop(const SnoopEvent& ev) override {
    if (ev.source != SnoopSource::NpuLoad || !ev.event || ev.event->addresses.empty()) return;
    const auto& e = *ev.event;
    if (e.is_indirect) {
      learner_.observe_indirect(e);
      return;
    }
    if (e.region == Region::ColIdx && !e.values.empty()) {
      learner_.observe_index(e.addresses.front(), e.values);
      streams_.train(e, 2, idx_lines_);
      lookahead_from_ = e.addresses.front() + std::uint64_t{cfg_.vector_width} * 4;
      armed_ = true;
    } else {
      streams_.train(e, cfg_.degree, stride_lines_);
    }
  }

  std::vector<MemRequest> step(const StepContext& ctx, const MemoryHierarchy& mem) override {
    std::vector<MemRequest> out;
    const std::uint32_t lb = mem.line_bytes();
    to_lines(idx_lines_, lb);
    for (Addr l : idx_lines_)
      if (!filter_.seen(l)) out.push_back(line_request(l, lb, ctx.now, Origin::BaselinePrefetcher, FillTarget::L1));
    idx_lines_.clear();
    to_lines(stride_lines_, lb);
    for (Addr l : stride_lines_)
      if (!filter_.seen(l)) out.push_back(line_request(l, lb, ctx.now, Origin::BaselinePrefetcher, FillTarget::L2));
    stride_lines_.clear();
    if (!armed_ || !learner_.confident()) return out;
    armed_ = false;
    for (std::uint32_t j = 0; j < cfg_.vector_width; ++j) {
      const Addr ia = lookahead_from_ + std::uint64_t{j} * 4;
      if (!mem.probe_ready(ia, ctx.now)) continue;
      const auto v = image_.read(ia);
      if (!v) continue;
      const Addr a = learner_.predict(*v);
      const Addr last = a + std::max<std::uint32_t>(learner_.span_bytes(), 1) - 1;
      for (Addr l = a / lb; l <= last / lb; ++l)
        if (!filter_.seen(l)) out.push_back(line_request(l, lb, ctx.now, Origin::BaselinePrefetcher, FillTarget::L1));
    }
    return out;
  }

 private:
  PrefetcherConfig cfg_;
  const MemoryImage& image_;
  IndirectPatternLearner learner_;
  StrideStreams streams_;
  std::vector<Addr> idx_lines_;
  std::vector<Addr> stride_lines_;
  Addr lookahead_from_ = 0;
  bool armed_ = false;
  RecentFilter filter_{256};
};

/**
 * Vector runahead: a demand miss on an indirect load vectorises the next K
 * invocations of the same chain (K = vector width). Only the missed load's
 * offset is generated and the run is not clamped to the loop bound.
 */
class DvrPrefetcher final : public Prefetcher {
 public:
  DvrPrefetcher(const PrefetcherConfig& c, const MemoryImage& img)
      : cfg_(c), image_(img), streams_(c.table_entries, c.confidence_threshold) {}
  std::string_view name() const override { return "dvr"; }

  void snoop(const SnoopEvent& ev) override {
    if (ev.source != SnoopSource::NpuLoad || !ev.event || ev.event->addresses.empty()) return;
    const auto& e = *ev.event;
    if (e.is_indirect) {
      learner_.observe_indirect(e);
      return;
    }
    if (e.region == Region::ColIdx && !e.values.empty()) learner_.observe_index(e.addresses.front(), e.values);
    streams_.train(e, cfg_.degree, stride_lines_);
  }

  void on_demand_result(const TraceEvent& e, bool missed, Cycle) override {
    if (!e.is_indirect || !missed || !learner_.confident() || e.region == Region::OA) return;
    const auto& vals = learner_.last_values();
    if (vals.empty()) return;
    const Addr a0 = e.addresses.front();
    // Locate the invocation this lane-0 address belongs to.
    std::size_t j = 0;
    bool found = false;
    const Addr pitch = static_cast<Addr>(learner_.scale());
    for (std::size_t q = 0; q < vals.size(); ++q) {
      const Addr b = learner_.predict(vals[q]);
      if (a0 >= b && a0 - b < pitch) {
        j = q;
        found = true;
        break;
      }
    }
    if (!found) return;
    trigger_ = true;
    offset_ = a0 - learner_.predict(vals[j]);
    const std::size_t next = learner_.lane_wise() ? vals.size() : j + 1;
    next_index_addr_ = learner_.last_index_addr() + next * 4;
  }

  std::vector<MemRequest> step(const StepContext& ctx, const MemoryHierarchy& mem) override {
    std::vector<MemRequest> out;
    const std::uint32_t lb = mem.line_bytes();
    to_lines(stride_lines_, lb);
    for (Addr l : stride_lines_)
      if (!filter_.seen(l)) out.push_back(line_request(l, lb, ctx.now, Origin::BaselinePrefetcher, FillTarget::L2));
    stride_lines_.clear();
    if (!trigger_) return out;
    trigger_ = false;
    std::vector<Addr> chain;
    for (std::uint32_t k = 0; k < cfg_.vector_width; ++k) {
      const Addr ia = next_index_addr_ + std::uint64_t{k} * 4;
      if (!mem.probe_ready(ia, ctx.now)) continue;
      const auto v = image_.read(ia);
      if (!v) continue;
      chain.push_back((learner_.predict(*v) + offset_) / lb);
    }
    dedup_lines(chain);
    for (Addr l : chain)
      if (!filter_.seen(l)) out.push_back(line_request(l, lb, ctx.now, Origin::BaselinePrefetcher, FillTarget::L2));
    return out;
  }

 private:
  PrefetcherConfig cfg_;
  const MemoryImage& image_;
  IndirectPatternLearner learner_;
  StrideStreams streams_;
  std::vector<Addr> stride_lines_;
  bool trigger_ = false;
  Addr offset_ = 0;
  Addr next_index_addr_ = 0;
  RecentFilter filter_{256};
};

}  // namespace

std::unique_ptr<Prefetcher> make_prefetcher(const PrefetcherConfig& cfg, const MemoryImage& image) {
  cfg.validate();
  if (cfg.kind == "none") return nullptr;
  if (cfg.kind == "zero") return std::make_unique<ZeroIssuePrefetcher>();
  if (cfg.kind == "stream") return std::make_unique<StreamPrefetcher>(cfg);
  if (cfg.kind == "imp") return std::make_unique<ImpPrefetcher>(cfg, image);
  if (cfg.kind == "dvr") return std::make_unique<DvrPrefetcher>(cfg, image);
  return make_nvr_engine(cfg, image);
}

}  // namespace nvrsim
