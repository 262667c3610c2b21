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

#include "nvrsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace nvrsim {

namespace {

constexpr std::uint32_t kIndexBytes = 4;

template <std::size_t N>
std::size_t lookup(std::string_view s, const std::array<std::string_view, N>& names, const char* what) {
  for (std::size_t i = 0; i < N; ++i)
    if (names[i] == s) return i;
  throw ConfigError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::array<std::string_view, 3> kArchetypeNames{"SpmmCsr", "TopKShuffle", "MoeRouting"};
constexpr std::array<std::string_view, 4> kKindNames{"VectorLoad", "VectorStore", "Compute", "Branch"};
constexpr std::array<std::string_view, 6> kRegionNames{"W", "IA", "OA", "RowPtr", "ColIdx", "Other"};

TraceEvent make_branch(Addr pc, std::uint8_t level, std::uint64_t iter, std::uint64_t bound) {
  TraceEvent e;
  e.pc = pc;
  e.kind = EventKind::Branch;
  e.loop_level = level;
  e.loop_iter = iter;
  e.bound_observed = bound;
  return e;
}

TraceEvent make_mem(Addr pc, EventKind kind, Region region, std::uint8_t level, std::uint64_t iter,
                    bool indirect, std::vector<Addr> addrs) {
  TraceEvent e;
  e.pc = pc;
  e.kind = kind;
  e.region = region;
  e.loop_level = level;
  e.loop_iter = iter;
  e.is_indirect = indirect;
  e.lanes = static_cast<std::uint32_t>(addrs.size());
  e.addresses = std::move(addrs);
  return e;
}

TraceEvent make_compute(Addr pc, std::uint32_t lanes, std::uint8_t level, std::uint64_t iter) {
  TraceEvent e;
  e.pc = pc;
  e.kind = EventKind::Compute;
  e.lanes = lanes;
  e.loop_level = level;
  e.loop_iter = iter;
  return e;
}

void require_fits(const AddressLayout& layout, Region r, std::uint64_t bytes) {
  if (bytes > layout.span(r).size)
    throw ConfigError("dimension mismatch: region " + std::string(to_string(r)) + " needs " +
                      std::to_string(bytes) + " bytes, layout provides " + std::to_string(layout.span(r).size));
}

}  // namespace

std::string_view to_string(Archetype a) { return kArchetypeNames[static_cast<std::size_t>(a)]; }
std::string_view to_string(EventKind k) { return kKindNames[static_cast<std::size_t>(k)]; }
std::string_view to_string(Region r) { return kRegionNames[static_cast<std::size_t>(r)]; }
Archetype parse_archetype(std::string_view s) {
  return static_cast<Archetype>(lookup(s, kArchetypeNames, "archetype"));
}
EventKind parse_event_kind(std::string_view s) { return static_cast<EventKind>(lookup(s, kKindNames, "event kind")); }
Region parse_region(std::string_view s) { return static_cast<Region>(lookup(s, kRegionNames, "region")); }

// ---------------------------------------------------------------------------
// Masks and CSR
// ---------------------------------------------------------------------------

std::size_t SparseMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

SparseMask SparseMask::zeros(std::size_t rows, std::size_t cols) {
  SparseMask m;
  m.rows = rows;
  m.cols = cols;
  m.bits.assign(rows * cols, 0);
  return m;
}

SparseMask sample_bernoulli_mask(std::size_t rows, std::size_t cols, double density, std::uint64_t seed) {
  if (rows == 0 || cols == 0) throw ConfigError("mask dimensions must be >= 1");
  if (!(density >= 0.0 && density <= 1.0)) throw ConfigError("density must lie in [0, 1]");
  SparseMask m = SparseMask::zeros(rows, cols);
  m.density_target = density;
  m.seed = seed;
  SplitMix64 rng(seed);
  for (auto& b : m.bits) b = rng.uniform() < density ? 1 : 0;
  return m;
}

CsrMatrix to_csr(const SparseMask& mask, std::uint64_t value_seed) {
  if (mask.bits.size() != mask.rows * mask.cols) throw ConfigError("mask has inconsistent bit count");
  CsrMatrix csr;
  csr.rows = mask.rows;
  csr.cols = mask.cols;
  csr.rowptr.reserve(mask.rows + 1);
  csr.rowptr.push_back(0);
  SplitMix64 rng(value_seed);
  for (std::size_t r = 0; r < mask.rows; ++r) {
    for (std::size_t c = 0; c < mask.cols; ++c) {
      if (!mask.at(r, c)) continue;
      csr.col_indices.push_back(static_cast<std::uint32_t>(c));
      const double mag = 0.5 + rng.uniform();
      csr.values.push_back(static_cast<float>((rng.next() & 1) ? mag : -mag));
    }
    csr.rowptr.push_back(static_cast<std::uint32_t>(csr.col_indices.size()));
  }
  return csr;
}

SparseMask CsrMatrix::support() const {
  SparseMask m = SparseMask::zeros(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::uint32_t j = rowptr[r]; j < rowptr[r + 1]; ++j) m.set(r, col_indices[j], true);
  return m;
}

void CsrMatrix::validate() const {
  if (rowptr.size() != rows + 1) throw ConfigError("rowptr length must be rows+1");
  if (rowptr.front() != 0 || rowptr.back() != col_indices.size()) throw ConfigError("rowptr endpoints invalid");
  if (values.size() != col_indices.size()) throw ConfigError("values/col_indices length mismatch");
  for (std::size_t r = 0; r < rows; ++r) {
    if (rowptr[r + 1] < rowptr[r]) throw ConfigError("rowptr must be non-decreasing");
    for (std::uint32_t j = rowptr[r]; j < rowptr[r + 1]; ++j) {
      if (col_indices[j] >= cols) throw ConfigError("column index out of range");
      if (j > rowptr[r] && col_indices[j] <= col_indices[j - 1])
        throw ConfigError("column indices must be strictly increasing within a row");
    }
  }
}

// ---------------------------------------------------------------------------
// Layout, spec, memory image
// ---------------------------------------------------------------------------

std::optional<Region> AddressLayout::region_of(Addr a) const {
  for (std::size_t i = 0; i < kRegionCount; ++i)
    if (spans[i].size > 0 && spans[i].contains(a)) return static_cast<Region>(i);
  return std::nullopt;
}

void AddressLayout::validate() const {
  for (std::size_t i = 0; i < kRegionCount; ++i) {
    const auto& a = spans[i];
    if (a.size == 0) continue;
    if (a.base % 64 != 0) throw ConfigError("region " + std::string(kRegionNames[i]) + " base not 64-byte aligned");
    if (a.base + a.size - 1 > kAddrMask) throw ConfigError("region exceeds the 48-bit address space");
    for (std::size_t j = i + 1; j < kRegionCount; ++j) {
      const auto& b = spans[j];
      if (b.size == 0) continue;
      if (a.base < b.base + b.size && b.base < a.base + a.size)
        throw ConfigError("layout region overlap: " + std::string(kRegionNames[i]) + " / " +
                          std::string(kRegionNames[j]));
    }
  }
}

AddressLayout AddressLayout::defaults() {
  AddressLayout l;
  constexpr std::uint64_t kSpan = 256ULL << 20;
  for (std::size_t i = 0; i < kRegionCount; ++i) l.spans[i] = {0x10000000ULL + i * kSpan, kSpan};
  return l;
}

void WorkloadSpec::validate() const {
  if (element_bits != 8 && element_bits != 16 && element_bits != 32)
    throw ConfigError("element_bits must be one of 8, 16, 32");
  if (vector_width == 0) throw ConfigError("vector_width must be >= 1");
  if (dims.m == 0 || dims.k == 0 || dims.n == 0) throw ConfigError("workload dims must be >= 1");
  if (!(density_w >= 0.0 && density_w <= 1.0) || !(density_ia >= 0.0 && density_ia <= 1.0))
    throw ConfigError("densities must lie in [0, 1]");
  if (!(correlation_rho >= -1.0 && correlation_rho <= 1.0)) throw ConfigError("correlation_rho must lie in [-1, 1]");
  switch (archetype) {
    case Archetype::SpmmCsr:
      break;
    case Archetype::TopKShuffle:
      if (topk_k == 0 || topk_k > dims.k) throw ConfigError("topk_k must satisfy 1 <= k <= n_vectors");
      break;
    case Archetype::MoeRouting:
      if (n_experts == 0) throw ConfigError("n_experts must be >= 1");
      if (!(moe_skew >= 0.0) || !std::isfinite(moe_skew)) throw ConfigError("moe_skew must be finite and >= 0");
      break;
  }
}

std::string WorkloadSpec::canonical() const {
  std::ostringstream os;
  os.precision(17);
  os << "archetype=" << to_string(archetype) << ";m=" << dims.m << ";k=" << dims.k << ";n=" << dims.n
     << ";density_w=" << density_w << ";density_ia=" << density_ia << ";rho=" << correlation_rho
     << ";topk_k=" << topk_k << ";n_experts=" << n_experts << ";moe_skew=" << moe_skew
     << ";element_bits=" << element_bits << ";vector_width=" << vector_width << ";seed=" << seed;
  return os.str();
}

void MemoryImage::add_segment(Addr base, std::uint32_t elem_bytes, std::vector<std::uint64_t> words) {
  segments_.push_back({base, elem_bytes, std::move(words)});
}

std::optional<std::uint64_t> MemoryImage::read(Addr a) const {
  for (const auto& s : segments_) {
    if (a < s.base) continue;
    const Addr off = a - s.base;
    if (off % s.elem_bytes != 0) continue;
    const std::uint64_t idx = off / s.elem_bytes;
    if (idx < s.words.size()) return s.words[idx];
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

Trace gen_spmm_trace(const CsrMatrix& w, std::size_t ia_cols, const WorkloadSpec& spec, const AddressLayout& layout) {
  layout.validate();
  w.validate();
  if (ia_cols == 0) throw ConfigError("ia_cols must be >= 1");
  if (spec.archetype == Archetype::SpmmCsr && (spec.dims.k != w.cols || spec.dims.n != ia_cols))
    throw ConfigError("dimension mismatch: W.cols must equal the IA row count and n the IA column count");
  const std::uint32_t eb = spec.element_bytes();
  const std::uint32_t lanes = spec.vector_width;
  require_fits(layout, Region::W, std::uint64_t{w.nnz()} * eb);
  require_fits(layout, Region::ColIdx, std::uint64_t{w.nnz()} * kIndexBytes);
  require_fits(layout, Region::RowPtr, std::uint64_t{w.rows + 1} * kIndexBytes);
  require_fits(layout, Region::IA, std::uint64_t{w.cols} * ia_cols * eb);
  require_fits(layout, Region::OA, std::uint64_t{w.rows} * ia_cols * eb);

  const Addr w_base = layout.base(Region::W);
  const Addr ci_base = layout.base(Region::ColIdx);
  const Addr rp_base = layout.base(Region::RowPtr);
  const Addr ia_base = layout.base(Region::IA);
  const Addr oa_base = layout.base(Region::OA);
  const std::size_t n_tiles = ceil_div(ia_cols, lanes);

  Trace t;
  for (std::size_t i = 0; i < w.rows; ++i) {
    auto rp = make_mem(pcs::kSpmmRowPtr, EventKind::VectorLoad, Region::RowPtr, 2, i, false,
                       {rp_base + i * kIndexBytes, rp_base + (i + 1) * kIndexBytes});
    rp.values = {w.rowptr[i], w.rowptr[i + 1]};
    t.push_back(std::move(rp));
    const std::uint32_t lo = w.rowptr[i];
    const std::uint32_t nnz = w.rowptr[i + 1] - lo;
    t.push_back(make_branch(pcs::kSpmmNnzLoop, 0, i, nnz));
    for (std::size_t tile = 0; tile < n_tiles; ++tile) {
      t.push_back(make_branch(pcs::kSpmmTileLoop, 1, tile, n_tiles));
      const std::size_t col0 = tile * lanes;
      for (std::uint32_t b = 0; b * lanes < nnz; ++b) {
        const std::uint32_t p0 = lo + b * lanes;
        const std::uint32_t cnt = std::min<std::uint32_t>(lanes, nnz - b * lanes);
        std::vector<Addr> ci(cnt), wv(cnt), ia(cnt);
        std::vector<std::uint64_t> idx(cnt);
        for (std::uint32_t l = 0; l < cnt; ++l) {
          const std::uint32_t j = p0 + l;
          ci[l] = ci_base + Addr{j} * kIndexBytes;
          wv[l] = w_base + Addr{j} * eb;
          idx[l] = w.col_indices[j];
          ia[l] = ia_base + (Addr{w.col_indices[j]} * ia_cols + col0) * eb;
        }
        auto ce = make_mem(pcs::kSpmmColIdx, EventKind::VectorLoad, Region::ColIdx, 0, b, false, std::move(ci));
        ce.values = std::move(idx);
        t.push_back(std::move(ce));
        t.push_back(make_mem(pcs::kSpmmW, EventKind::VectorLoad, Region::W, 0, b, false, std::move(wv)));
        t.push_back(make_mem(pcs::kSpmmIaGather, EventKind::VectorLoad, Region::IA, 0, b, true, std::move(ia)));
        t.push_back(make_compute(pcs::kSpmmMac, cnt, 0, b));
      }
      const std::size_t out_lanes = std::min<std::size_t>(lanes, ia_cols - col0);
      std::vector<Addr> oa(out_lanes);
      for (std::size_t l = 0; l < out_lanes; ++l) oa[l] = oa_base + (Addr{i} * ia_cols + col0 + l) * eb;
      t.push_back(make_mem(pcs::kSpmmOaStore, EventKind::VectorStore, Region::OA, 1, tile, false, std::move(oa)));
    }
  }
  return t;
}

Trace gen_topk_shuffle_trace(std::size_t n_vectors, std::size_t dim, std::size_t k, const WorkloadSpec& spec,
                             const AddressLayout& layout, std::vector<std::uint32_t>* selections_out) {
  layout.validate();
  if (k == 0 || k > n_vectors) throw ConfigError("topk requires 1 <= k <= n_vectors");
  if (dim == 0) throw ConfigError("vector dim must be >= 1");
  const std::uint64_t steps = spec.archetype == Archetype::TopKShuffle ? spec.dims.m : 1;
  const std::uint32_t eb = spec.element_bytes();
  const std::uint32_t lanes = spec.vector_width;
  require_fits(layout, Region::IA, std::uint64_t{n_vectors} * dim * eb);
  require_fits(layout, Region::ColIdx, steps * k * kIndexBytes);
  require_fits(layout, Region::OA, steps * dim * eb);

  const Addr idx_base = layout.base(Region::ColIdx);
  const Addr kv_base = layout.base(Region::IA);
  const Addr oa_base = layout.base(Region::OA);

  std::vector<std::uint32_t> perm(n_vectors);
  std::iota(perm.begin(), perm.end(), 0u);
  SplitMix64 rng(SplitMix64::derive(spec.seed, 0x70c));

  Trace t;
  for (std::uint64_t s = 0; s < steps; ++s) {
    // Partial Fisher-Yates: the first k slots become a uniform k-subset.
    for (std::size_t q = 0; q < k; ++q) std::swap(perm[q], perm[q + rng.below(n_vectors - q)]);
    if (selections_out) selections_out->insert(selections_out->end(), perm.begin(), perm.begin() + k);
    t.push_back(make_branch(pcs::kTopkStepLoop, 1, s, steps));
    t.push_back(make_branch(pcs::kTopkKLoop, 0, s, k));
    for (std::size_t g0 = 0; g0 < k; g0 += lanes) {
      const std::size_t cnt = std::min<std::size_t>(lanes, k - g0);
      std::vector<Addr> ia(cnt);
      std::vector<std::uint64_t> vals(cnt);
      for (std::size_t l = 0; l < cnt; ++l) {
        ia[l] = idx_base + (s * k + g0 + l) * kIndexBytes;
        vals[l] = perm[g0 + l];
      }
      auto ie = make_mem(pcs::kTopkIndex, EventKind::VectorLoad, Region::ColIdx, 0, g0 / lanes, false, std::move(ia));
      ie.values = std::move(vals);
      t.push_back(std::move(ie));
      // The NPU groups the selected vectors lane-wise: one lane per selected
      // vector, stepping through the vector elements.
      for (std::size_t e = 0; e < dim; ++e) {
        std::vector<Addr> g(cnt);
        for (std::size_t l = 0; l < cnt; ++l) g[l] = kv_base + (Addr{perm[g0 + l]} * dim + e) * eb;
        t.push_back(make_mem(pcs::kTopkGather, EventKind::VectorLoad, Region::IA, 0, e, true, std::move(g)));
        t.push_back(make_compute(pcs::kTopkMac, static_cast<std::uint32_t>(cnt), 0, e));
      }
    }
    for (std::size_t d0 = 0; d0 < dim; d0 += lanes) {
      const std::size_t cnt = std::min<std::size_t>(lanes, dim - d0);
      std::vector<Addr> o(cnt);
      for (std::size_t l = 0; l < cnt; ++l) o[l] = oa_base + (s * dim + d0 + l) * eb;
      t.push_back(make_mem(pcs::kTopkStore, EventKind::VectorStore, Region::OA, 1, s, false, std::move(o)));
    }
  }
  return t;
}

std::vector<std::uint32_t> sample_routing(const WorkloadSpec& spec) {
  if (spec.n_experts == 0) throw ConfigError("n_experts must be >= 1");
  if (!(spec.moe_skew >= 0.0) || !std::isfinite(spec.moe_skew))
    throw ConfigError("degenerate routing distribution: moe_skew must be finite and >= 0");
  SplitMix64 rng(SplitMix64::derive(spec.seed, 0x30e));
  // Log-normal expert popularity; skew 0 gives uniform routing.
  std::vector<double> cdf(spec.n_experts);
  double acc = 0.0;
  for (std::uint32_t e = 0; e < spec.n_experts; ++e) {
    acc += std::exp(spec.moe_skew * rng.normal());
    cdf[e] = acc;
  }
  std::vector<std::uint32_t> route(spec.dims.m);
  for (auto& r : route) {
    const double u = rng.uniform() * acc;
    r = static_cast<std::uint32_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    r = std::min(r, spec.n_experts - 1);
  }
  return route;
}

Trace gen_moe_trace(const WorkloadSpec& spec, const AddressLayout& layout,
                    const std::vector<std::uint32_t>* routing_override, std::vector<std::uint32_t>* routing_out) {
  layout.validate();
  if (spec.n_experts == 0) throw ConfigError("n_experts must be >= 1");
  const std::uint64_t tokens = spec.dims.m;
  const std::uint64_t dim = spec.dims.k;
  const std::uint64_t w_elems = spec.dims.n;
  const std::uint32_t eb = spec.element_bytes();
  const std::uint32_t lanes = spec.vector_width;

  std::vector<std::uint32_t> route;
  if (routing_override) {
    if (routing_override->size() != tokens) throw ConfigError("routing override must have one entry per token");
    for (auto e : *routing_override)
      if (e >= spec.n_experts) throw ConfigError("routing override names an unknown expert");
    route = *routing_override;
  } else {
    route = sample_routing(spec);
  }
  if (routing_out) *routing_out = route;

  require_fits(layout, Region::W, std::uint64_t{spec.n_experts} * w_elems * eb);
  require_fits(layout, Region::IA, tokens * dim * eb);
  require_fits(layout, Region::OA, tokens * dim * eb);
  require_fits(layout, Region::ColIdx, tokens * kIndexBytes);
  require_fits(layout, Region::RowPtr, std::uint64_t{spec.n_experts + 1} * kIndexBytes);

  // Token ids grouped by expert: a CSR with experts as rows.
  std::vector<std::uint32_t> rowptr(spec.n_experts + 1, 0);
  for (auto e : route) ++rowptr[e + 1];
  for (std::uint32_t e = 0; e < spec.n_experts; ++e) rowptr[e + 1] += rowptr[e];
  std::vector<std::uint32_t> token_ids(tokens);
  {
    auto fill = rowptr;
    for (std::uint32_t tok = 0; tok < tokens; ++tok) token_ids[fill[route[tok]]++] = tok;
  }

  const Addr w_base = layout.base(Region::W);
  const Addr ia_base = layout.base(Region::IA);
  const Addr oa_base = layout.base(Region::OA);
  const Addr tk_base = layout.base(Region::ColIdx);
  const Addr rp_base = layout.base(Region::RowPtr);
  const std::uint64_t w_batches = ceil_div(w_elems, lanes);

  Trace t;
  for (std::uint32_t e = 0; e < spec.n_experts; ++e) {
    auto rp = make_mem(pcs::kMoeRowPtr, EventKind::VectorLoad, Region::RowPtr, 2, e, false,
                       {rp_base + Addr{e} * kIndexBytes, rp_base + Addr{e + 1} * kIndexBytes});
    rp.values = {rowptr[e], rowptr[e + 1]};
    t.push_back(std::move(rp));
    const std::uint32_t lo = rowptr[e];
    const std::uint32_t count = rowptr[e + 1] - lo;
    t.push_back(make_branch(pcs::kMoeTokenLoop, 0, e, count));
    if (count == 0) continue;
    t.push_back(make_branch(pcs::kMoeWeightLoop, 1, e, w_batches));
    const Addr region = w_base + Addr{e} * w_elems * eb;
    for (std::uint64_t c = 0; c < w_batches; ++c) {
      const std::uint64_t cnt = std::min<std::uint64_t>(lanes, w_elems - c * lanes);
      std::vector<Addr> a(cnt);
      for (std::uint64_t l = 0; l < cnt; ++l) a[l] = region + (c * lanes + l) * eb;
      t.push_back(make_mem(pcs::kMoeWeight, EventKind::VectorLoad, Region::W, 1, c, false, std::move(a)));
    }
    for (std::uint32_t b = 0; b * lanes < count; ++b) {
      const std::uint32_t p0 = lo + b * lanes;
      const std::uint32_t cnt = std::min<std::uint32_t>(lanes, count - b * lanes);
      std::vector<Addr> ta(cnt);
      std::vector<std::uint64_t> tv(cnt);
      for (std::uint32_t l = 0; l < cnt; ++l) {
        ta[l] = tk_base + Addr{p0 + l} * kIndexBytes;
        tv[l] = token_ids[p0 + l];
      }
      auto te = make_mem(pcs::kMoeTokenIds, EventKind::VectorLoad, Region::ColIdx, 0, b, false, std::move(ta));
      te.values = tv;
      t.push_back(std::move(te));
      for (std::uint32_t l = 0; l < cnt; ++l) {
        const Addr row = Addr{static_cast<std::uint32_t>(tv[l])} * dim;
        for (std::uint64_t d0 = 0; d0 < dim; d0 += lanes) {
          const std::uint64_t dc = std::min<std::uint64_t>(lanes, dim - d0);
          std::vector<Addr> g(dc), o(dc);
          for (std::uint64_t q = 0; q < dc; ++q) {
            g[q] = ia_base + (row + d0 + q) * eb;
            o[q] = oa_base + (row + d0 + q) * eb;
          }
          t.push_back(make_mem(pcs::kMoeGather, EventKind::VectorLoad, Region::IA, 0, p0 + l, true, std::move(g)));
          t.push_back(make_compute(pcs::kMoeMac, static_cast<std::uint32_t>(dc), 0, p0 + l));
          t.push_back(make_mem(pcs::kMoeStore, EventKind::VectorStore, Region::OA, 0, p0 + l, true, std::move(o)));
        }
      }
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Presets and assembly
// ---------------------------------------------------------------------------

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"DS", "GAT", "GCN", "GSABT", "H2O", "MK", "SCN", "ST"};
  return names;
}

WorkloadSpec preset_workload(std::string_view name) {
  WorkloadSpec s;
  s.name = std::string(name);
  if (name == "DS") {  // Double Sparsity: TopK over a long KV cache
    s.archetype = Archetype::TopKShuffle;
    s.dims = {48, 16384, 32};
    s.topk_k = 64;
    s.element_bits = 16;
    s.seed = 101;
  } else if (name == "H2O") {  // Heavy-hitter oracle: fewer, wider selected vectors
    s.archetype = Archetype::TopKShuffle;
    s.dims = {64, 8192, 64};
    s.topk_k = 32;
    s.element_bits = 16;
    s.seed = 102;
  } else if (name == "GSABT") {  // graph sparse attention: many narrow vectors
    s.archetype = Archetype::TopKShuffle;
    s.dims = {32, 32768, 16};
    s.topk_k = 64;
    s.element_bits = 32;
    s.seed = 103;
  } else if (name == "GCN") {
    s.archetype = Archetype::SpmmCsr;
    s.dims = {256, 16384, 16};
    s.density_w = 0.004;
    s.element_bits = 32;
    s.seed = 104;
  } else if (name == "GAT") {
    s.archetype = Archetype::SpmmCsr;
    s.dims = {256, 8192, 32};
    s.density_w = 0.006;
    s.element_bits = 16;
    s.seed = 105;
  } else if (name == "MK") {  // sparse point-cloud convolution, very sparse
    s.archetype = Archetype::SpmmCsr;
    s.dims = {128, 32768, 16};
    s.density_w = 0.002;
    s.element_bits = 32;
    s.seed = 106;
  } else if (name == "SCN") {
    s.archetype = Archetype::SpmmCsr;
    s.dims = {256, 8192, 16};
    s.density_w = 0.008;
    s.element_bits = 16;
    s.seed = 107;
  } else if (name == "ST") {  // Switch Transformer expert routing
    s.archetype = Archetype::MoeRouting;
    s.dims = {512, 64, 2048};
    s.n_experts = 8;
    s.moe_skew = 0.5;
    s.element_bits = 16;
    s.seed = 108;
  } else {
    throw ConfigError("unknown workload preset '" + std::string(name) + "'");
  }
  return s;
}

Workload build_workload(const WorkloadSpec& spec, const AddressLayout& layout) {
  spec.validate();
  Workload w;
  w.spec = spec;
  w.layout = layout;
  const std::uint32_t eb = spec.element_bytes();
  w.program.idx_base = layout.base(Region::ColIdx);
  w.program.idx_bytes = kIndexBytes;
  switch (spec.archetype) {
    case Archetype::SpmmCsr: {
      auto mask = sample_bernoulli_mask(spec.dims.m, spec.dims.k, spec.density_w, SplitMix64::derive(spec.seed, 1));
      auto csr = to_csr(mask, SplitMix64::derive(spec.seed, 2));
      w.trace = gen_spmm_trace(csr, spec.dims.n, spec, layout);
      std::vector<std::uint64_t> rp(csr.rowptr.begin(), csr.rowptr.end());
      std::vector<std::uint64_t> ci(csr.col_indices.begin(), csr.col_indices.end());
      w.image.add_segment(layout.base(Region::RowPtr), kIndexBytes, std::move(rp));
      w.image.add_segment(layout.base(Region::ColIdx), kIndexBytes, std::move(ci));
      w.program.shift = log2_floor(spec.dims.n * eb);
      w.program.vector_bytes = eb;
      w.program.idx_total = csr.nnz();
      w.program.has_rowptr = true;
      w.program.rowptr_base = layout.base(Region::RowPtr);
      w.program.rows = csr.rows;
      w.csr = std::move(csr);
      break;
    }
    case Archetype::TopKShuffle: {
      w.trace = gen_topk_shuffle_trace(spec.dims.k, spec.dims.n, spec.topk_k, spec, layout, &w.selections);
      std::vector<std::uint64_t> idx(w.selections.begin(), w.selections.end());
      w.program.idx_total = idx.size();
      w.image.add_segment(layout.base(Region::ColIdx), kIndexBytes, std::move(idx));
      w.program.shift = log2_floor(spec.dims.n * eb);
      w.program.vector_bytes = static_cast<std::uint32_t>(spec.dims.n * eb);
      w.program.rows = spec.dims.m;
      break;
    }
    case Archetype::MoeRouting: {
      w.trace = gen_moe_trace(spec, layout, nullptr, &w.routing);
      std::vector<std::uint32_t> rowptr(spec.n_experts + 1, 0);
      for (auto e : w.routing) ++rowptr[e + 1];
      for (std::uint32_t e = 0; e < spec.n_experts; ++e) rowptr[e + 1] += rowptr[e];
      std::vector<std::uint64_t> ids(w.routing.size());
      auto fill = rowptr;
      for (std::uint32_t tok = 0; tok < w.routing.size(); ++tok) ids[fill[w.routing[tok]]++] = tok;
      w.image.add_segment(layout.base(Region::RowPtr), kIndexBytes,
                          std::vector<std::uint64_t>(rowptr.begin(), rowptr.end()));
      w.program.idx_total = ids.size();
      w.image.add_segment(layout.base(Region::ColIdx), kIndexBytes, std::move(ids));
      w.program.shift = log2_floor(spec.dims.k * eb);
      w.program.vector_bytes = static_cast<std::uint32_t>(spec.dims.k * eb);
      w.program.has_rowptr = true;
      w.program.rowptr_base = layout.base(Region::RowPtr);
      w.program.rows = spec.n_experts;
      break;
    }
  }
  return w;
}

}  // namespace nvrsim
