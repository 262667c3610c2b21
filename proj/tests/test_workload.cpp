#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "nvrsim/workload.hpp"

using namespace nvrsim;

namespace {

WorkloadSpec spmm_spec(std::size_t m, std::size_t k, std::size_t n, std::uint32_t bits = 32) {
  WorkloadSpec s;
  s.archetype = Archetype::SpmmCsr;
  s.dims = {m, k, n};
  s.element_bits = bits;
  return s;
}

std::vector<const TraceEvent*> indirect_loads(const Trace& t) {
  std::vector<const TraceEvent*> out;
  for (const auto& e : t)
    if (e.kind == EventKind::VectorLoad && e.is_indirect) out.push_back(&e);
  return out;
}

}  // namespace

TEST_CASE("bernoulli mask extremes and determinism") {
  CHECK(sample_bernoulli_mask(4, 4, 1.0, 3).popcount() == 16);
  CHECK(sample_bernoulli_mask(4, 4, 0.0, 3).popcount() == 0);
  auto a = sample_bernoulli_mask(30, 17, 0.3, 99);
  auto b = sample_bernoulli_mask(30, 17, 0.3, 99);
  CHECK(a.bits == b.bits);
  CHECK(a.bits.size() == 30 * 17);
  CHECK_THROWS_AS(sample_bernoulli_mask(4, 4, 1.5, 1), ConfigError);
  CHECK_THROWS_AS(sample_bernoulli_mask(0, 4, 0.5, 1), ConfigError);
}

TEST_CASE("bernoulli popcount inside the 4-sigma band") {
  const double n = 100 * 100, s = 0.5;
  const double mean = n * s, sigma = std::sqrt(n * s * (1 - s));
  auto m = sample_bernoulli_mask(100, 100, s, 7);
  CHECK(std::abs(static_cast<double>(m.popcount()) - mean) <= 4 * sigma);
}

TEST_CASE("to_csr structure") {
  auto diag = SparseMask::zeros(3, 3);
  for (int i = 0; i < 3; ++i) diag.set(i, i, true);
  auto c = to_csr(diag, 1);
  CHECK(c.rowptr == std::vector<std::uint32_t>{0, 1, 2, 3});
  CHECK(c.col_indices == std::vector<std::uint32_t>{0, 1, 2});
  for (float v : c.values) CHECK(v != 0.0f);

  auto empty = to_csr(SparseMask::zeros(4, 5), 1);
  CHECK(empty.nnz() == 0);
  for (auto r : empty.rowptr) CHECK(r == 0);

  auto m = sample_bernoulli_mask(8, 8, 0.25, 3);
  auto r = to_csr(m, 4);
  CHECK(r.nnz() == m.popcount());
  CHECK(r.support().bits == m.bits);
  CHECK_NOTHROW(r.validate());
}

TEST_CASE("spmm trace: single nonzero and diagonal addresses") {
  auto layout = AddressLayout::defaults();
  auto one = SparseMask::zeros(1, 1);
  one.set(0, 0, true);
  auto t = gen_spmm_trace(to_csr(one, 1), 1, spmm_spec(1, 1, 1), layout);
  auto ind = indirect_loads(t);
  REQUIRE(ind.size() == 1);
  CHECK(ind[0]->addresses == std::vector<Addr>{layout.base(Region::IA)});

  auto diag = SparseMask::zeros(4, 4);
  for (int i = 0; i < 4; ++i) diag.set(i, i, true);
  auto td = gen_spmm_trace(to_csr(diag, 1), 1, spmm_spec(4, 4, 1), layout);
  std::vector<Addr> got;
  for (auto* e : indirect_loads(td)) got.insert(got.end(), e->addresses.begin(), e->addresses.end());
  const Addr b = layout.base(Region::IA);
  CHECK(got == std::vector<Addr>{b, b + 4, b + 8, b + 12});
}

TEST_CASE("spmm lane conservation and region disjointness") {
  auto layout = AddressLayout::defaults();
  for (std::size_t n : {1u, 16u, 40u}) {
    auto w = to_csr(sample_bernoulli_mask(16, 16, 0.5, 11), 2);
    auto spec = spmm_spec(16, 16, n);
    auto t = gen_spmm_trace(w, n, spec, layout);
    std::size_t lanes = 0;
    for (auto* e : indirect_loads(t)) lanes += e->lanes;
    CHECK(lanes == w.nnz() * ceil_div(n, spec.vector_width));
    for (const auto& e : t) {
      CHECK(e.addresses.size() == (e.kind == EventKind::VectorLoad || e.kind == EventKind::VectorStore ? e.lanes : 0));
      for (Addr a : e.addresses) CHECK(layout.region_of(a) == e.region);
    }
  }
}

TEST_CASE("spmm branch bounds reconstruct the row trip counts") {
  auto w = to_csr(sample_bernoulli_mask(24, 40, 0.2, 5), 1);
  auto t = gen_spmm_trace(w, 16, spmm_spec(24, 40, 16), AddressLayout::defaults());
  std::vector<std::size_t> bounds;
  for (const auto& e : t)
    if (e.kind == EventKind::Branch && e.pc == pcs::kSpmmNnzLoop) bounds.push_back(e.bound_observed);
  REQUIRE(bounds.size() == w.rows);
  for (std::size_t i = 0; i < w.rows; ++i) CHECK(bounds[i] == w.row_nnz(i));
}

TEST_CASE("spmm rejects mismatched dims and overlapping layouts") {
  auto w = to_csr(sample_bernoulli_mask(4, 4, 0.5, 1), 1);
  CHECK_THROWS_AS(gen_spmm_trace(w, 4, spmm_spec(4, 5, 4), AddressLayout::defaults()), ConfigError);
  auto bad = AddressLayout::defaults();
  bad.span(Region::IA).base = bad.base(Region::W);
  CHECK_THROWS_AS(gen_spmm_trace(w, 4, spmm_spec(4, 4, 4), bad), ConfigError);
}

TEST_CASE("topk selections") {
  auto layout = AddressLayout::defaults();
  WorkloadSpec s;
  s.archetype = Archetype::TopKShuffle;
  s.dims = {1, 20, 4};
  std::vector<std::uint32_t> sel;
  gen_topk_shuffle_trace(20, 4, 20, s, layout, &sel);
  std::set<std::uint32_t> uniq(sel.begin(), sel.end());
  CHECK(uniq.size() == 20);
  CHECK(*uniq.rbegin() == 19);

  s.dims = {1, 1, 8};
  auto t1 = gen_topk_shuffle_trace(1, 8, 1, s, layout);
  std::vector<Addr> run;
  for (auto* e : indirect_loads(t1)) run.insert(run.end(), e->addresses.begin(), e->addresses.end());
  REQUIRE(run.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(run[i] == layout.base(Region::IA) + i * 4);

  s.dims = {3, 1024, 16};
  s.seed = 5;
  sel.clear();
  gen_topk_shuffle_trace(1024, 16, 32, s, layout, &sel);
  REQUIRE(sel.size() == 3 * 32);
  for (int step = 0; step < 3; ++step) {
    std::set<std::uint32_t> d(sel.begin() + step * 32, sel.begin() + (step + 1) * 32);
    CHECK(d.size() == 32);
  }
  CHECK_THROWS_AS(gen_topk_shuffle_trace(4, 4, 5, s, layout), ConfigError);
}

TEST_CASE("moe routing") {
  auto layout = AddressLayout::defaults();
  WorkloadSpec s;
  s.archetype = Archetype::MoeRouting;
  s.dims = {64, 32, 64};
  s.n_experts = 1;
  auto t = gen_moe_trace(s, layout);
  std::set<std::uint64_t> bounds;
  for (const auto& e : t)
    if (e.pc == pcs::kMoeTokenLoop) bounds.insert(e.bound_observed);
  CHECK(bounds == std::set<std::uint64_t>{64});

  s.n_experts = 2;
  s.dims.m = 8;
  std::vector<std::uint32_t> alt{0, 1, 0, 1, 0, 1, 0, 1};
  auto ta = gen_moe_trace(s, layout, &alt);
  std::vector<Addr> w_regions;
  const Addr w_base = layout.base(Region::W), region_bytes = s.dims.n * s.element_bytes();
  for (const auto& e : ta)
    if (e.pc == pcs::kMoeWeight) {
      Addr r = (e.addresses[0] - w_base) / region_bytes;
      if (w_regions.empty() || w_regions.back() != r) w_regions.push_back(r);
    }
  CHECK(w_regions == std::vector<Addr>{0, 1});

  s.n_experts = 8;
  s.dims.m = 256;
  s.moe_skew = 0.8;
  s.seed = 9;
  auto t8 = gen_moe_trace(s, layout);
  std::uint64_t total = 0;
  std::set<std::uint64_t> distinct;
  for (const auto& e : t8)
    if (e.pc == pcs::kMoeTokenLoop) {
      total += e.bound_observed;
      distinct.insert(e.bound_observed);
    }
  CHECK(total == 256);
  CHECK(distinct.size() > 1);

  s.moe_skew = -1;
  CHECK_THROWS_AS(gen_moe_trace(s, layout), ConfigError);
}

TEST_CASE("presets map names to archetypes") {
  CHECK(preset_workload("ST").archetype == Archetype::MoeRouting);
  CHECK(preset_workload("DS").archetype == Archetype::TopKShuffle);
  CHECK(preset_workload("GCN").archetype == Archetype::SpmmCsr);
  for (const auto& n : preset_names()) CHECK_NOTHROW(preset_workload(n).validate());
  CHECK_THROWS_AS(preset_workload("XYZ"), ConfigError);
}

TEST_CASE("trace file round trip is exact and deterministic") {
  for (const char* name : {"GCN", "DS", "ST"}) {
    auto spec = preset_workload(name);
    auto w1 = build_workload(spec);
    auto w2 = build_workload(spec);
    CHECK(w1.trace == w2.trace);
    std::ostringstream a, b;
    write_trace(a, w1.trace, spec.hash(), spec.seed);
    write_trace(b, w2.trace, spec.hash(), spec.seed);
    CHECK(a.str() == b.str());
    std::istringstream in(a.str());
    auto f = read_trace(in);
    CHECK(f.spec_hash == spec.hash());
    CHECK(f.seed == spec.seed);
    CHECK(f.events == w1.trace);
  }
  std::istringstream bad("# nvr-trace v1 spec_hash=0 seed=0 events=1\n0x1 VectorLoad 2 0 0 0 0 W 0x10\n");
  CHECK_THROWS_AS(read_trace(bad), ConfigError);
}
