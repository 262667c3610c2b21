// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any line fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "nvrsim/harness.hpp"
#include "oracles.hpp"

using namespace nvrsim;

namespace {

int failures = 0;

void criterion(const char* name, double budget_s, const std::function<bool(std::string&)>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail = std::string("exception: ") + e.what();
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (s > budget_s) {
    ok = false;
    detail += " [over time budget]";
  }
  std::printf("%s %s (%.2fs): %s\n", ok ? "PASS" : "FAIL", name, s, detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

/// Every preset under every prefetcher, run once and shared by the directional checks.
struct Suite {
  std::map<std::string, std::map<std::string, MetricsRow>> rows;  // preset -> kind -> row
  std::map<std::string, Archetype> archetype;
};

const Suite& suite() {
  static const Suite s = [] {
    Suite out;
    for (const auto& p : preset_names()) {
      out.archetype[p] = preset_workload(p).archetype;
      for (const char* k : {"none", "stream", "imp", "dvr", "nvr"}) {
        ExperimentConfig c;
        c.workload = preset_workload(p);
        c.prefetcher.kind = k;
        out.rows[p][k] = run_single(c, p + "/" + k);
      }
    }
    return out;
  }();
  return s;
}

double stall_reduction(const MetricsRow& r) {
  return r.baseline_stall_cycles ? 1.0 - static_cast<double>(r.stall_cycles) / r.baseline_stall_cycles : 0.0;
}

bool shuffle(Archetype a) { return a == Archetype::TopKShuffle; }

MemRequest load_at(Addr a, Cycle t) {
  MemRequest r;
  r.address = a;
  r.issue_cycle = t;
  return r;
}

std::string fingerprint(const SimReport& r) {
  std::ostringstream os;
  os << r.total_cycles << ' ' << r.miss_stall_cycles << ' ' << r.missed_lanes << ' ' << r.lanes << ' '
     << r.missed_batches << ' ' << r.off_chip_bytes << ' ' << r.demand.misses << ' ' << r.demand.l1_hits << ' '
     << r.demand.l2_hits << ' ' << r.ledger.dram_reads << ' ' << r.prefetch.issued;
  for (auto h : r.miss_histogram) os << ' ' << h;
  return os.str();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

}  // namespace

int main() {
  criterion("overhead-table", 1.0, [](std::string& d) {
    const auto rep = hardware_overhead(16);
    std::map<std::string, std::uint64_t> bits;
    for (const auto& r : rep.rows) bits[r.component] = r.bits;
    const std::map<std::string, std::uint64_t> expect{{"SD", 1808}, {"SCD", 2464}, {"VMIG", 3204}, {"Snooper", 1248}};
    bool ok = true;
    for (const auto& [c, v] : expect) {
      d += fmt("%s %llu/%llu ", c.c_str(), static_cast<unsigned long long>(bits[c]), static_cast<unsigned long long>(v));
      ok = ok && bits[c] == v;
    }
    d += fmt("| LBD computed %llu vs table 3424 (reported)", static_cast<unsigned long long>(bits["LBD"]));
    return ok;
  });

  criterion("scd-exactness", 1.0, [](std::string& d) {
    std::uint64_t lanes = 0, exact = 0, traces = 0;
    for (std::uint64_t m : {16, 64, 128})
      for (std::uint64_t k : {32, 128})
        for (std::uint64_t n : {16, 128})
          for (double dens : {0.05, 0.3}) {
            WorkloadSpec s;
            s.archetype = Archetype::SpmmCsr;
            s.dims = {m, k, n};
            s.density_w = dens;
            s.seed = m * 31 + k + n;
            const auto w = build_workload(s);
            const auto& csr = *w.csr;
            const std::uint32_t eb = w.spec.element_bytes();
            IptTable ipt;
            std::uint64_t tile = 0, row = 0;
            std::size_t pos = 0;
            for (const auto& e : w.trace) {
              if (e.kind == EventKind::Branch && e.loop_level == 1) tile = e.loop_iter;
              if (e.region == Region::RowPtr) {
                row = e.loop_iter;
                pos = csr.rowptr[row];
              }
              if (e.region != Region::IA || !e.is_indirect) continue;
              if (pos >= csr.rowptr[row + 1]) pos = csr.rowptr[row];
              std::vector<std::uint64_t> truth(csr.col_indices.begin() + pos,
                                               csr.col_indices.begin() + pos + e.addresses.size());
              pos += e.addresses.size();
              ipt.refresh(0x400, w.layout.base(Region::IA) + tile * w.spec.vector_width * eb, w.program.shift, eb);
              const auto pred = ipt.scd_predict(0x400, truth);
              for (std::size_t l = 0; l < e.addresses.size(); ++l, ++lanes)
                exact += l < pred.size() && pred[l] == e.addresses[l];
            }
            ++traces;
          }
    d = fmt("%llu/%llu demand IA addresses over %llu traces", static_cast<unsigned long long>(exact),
            static_cast<unsigned long long>(lanes), static_cast<unsigned long long>(traces));
    return lanes > 0 && exact == lanes;
  });

  criterion("analytic-oracles", 30.0, [](std::string& d) {
    std::mt19937_64 rng(2024);
    double worst_i = 0.0, worst_a = 0.0, worst_c = 0.0;
    int specs = 0;
    bool ok = true;
    for (int t = 0; t < 20; ++t, ++specs) {
      const auto s = oracle::random_spec(rng, 8, 32);
      const auto mc = oracle::sample_layer(s, 1000 + t, 0.002, 400000, 2000);
      const double ei = std::abs(estimate_ideal_workload(s) - mc.both.mean) / mc.both.mean;
      const double ea = std::abs(estimate_alignment_redundancy(s) - mc.align.mean) / mc.align.mean;
      worst_i = std::max(worst_i, ei);
      worst_a = std::max(worst_a, ea);
      ok = ok && ei < 0.01 && ea < 0.01;
    }
    // Padding uses the exhaustive tile-scan oracle, so these masks stay small.
    for (int t = 0; t < 20; ++t) {
      const auto s = oracle::random_spec(rng, 4, 12);
      const ConstraintSet c{2, 4, static_cast<TileRule>(t % 3)};
      const auto mc = oracle::sample_padding(s, c, 5000 + t, 0.002, 400000);
      const double ec = mc.mean > 0 ? std::abs(expected_construction_padding(s, c) - mc.mean) / mc.mean : 0.0;
      worst_c = std::max(worst_c, ec);
      ok = ok && ec < 0.01;
    }
    d = fmt("worst relative error over %d specs: w_ideal %.4f, w_align %.4f, w_const %.4f (limit 0.01)", specs,
            worst_i, worst_a, worst_c);
    return ok;
  });

  criterion("closed-form-anchors", 1.0, [](std::string& d) {
    bool ok = true;
    double worst = 0.0;
    for (std::uint64_t m : {1, 7, 32})
      for (std::uint64_t k : {3, 16})
        for (std::uint64_t n : {5, 32}) {
          ok = ok && estimate_ideal_workload(LayerSparsitySpec::uniform(m, k, n, 1.0, 1.0, 0.3)) ==
                         static_cast<double>(m * n * k);
          for (double sw : {0.1, 0.5, 0.9})
            for (double si : {0.2, 0.75}) {
              const double expect = static_cast<double>(m * n * k) * sw * si;
              const double got = estimate_ideal_workload(LayerSparsitySpec::uniform(m, k, n, sw, si, 0.0));
              worst = std::max(worst, std::abs(got - expect) / expect);
            }
        }
    d = fmt("dense exact: %s; rho=0 worst relative error %.3g (limit 1e-9)", ok ? "yes" : "no", worst);
    return ok && worst <= 1e-9;
  });

  criterion("batch-stall", 60.0, [](std::string& d) {
    const auto& s = suite();
    bool ok = true;
    for (const auto& [p, kinds] : s.rows)
      for (const auto& [k, r] : kinds)
        if (r.per_batch_miss_rate < r.overall_miss_rate) {
          ok = false;
          d += p + "/" + k + " per-batch below overall; ";
        }
    const auto& none = s.rows.at("DS").at("none");
    const auto& nvr = s.rows.at("DS").at("nvr");
    const double f_overall = none.overall_miss_rate / nvr.overall_miss_rate;
    const double f_batch = none.per_batch_miss_rate / nvr.per_batch_miss_rate;
    d += fmt("DS with NVR: overall %.4f -> %.4f (x%.2f), per-batch %.4f -> %.4f (x%.2f)", none.overall_miss_rate,
             nvr.overall_miss_rate, f_overall, none.per_batch_miss_rate, nvr.per_batch_miss_rate, f_batch);
    return ok && f_overall > f_batch;
  });

  criterion("stall-ranking", 300.0, [](std::string& d) {
    const auto& s = suite();
    bool ok = true;
    double min_red = 1.0;
    std::string exceptions;
    for (const auto& [p, kinds] : s.rows) {
      auto st = [&](const char* k) { return kinds.at(k).stall_cycles; };
      const bool stream_ok = st("none") >= st("stream") || shuffle(s.archetype.at(p));
      if (st("none") < st("stream") && stream_ok) exceptions += p + " ";
      const bool mid_ok = st("stream") >= std::max(st("imp"), st("dvr"));
      const bool last_ok = std::min(st("imp"), st("dvr")) >= st("nvr");
      if (!(stream_ok && mid_ok && last_ok)) {
        ok = false;
        d += p + " rank violated; ";
      }
      min_red = std::min(min_red, stall_reduction(kinds.at("nvr")));
    }
    d += fmt("min NVR stall reduction %.3f (limit 0.70)", min_red);
    if (!exceptions.empty()) d += "; stream above none on shuffle presets: " + exceptions;
    return ok && min_red >= 0.70;
  });

  criterion("accuracy-coverage", 300.0, [](std::string& d) {
    const auto& s = suite();
    bool ok = true;
    double min_acc = 1.0, min_cov = 1.0;
    for (const auto& [p, kinds] : s.rows) {
      const auto& n = kinds.at("nvr");
      if (!shuffle(s.archetype.at(p))) {
        min_acc = std::min(min_acc, n.accuracy);
        min_cov = std::min(min_cov, n.coverage);
      }
      if (!(n.coverage > kinds.at("stream").coverage && n.coverage > kinds.at("dvr").coverage)) {
        ok = false;
        d += p + " coverage not above stream/dvr; ";
      }
    }
    d += fmt("SpMM/MoE presets: min NVR accuracy %.3f, min coverage %.3f (limit 0.9); coverage above stream and dvr on all presets: %s",
             min_acc, min_cov, ok ? "yes" : "no");
    return ok && min_acc >= 0.9 && min_cov >= 0.9;
  });

  criterion("offchip-traffic", 300.0, [](std::string& d) {
    const auto& s = suite();
    double min_drop = 1.0;
    for (const auto& [p, kinds] : s.rows) {
      const double base = static_cast<double>(kinds.at("none").offchip_demand_bytes);
      const double with = static_cast<double>(kinds.at("nvr").offchip_demand_bytes);
      min_drop = std::min(min_drop, base > 0 ? 1.0 - with / base : 1.0);
    }
    ExperimentConfig c;
    c.workload = preset_workload("DS");
    c.prefetcher.kind = "nvr";
    apply_axis(c, "nsb", "0");
    const auto off = run_single(c);
    apply_axis(c, "nsb", "16");
    const auto on = run_single(c);
    const double nsb_cut = 1.0 - static_cast<double>(on.npu_l2_demand_bytes) / off.npu_l2_demand_bytes;
    d = fmt("min demand off-chip drop with NVR %.3f (limit 0.50); DS NPU-to-L2 demand bytes %llu -> %llu with 16 KiB NSB (%.3f)",
            min_drop, static_cast<unsigned long long>(off.npu_l2_demand_bytes),
            static_cast<unsigned long long>(on.npu_l2_demand_bytes), nsb_cut);
    return min_drop >= 0.50 && on.npu_l2_demand_bytes < off.npu_l2_demand_bytes;
  });

  criterion("nsb-vs-l2", 600.0, [](std::string& d) {
    ExperimentConfig c;
    c.workload = preset_workload("DS");
    const auto r = sensitivity_sweep(c, {4, 16}, {256, 1024});
    d = fmt("perf/area gain NSB 4->16 KiB %.3f, L2 256->1024 KiB %.3f, ratio %.2f (limit 1.5); best cell %s",
            r.nsb_gain, r.l2_gain, r.gain_ratio, r.best.scenario_id.c_str());
    return r.gain_ratio >= 1.5;
  });

  criterion("simulator-invariants", 60.0, [](std::string& d) {
    bool ok = true;
    // Coalescing: lanes of one vector that share lines cost one DRAM read per line.
    {
      MemoryHierarchy h(HierarchyConfig::defaults());
      for (Cycle t = 0; t < 8; ++t) h.access(load_at(0x10000 + (t % 4) * 16 + (t / 4) * 64, t));
      const bool c_ok = h.bandwidth_ledger().dram_reads == 2 && h.demand_stats().coalesced == 6;
      d += fmt("coalescing %s; ", c_ok ? "ok" : "BAD");
      ok = ok && c_ok;
    }
    // LRU: 2-set x 2-way L1 against a reference recency list, L2 large enough to hold everything.
    {
      auto cfg = HierarchyConfig::defaults();
      cfg.l1 = {256, 64, 2, 1, 4};
      MemoryHierarchy h(cfg);
      std::vector<std::vector<Addr>> ref(2);
      std::vector<bool> seen(8, false);
      std::mt19937_64 rng(77);
      int mismatches = 0;
      for (int i = 0; i < 400; ++i) {
        const Addr line = rng() % 8;
        auto& set = ref[line % 2];
        const auto it = std::find(set.begin(), set.end(), line);
        const HitLevel expect = it != set.end() ? HitLevel::L1 : seen[line] ? HitLevel::L2 : HitLevel::DRAM;
        if (it != set.end()) set.erase(it);
        set.insert(set.begin(), line);
        if (set.size() > 2) set.pop_back();
        seen[line] = true;
        mismatches += h.access(load_at(line * 64, static_cast<Cycle>(i) * 1000)).hit_level != expect;
      }
      d += fmt("LRU mismatches %d/400; ", mismatches);
      ok = ok && mismatches == 0;
    }
    // Determinism: byte-identical reports from two runs.
    {
      ExperimentConfig c;
      c.workload = preset_workload("GCN");
      c.axes = {parse_axis("prefetcher=none,nvr")};
      const auto root = std::filesystem::temp_directory_path() / ("nvrsim_accept_" + std::to_string(::getpid()));
      emit_reports(run_experiment(c), root / "a", &c);
      emit_reports(run_experiment(c), root / "b", &c);
      bool same = true;
      for (const char* f : {"metrics.csv", "roofline.csv", "summary.txt"})
        same = same && slurp(root / "a" / f) == slurp(root / "b" / f);
      std::filesystem::remove_all(root);
      d += fmt("reruns byte-identical %s; ", same ? "yes" : "NO");
      ok = ok && same;
    }
    // Non-invasiveness: an engine that never issues leaves every preset's report identical.
    {
      int differ = 0;
      for (const auto& p : preset_names()) {
        const auto w = build_workload(preset_workload(p));
        PrefetcherConfig pc;
        pc.kind = "zero";
        auto zero = make_prefetcher(pc, w.image);
        NpuConfig npu;
        MemoryHierarchy m0(HierarchyConfig::defaults()), m1(HierarchyConfig::defaults());
        const auto a = execute(w.trace, m0, nullptr, npu, w.program);
        const auto b = execute(w.trace, m1, zero.get(), npu, w.program);
        differ += fingerprint(a) != fingerprint(b);
      }
      d += fmt("zero-issue engine differs on %d/8 presets", differ);
      ok = ok && differ == 0;
    }
    return ok;
  });

  std::printf("%s: %d criterion line(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
