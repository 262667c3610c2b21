#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "nvrsim/harness.hpp"

using namespace nvrsim;
namespace fs = std::filesystem;

namespace {

IniFile ini(const std::string& text) {
  std::istringstream is(text);
  return parse_ini(is);
}

ExperimentConfig small(const std::string& prefetcher = "nvr") {
  ExperimentConfig c;
  c.workload.name = "small";
  c.workload.archetype = Archetype::SpmmCsr;
  c.workload.dims = {32, 256, 32};
  c.workload.density_w = 0.1;
  c.workload.seed = 3;
  c.prefetcher.kind = prefetcher;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

fs::path scratch_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("nvrsim_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  return d;
}

std::string error_of(const std::string& text) {
  try {
    // Start from a valid preset so only the probed key can fail.
    experiment_from_ini(ini("[workload]\npreset = GCN\n" + text)).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

// --- configuration --------------------------------------------------------------

TEST_CASE("ini parsing keeps sections, keys and line numbers") {
  auto f = ini("# comment\n[workload]\npreset = DS\n; other\n[memory]\nl2_kib = 512  \n");
  REQUIRE(f.find("workload", "preset"));
  CHECK(f.find("workload", "preset")->value == "DS");
  CHECK(f.find("memory", "l2_kib")->value == "512");
  CHECK(f.find("memory", "l2_kib")->line == 6);
  CHECK(f.find("memory", "l1_kib") == nullptr);
}

TEST_CASE("ini syntax errors") {
  CHECK_THROWS_WITH_AS(ini("key = 1\n"), doctest::Contains("outside any [section]"), ConfigError);
  CHECK_THROWS_WITH_AS(ini("[a\n"), doctest::Contains("unterminated"), ConfigError);
  CHECK_THROWS_WITH_AS(ini("[a]\njunk\n"), doctest::Contains("expected key = value"), ConfigError);
  CHECK_THROWS_WITH_AS(ini("[a]\nk = 1\nk = 2\n"), doctest::Contains("a.k (line 3): duplicate key"), ConfigError);
  CHECK_THROWS_AS(load_ini("/nonexistent/cfg.ini"), ConfigError);
}

TEST_CASE("config errors name the field") {
  CHECK(error_of("[bogus]\nx = 1\n").find("unknown section [bogus]") != std::string::npos);
  CHECK(error_of("[memory]\nl2_sets = 4\n").find("memory.l2_sets") != std::string::npos);
  CHECK(error_of("[memory]\nl2_kib = big\n").find("memory.l2_kib") != std::string::npos);
  CHECK(error_of("[npu]\nrob_entries = 0\n").find("rob_entries") != std::string::npos);
  CHECK(error_of("[prefetcher]\nkind = markov\n").find("prefetcher.kind") != std::string::npos);
  CHECK(error_of("[prefetcher]\nnvr_fuzzy_overfetch = maybe\n").find("nvr_fuzzy_overfetch") != std::string::npos);
  CHECK_THROWS_AS(experiment_from_ini(ini("[workload]\npreset = NOPE\n")), ConfigError);
  CHECK_THROWS_WITH_AS(experiment_from_ini(ini("[workload]\nm = 4\n")), doctest::Contains("dims"), ConfigError);
  CHECK(error_of("[workload]\ndensity_w = 1.5\n").find("densities") != std::string::npos);
  CHECK(error_of("[experiment]\nrepeats = 0\n").find("repeats") != std::string::npos);
  CHECK(error_of("[npu]\nvector_width = 0\n").find("vector_width") != std::string::npos);
  CHECK(error_of("[sweep]\ncolour = red,blue\n").find("colour") != std::string::npos);
  CHECK(error_of("[memory]\nl2_kib = 256\n[prefetcher]\nkind = nvr\n") == "");
}

TEST_CASE("ini values reach the config") {
  auto c = experiment_from_ini(ini(
      "[workload]\npreset = ST\nseed = 9\n[memory]\nl2_kib = 512\nnsb_kib = 8\nmshr_entries = 16\n"
      "[npu]\nexec_mode = IdealOoO\n[prefetcher]\nkind = dvr\ndegree = 2\n[experiment]\nrepeats = 3\n"
      "[sweep]\nnsb = 0,4\n"));
  CHECK(c.workload.archetype == Archetype::MoeRouting);
  CHECK(c.workload.seed == 9);
  CHECK(c.memory.l2.capacity_bytes == 512 * 1024);
  CHECK(c.memory.nsb.enabled);
  CHECK(c.memory.nsb.capacity_bytes == 8 * 1024);
  CHECK(c.memory.l2.mshr_entries == 16);
  CHECK(c.npu.exec_mode == ExecMode::IdealOoO);
  CHECK(c.prefetcher.kind == "dvr");
  CHECK(c.prefetcher.degree == 2);
  CHECK(c.repeats == 3);
  REQUIRE(c.axes.size() == 1);
  CHECK(c.axes[0].key == "nsb");
  CHECK(c.axes[0].values == std::vector<std::string>{"0", "4"});
}

TEST_CASE("axis parsing") {
  auto a = parse_axis("l2=128, 256 ,512");
  CHECK(a.key == "l2");
  CHECK(a.values == std::vector<std::string>{"128", "256", "512"});
  CHECK_THROWS_AS(parse_axis("l2"), ConfigError);
  CHECK_THROWS_AS(parse_axis("=1,2"), ConfigError);
}

TEST_CASE("apply_axis") {
  auto c = small();
  apply_axis(c, "nsb", "0");
  CHECK_FALSE(c.memory.nsb.enabled);
  apply_axis(c, "nsb", "4");
  CHECK(c.memory.nsb.enabled);
  CHECK(c.memory.nsb.capacity_bytes == 4096);
  apply_axis(c, "l2", "128");
  CHECK(c.memory.l2.capacity_bytes == 128 * 1024);
  apply_axis(c, "prefetcher", "imp");
  CHECK(c.prefetcher.kind == "imp");
  apply_axis(c, "workload", "DS");
  CHECK(c.workload.archetype == Archetype::TopKShuffle);
  CHECK_THROWS_AS(apply_axis(c, "l3", "1"), ConfigError);
}

// --- metrics ---------------------------------------------------------------------

TEST_CASE("accuracy and coverage conventions") {
  PrefetchStats s;
  s.issued = 100;
  s.useful = 90;
  s.baseline_misses = 200;
  s.covered_misses = 150;
  auto ac = compute_accuracy_coverage(s);
  CHECK(ac.accuracy == doctest::Approx(0.9));
  CHECK(ac.coverage == doctest::Approx(0.75));
  auto none = compute_accuracy_coverage(PrefetchStats{});
  CHECK(none.accuracy == 1.0);
  CHECK(none.coverage == 1.0);
}

TEST_CASE("dense workload with no baseline misses reports coverage 1") {
  auto c = small();
  c.workload.dims = {4, 4, 16};
  c.workload.density_w = 1.0;
  c.memory.l1.capacity_bytes = 32 * 1024;
  auto r = run_single(c);
  if (r.baseline_misses == 0) CHECK(r.coverage == 1.0);
  CHECK(r.coverage >= 0.0);
  CHECK(r.coverage <= 1.0);
}

TEST_CASE("coverage agrees with a separately run baseline") {
  for (const char* k : {"stream", "imp", "dvr", "nvr"}) {
    auto c = small(k);
    const auto row = run_single(c);
    // Double-run oracle: the two simulations done by hand.
    const auto w = build_workload(c.workload);
    MemoryHierarchy m0(c.memory), m1(c.memory);
    const auto base = execute(w.trace, m0, nullptr, c.npu, w.program);
    c.prefetcher.vector_width = c.npu.vector_width;
    auto pf = make_prefetcher(c.prefetcher, w.image);
    const auto with = execute(w.trace, m1, pf.get(), c.npu, w.program);
    INFO(k);
    CHECK(row.baseline_misses == base.demand_misses());
    CHECK(row.demand_misses == with.demand_misses());
    CHECK(row.baseline_stall_cycles == base.miss_stall_cycles);
    CHECK(row.stall_cycles == with.miss_stall_cycles);
    REQUIRE(row.baseline_misses >= row.demand_misses);
    const auto covered = std::llround(row.coverage * static_cast<double>(row.baseline_misses));
    CHECK(static_cast<std::uint64_t>(covered) == row.baseline_misses - row.demand_misses);
    CHECK(row.prefetch_issued == with.prefetch.issued);
    CHECK(row.prefetch_useful == with.prefetch.useful);
  }
}

TEST_CASE("rows respect rate bounds and stall closure") {
  auto c = small();
  c.axes = {parse_axis("prefetcher=none,stream,imp,dvr,nvr"), parse_axis("l2=64,256")};
  for (const auto& r : run_experiment(c)) {
    INFO(r.scenario_id);
    for (double v : {r.overall_miss_rate, r.per_batch_miss_rate, r.accuracy, r.coverage}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(r.per_batch_miss_rate >= r.overall_miss_rate);
    CHECK(r.prefetch_useful <= r.prefetch_issued);
    CHECK(r.perf_per_area > 0.0);
    CHECK(r.total_cycles == r.base_cycles + r.stall_cycles);
    CHECK(r.perf_per_area == doctest::Approx(1.0 / (static_cast<double>(r.total_cycles) * (r.nsb_kib + r.l2_kib))));
  }
}

// --- experiments -----------------------------------------------------------------

TEST_CASE("sweep rows are the Cartesian product, sorted by id") {
  auto c = small();
  c.axes = {parse_axis("nsb=0,4,8"), parse_axis("l2=128,256"), parse_axis("prefetcher=none,nvr")};
  auto rows = run_experiment(c);
  CHECK(rows.size() == 12);
  std::set<std::string> ids;
  for (const auto& r : rows) ids.insert(r.scenario_id);
  CHECK(ids.size() == 12);
  CHECK(std::is_sorted(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.scenario_id < b.scenario_id; }));
  c.repeats = 2;
  CHECK(run_experiment(c).size() == 24);
  c.axes.clear();
  c.repeats = 1;
  CHECK(run_experiment(c).size() == 1);
}

TEST_CASE("repeats use different seeds") {
  auto c = small();
  c.repeats = 3;
  auto rows = run_experiment(c);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].scenario_id.find("rep=0") != std::string::npos);
  CHECK((rows[0].total_cycles != rows[1].total_cycles || rows[1].total_cycles != rows[2].total_cycles));
}

TEST_CASE("same config twice gives identical rows and reports") {
  auto c = small("none");
  c.axes = {parse_axis("prefetcher=none,nvr")};
  const auto a = run_experiment(c);
  const auto b = run_experiment(c);
  std::ostringstream sa, sb;
  write_metrics_csv(sa, a);
  write_metrics_csv(sb, b);
  CHECK(sa.str() == sb.str());
  const auto d1 = scratch_dir("det1"), d2 = scratch_dir("det2");
  emit_reports(a, d1, &c);
  emit_reports(b, d2, &c);
  for (const char* f : {"metrics.csv", "roofline.csv", "summary.txt"}) {
    INFO(f);
    CHECK(!slurp(d1 / f).empty());
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("preset suite: NVR never stalls more than no prefetching") {
  ExperimentConfig c;
  c.workload = preset_workload("GCN");
  std::string presets;
  for (const auto& p : preset_names()) presets += (presets.empty() ? "" : ",") + p;
  c.axes = {parse_axis("workload=" + presets), parse_axis("prefetcher=none,stream,imp,dvr,nvr")};
  const auto rows = run_experiment(c);
  CHECK(rows.size() == 40);
  for (const auto& r : rows) {
    INFO(r.scenario_id);
    if (r.prefetcher == "nvr") CHECK(r.stall_cycles <= r.baseline_stall_cycles);
    CHECK(r.per_batch_miss_rate >= r.overall_miss_rate);
  }
}

TEST_CASE("sensitivity sweep") {
  auto c = small("none");
  auto one = sensitivity_sweep(c, {4}, {256});
  REQUIRE(one.rows.size() == 1);
  CHECK(one.rows[0].prefetcher == "nvr");
  CHECK(one.best.scenario_id == one.rows[0].scenario_id);
  CHECK_THROWS_AS(sensitivity_sweep(c, {}, {256}), ConfigError);

  auto grid = sensitivity_sweep(c, {4, 16}, {256, 1024});
  CHECK(grid.rows.size() == 4);
  double best = 0.0;
  for (const auto& r : grid.rows) best = std::max(best, r.perf_per_area);
  CHECK(grid.best.perf_per_area == best);
  CHECK(grid.gain_ratio == doctest::Approx(grid.nsb_gain / grid.l2_gain));
}

TEST_CASE("doubling L2 without NSB never raises the miss rate") {
  for (const char* preset : {"GCN", "DS", "ST"}) {
    ExperimentConfig c;
    c.workload = preset_workload(preset);
    c.prefetcher.kind = "none";
    double prev = 2.0;
    for (std::uint32_t l2 : {64u, 128u, 256u, 512u, 1024u}) {
      apply_axis(c, "nsb", "0");
      apply_axis(c, "l2", std::to_string(l2));
      const auto r = run_single(c);
      INFO(preset << " l2 " << l2);
      CHECK(r.overall_miss_rate <= prev);
      prev = r.overall_miss_rate;
    }
  }
}

// --- reports ---------------------------------------------------------------------

TEST_CASE("metrics csv layout") {
  auto row = run_single(small());
  std::ostringstream os;
  write_metrics_csv(os, {row});
  const std::string s = os.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == 2);
  std::string header = s.substr(0, s.find('\n'));
  std::string expect;
  for (const auto& c : metrics_columns()) expect += (expect.empty() ? "" : ",") + c;
  CHECK(header == expect);
  const std::vector<std::string> fixed{"scenario_id", "workload", "prefetcher", "nsb_kib", "l2_kib", "total_cycles",
                                       "base_cycles", "stall_cycles"};
  for (std::size_t i = 0; i < fixed.size(); ++i) CHECK(metrics_columns()[i] == fixed[i]);
  CHECK(metrics_columns().back() == "perf_per_area");
  const std::string body = s.substr(s.find('\n') + 1);
  CHECK(std::count(body.begin(), body.end(), ',') == static_cast<long>(metrics_columns().size() - 1));
}

TEST_CASE("emit_reports writes three files and refuses bad targets") {
  auto row = run_single(small());
  const auto d = scratch_dir("emit");
  emit_reports({row}, d);
  CHECK(fs::exists(d / "metrics.csv"));
  CHECK(fs::exists(d / "roofline.csv"));
  CHECK(fs::exists(d / "summary.txt"));
  const std::string roof = slurp(d / "roofline.csv");
  CHECK(std::count(roof.begin(), roof.end(), '\n') == 2);
  CHECK_THROWS_AS(emit_reports({}, d), ConfigError);
  // A regular file where a directory is expected.
  std::ofstream(d / "blocker") << "x";
  CHECK_THROWS_AS(emit_reports({row}, d / "blocker" / "out"), std::runtime_error);
  fs::remove_all(d);
}

// --- model spec ------------------------------------------------------------------

TEST_CASE("model spec parsing and report") {
  auto ms = model_spec_from_ini(ini(
      "[layer]\nm = 8\nk = 8\nn = 8\ns_w = 0.5\ns_ia = 0.5\n"
      "[machine]\nmac_rate = 4\nbw = 8\nl1_enabled = false\nl2_enabled = false\n"
      "[traffic]\nmvin_bytes = 600\nmvout_bytes = 200\n"));
  CHECK_FALSE(ms.tiled);
  CHECK(ms.layer.s_w_row.size() == 8);
  const auto r = run_model(ms);
  CHECK(r.workload.w_ideal == doctest::Approx(128.0));
  CHECK(r.time.t_comp == doctest::Approx(r.workload.w_total / 4));
  CHECK(r.time.t_io == doctest::Approx(100.0));
  REQUIRE(r.roofline.size() == 1);
  CHECK(r.roofline[0].bound == doctest::Approx(std::min(4.0, r.roofline[0].intensity * 8)));

  std::ostringstream rep, csv;
  write_model_report(rep, r);
  write_roofline_csv(csv, r.roofline);
  for (const char* key : {"w_ideal", "w_align", "w_const", "w_total", "t_comp", "t_io", "w_mvin", "w_mvout",
                          "w_prefetch", "bottleneck"})
    CHECK(rep.str().find(std::string(key) + " = ") != std::string::npos);
  CHECK(csv.str().rfind("intensity,attained,bound\n", 0) == 0);
}

TEST_CASE("model spec lists, tiling and errors") {
  auto ms = model_spec_from_ini(ini("[layer]\nm = 2\nk = 3\nn = 1\ns_w_row = 0.5, 1\nrho = 0.1,0.2,0.3\n"
                                    "[tiling]\ntile_rows = 2\ntile_cols = 2\nrule = col\n"));
  CHECK(ms.layer.s_w_row == std::vector<double>{0.5, 1.0});
  CHECK(ms.layer.rho.size() == 3);
  CHECK(ms.tiled);
  CHECK(ms.tiling.rule == TileRule::ColAligned);
  CHECK_THROWS_AS(model_spec_from_ini(ini("[machine]\nbw = 1\n")), ConfigError);
  CHECK_THROWS_WITH_AS(model_spec_from_ini(ini("[layer]\nm = 2\nk = 2\nn = 2\ns_w_row = 0.5\n")),
                       doctest::Contains("s_w_row"), ConfigError);
  CHECK_THROWS_WITH_AS(model_spec_from_ini(ini("[layer]\nm = 1\nk = 1\nn = 1\n[machine]\nbw = 0\n")),
                       doctest::Contains("bw"), ConfigError);
  CHECK_THROWS_WITH_AS(model_spec_from_ini(ini("[layer]\nm = 1\nk = 1\nn = 1\n[machine]\nmiss_model = magic\n")),
                       doctest::Contains("machine.miss_model"), ConfigError);
  CHECK_THROWS_AS(model_spec_from_ini(ini("[layer]\nm = 1\nk = 1\nn = 1\n[traffic]\nmvin_bytes = -5\n")), ConfigError);
  CHECK_THROWS_AS(model_spec_from_ini(ini("[layer]\nm = 1\nk = 1\nn = 1\n[extra]\nx = 1\n")), ConfigError);
}
