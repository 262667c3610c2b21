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
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <tuple>

#include "nvrsim/harness.hpp"

namespace nvrsim {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::uint32_t nsb_kib_of(const HierarchyConfig& m) {
  return m.nsb.enabled ? static_cast<std::uint32_t>(m.nsb.capacity_bytes / 1024) : 0;
}

double perf_per_area(Cycle total, std::uint32_t nsb_kib, std::uint32_t l2_kib) {
  return 1.0 / (static_cast<double>(std::max<Cycle>(total, 1)) * static_cast<double>(nsb_kib + l2_kib));
}

std::vector<std::string> row_fields(const MetricsRow& r) {
  return {r.scenario_id,
          r.workload,
          r.prefetcher,
          std::to_string(r.nsb_kib),
          std::to_string(r.l2_kib),
          std::to_string(r.total_cycles),
          std::to_string(r.base_cycles),
          std::to_string(r.stall_cycles),
          fmt(r.overall_miss_rate),
          fmt(r.per_batch_miss_rate),
          fmt(r.accuracy),
          fmt(r.coverage),
          std::to_string(r.demand_misses),
          std::to_string(r.baseline_misses),
          std::to_string(r.baseline_stall_cycles),
          std::to_string(r.prefetch_issued),
          std::to_string(r.prefetch_useful),
          std::to_string(r.offchip_bytes),
          std::to_string(r.offchip_demand_bytes),
          std::to_string(r.prefetch_bytes),
          std::to_string(r.npu_l2_demand_bytes),
          std::to_string(r.compute_ops),
          fmt(r.perf_per_area)};
}

void join(std::ostream& os, const std::vector<std::string>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << '\n';
}

struct Scenario {
  std::string id;
  ExperimentConfig cfg;
};

std::vector<Scenario> expand(const ExperimentConfig& base) {
  std::vector<Scenario> out{{"", base}};
  for (const auto& axis : base.axes) {
    std::vector<Scenario> next;
    for (const auto& s : out)
      for (const auto& v : axis.values) {
        Scenario t = s;
        apply_axis(t.cfg, axis.key, v);
        t.id += (t.id.empty() ? "" : "|") + axis.key + "=" + v;
        next.push_back(std::move(t));
      }
    out = std::move(next);
  }
  if (base.repeats > 1) {
    std::vector<Scenario> next;
    for (const auto& s : out)
      for (std::uint32_t r = 0; r < base.repeats; ++r) {
        Scenario t = s;
        t.cfg.workload.seed += r;
        t.id += (t.id.empty() ? "" : "|") + std::string("rep=") + std::to_string(r);
        next.push_back(std::move(t));
      }
    out = std::move(next);
  }
  for (auto& s : out)
    if (s.id.empty()) s.id = "base";
  return out;
}

}  // namespace

AccuracyCoverage compute_accuracy_coverage(const PrefetchStats& s) {
  AccuracyCoverage r;
  r.accuracy = s.issued == 0 ? 1.0 : static_cast<double>(s.useful) / static_cast<double>(s.issued);
  r.coverage = s.baseline_misses == 0 ? 1.0
                                      : static_cast<double>(s.covered_misses) / static_cast<double>(s.baseline_misses);
  return r;
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols{
      "scenario_id",   "workload",          "prefetcher",      "nsb_kib",          "l2_kib",
      "total_cycles",  "base_cycles",       "stall_cycles",    "overall_miss_rate", "per_batch_miss_rate",
      "accuracy",      "coverage",          "demand_misses",   "baseline_misses",  "baseline_stall_cycles",
      "prefetch_issued", "prefetch_useful", "offchip_bytes",   "offchip_demand_bytes", "prefetch_bytes",
      "npu_l2_demand_bytes", "compute_ops", "perf_per_area"};
  return cols;
}

MetricsRow run_single(const ExperimentConfig& cfg_in, const std::string& scenario_id) {
  ExperimentConfig cfg = cfg_in;
  cfg.workload.vector_width = cfg.npu.vector_width;
  cfg.npu.element_bits = cfg.workload.element_bits;
  cfg.prefetcher.vector_width = cfg.npu.vector_width;
  cfg.validate();

  const Workload wl = build_workload(cfg.workload);

  MemoryHierarchy base_mem(cfg.memory);
  const SimReport base = execute(wl.trace, base_mem, nullptr, cfg.npu, wl.program);

  SimReport rep = base;
  PrefetchStats ps;
  if (cfg.prefetcher.kind != "none") {
    MemoryHierarchy mem(cfg.memory);
    auto pf = make_prefetcher(cfg.prefetcher, wl.image);
    rep = execute(wl.trace, mem, pf.get(), cfg.npu, wl.program);
    ps.issued = rep.prefetch.issued;
    ps.useful = rep.prefetch.useful;
    ps.late = rep.prefetch.late;
  }
  ps.baseline_misses = base.demand_misses();
  ps.covered_misses = base.demand_misses() > rep.demand_misses() ? base.demand_misses() - rep.demand_misses() : 0;
  const auto ac = compute_accuracy_coverage(ps);

  MetricsRow r;
  r.scenario_id = scenario_id;
  r.workload = cfg.workload.name;
  r.prefetcher = cfg.prefetcher.kind;
  r.nsb_kib = nsb_kib_of(cfg.memory);
  r.l2_kib = static_cast<std::uint32_t>(cfg.memory.l2.capacity_bytes / 1024);
  r.total_cycles = rep.total_cycles;
  r.base_cycles = rep.base_exec_cycles;
  r.stall_cycles = rep.miss_stall_cycles;
  r.overall_miss_rate = rep.overall_miss_rate;
  r.per_batch_miss_rate = rep.per_batch_miss_rate;
  r.accuracy = ac.accuracy;
  r.coverage = ac.coverage;
  r.demand_misses = rep.demand_misses();
  r.baseline_misses = base.demand_misses();
  r.baseline_stall_cycles = base.miss_stall_cycles;
  r.prefetch_issued = ps.issued;
  r.prefetch_useful = ps.useful;
  const auto& off = rep.ledger.offchip;
  r.offchip_bytes = off.demand_bytes + off.prefetch_bytes + off.writeback_bytes;
  r.offchip_demand_bytes = off.demand_bytes;
  r.prefetch_bytes = off.prefetch_bytes;
  r.npu_l2_demand_bytes = rep.ledger.npu_l2.demand_bytes;
  r.compute_ops = rep.compute_ops;
  r.perf_per_area = perf_per_area(r.total_cycles, r.nsb_kib, r.l2_kib);
  return r;
}

std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<MetricsRow> rows;
  for (const auto& s : expand(cfg)) rows.push_back(run_single(s.cfg, s.id));
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.scenario_id < b.scenario_id; });
  return rows;
}

SweepResult sensitivity_sweep(const ExperimentConfig& cfg_in, const std::vector<std::uint32_t>& nsb_kib,
                              const std::vector<std::uint32_t>& l2_kib) {
  if (nsb_kib.empty() || l2_kib.empty()) throw ConfigError("sensitivity_sweep: empty grid axis");
  ExperimentConfig cfg = cfg_in;
  cfg.prefetcher.kind = "nvr";
  cfg.axes.clear();

  SweepResult res;
  auto cell = [&](std::uint32_t n, std::uint32_t l) -> const MetricsRow* {
    for (const auto& r : res.rows)
      if (r.nsb_kib == n && r.l2_kib == l) return &r;
    return nullptr;
  };
  for (auto n : nsb_kib)
    for (auto l : l2_kib) {
      if (cell(n, l)) continue;
      ExperimentConfig c = cfg;
      apply_axis(c, "nsb", std::to_string(n));
      apply_axis(c, "l2", std::to_string(l));
      res.rows.push_back(run_single(c, "nsb=" + std::to_string(n) + "|l2=" + std::to_string(l)));
    }
  std::sort(res.rows.begin(), res.rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.nsb_kib, a.l2_kib) < std::tie(b.nsb_kib, b.l2_kib);
  });
  res.best = *std::max_element(res.rows.begin(), res.rows.end(),
                               [](const auto& a, const auto& b) { return a.perf_per_area < b.perf_per_area; });

  // Both resources are scaled by the same factor from the smallest cell.
  const auto n0 = *std::min_element(nsb_kib.begin(), nsb_kib.end());
  const auto n1 = *std::max_element(nsb_kib.begin(), nsb_kib.end());
  const auto l0 = *std::min_element(l2_kib.begin(), l2_kib.end());
  const double factor = n0 > 0 ? static_cast<double>(n1) / n0 : 1.0;
  std::uint32_t l1 = l0;
  for (auto l : l2_kib)
    if (std::abs(static_cast<double>(l) - l0 * factor) < std::abs(static_cast<double>(l1) - l0 * factor)) l1 = l;
  const MetricsRow* base = cell(n0, l0);
  const MetricsRow* up_n = cell(n1, l0);
  const MetricsRow* up_l = cell(n0, l1);
  if (base && up_n && up_l) {
    res.nsb_gain = up_n->perf_per_area / base->perf_per_area;
    res.l2_gain = up_l->perf_per_area / base->perf_per_area;
    res.gain_ratio = res.l2_gain > 0 ? res.nsb_gain / res.l2_gain : 0.0;
  }
  return res;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  join(os, metrics_columns());
  for (const auto& r : rows) join(os, row_fields(r));
}

void emit_reports(const std::vector<MetricsRow>& rows, const std::filesystem::path& out_dir,
                  const ExperimentConfig* cfg) {
  if (rows.empty()) throw ConfigError("emit_reports: no rows");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + out_dir.string() + "': " + ec.message());

  auto open = [&](const char* name) {
    std::ofstream f(out_dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + (out_dir / name).string() + "'");
    return f;
  };

  {
    auto f = open("metrics.csv");
    write_metrics_csv(f, rows);
  }

  // Attained throughput against the compute and off-chip ceilings of the configured machine.
  const HierarchyConfig mem = cfg ? cfg->memory : HierarchyConfig::defaults();
  const NpuConfig npu = cfg ? cfg->npu : NpuConfig{};
  const double peak_ops = static_cast<double>(npu.vector_width) / std::max<std::uint32_t>(npu.compute_cycles_per_group, 1);
  const double bw = mem.dram.bandwidth_bytes_per_cycle;
  {
    auto f = open("roofline.csv");
    join(f, {"scenario_id", "operational_intensity", "attained_ops_per_cycle", "peak_ops_per_cycle",
             "bandwidth_bytes_per_cycle", "ceiling_ops_per_cycle", "bound"});
    for (const auto& r : rows) {
      const double oi = r.offchip_bytes ? static_cast<double>(r.compute_ops) / r.offchip_bytes : 0.0;
      const double attained = r.total_cycles ? static_cast<double>(r.compute_ops) / r.total_cycles : 0.0;
      const double ceiling = r.offchip_bytes ? std::min(peak_ops, oi * bw) : peak_ops;
      const bool mem_bound = r.offchip_bytes && oi * bw < peak_ops;
      join(f, {r.scenario_id, fmt(oi), fmt(attained), fmt(peak_ops), fmt(bw), fmt(ceiling),
               mem_bound ? "memory" : "compute"});
    }
  }

  {
    auto f = open("summary.txt");
    f << "scenarios: " << rows.size() << '\n';
    if (cfg) {
      f << "workload: " << cfg->workload.name << " (" << to_string(cfg->workload.archetype) << ")\n";
      f << "exec_mode: " << to_string(cfg->npu.exec_mode) << ", vector_width " << cfg->npu.vector_width << '\n';
    }
    f << "baseline: each row pairs with a no-prefetch run of the same trace and hierarchy\n\n";
    for (const auto& r : rows) {
      const double red = r.baseline_stall_cycles
                             ? 1.0 - static_cast<double>(r.stall_cycles) / static_cast<double>(r.baseline_stall_cycles)
                             : 0.0;
      f << r.scenario_id << ": total " << r.total_cycles << ", stall " << r.stall_cycles << " (baseline "
        << r.baseline_stall_cycles << ", reduction " << fmt(red) << "), miss rate overall " << fmt(r.overall_miss_rate)
        << " per-batch " << fmt(r.per_batch_miss_rate) << ", accuracy " << fmt(r.accuracy) << " coverage "
        << fmt(r.coverage) << '\n';
    }
  }
}

ModelResult run_model(const ModelSpec& spec) {
  ModelResult r;
  r.workload = estimate_workload(spec.layer, spec.tiled ? &spec.tiling : nullptr);
  r.time = estimate_time(spec.machine, r.workload, spec.traffic);
  r.bottleneck = bottleneck_analysis(r.time);
  r.roofline = roofline(spec.machine, {r.time.roofline_point});
  return r;
}

void write_model_report(std::ostream& os, const ModelResult& r) {
  const auto& w = r.workload;
  const auto& t = r.time;
  os << "w_ideal = " << fmt(w.w_ideal) << '\n'
     << "w_align = " << fmt(w.w_align) << '\n'
     << "w_const = " << fmt(w.w_const) << '\n'
     << "w_total = " << fmt(w.w_total) << '\n'
     << "t_comp = " << fmt(t.t_comp) << '\n'
     << "t_io = " << fmt(t.t_io) << '\n'
     << "w_mvin = " << fmt(t.w_mvin) << '\n'
     << "w_mvout = " << fmt(t.w_mvout) << '\n'
     << "w_prefetch = " << fmt(t.w_prefetch) << '\n'
     << "l1_misses = " << fmt(t.l1_misses) << '\n'
     << "l2_misses = " << fmt(t.l2_misses) << '\n'
     << "bottleneck = " << to_string(t.bottleneck) << '\n'
     << "operational_intensity = " << fmt(t.roofline_point.intensity) << '\n'
     << "attained_ops_per_cycle = " << fmt(t.roofline_point.attained) << '\n'
     << "speedup_literal = " << fmt(r.bottleneck.speedup_literal) << '\n'
     << "latency_max = " << fmt(r.bottleneck.latency_max) << '\n';
}

void write_roofline_csv(std::ostream& os, const std::vector<RooflineRow>& rows) {
  join(os, {"intensity", "attained", "bound"});
  for (const auto& r : rows) join(os, {fmt(r.intensity), fmt(r.attained), fmt(r.bound)});
}

}  // namespace nvrsim
