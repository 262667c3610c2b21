// nvr-sim: command-line front end for the simulator, the analytic model and the overhead table.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <fstream>

#include "nvrsim/harness.hpp"

using namespace nvrsim;

namespace {

void print_overhead(std::uint32_t n) {
  const auto rep = hardware_overhead(n);
  std::printf("%-10s %8s %10s  %s\n", "component", "bits", "table_bits", "formula");
  for (const auto& r : rep.rows)
    std::printf("%-10s %8llu %10llu  %s\n", r.component.c_str(), static_cast<unsigned long long>(r.bits),
                static_cast<unsigned long long>(r.table_bits), r.formula.c_str());
  std::printf("total      %8llu bits = %.3f KiB (table: %.2f KiB), plus %u KiB NSB\n",
              static_cast<unsigned long long>(rep.total_bits), rep.total_kib, rep.table_total_kib, rep.nsb_kib);
}

int run_cmd(const std::string& config, const std::string& out) {
  const auto cfg = experiment_from_ini(load_ini(config));
  const auto rows = run_experiment(cfg);
  emit_reports(rows, out, &cfg);
  std::cout << "wrote " << rows.size() << " scenario(s) to " << out << '\n';
  return 0;
}

int model_cmd(const std::string& spec_file, const std::string& out) {
  const auto spec = model_spec_from_ini(load_ini(spec_file));
  const auto res = run_model(spec);
  write_model_report(std::cout, res);
  if (out.empty()) {
    std::cout << '\n';
    write_roofline_csv(std::cout, res.roofline);
    return 0;
  }
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + out + "': " + ec.message());
  std::ofstream rep(std::filesystem::path(out) / "model_report.txt"), csv(std::filesystem::path(out) / "roofline.csv");
  if (!rep || !csv) throw std::runtime_error("cannot write into '" + out + "'");
  write_model_report(rep, res);
  write_roofline_csv(csv, res.roofline);
  return 0;
}

int sweep_cmd(const std::string& config, const std::vector<std::string>& axes, const std::string& out) {
  auto cfg = experiment_from_ini(load_ini(config));
  // Command-line axes replace config axes with the same key.
  for (const auto& text : axes) {
    auto a = parse_axis(text);
    std::erase_if(cfg.axes, [&](const SweepAxis& x) { return x.key == a.key; });
    cfg.axes.push_back(std::move(a));
  }
  cfg.validate();
  const auto rows = run_experiment(cfg);
  write_metrics_csv(std::cout, rows);
  if (!out.empty()) emit_reports(rows, out, &cfg);

  const MetricsRow* best = nullptr;
  for (const auto& r : rows)
    if (!best || r.perf_per_area > best->perf_per_area) best = &r;
  std::cerr << "best perf/area: " << best->scenario_id << " (" << best->perf_per_area << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace-driven NPU memory simulator with vector runahead prefetching"};
  app.require_subcommand(1);

  std::string config, out, spec;
  std::vector<std::string> axes;
  std::uint32_t n = 16;

  auto* run = app.add_subcommand("run", "simulate every scenario of a config file");
  run->add_option("--config", config, "experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "output directory")->required();

  auto* model = app.add_subcommand("model", "evaluate the analytic workload and time model");
  model->add_option("--spec", spec, "model spec file")->required()->check(CLI::ExistingFile);
  model->add_option("--out", out, "write model_report.txt and roofline.csv here instead of stdout");

  auto* overhead = app.add_subcommand("overhead", "print the prefetcher storage table");
  overhead->add_option("--n", n, "parallel entries per table bank")->required();

  auto* sweep = app.add_subcommand("sweep", "run the Cartesian product of sweep axes");
  sweep->add_option("--config", config, "experiment config")->required()->check(CLI::ExistingFile);
  sweep->add_option("--axis", axes, "key=v1,v2,... (repeatable)");
  sweep->add_option("--out", out, "also write reports into this directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_cmd(config, out);
    if (*model) return model_cmd(spec, out);
    if (*overhead) {
      print_overhead(n);
      return 0;
    }
    if (*sweep) return sweep_cmd(config, axes, out);
  } catch (const ConfigError& e) {
    std::cerr << "nvr-sim: invalid configuration: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "nvr-sim: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
