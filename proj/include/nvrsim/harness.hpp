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

/**
 * @file harness.hpp
 * @brief Experiment configuration, scenario sweeps, metrics and report files.
 */

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "nvrsim/analytic.hpp"
#include "nvrsim/memory.hpp"
#include "nvrsim/npu.hpp"
#include "nvrsim/prefetch.hpp"
#include "nvrsim/workload.hpp"

namespace nvrsim {

/// `[section]` / `key = value` text. Keys keep their first-seen order.
struct IniFile {
  struct Entry {
    std::string key;
    std::string value;
    std::size_t line = 0;
  };
  std::map<std::string, std::vector<Entry>> sections;

  const Entry* find(const std::string& section, const std::string& key) const;
};

IniFile parse_ini(std::istream& is);
IniFile load_ini(const std::filesystem::path& p);

/// One sweep dimension, e.g. key "nsb" with values {2, 4, 8, 16}.
struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};
/// Parses `key=v1,v2,...`.
SweepAxis parse_axis(const std::string& text);

struct ExperimentConfig {
  WorkloadSpec workload;
  HierarchyConfig memory = HierarchyConfig::defaults();
  NpuConfig npu;
  PrefetcherConfig prefetcher;
  std::uint32_t repeats = 1;
  std::uint64_t seed = 1;
  /// Axes: workload (preset names), prefetcher (kinds), nsb (KiB, 0 = off), l2 (KiB), mshr, dram_bw.
  std::vector<SweepAxis> axes;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Builds a config from parsed text; unknown sections/keys are errors.
ExperimentConfig experiment_from_ini(const IniFile& ini);

struct PrefetchStats {
  std::uint64_t issued = 0;
  std::uint64_t useful = 0;
  std::uint64_t late = 0;
  std::uint64_t covered_misses = 0;
  std::uint64_t baseline_misses = 0;
};

struct AccuracyCoverage {
  double accuracy = 1.0;
  double coverage = 1.0;
};

AccuracyCoverage compute_accuracy_coverage(const PrefetchStats& s);

struct MetricsRow {
  std::string scenario_id;
  std::string workload;
  std::string prefetcher;
  std::uint32_t nsb_kib = 0;
  std::uint32_t l2_kib = 0;
  Cycle total_cycles = 0;
  Cycle base_cycles = 0;
  Cycle stall_cycles = 0;
  double overall_miss_rate = 0.0;
  double per_batch_miss_rate = 0.0;
  double accuracy = 1.0;
  double coverage = 1.0;
  std::uint64_t demand_misses = 0;
  std::uint64_t baseline_misses = 0;
  std::uint64_t prefetch_issued = 0;
  std::uint64_t prefetch_useful = 0;
  std::uint64_t offchip_bytes = 0;
  std::uint64_t offchip_demand_bytes = 0;
  std::uint64_t prefetch_bytes = 0;
  std::uint64_t npu_l2_demand_bytes = 0;
  std::uint64_t compute_ops = 0;
  double perf_per_area = 0.0;
  Cycle baseline_stall_cycles = 0;
};

/// Column names of metrics.csv, in order.
const std::vector<std::string>& metrics_columns();

/// One scenario with no axes applied. Runs the matched-seed no-prefetch baseline as well.
MetricsRow run_single(const ExperimentConfig& cfg, const std::string& scenario_id = "base");

/// Every point of the Cartesian product of cfg.axes, sorted by scenario id.
std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg);

struct SweepResult {
  std::vector<MetricsRow> rows;
  /// Best perf_per_area cell.
  MetricsRow best;
  /// perf_per_area gain of scaling NSB and of scaling L2 by the same factor from the smallest cell.
  double nsb_gain = 0.0;
  double l2_gain = 0.0;
  double gain_ratio = 0.0;
};

/// Grid over nsb_kib x l2_kib with NVR enabled.
SweepResult sensitivity_sweep(const ExperimentConfig& cfg, const std::vector<std::uint32_t>& nsb_kib,
                              const std::vector<std::uint32_t>& l2_kib);

/// Writes metrics.csv, roofline.csv and summary.txt into out_dir.
void emit_reports(const std::vector<MetricsRow>& rows, const std::filesystem::path& out_dir,
                  const ExperimentConfig* cfg = nullptr);

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);

/// Input of the `model` subcommand: sections [layer], [tiling] (optional), [machine], [traffic].
struct ModelSpec {
  LayerSparsitySpec layer;
  bool tiled = false;
  ConstraintSet tiling;
  MachineModel machine;
  Traffic traffic;
};

ModelSpec model_spec_from_ini(const IniFile& ini);

struct ModelResult {
  WorkloadEstimate workload;
  TimeEstimate time;
  BottleneckReport bottleneck;
  std::vector<RooflineRow> roofline;
};

ModelResult run_model(const ModelSpec& spec);
/// Key-value report with every WorkloadEstimate and TimeEstimate field.
void write_model_report(std::ostream& os, const ModelResult& r);
/// `intensity,attained,bound` rows.
void write_roofline_csv(std::ostream& os, const std::vector<RooflineRow>& rows);

/// Applies one axis value to a config copy (exposed for tests).
void apply_axis(ExperimentConfig& cfg, const std::string& key, const std::string& value);

}  // namespace nvrsim
