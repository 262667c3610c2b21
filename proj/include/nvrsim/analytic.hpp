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
 * @file analytic.hpp
 * @brief Closed-form workload, redundancy and execution-time estimates for sparse layers.
 *
 * W is m x k and IA is k x n. Element (i, l) of W is non-zero with probability
 * sqrt(s_w_row[i] * s_w_col[l]), and likewise for IA; a W/IA pair meeting in one
 * multiply is coupled through a Gaussian copula with correlation rho[l].
 */

#pragma once

#include <string>
#include <vector>

#include "nvrsim/workload.hpp"

namespace nvrsim {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Gaussian approximation of the non-zero count in a row of k Bernoulli(s) elements.
Moments row_sparsity_distribution(std::uint64_t k, double s);

/// Standard normal CDF and its inverse.
double normal_cdf(double x);
double normal_quantile(double p);

/// P(X <= a, Y <= b) for standard normals with correlation rho.
double bivariate_normal_cdf(double a, double b, double rho);

/// P(IA != 0 and W != 0) when each is a thresholded standard normal with the given marginal densities.
double prob_both_nonzero(double s_ia, double s_w, double rho);

struct LayerSparsitySpec {
  std::uint64_t m = 0;
  std::uint64_t k = 0;
  std::uint64_t n = 0;
  std::vector<double> s_w_row;   // m
  std::vector<double> s_w_col;   // k
  std::vector<double> s_ia_row;  // k
  std::vector<double> s_ia_col;  // n
  std::vector<double> rho;       // 1 (broadcast) or k

  static LayerSparsitySpec uniform(std::uint64_t m, std::uint64_t k, std::uint64_t n, double s_w, double s_ia,
                                   double rho = 0.0);
  void validate() const;
  double p_w(std::uint64_t i, std::uint64_t l) const;
  double p_ia(std::uint64_t l, std::uint64_t j) const;
  double rho_at(std::uint64_t l) const { return rho.size() == 1 ? rho[0] : rho[l]; }
};

/// Expected multiplies with both operands non-zero.
double estimate_ideal_workload(const LayerSparsitySpec& spec);
/// Expected multiplies with IA non-zero but W zero.
double estimate_alignment_redundancy(const LayerSparsitySpec& spec);

enum class TileRule : std::uint8_t {
  AnyNonzero,  // a tile with any non-zero is kept whole
  RowAligned,  // every row of a tile takes the union column pattern
  ColAligned,  // every column of a tile takes the union row pattern
};
std::string_view to_string(TileRule r);
TileRule parse_tile_rule(std::string_view s);

struct ConstraintSet {
  std::uint32_t tile_rows = 1;
  std::uint32_t tile_cols = 4;
  TileRule rule = TileRule::AnyNonzero;
  void validate() const;
};

struct TilingResult {
  SparseMask tiled;
  std::uint64_t w_const = 0;  // elements added by the projection
  double objective = 0.0;
};

/**
 * Smallest superset of `mask` satisfying the tile rule. Tiles overhanging the
 * matrix edge are zero-extended; the extension is not part of the result.
 */
TilingResult optimize_tiling(const SparseMask& mask, const ConstraintSet& c);

/// Expected elements added by optimize_tiling on a W mask drawn from the spec's W probabilities.
double expected_construction_padding(const LayerSparsitySpec& spec, const ConstraintSet& c);

struct WorkloadEstimate {
  double w_ideal = 0.0;
  double w_align = 0.0;
  double w_const = 0.0;
  double w_total = 0.0;
};

/// w_const weights each padded W element (i, l) by the expected non-zero count of IA row l.
WorkloadEstimate estimate_workload(const LayerSparsitySpec& spec, const ConstraintSet* tiling = nullptr);

enum class MissModelKind : std::uint8_t { Measured, PowerLaw };

struct MissModel {
  MissModelKind kind = MissModelKind::Measured;
  /// PowerLaw: misses_i = accesses * min(1, coefficient * (footprint / capacity_i)^exponent).
  double coefficient = 1.0;
  double exponent = 1.0;
  double l1_capacity_bytes = 32 * 1024;
  double l2_capacity_bytes = 256 * 1024;
};

struct MachineModel {
  double mac_rate = 16.0;
  double bw = 64.0;
  bool l1_enabled = true;
  bool l2_enabled = true;
  double t_l1 = 10.0;   // penalty of a level-1 miss
  double t_l2 = 100.0;  // penalty of a level-2 miss
  bool prefetch_enabled = false;
  MissModel miss_model;
  void validate() const;
};

struct TrafficFeatures {
  double footprint_bytes = 0.0;
  double accesses = 0.0;
  double measured_l1_misses = 0.0;
  double measured_l2_misses = 0.0;
};

struct Traffic {
  double mvin_bytes = 0.0;
  double mvout_bytes = 0.0;
  double prefetch_bytes = 0.0;
  TrafficFeatures features;
};

enum class Bottleneck : std::uint8_t { Compute, IO };
std::string_view to_string(Bottleneck b);

struct RooflinePoint {
  double intensity = 0.0;  // ops per byte
  double attained = 0.0;   // ops per cycle
};

struct TimeEstimate {
  double t_comp = 0.0;
  double t_io = 0.0;
  double w_mvin = 0.0;
  double w_mvout = 0.0;
  double w_prefetch = 0.0;
  double l1_misses = 0.0;
  double l2_misses = 0.0;
  Bottleneck bottleneck = Bottleneck::Compute;
  RooflinePoint roofline_point;
};

/// Miss count the model predicts at level 1 or 2.
double predict_misses(const MissModel& m, const TrafficFeatures& f, int level);

TimeEstimate estimate_time(const MachineModel& machine, const WorkloadEstimate& est, const Traffic& traffic);

struct BottleneckReport {
  Bottleneck bottleneck = Bottleneck::Compute;
  double speedup_literal = 0.0;  // min(t_comp, t_io)
  double latency_max = 0.0;      // max(t_comp, t_io)
  bool io_bound = false;
};

BottleneckReport bottleneck_analysis(const TimeEstimate& t);

struct RooflineRow {
  double intensity = 0.0;
  double attained = 0.0;
  double bound = 0.0;  // min(mac_rate, intensity * bw)
};

std::vector<RooflineRow> roofline(const MachineModel& machine, const std::vector<RooflinePoint>& points);

}  // namespace nvrsim
