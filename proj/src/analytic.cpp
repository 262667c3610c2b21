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

#include "nvrsim/analytic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <unordered_map>

namespace nvrsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_ratio(double s, const char* what) {
  if (!(s >= 0.0 && s <= 1.0)) throw ConfigError(std::string(what) + " must be in [0, 1]");
}

void check_rho(double r) {
  if (!(r >= -1.0 && r <= 1.0)) throw ConfigError("rho must be in [-1, 1]");
}

struct GaussLegendre {
  static constexpr int kN = 20;
  std::array<double, kN> x{};
  std::array<double, kN> w{};

  GaussLegendre() {
    for (int i = 0; i < kN; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (kN + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 1; j <= kN; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
        }
        dp = kN * (z * p0 - p1) / (z * z - 1.0);
        const double dz = p0 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-15) break;
      }
      x[i] = z;
      w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }
};

const GaussLegendre& gl() {
  static const GaussLegendre g;
  return g;
}

struct PairKey {
  double a, b, r;
  bool operator==(const PairKey& o) const { return std::memcmp(this, &o, sizeof *this) == 0; }
};
struct PairHash {
  std::size_t operator()(const PairKey& k) const {
    std::uint64_t h[3];
    std::memcpy(h, &k, sizeof h);
    return static_cast<std::size_t>(h[0] * 0x9E3779B97F4A7C15ULL ^ (h[1] + 0x632BE59BD9B4E019ULL) * 31 ^ h[2]);
  }
};

/// Memoised prob_both_nonzero; layer specs repeat the same few ratio triples.
class PairCache {
 public:
  double operator()(double s_ia, double s_w, double rho) {
    const PairKey k{s_ia, s_w, rho};
    auto it = memo_.find(k);
    if (it != memo_.end()) return it->second;
    const double v = prob_both_nonzero(s_ia, s_w, rho);
    memo_.emplace(k, v);
    return v;
  }

 private:
  std::unordered_map<PairKey, double, PairHash> memo_;
};

struct TileSpan {
  std::size_t r0, r1, c0, c1;
};

template <typename F>
void for_each_tile(std::size_t rows, std::size_t cols, const ConstraintSet& c, F&& f) {
  for (std::size_t r0 = 0; r0 < rows; r0 += c.tile_rows)
    for (std::size_t c0 = 0; c0 < cols; c0 += c.tile_cols)
      f(TileSpan{r0, std::min(rows, r0 + c.tile_rows), c0, std::min(cols, c0 + c.tile_cols)});
}

/// P(element (r, c) ends up padded), elements independent with probabilities p(r, c).
template <typename P>
double pad_probability(const TileSpan& t, std::size_t r, std::size_t c, TileRule rule, P&& p) {
  double none_other = 1.0;
  switch (rule) {
    case TileRule::AnyNonzero:
      for (std::size_t rr = t.r0; rr < t.r1; ++rr)
        for (std::size_t cc = t.c0; cc < t.c1; ++cc)
          if (rr != r || cc != c) none_other *= 1.0 - p(rr, cc);
      break;
    case TileRule::RowAligned:
      for (std::size_t rr = t.r0; rr < t.r1; ++rr)
        if (rr != r) none_other *= 1.0 - p(rr, c);
      break;
    case TileRule::ColAligned:
      for (std::size_t cc = t.c0; cc < t.c1; ++cc)
        if (cc != c) none_other *= 1.0 - p(r, cc);
      break;
  }
  return (1.0 - p(r, c)) * (1.0 - none_other);
}

}  // namespace

Moments row_sparsity_distribution(std::uint64_t k, double s) {
  check_ratio(s, "sparsity ratio");
  if (k == 0) throw ConfigError("row length k must be >= 1");
  const double kd = static_cast<double>(k);
  return {kd * s, kd * s * (1.0 - s)};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("quantile probability must be in [0, 1]");
  if (p == 0.0) return -kInf;
  if (p == 1.0) return kInf;
  // Acklam's rational approximation, then one Halley step against erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double lo = 0.02425;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - lo) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

double bivariate_normal_cdf(double a, double b, double rho) {
  check_rho(rho);
  if (a == -kInf || b == -kInf) return 0.0;
  if (a == kInf) return normal_cdf(b);
  if (b == kInf) return normal_cdf(a);
  if (rho == 1.0) return normal_cdf(std::min(a, b));
  if (rho == -1.0) return std::max(0.0, normal_cdf(a) + normal_cdf(b) - 1.0);
  const double base = normal_cdf(a) * normal_cdf(b);
  if (rho == 0.0) return base;
  // d/drho P = bivariate density; with rho = sin(t) the integrand stays bounded up to |rho| = 1.
  const double top = std::asin(rho);
  constexpr int kPanels = 16;
  const double h = top / kPanels;
  const auto& g = gl();
  double sum = 0.0;
  for (int pnl = 0; pnl < kPanels; ++pnl) {
    const double mid = (pnl + 0.5) * h;
    for (int i = 0; i < GaussLegendre::kN; ++i) {
      const double t = mid + 0.5 * h * g.x[i];
      const double s = std::sin(t);
      const double c2 = 1.0 - s * s;
      sum += g.w[i] * std::exp(-(a * a - 2.0 * a * b * s + b * b) / (2.0 * c2));
    }
  }
  sum *= 0.5 * h / (2.0 * std::numbers::pi);
  return std::clamp(base + sum, 0.0, std::min(normal_cdf(a), normal_cdf(b)));
}

double prob_both_nonzero(double s_ia, double s_w, double rho) {
  check_ratio(s_ia, "s_ia");
  check_ratio(s_w, "s_w");
  check_rho(rho);
  if (rho == 0.0) return s_ia * s_w;
  if (s_ia == 0.0 || s_w == 0.0) return 0.0;
  if (s_ia == 1.0) return s_w;
  if (s_w == 1.0) return s_ia;
  return bivariate_normal_cdf(normal_quantile(s_ia), normal_quantile(s_w), rho);
}

LayerSparsitySpec LayerSparsitySpec::uniform(std::uint64_t m, std::uint64_t k, std::uint64_t n, double s_w,
                                             double s_ia, double rho) {
  LayerSparsitySpec s;
  s.m = m;
  s.k = k;
  s.n = n;
  s.s_w_row.assign(m, s_w);
  s.s_w_col.assign(k, s_w);
  s.s_ia_row.assign(k, s_ia);
  s.s_ia_col.assign(n, s_ia);
  s.rho = {rho};
  return s;
}

void LayerSparsitySpec::validate() const {
  if (m == 0 || k == 0 || n == 0) throw ConfigError("layer dims m, k, n must be >= 1");
  auto expect = [](const std::vector<double>& v, std::uint64_t len, const char* name) {
    if (v.size() != len) throw ConfigError(std::string(name) + " must have " + std::to_string(len) + " entries");
    for (double x : v) check_ratio(x, name);
  };
  expect(s_w_row, m, "s_w_row");
  expect(s_w_col, k, "s_w_col");
  expect(s_ia_row, k, "s_ia_row");
  expect(s_ia_col, n, "s_ia_col");
  if (rho.size() != 1 && rho.size() != k) throw ConfigError("rho must have 1 or k entries");
  for (double r : rho) check_rho(r);
}

double LayerSparsitySpec::p_w(std::uint64_t i, std::uint64_t l) const {
  const double a = s_w_row[i], b = s_w_col[l];
  return a == b ? a : std::sqrt(a * b);
}

double LayerSparsitySpec::p_ia(std::uint64_t l, std::uint64_t j) const {
  const double a = s_ia_row[l], b = s_ia_col[j];
  return a == b ? a : std::sqrt(a * b);
}

double estimate_ideal_workload(const LayerSparsitySpec& spec) {
  spec.validate();
  PairCache both;
  double total = 0.0;
  for (std::uint64_t l = 0; l < spec.k; ++l) {
    const double r = spec.rho_at(l);
    for (std::uint64_t i = 0; i < spec.m; ++i) {
      const double pw = spec.p_w(i, l);
      for (std::uint64_t j = 0; j < spec.n; ++j) total += both(spec.p_ia(l, j), pw, r);
    }
  }
  return total;
}

double estimate_alignment_redundancy(const LayerSparsitySpec& spec) {
  spec.validate();
  PairCache both;
  double total = 0.0;
  for (std::uint64_t l = 0; l < spec.k; ++l) {
    const double r = spec.rho_at(l);
    for (std::uint64_t i = 0; i < spec.m; ++i) {
      const double pw = spec.p_w(i, l);
      for (std::uint64_t j = 0; j < spec.n; ++j) {
        const double pi = spec.p_ia(l, j);
        total += std::max(0.0, pi - both(pi, pw, r));
      }
    }
  }
  return total;
}

std::string_view to_string(TileRule r) {
  switch (r) {
    case TileRule::AnyNonzero: return "any";
    case TileRule::RowAligned: return "row";
    case TileRule::ColAligned: return "col";
  }
  return "?";
}

TileRule parse_tile_rule(std::string_view s) {
  if (s == "any") return TileRule::AnyNonzero;
  if (s == "row") return TileRule::RowAligned;
  if (s == "col") return TileRule::ColAligned;
  throw ConfigError("unknown tile rule '" + std::string(s) + "' (expected any, row or col)");
}

void ConstraintSet::validate() const {
  if (tile_rows == 0 || tile_cols == 0) throw ConfigError("tile shape must be at least 1 x 1");
}

TilingResult optimize_tiling(const SparseMask& mask, const ConstraintSet& c) {
  c.validate();
  TilingResult res;
  res.tiled = mask;
  auto& out = res.tiled;
  for_each_tile(mask.rows, mask.cols, c, [&](const TileSpan& t) {
    switch (c.rule) {
      case TileRule::AnyNonzero: {
        bool any = false;
        for (std::size_t r = t.r0; r < t.r1 && !any; ++r)
          for (std::size_t cc = t.c0; cc < t.c1 && !any; ++cc) any = mask.at(r, cc);
        if (any)
          for (std::size_t r = t.r0; r < t.r1; ++r)
            for (std::size_t cc = t.c0; cc < t.c1; ++cc) out.set(r, cc, true);
        break;
      }
      case TileRule::RowAligned:
        for (std::size_t cc = t.c0; cc < t.c1; ++cc) {
          bool any = false;
          for (std::size_t r = t.r0; r < t.r1; ++r) any = any || mask.at(r, cc);
          if (any)
            for (std::size_t r = t.r0; r < t.r1; ++r) out.set(r, cc, true);
        }
        break;
      case TileRule::ColAligned:
        for (std::size_t r = t.r0; r < t.r1; ++r) {
          bool any = false;
          for (std::size_t cc = t.c0; cc < t.c1; ++cc) any = any || mask.at(r, cc);
          if (any)
            for (std::size_t cc = t.c0; cc < t.c1; ++cc) out.set(r, cc, true);
        }
        break;
    }
    const double lead = out.at(t.r0, t.c0) ? 1.0 : 0.0;
    res.objective += lead;
    for (std::size_t r = t.r0; r < t.r1; ++r)
      for (std::size_t cc = t.c0; cc < t.c1; ++cc) res.objective += std::abs(lead - (out.at(r, cc) ? 1.0 : 0.0));
  });
  res.w_const = out.popcount() - mask.popcount();
  return res;
}

double expected_construction_padding(const LayerSparsitySpec& spec, const ConstraintSet& c) {
  spec.validate();
  c.validate();
  double total = 0.0;
  auto p = [&](std::size_t r, std::size_t cc) { return spec.p_w(r, cc); };
  for_each_tile(spec.m, spec.k, c, [&](const TileSpan& t) {
    for (std::size_t r = t.r0; r < t.r1; ++r)
      for (std::size_t cc = t.c0; cc < t.c1; ++cc) total += pad_probability(t, r, cc, c.rule, p);
  });
  return total;
}

WorkloadEstimate estimate_workload(const LayerSparsitySpec& spec, const ConstraintSet* tiling) {
  WorkloadEstimate e;
  e.w_ideal = estimate_ideal_workload(spec);
  e.w_align = estimate_alignment_redundancy(spec);
  if (tiling) {
    tiling->validate();
    std::vector<double> ia_row_nnz(spec.k, 0.0);
    for (std::uint64_t l = 0; l < spec.k; ++l)
      for (std::uint64_t j = 0; j < spec.n; ++j) ia_row_nnz[l] += spec.p_ia(l, j);
    auto p = [&](std::size_t r, std::size_t cc) { return spec.p_w(r, cc); };
    for_each_tile(spec.m, spec.k, *tiling, [&](const TileSpan& t) {
      for (std::size_t r = t.r0; r < t.r1; ++r)
        for (std::size_t cc = t.c0; cc < t.c1; ++cc)
          e.w_const += pad_probability(t, r, cc, tiling->rule, p) * ia_row_nnz[cc];
    });
  }
  e.w_total = e.w_ideal + e.w_align + e.w_const;
  return e;
}

std::string_view to_string(Bottleneck b) { return b == Bottleneck::IO ? "IO" : "Compute"; }

void MachineModel::validate() const {
  if (!(mac_rate > 0.0)) throw ConfigError("machine.mac_rate must be > 0");
  if (!(bw > 0.0)) throw ConfigError("machine.bw must be > 0");
  if (l1_enabled && !(t_l1 > 0.0)) throw ConfigError("machine.t_l1 must be > 0 when l1 is enabled");
  if (l2_enabled && !(t_l2 > 0.0)) throw ConfigError("machine.t_l2 must be > 0 when l2 is enabled");
  if (miss_model.kind == MissModelKind::PowerLaw &&
      !(miss_model.l1_capacity_bytes > 0.0 && miss_model.l2_capacity_bytes > 0.0 && miss_model.coefficient >= 0.0))
    throw ConfigError("machine.miss_model: capacities must be > 0 and coefficient >= 0");
}

double predict_misses(const MissModel& m, const TrafficFeatures& f, int level) {
  if (m.kind == MissModelKind::Measured) return level == 1 ? f.measured_l1_misses : f.measured_l2_misses;
  const double cap = level == 1 ? m.l1_capacity_bytes : m.l2_capacity_bytes;
  if (f.footprint_bytes <= 0.0) return 0.0;
  return f.accesses * std::min(1.0, m.coefficient * std::pow(f.footprint_bytes / cap, m.exponent));
}

TimeEstimate estimate_time(const MachineModel& machine, const WorkloadEstimate& est, const Traffic& traffic) {
  machine.validate();
  TimeEstimate t;
  t.w_mvin = traffic.mvin_bytes;
  t.w_mvout = traffic.mvout_bytes;
  t.w_prefetch = machine.prefetch_enabled ? traffic.prefetch_bytes : 0.0;
  t.l1_misses = machine.l1_enabled ? predict_misses(machine.miss_model, traffic.features, 1) : 0.0;
  t.l2_misses = machine.l2_enabled ? predict_misses(machine.miss_model, traffic.features, 2) : 0.0;
  t.t_comp = est.w_total / machine.mac_rate;
  t.t_io = (t.w_mvin + t.w_mvout + t.w_prefetch) / machine.bw + machine.t_l1 * t.l1_misses +
           machine.t_l2 * t.l2_misses;
  t.bottleneck = t.t_io > t.t_comp ? Bottleneck::IO : Bottleneck::Compute;
  const double bytes = t.w_mvin + t.w_mvout + t.w_prefetch;
  t.roofline_point.intensity = bytes > 0.0 ? est.w_total / bytes : 0.0;
  const double span = std::max(t.t_comp, t.t_io);
  t.roofline_point.attained = span > 0.0 ? est.w_total / span : 0.0;
  return t;
}

BottleneckReport bottleneck_analysis(const TimeEstimate& t) {
  BottleneckReport r;
  r.bottleneck = t.t_io > t.t_comp ? Bottleneck::IO : Bottleneck::Compute;
  r.io_bound = r.bottleneck == Bottleneck::IO;
  r.speedup_literal = std::min(t.t_comp, t.t_io);
  r.latency_max = std::max(t.t_comp, t.t_io);
  return r;
}

std::vector<RooflineRow> roofline(const MachineModel& machine, const std::vector<RooflinePoint>& points) {
  machine.validate();
  std::vector<RooflineRow> out;
  out.reserve(points.size());
  for (const auto& p : points)
    out.push_back({p.intensity, p.attained, std::min(machine.mac_rate, p.intensity * machine.bw)});
  return out;
}

}  // namespace nvrsim
