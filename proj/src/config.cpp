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

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "nvrsim/harness.hpp"

namespace nvrsim {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto t = trim(tok);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::string where(const std::string& section, const IniFile::Entry& e) {
  return section + "." + e.key + " (line " + std::to_string(e.line) + ")";
}

std::uint64_t to_u64(const std::string& section, const IniFile::Entry& e) {
  std::uint64_t v = 0;
  const auto* b = e.value.data();
  const auto* end = b + e.value.size();
  auto [p, ec] = std::from_chars(b, end, v);
  if (ec != std::errc() || p != end) throw ConfigError(where(section, e) + ": expected a non-negative integer, got '" + e.value + "'");
  return v;
}

std::uint32_t to_u32(const std::string& section, const IniFile::Entry& e) {
  const auto v = to_u64(section, e);
  if (v > 0xffffffffULL) throw ConfigError(where(section, e) + ": value out of range");
  return static_cast<std::uint32_t>(v);
}

double to_double(const std::string& section, const IniFile::Entry& e) {
  try {
    std::size_t used = 0;
    const double v = std::stod(e.value, &used);
    if (used != e.value.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where(section, e) + ": expected a number, got '" + e.value + "'");
  }
}

bool to_bool(const std::string& section, const IniFile::Entry& e) {
  if (e.value == "true" || e.value == "1" || e.value == "yes" || e.value == "on") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no" || e.value == "off") return false;
  throw ConfigError(where(section, e) + ": expected a boolean, got '" + e.value + "'");
}

using Setter = std::function<void(const std::string&, const IniFile::Entry&)>;

void apply_section(const IniFile& ini, const std::string& section, const std::map<std::string, Setter>& setters) {
  auto it = ini.sections.find(section);
  if (it == ini.sections.end()) return;
  for (const auto& e : it->second) {
    auto s = setters.find(e.key);
    if (s == setters.end()) throw ConfigError(where(section, e) + ": unknown key");
    s->second(section, e);
  }
}

}  // namespace

const IniFile::Entry* IniFile::find(const std::string& section, const std::string& key) const {
  auto it = sections.find(section);
  if (it == sections.end()) return nullptr;
  for (const auto& e : it->second)
    if (e.key == key) return &e;
  return nullptr;
}

IniFile parse_ini(std::istream& is) {
  IniFile f;
  std::string line, section;
  std::size_t no = 0;
  while (std::getline(is, line)) {
    ++no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.resize(hash);
    auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(no) + ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      f.sections[section];
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(no) + ": expected key = value");
    if (section.empty()) throw ConfigError("line " + std::to_string(no) + ": key outside any [section]");
    auto key = trim(t.substr(0, eq));
    for (const auto& e : f.sections[section])
      if (e.key == key) throw ConfigError(section + "." + key + " (line " + std::to_string(no) + "): duplicate key");
    f.sections[section].push_back({key, trim(t.substr(eq + 1)), no});
  }
  return f;
}

IniFile load_ini(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open config file '" + p.string() + "'");
  return parse_ini(in);
}

SweepAxis parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("axis '" + text + "': expected key=v1,v2,...");
  SweepAxis a{trim(text.substr(0, eq)), split_list(text.substr(eq + 1))};
  if (a.key.empty() || a.values.empty()) throw ConfigError("axis '" + text + "': empty key or value list");
  return a;
}

void ExperimentConfig::validate() const {
  workload.validate();
  memory.validate();
  npu.validate();
  prefetcher.validate();
  if (repeats == 0) throw ConfigError("experiment.repeats must be >= 1");
  if (workload.vector_width != npu.vector_width)
    throw ConfigError("npu.vector_width must match the workload vector width");
  static const std::vector<std::string> keys{"workload", "prefetcher", "nsb", "l2", "mshr", "dram_bw", "exec_mode"};
  for (const auto& a : axes) {
    if (std::find(keys.begin(), keys.end(), a.key) == keys.end())
      throw ConfigError("sweep axis '" + a.key + "': unknown (expected workload, prefetcher, nsb, l2, mshr, dram_bw, exec_mode)");
    if (a.values.empty()) throw ConfigError("sweep axis '" + a.key + "': no values");
  }
}

void apply_axis(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  auto num = [&](const std::string& v) {
    IniFile::Entry e{key, v, 0};
    return to_u32("axis", e);
  };
  if (key == "workload") {
    const auto bits = cfg.workload.vector_width;
    cfg.workload = preset_workload(value);
    cfg.workload.vector_width = bits;
  } else if (key == "prefetcher") {
    cfg.prefetcher.kind = value;
  } else if (key == "nsb") {
    const auto kib = num(value);
    cfg.memory.nsb.enabled = kib > 0;
    if (kib > 0) cfg.memory.nsb.capacity_bytes = std::uint64_t{kib} * 1024;
  } else if (key == "l2") {
    cfg.memory.l2.capacity_bytes = std::uint64_t{num(value)} * 1024;
  } else if (key == "mshr") {
    cfg.memory.l2.mshr_entries = num(value);
  } else if (key == "dram_bw") {
    cfg.memory.dram.bandwidth_bytes_per_cycle = num(value);
  } else if (key == "exec_mode") {
    cfg.npu.exec_mode = parse_exec_mode(value);
  } else {
    throw ConfigError("sweep axis '" + key + "': unknown");
  }
}

ExperimentConfig experiment_from_ini(const IniFile& ini) {
  static const std::vector<std::string> known{"workload", "memory", "npu", "prefetcher", "experiment", "sweep"};
  for (const auto& [name, entries] : ini.sections)
    if (std::find(known.begin(), known.end(), name) == known.end())
      throw ConfigError("unknown section [" + name + "]");

  ExperimentConfig c;
  // A preset, when named, is the starting point the other workload keys refine.
  if (const auto* p = ini.find("workload", "preset")) c.workload = preset_workload(p->value);

  auto& w = c.workload;
  apply_section(ini, "workload", {
      {"preset", [](auto&, auto&) {}},
      {"name", [&](auto&, auto& e) { w.name = e.value; }},
      {"archetype", [&](auto&, auto& e) { w.archetype = parse_archetype(e.value); }},
      {"m", [&](auto& s, auto& e) { w.dims.m = to_u64(s, e); }},
      {"k", [&](auto& s, auto& e) { w.dims.k = to_u64(s, e); }},
      {"n", [&](auto& s, auto& e) { w.dims.n = to_u64(s, e); }},
      {"density_w", [&](auto& s, auto& e) { w.density_w = to_double(s, e); }},
      {"density_ia", [&](auto& s, auto& e) { w.density_ia = to_double(s, e); }},
      {"correlation_rho", [&](auto& s, auto& e) { w.correlation_rho = to_double(s, e); }},
      {"topk_k", [&](auto& s, auto& e) { w.topk_k = to_u32(s, e); }},
      {"n_experts", [&](auto& s, auto& e) { w.n_experts = to_u32(s, e); }},
      {"moe_skew", [&](auto& s, auto& e) { w.moe_skew = to_double(s, e); }},
      {"element_bits", [&](auto& s, auto& e) { w.element_bits = to_u32(s, e); }},
      {"seed", [&](auto& s, auto& e) { w.seed = to_u64(s, e); }},
  });

  auto& m = c.memory;
  std::uint32_t ways_l1 = m.l1.ways, ways_l2 = m.l2.ways, line = m.l2.line_bytes;
  std::uint64_t l1_kib = m.l1.capacity_bytes / 1024, l2_kib = m.l2.capacity_bytes / 1024,
                nsb_kib = m.nsb.capacity_bytes / 1024;
  std::uint32_t mshr = m.l2.mshr_entries;
  apply_section(ini, "memory", {
      {"l1_kib", [&](auto& s, auto& e) { l1_kib = to_u64(s, e); }},
      {"l2_kib", [&](auto& s, auto& e) { l2_kib = to_u64(s, e); }},
      {"line_bytes", [&](auto& s, auto& e) { line = to_u32(s, e); }},
      {"ways_l1", [&](auto& s, auto& e) { ways_l1 = to_u32(s, e); }},
      {"ways_l2", [&](auto& s, auto& e) { ways_l2 = to_u32(s, e); }},
      {"nsb_kib", [&](auto& s, auto& e) { nsb_kib = to_u64(s, e); }},
      {"nsb_ways", [&](auto& s, auto& e) { m.nsb.ways = to_u32(s, e); }},
      {"mshr_entries", [&](auto& s, auto& e) { mshr = to_u32(s, e); }},
      {"dram_latency", [&](auto& s, auto& e) { m.dram.latency_cycles = to_u32(s, e); }},
      {"dram_bw", [&](auto& s, auto& e) { m.dram.bandwidth_bytes_per_cycle = to_u32(s, e); }},
      {"l1_latency", [&](auto& s, auto& e) { m.l1.hit_latency_cycles = to_u32(s, e); }},
      {"l2_latency", [&](auto& s, auto& e) { m.l2.hit_latency_cycles = to_u32(s, e); }},
      {"nsb_latency", [&](auto& s, auto& e) { m.nsb.hit_latency_cycles = to_u32(s, e); }},
  });
  m.l1.capacity_bytes = l1_kib * 1024;
  m.l2.capacity_bytes = l2_kib * 1024;
  if (ini.find("memory", "nsb_kib")) m.nsb.enabled = nsb_kib > 0;
  if (nsb_kib > 0) m.nsb.capacity_bytes = nsb_kib * 1024;
  m.l1.ways = ways_l1;
  m.l2.ways = ways_l2;
  m.l1.line_bytes = m.l2.line_bytes = m.nsb.line_bytes = line;
  m.l2.mshr_entries = m.l1.mshr_entries = m.nsb.mshr_entries = mshr;

  auto& n = c.npu;
  apply_section(ini, "npu", {
      {"vector_width", [&](auto& s, auto& e) { n.vector_width = to_u32(s, e); }},
      {"exec_mode", [&](auto&, auto& e) { n.exec_mode = parse_exec_mode(e.value); }},
      {"element_bits", [&](auto& s, auto& e) { w.element_bits = to_u32(s, e); }},
      {"rob_entries", [&](auto& s, auto& e) { n.rob_entries = to_u32(s, e); }},
      {"sparse_unit_latency", [&](auto& s, auto& e) { n.sparse_unit_latency = to_u32(s, e); }},
      {"compute_cycles_per_group", [&](auto& s, auto& e) { n.compute_cycles_per_group = to_u32(s, e); }},
  });
  w.vector_width = n.vector_width;
  n.element_bits = w.element_bits;

  auto& p = c.prefetcher;
  apply_section(ini, "prefetcher", {
      {"kind", [&](auto&, auto& e) { p.kind = e.value; }},
      {"degree", [&](auto& s, auto& e) { p.degree = to_u32(s, e); }},
      {"confidence_threshold", [&](auto& s, auto& e) { p.confidence_threshold = to_u32(s, e); }},
      {"nvr_fuzzy_overfetch", [&](auto& s, auto& e) { p.nvr_fuzzy_overfetch = to_bool(s, e); }},
      {"nsb_enabled", [&](auto& s, auto& e) { m.nsb.enabled = to_bool(s, e); }},
      {"table_entries", [&](auto& s, auto& e) { p.table_entries = to_u32(s, e); }},
      {"lookahead_chains", [&](auto& s, auto& e) { p.lookahead_chains = to_u32(s, e); }},
  });
  p.vector_width = n.vector_width;

  apply_section(ini, "experiment", {
      {"repeats", [&](auto& s, auto& e) { c.repeats = to_u32(s, e); }},
      {"seed", [&](auto& s, auto& e) { c.seed = w.seed = to_u64(s, e); }},
  });
  if (auto it = ini.sections.find("sweep"); it != ini.sections.end())
    for (const auto& e : it->second) c.axes.push_back({e.key, split_list(e.value)});

  c.validate();
  return c;
}

ModelSpec model_spec_from_ini(const IniFile& ini) {
  static const std::vector<std::string> known{"layer", "tiling", "machine", "traffic"};
  for (const auto& [name, entries] : ini.sections)
    if (std::find(known.begin(), known.end(), name) == known.end())
      throw ConfigError("unknown section [" + name + "]");
  if (!ini.sections.count("layer")) throw ConfigError("model spec needs a [layer] section");

  ModelSpec ms;
  auto list = [](const std::string& s, const IniFile::Entry& e) {
    std::vector<double> out;
    for (const auto& tok : split_list(e.value)) out.push_back(to_double(s, {e.key, tok, e.line}));
    if (out.empty()) throw ConfigError(where(s, e) + ": empty list");
    return out;
  };
  // A scalar density fills both the row and the column vector; explicit lists override it.
  std::uint64_t m = 0, k = 0, n = 0;
  std::vector<double> w_row, w_col, ia_row, ia_col, rho{0.0};
  double s_w = 1.0, s_ia = 1.0;
  apply_section(ini, "layer", {
      {"m", [&](auto& s, auto& e) { m = to_u64(s, e); }},
      {"k", [&](auto& s, auto& e) { k = to_u64(s, e); }},
      {"n", [&](auto& s, auto& e) { n = to_u64(s, e); }},
      {"s_w", [&](auto& s, auto& e) { s_w = to_double(s, e); }},
      {"s_ia", [&](auto& s, auto& e) { s_ia = to_double(s, e); }},
      {"s_w_row", [&](auto& s, auto& e) { w_row = list(s, e); }},
      {"s_w_col", [&](auto& s, auto& e) { w_col = list(s, e); }},
      {"s_ia_row", [&](auto& s, auto& e) { ia_row = list(s, e); }},
      {"s_ia_col", [&](auto& s, auto& e) { ia_col = list(s, e); }},
      {"rho", [&](auto& s, auto& e) { rho = list(s, e); }},
  });
  auto& L = ms.layer;
  L = LayerSparsitySpec::uniform(m, k, n, s_w, s_ia, rho[0]);
  if (!w_row.empty()) L.s_w_row = w_row;
  if (!w_col.empty()) L.s_w_col = w_col;
  if (!ia_row.empty()) L.s_ia_row = ia_row;
  if (!ia_col.empty()) L.s_ia_col = ia_col;
  L.rho = rho;
  L.validate();

  if (ini.sections.count("tiling")) {
    ms.tiled = true;
    apply_section(ini, "tiling", {
        {"tile_rows", [&](auto& s, auto& e) { ms.tiling.tile_rows = to_u32(s, e); }},
        {"tile_cols", [&](auto& s, auto& e) { ms.tiling.tile_cols = to_u32(s, e); }},
        {"rule", [&](auto&, auto& e) { ms.tiling.rule = parse_tile_rule(e.value); }},
    });
    ms.tiling.validate();
  }

  auto& mc = ms.machine;
  apply_section(ini, "machine", {
      {"mac_rate", [&](auto& s, auto& e) { mc.mac_rate = to_double(s, e); }},
      {"bw", [&](auto& s, auto& e) { mc.bw = to_double(s, e); }},
      {"l1_enabled", [&](auto& s, auto& e) { mc.l1_enabled = to_bool(s, e); }},
      {"l2_enabled", [&](auto& s, auto& e) { mc.l2_enabled = to_bool(s, e); }},
      {"t_l1", [&](auto& s, auto& e) { mc.t_l1 = to_double(s, e); }},
      {"t_l2", [&](auto& s, auto& e) { mc.t_l2 = to_double(s, e); }},
      {"prefetch_enabled", [&](auto& s, auto& e) { mc.prefetch_enabled = to_bool(s, e); }},
      {"miss_model", [&](auto& s, auto& e) {
         if (e.value == "measured") mc.miss_model.kind = MissModelKind::Measured;
         else if (e.value == "power_law") mc.miss_model.kind = MissModelKind::PowerLaw;
         else throw ConfigError(where(s, e) + ": expected measured or power_law, got '" + e.value + "'");
       }},
      {"miss_coefficient", [&](auto& s, auto& e) { mc.miss_model.coefficient = to_double(s, e); }},
      {"miss_exponent", [&](auto& s, auto& e) { mc.miss_model.exponent = to_double(s, e); }},
      {"l1_kib", [&](auto& s, auto& e) { mc.miss_model.l1_capacity_bytes = to_double(s, e) * 1024; }},
      {"l2_kib", [&](auto& s, auto& e) { mc.miss_model.l2_capacity_bytes = to_double(s, e) * 1024; }},
  });
  mc.validate();

  auto& t = ms.traffic;
  apply_section(ini, "traffic", {
      {"mvin_bytes", [&](auto& s, auto& e) { t.mvin_bytes = to_double(s, e); }},
      {"mvout_bytes", [&](auto& s, auto& e) { t.mvout_bytes = to_double(s, e); }},
      {"prefetch_bytes", [&](auto& s, auto& e) { t.prefetch_bytes = to_double(s, e); }},
      {"footprint_bytes", [&](auto& s, auto& e) { t.features.footprint_bytes = to_double(s, e); }},
      {"accesses", [&](auto& s, auto& e) { t.features.accesses = to_double(s, e); }},
      {"l1_misses", [&](auto& s, auto& e) { t.features.measured_l1_misses = to_double(s, e); }},
      {"l2_misses", [&](auto& s, auto& e) { t.features.measured_l2_misses = to_double(s, e); }},
  });
  for (double v : {t.mvin_bytes, t.mvout_bytes, t.prefetch_bytes, t.features.footprint_bytes, t.features.accesses,
                   t.features.measured_l1_misses, t.features.measured_l2_misses})
    if (!(v >= 0.0)) throw ConfigError("traffic: byte and miss counts must be >= 0");
  return ms;
}

}  // namespace nvrsim
