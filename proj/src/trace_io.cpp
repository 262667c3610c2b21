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

#include <istream>
#include <ostream>
#include <sstream>

#include "nvrsim/workload.hpp"

namespace nvrsim {

void write_trace(std::ostream& os, const Trace& trace, std::uint64_t spec_hash, std::uint64_t seed) {
  os << "# nvr-trace v1 spec_hash=" << std::hex << spec_hash << std::dec << " seed=" << seed
     << " events=" << trace.size() << '\n';
  for (const auto& e : trace) {
    os << "0x" << std::hex << e.pc << std::dec << ' ' << to_string(e.kind) << ' ' << e.lanes << ' '
       << unsigned{e.loop_level} << ' ' << e.loop_iter << ' ' << e.bound_observed << ' ' << (e.is_indirect ? 1 : 0)
       << ' ' << to_string(e.region);
    os << std::hex;
    for (Addr a : e.addresses) os << " 0x" << a;
    os << std::dec;
    if (!e.values.empty()) {
      os << " ;";
      for (auto v : e.values) os << ' ' << v;
    }
    os << '\n';
  }
}

TraceFile read_trace(std::istream& is) {
  TraceFile f;
  std::string line;
  if (!std::getline(is, line) || line.rfind("# nvr-trace v1", 0) != 0)
    throw ConfigError("trace file: missing '# nvr-trace v1' header");
  {
    std::istringstream hs(line.substr(14));
    std::string tok;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const auto key = tok.substr(0, eq);
      const auto val = tok.substr(eq + 1);
      if (key == "spec_hash") f.spec_hash = std::stoull(val, nullptr, 16);
      if (key == "seed") f.seed = std::stoull(val);
    }
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    TraceEvent e;
    std::string pc, kind, region;
    unsigned level = 0;
    int indirect = 0;
    if (!(ls >> pc >> kind >> e.lanes >> level >> e.loop_iter >> e.bound_observed >> indirect >> region))
      throw ConfigError("trace file: malformed record at line " + std::to_string(lineno));
    e.pc = std::stoull(pc, nullptr, 16);
    e.kind = parse_event_kind(kind);
    e.loop_level = static_cast<std::uint8_t>(level);
    e.is_indirect = indirect != 0;
    e.region = parse_region(region);
    std::string tok;
    bool in_values = false;
    while (ls >> tok) {
      if (tok == ";") {
        in_values = true;
        continue;
      }
      if (in_values)
        e.values.push_back(std::stoull(tok));
      else
        e.addresses.push_back(std::stoull(tok, nullptr, 16));
    }
    const bool mem = e.kind == EventKind::VectorLoad || e.kind == EventKind::VectorStore;
    if (mem && (e.lanes == 0 || e.addresses.size() != e.lanes))
      throw ConfigError("trace file: lane/address count mismatch at line " + std::to_string(lineno));
    f.events.push_back(std::move(e));
  }
  return f;
}

}  // namespace nvrsim
