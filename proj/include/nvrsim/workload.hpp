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
 * @file workload.hpp
 * @brief Sparse structures and deterministic NPU access traces.
 *
 * Three generators cover the irregular access classes: CSR SpMM (indirect
 * gathers), TopK vector shuffles (long-stride shuffled loads) and MoE routing
 * (dynamic per-expert loop bounds). Every generator is a pure function of its
 * inputs; the only randomness is SplitMix64 seeded from the WorkloadSpec.
 */

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nvrsim/common.hpp"

namespace nvrsim {

struct SparseMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bits;  // row-major, 0/1
  double density_target = 0.0;
  std::uint64_t seed = 0;

  bool at(std::size_t r, std::size_t c) const { return bits[r * cols + c] != 0; }
  void set(std::size_t r, std::size_t c, bool v) { bits[r * cols + c] = v ? 1 : 0; }
  std::size_t popcount() const;
  static SparseMask zeros(std::size_t rows, std::size_t cols);
};

struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint32_t> rowptr;
  std::vector<std::uint32_t> col_indices;
  std::vector<float> values;

  std::size_t nnz() const { return col_indices.size(); }
  std::size_t row_nnz(std::size_t r) const { return rowptr[r + 1] - rowptr[r]; }
  /// Support of the matrix as a mask.
  SparseMask support() const;
  /// Throws ConfigError when a structural invariant is broken.
  void validate() const;
};

enum class Archetype : std::uint8_t { SpmmCsr, TopKShuffle, MoeRouting };
enum class EventKind : std::uint8_t { VectorLoad, VectorStore, Compute, Branch };
enum class Region : std::uint8_t { W, IA, OA, RowPtr, ColIdx, Other };
inline constexpr std::size_t kRegionCount = 6;

std::string_view to_string(Archetype a);
std::string_view to_string(EventKind k);
std::string_view to_string(Region r);
Archetype parse_archetype(std::string_view s);
EventKind parse_event_kind(std::string_view s);
Region parse_region(std::string_view s);

/**
 * One NPU-visible event. Loads of index structures (RowPtr, ColIdx) also carry
 * the loaded words in `values`; they are the data the sparse unit decodes.
 */
struct TraceEvent {
  Addr pc = 0;
  EventKind kind = EventKind::Compute;
  std::uint32_t lanes = 0;
  std::uint8_t loop_level = 0;
  std::uint64_t loop_iter = 0;
  std::uint64_t bound_observed = 0;  // Branch only
  bool is_indirect = false;
  Region region = Region::Other;
  std::vector<Addr> addresses;
  std::vector<std::uint64_t> values;

  bool operator==(const TraceEvent&) const = default;
};

using Trace = std::vector<TraceEvent>;

/// Fixed synthetic program counters, one per static site of the kernels.
namespace pcs {
inline constexpr Addr kSpmmRowPtr = 0x10000;
inline constexpr Addr kSpmmNnzLoop = 0x10004;
inline constexpr Addr kSpmmTileLoop = 0x10008;
inline constexpr Addr kSpmmColIdx = 0x1000c;
inline constexpr Addr kSpmmW = 0x10010;
inline constexpr Addr kSpmmIaGather = 0x10014;
inline constexpr Addr kSpmmMac = 0x10018;
inline constexpr Addr kSpmmOaStore = 0x1001c;

inline constexpr Addr kTopkStepLoop = 0x20000;
inline constexpr Addr kTopkKLoop = 0x20004;
inline constexpr Addr kTopkIndex = 0x20008;
inline constexpr Addr kTopkGather = 0x2000c;
inline constexpr Addr kTopkMac = 0x20010;
inline constexpr Addr kTopkStore = 0x20014;

inline constexpr Addr kMoeRowPtr = 0x30000;
inline constexpr Addr kMoeTokenLoop = 0x30004;
inline constexpr Addr kMoeWeightLoop = 0x30008;
inline constexpr Addr kMoeWeight = 0x3000c;
inline constexpr Addr kMoeTokenIds = 0x30010;
inline constexpr Addr kMoeGather = 0x30014;
inline constexpr Addr kMoeMac = 0x30018;
inline constexpr Addr kMoeStore = 0x3001c;
}  // namespace pcs

struct RegionSpan {
  Addr base = 0;
  std::uint64_t size = 0;
  bool contains(Addr a) const { return a >= base && a - base < size; }
};

/// Byte regions of the flat 48-bit space, indexed by Region.
struct AddressLayout {
  std::array<RegionSpan, kRegionCount> spans{};

  const RegionSpan& span(Region r) const { return spans[static_cast<std::size_t>(r)]; }
  RegionSpan& span(Region r) { return spans[static_cast<std::size_t>(r)]; }
  Addr base(Region r) const { return span(r).base; }
  /// Region whose span contains `a`, if any.
  std::optional<Region> region_of(Addr a) const;
  /// Throws on overlapping spans, misaligned bases or spans leaving 48 bits.
  void validate() const;

  /// 256 MiB per region, 64-byte aligned, starting at 0x1000_0000.
  static AddressLayout defaults();
};

struct Dims {
  std::uint64_t m = 0;
  std::uint64_t k = 0;
  std::uint64_t n = 0;
};

/**
 * Workload parameters. The meaning of `dims` depends on the archetype:
 *   SpmmCsr:     W is m×k, IA is k×n (n = IA columns).
 *   TopKShuffle: m = selection steps, k = number of candidate vectors, n = vector dim.
 *   MoeRouting:  m = tokens, k = token dim, n = weight elements per expert.
 */
struct WorkloadSpec {
  std::string name = "custom";
  Archetype archetype = Archetype::SpmmCsr;
  Dims dims{};
  double density_w = 1.0;
  double density_ia = 1.0;
  double correlation_rho = 0.0;
  std::uint32_t topk_k = 0;
  std::uint32_t n_experts = 1;
  double moe_skew = 0.0;  // spread of log expert popularity; 0 = uniform routing
  std::uint32_t element_bits = 32;
  std::uint32_t vector_width = 16;
  std::uint64_t seed = 1;

  std::uint32_t element_bytes() const { return element_bits / 8; }
  /// Throws ConfigError on invalid combinations.
  void validate() const;
  /// Canonical key=value text used for hashing.
  std::string canonical() const;
  std::uint64_t hash() const { return fnv1a(canonical()); }
};

/// Functional contents of index arrays (rowptr, col_indices / token ids, TopK lists).
class MemoryImage {
 public:
  void add_segment(Addr base, std::uint32_t elem_bytes, std::vector<std::uint64_t> words);
  std::optional<std::uint64_t> read(Addr a) const;

 private:
  struct Segment {
    Addr base;
    std::uint32_t elem_bytes;
    std::vector<std::uint64_t> words;
  };
  std::vector<Segment> segments_;
};

/**
 * Configuration registers the host programs into the sparse unit before a
 * kernel: gather address = ss_start + (index << shift), each gathered chain
 * covering `vector_bytes`.
 */
struct SparseProgram {
  std::uint32_t shift = 0;
  std::uint32_t vector_bytes = 4;
  Addr idx_base = 0;
  std::uint32_t idx_bytes = 4;
  std::uint64_t idx_total = 0;  // entries in the index array
  bool has_rowptr = false;
  Addr rowptr_base = 0;
  std::uint64_t rows = 0;
};

struct Workload {
  WorkloadSpec spec;
  AddressLayout layout;
  Trace trace;
  MemoryImage image;
  SparseProgram program;
  std::optional<CsrMatrix> csr;          // SpmmCsr
  std::vector<std::uint32_t> routing;    // MoeRouting: expert per token
  std::vector<std::uint32_t> selections; // TopKShuffle: selected vector per slot
};

SparseMask sample_bernoulli_mask(std::size_t rows, std::size_t cols, double density, std::uint64_t seed);
CsrMatrix to_csr(const SparseMask& mask, std::uint64_t value_seed);

Trace gen_spmm_trace(const CsrMatrix& w, std::size_t ia_cols, const WorkloadSpec& spec,
                     const AddressLayout& layout);
/// `selections_out`, when given, receives the chosen vector ids in trace order.
Trace gen_topk_shuffle_trace(std::size_t n_vectors, std::size_t dim, std::size_t k, const WorkloadSpec& spec,
                             const AddressLayout& layout, std::vector<std::uint32_t>* selections_out = nullptr);
/// `routing_override` forces the expert of each token.
Trace gen_moe_trace(const WorkloadSpec& spec, const AddressLayout& layout,
                    const std::vector<std::uint32_t>* routing_override = nullptr,
                    std::vector<std::uint32_t>* routing_out = nullptr);

/// Expert id per token for a MoE spec (deterministic in seed).
std::vector<std::uint32_t> sample_routing(const WorkloadSpec& spec);

/// Named desk-scale presets: DS, GAT, GCN, GSABT, H2O, MK, SCN, ST.
WorkloadSpec preset_workload(std::string_view name);
const std::vector<std::string>& preset_names();

/// Generates the trace plus the index memory image and sparse-unit program.
Workload build_workload(const WorkloadSpec& spec, const AddressLayout& layout = AddressLayout::defaults());

/**
 * Trace file: a header line `# nvr-trace v1 spec_hash=<hex> seed=<dec> events=<dec>`
 * then one event per line:
 *   pc kind lanes loop_level loop_iter bound_observed is_indirect region addr0 addr1 ... [; v0 v1 ...]
 * with pc and addresses as 0x-prefixed hex; loaded index words follow a `;`.
 */
struct TraceFile {
  std::uint64_t spec_hash = 0;
  std::uint64_t seed = 0;
  Trace events;
};
void write_trace(std::ostream& os, const Trace& trace, std::uint64_t spec_hash, std::uint64_t seed);
TraceFile read_trace(std::istream& is);

}  // namespace nvrsim
