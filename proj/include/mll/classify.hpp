#pragma once

// Sufficient conditions for smoothness of a complete MLL collection, and the
// exhaustive census of complete collections on small variable sets.
//
// classify() tries rule families in a fixed order:
//
//   Hierarchical, TwoMargin                      on the collection as given
//   Prop1 (variable only in V; includes Nested),
//   Prop2 (A and A∪{v} always share a margin),
//   ThreeMargin, Lemma4, CyclicConditional,
//   Contraction (optional)                       on every member of the
//                                                interchange closure
//
// An interchange moves an effect L between nested margins N ⊂ N' when every
// effect K ⊆ N' meeting N'∖N sits in N': with p_{N'∖N | N} fixed, λ_L^N and
// λ_L^{N'} differ by a known function, so either may be used.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mll/marginal.hpp"

namespace mll {

enum class Verdict { ProvenSmooth, NotSmoothIncomplete, Unknown };

enum class Rule {
  Hierarchical,
  TwoMargin,
  Prop1,
  Nested,
  Prop2,
  ThreeMargin,
  Lemma4,
  CyclicConditional,
  Contraction,
  Interchange,
};

const char* to_string(Verdict v);
const char* to_string(Rule r);

struct RuleStep {
  RuleStep() = default;
  explicit RuleStep(Rule r) : rule(r) {}

  Rule rule = Rule::Hierarchical;
  /// Prop1 / Prop2: the removed variable, as a position in the collection the
  /// step was applied to.
  int variable = -1;
  /// Interchange: effect moved from margin `from` to margin `to`.
  Subset effect = 0;
  Subset from = 0;
  Subset to = 0;
  /// Hierarchical: witnessing margin order.
  std::vector<Subset> order;
  /// CyclicConditional: blocks A_1..A_k, block i conditioned on block i-1.
  std::vector<Subset> blocks;
  /// Contraction: proper-margin pairs recovered by the partial fixed point.
  std::vector<EffectMarginPair> moved;

  std::string describe(const VarSet& vars) const;
};

struct ClassificationReport {
  Verdict verdict = Verdict::Unknown;
  std::vector<RuleStep> rule_chain;
  /// Collections the chain passes through, one per step that changes the
  /// collection (interchange result, P_{-v}, hierarchical target of a
  /// contraction or cycle).
  std::vector<MLLSpec> reduced_specs;
  std::string reason;

  /// First step that is not an interchange.
  const RuleStep* base_step() const;
};

struct ClassifyOptions {
  bool contraction_rule = true;
  /// Interchange closures larger than this are truncated.
  std::size_t interchange_limit = 512;
  /// Partial fixed points are searched only below this many proper pairs.
  std::size_t contraction_max_pairs = 12;
};

bool is_complete(const MLLSpec& spec);

/// Acyclicity of the precedence digraph (an arc M(L) -> N for each pair and
/// each other margin N ⊇ L). Throws DomainError on an incomplete collection.
bool is_hierarchical(const MLLSpec& spec);

/// Topological order of the margins witnessing hierarchy, ties broken by
/// (size, mask); nullopt when the digraph has a cycle.
std::optional<std::vector<Subset>> hierarchical_order(const MLLSpec& spec);

/// P_{-v} = {(L, M∖{v}) : (L,M) ∈ P, v ∉ L} over V∖{v}.
MLLSpec reduce_minus_v(const MLLSpec& spec, int v);

/// Structural precondition of a single rule on the collection as given (no
/// recursion, no interchanges). For Interchange, returns the first move.
std::optional<RuleStep> rule_applies(const MLLSpec& spec, Rule rule);

/// All interchange moves available from spec.
std::vector<RuleStep> interchange_moves(const MLLSpec& spec);
MLLSpec apply_interchange(const MLLSpec& spec, const RuleStep& move);

/// For every proper-margin pair (L, M), at most one other proper margin N has
/// L ⊄ N.
bool lemma4_condition(const MLLSpec& spec);

std::optional<std::vector<Subset>> detect_cycle(const MLLSpec& spec);

/// Hierarchical collection obtained from a cyclic one by adding the margin
/// A_1 and moving the effects ⊆ A_1 into it.
MLLSpec cycle_hierarchical_target(const MLLSpec& spec, const std::vector<Subset>& blocks);

/// The collection with the listed pairs moved to margin V.
MLLSpec move_to_full(const MLLSpec& spec, const std::vector<EffectMarginPair>& moved);

ClassificationReport classify(const MLLSpec& spec, const ClassifyOptions& opts = {});

// --- relabeling ---------------------------------------------------------

/// Relabels bit i as bit perm[i]; variable names stay in place.
MLLSpec permute(const MLLSpec& spec, const std::vector<int>& perm);

/// Sorted (margin << 16 | effect) codes under the minimizing relabeling.
std::vector<std::uint32_t> canonical_code(const MLLSpec& spec);
MLLSpec canonical_form(const MLLSpec& spec);

// --- enumeration --------------------------------------------------------

/// Π_L #supersets(L) = Π_L 2^{n-|L|}. Valid for n ≤ 4.
std::uint64_t labeled_complete_count(int n);

struct BurnsideCount {
  std::uint64_t group_order = 0;
  std::uint64_t fixed_sum = 0;   ///< Σ_g |Fix(g)|
  std::uint64_t orbits = 0;      ///< fixed_sum / group_order
  /// |Fix(g)| grouped by cycle type, e.g. "1+1+1" -> {count of g, |Fix|}.
  std::vector<std::pair<std::string, std::array<std::uint64_t, 2>>> by_cycle_type;
};

/// Orbit count of complete collections under relabeling, by Burnside's lemma
/// with |Fix(g)| = Π over effect cycles of #{M ⊇ L : g^c M = M}. n ≤ 4.
BurnsideCount burnside_complete(int n);

struct EnumerationResult {
  int n = 0;
  bool up_to_symmetry = false;
  std::uint64_t labeled = 0;
  std::uint64_t count = 0;  ///< labeled, or number of orbits
  BurnsideCount burnside;
  /// Materialized collections (orbit representatives in canonical form when
  /// up_to_symmetry). Empty when `materialized` is false.
  bool materialized = false;
  std::vector<MLLSpec> specs;
};

/// n ≤ 3 materializes the list; n = 4 only counts (labeled by product, orbits
/// by Burnside). Throws DomainError for n outside [1, 4].
EnumerationResult enumerate_complete(int n, bool up_to_symmetry);

/// All labeled complete collections, n ≤ 3. `parallel` selects the OpenMP
/// kernel over assignment indices.
std::vector<MLLSpec> labeled_complete_specs(int n, bool parallel = true);

struct CensusEntry {
  MLLSpec spec;
  ClassificationReport report;
};

struct FamilyCount {
  std::string family;
  std::uint64_t achieved = 0;
  std::uint64_t target = 0;
};

struct CensusReport {
  int n = 0;
  std::uint64_t labeled_complete = 0;
  std::uint64_t complete_orbits = 0;
  BurnsideCount burnside;
  std::uint64_t hierarchical = 0;
  std::uint64_t two_margin_extra = 0;
  std::uint64_t prop1_first = 0;   ///< Prop1 family (includes Nested)
  std::uint64_t nested_first = 0;  ///< subset of prop1_first
  std::uint64_t prop2_first = 0;
  std::uint64_t three_margin_first = 0;
  std::uint64_t lemma4_first = 0;
  std::uint64_t cyclic_first = 0;
  std::uint64_t contraction_first = 0;
  std::uint64_t via_interchange = 0;  ///< proven orbits whose chain starts with interchanges
  std::uint64_t proven_smooth = 0;
  std::uint64_t proven_without_contraction = 0;
  std::uint64_t unknown = 0;
  std::vector<FamilyCount> families;  ///< achieved vs target, for the 3-variable census
  std::vector<CensusEntry> entries;   ///< one per orbit, canonical order
};

/// Census of complete collections up to relabeling, n ≤ 3.
CensusReport census(int n, const ClassifyOptions& opts = {}, bool parallel = true);

}  // namespace mll
