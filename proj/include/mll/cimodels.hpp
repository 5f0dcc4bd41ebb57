#pragma once

// Conditional independence statements as zero constraints on MLL
// parameters, and recovery of model members from the free parameters.

#include <optional>
#include <string>
#include <vector>

#include "mll/classify.hpp"
#include "mll/marginal.hpp"
#include "mll/solvers.hpp"
#include "mll/tables.hpp"

namespace mll {

/// X_a ⊥ X_b | X_c.
struct CIStatement {
  Subset a = 0;
  Subset b = 0;
  Subset c = 0;

  void validate(const VarSet& vars) const;
  std::string describe(const VarSet& vars) const;
  friend bool operator==(const CIStatement&, const CIStatement&) = default;
};

/// max_x |p(x_a, x_b | x_c) - p(x_a | x_c) p(x_b | x_c)| <= tol.
bool ci_holds(const JointTable& t, const CIStatement& s, double tol = 1e-9);
double ci_discrepancy(const JointTable& t, const CIStatement& s);

/// {(L, abc) : L ⊆ abc, L ∩ a ≠ ∅, L ∩ b ≠ ∅}: for singletons a, b this is
/// a ∪ b ⊆ L ⊆ abc; block statements are the union over their pairwise
/// parts. Ordered by effect.
std::vector<EffectMarginPair> ci_to_zero_params(const CIStatement& s);

/// p(x_A | x_B) from the values of conditional_lambda_set(A, B), in that
/// order. Effects ⊆ B are set to `b_values` (indexed by their mask in
/// vars, default 0); the result does not depend on them.
ConditionalTable conditional_from_lambda(const VarSet& vars, Subset A, Subset B,
                                         const std::vector<double>& values,
                                         const std::map<Subset, double>& b_values = {});

struct GibbsStep {
  Subset target = 0;
  Subset given = 0;
  ConditionalTable table;  ///< p(x_target | x_given)
};

/// One sweep draws each step's target from its conditional given the
/// current values; the chain lives on the values of `state`.
struct GibbsCycleSpec {
  VarSet vars;
  std::vector<GibbsStep> steps;
  Subset state = 0;

  /// Each step's given set must be readable (in state, or drawn earlier in
  /// the sweep).
  void validate() const;
};

/// Transition matrix of one sweep on the states of `state`.
Eigen::MatrixXd gibbs_transition(const GibbsCycleSpec& g);

/// Stationary distribution of the sweep kernel by direct solve, over
/// vars.restrict(state).
JointTable gibbs_stationary(const GibbsCycleSpec& g);

struct ModelSpec {
  VarSet vars;
  std::vector<CIStatement> statements;
  std::vector<EffectMarginPair> zero_pairs;
  std::optional<MLLSpec> embedding;
  std::string failure;  ///< why no embedding exists
  bool searched = false;  ///< embedding came from the smoothness search
};

/// Zero pairs and a complete embedding. Greedy: every other effect goes to
/// the smallest listed margin containing it, else V. If the greedy result is
/// not PROVEN_SMOOTH, assignments of the other effects to listed margins or
/// V are searched (up to `search_limit`) for one that is.
ModelSpec model_spec(const VarSet& vars, const std::vector<CIStatement>& statements,
                     std::size_t search_limit = 1u << 16);

/// Uses `embedding` instead of constructing one; it must be complete and
/// contain every zero pair.
ModelSpec model_spec(const VarSet& vars, const std::vector<CIStatement>& statements,
                     const MLLSpec& embedding);

/// Indices into embedding pairs that are not zero pairs, in order.
std::vector<std::size_t> free_pair_indices(const ModelSpec& model);

struct ModelMember {
  explicit ModelMember(SolveResult r) : result(std::move(r)) {}

  SolveResult result;
  bool gibbs_used = false;
  std::optional<GibbsCycleSpec> gibbs;
  /// max |π - p_S(result)| when the Gibbs path ran.
  std::optional<double> gibbs_check;
  double max_ci_discrepancy = 0.0;
};

/// Gibbs sweep built from free two-variable margins {a, b} and statements
/// a ⊥ C | b, which make p(a | b) equal p(a | b ∪ C); nullopt when no
/// sweep over the found conditionals leaves a state whose law is preserved.
std::optional<GibbsCycleSpec> detect_gibbs(const ModelSpec& model, const MLLVector& target);

/// Joint table with the zero pairs at 0 and the free pairs at free_values.
/// When a Gibbs sweep is available its stationary law on the state seeds
/// a Newton solve; otherwise invert() is used. Throws SolveError when the
/// result misses the tolerance or a statement by more than 1e-9.
ModelMember model_member(const ModelSpec& model, const std::vector<double>& free_values,
                         const SolveOptions& opts = {});

}  // namespace mll
