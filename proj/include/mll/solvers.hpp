#pragma once

// Inversion λ_P -> p for complete collections: sequential hierarchical
// reconstruction, the stacked fixed point η = λ + f(η), stationary
// distributions of cyclic conditional chains, and Newton's method.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mll/classify.hpp"
#include "mll/marginal.hpp"
#include "mll/tables.hpp"

namespace mll {

enum class Method { Auto, FixedPoint, Hierarchical, Markov, Newton };

const char* to_string(Method m);
/// Accepts auto, fixed-point, hierarchical, markov, newton.
Method parse_method(const std::string& s);

struct SolveOptions {
  double tol = 1e-10;  ///< sup-norm of the λ residual
  int max_iter = 10000;
  double damping = 1.0;  ///< α in (0, 1]
  Method method = Method::Auto;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SolveResult {
  explicit SolveResult(JointTable t) : table(std::move(t)) {}

  JointTable table;
  int iterations = 0;
  double final_residual = 0.0;
  std::string method_used;
  std::optional<double> contraction_certificate;
  /// Sup-norm residual per iteration (fixed point / Newton) or per stage.
  std::vector<double> trace;
  /// Euclidean residual per iteration, same indexing as trace.
  std::vector<double> trace_l2;
};

/// Sup-norm of lambda_vector(t, spec) - target.
double residual(const JointTable& t, const MLLVector& target);

/// Jacobi iteration η_L <- η_L + α (target_L - λ_L^M(p(η))) over all pairs.
/// Starts at η = 0 with the effects of margin V set to their targets (the
/// value one sweep from η = 0 gives them). Throws SolveError on
/// non-convergence or when the residual exceeds 10x its running minimum.
SolveResult invert_fixed_point(const MLLSpec& spec, const MLLVector& target,
                               const SolveOptions& opts = {});

/// max over effects K in proper margins of the Euclidean norm of the column
/// (∂λ_C^N/∂η_K : (C,N) ∈ P, K ⊄ N). Requires the Lemma-4 condition.
double contraction_certificate(const MLLSpec& spec, const JointTable& t);

/// Margin by margin along a witnessing order, each step a reconstruct_mixed
/// call given the intersections with earlier margins.
SolveResult invert_hierarchical(const MLLSpec& spec, const MLLVector& target,
                                const SolveOptions& opts = {});

/// Table over vars.restrict(M) matching the given sub-margins (tables over
/// vars.restrict(N), N ⊆ M) and the η targets (keys are masks in `vars`,
/// contained in M, none contained in a given margin). IPF from
/// table_from_eta(targets); IPF scaling on N only moves η_K for K ⊆ N, so
/// the targets are preserved. Falls back to Newton if IPF stalls.
JointTable reconstruct_mixed(const VarSet& vars, Subset M, std::span<const JointTable> margins,
                             const std::map<Subset, double>& eta_targets,
                             const SolveOptions& opts = {});

/// Conditionals of a cyclic chain: conditionals[i] is
/// p(x_{A_{i+1}} | x_{A_i}), indices mod k.
struct CycleChainSpec {
  VarSet vars;
  std::vector<Subset> blocks;
  std::vector<ConditionalTable> conditionals;

  void validate() const;
};

/// Conditionals p(A_{i+1} | A_i) of a joint table.
CycleChainSpec chain_from_table(const JointTable& t, const std::vector<Subset>& blocks);

/// One-sweep transition matrix on the states of A_1 (row = current state).
Eigen::MatrixXd chain_transition(const CycleChainSpec& chain);

/// Unique stationary row vector of a strictly positive stochastic matrix,
/// from (I - Mᵀ)π = 0 with the last equation replaced by Σπ = 1.
std::vector<double> stationary_vector(const Eigen::MatrixXd& M);

/// Stationary π of the sweep kernel, over vars.restrict(A_1).
JointTable stationary(const CycleChainSpec& chain);

/// Power iteration π <- πM from uniform. Reports iterations used.
JointTable stationary_power(const CycleChainSpec& chain, double tol = 1e-14,
                            int max_iter = 1000000, int* iterations = nullptr);

/// Conditionals from λ, stationary margin of A_1, then hierarchical
/// inversion of the collection with the A_1 effects moved to margin A_1.
/// Blocks default to detect_cycle(spec).
SolveResult invert_cyclic(const MLLSpec& spec, const MLLVector& target,
                          const SolveOptions& opts = {},
                          std::optional<std::vector<Subset>> blocks = std::nullopt);

/// Fixed point on the pairs W moved to margin V: η_W <- η_W + α(target_W -
/// λ_W(p)), with p the hierarchical inversion of the moved collection.
SolveResult invert_contraction(const MLLSpec& spec, const MLLVector& target,
                               const std::vector<EffectMarginPair>& moved,
                               const SolveOptions& opts = {});

/// Newton on λ(η) = target with the analytic Jacobian and step halving.
SolveResult newton_solve(const MLLSpec& spec, const MLLVector& target, const SolveOptions& opts = {},
                         std::optional<EtaVector> start = std::nullopt);

/// λ values of a collection after one interchange move, given its values
/// before. The move must be admissible for `spec`.
MLLVector interchange_target(const MLLSpec& spec, const MLLVector& target, const RuleStep& move);

/// Dispatcher. Auto follows the classification chain, polishing with Newton
/// when the residual is above tol; UNKNOWN collections (or a failing chain)
/// go to a damped fixed point, then Newton from η = 0 and four seeded
/// N(0, 0.5²) starts. Throws SolveError(AllMethodsFailed) with the last
/// trace when nothing reaches tol.
SolveResult invert(const MLLSpec& spec, const MLLVector& target, const SolveOptions& opts = {});

}  // namespace mll
