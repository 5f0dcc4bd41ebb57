#pragma once

// Marginal log-linear parameters λ_L^M: the ordinary log-linear parameter
// of effect L computed inside the marginal table p_M.

#include <Eigen/Dense>
#include <compare>
#include <optional>
#include <span>
#include <vector>

#include "mll/subset.hpp"
#include "mll/tables.hpp"

namespace mll {

struct EffectMarginPair {
  Subset effect = 0;
  Subset margin = 0;

  friend auto operator<=>(const EffectMarginPair&, const EffectMarginPair&) = default;
};

/// An ordered collection of (effect, margin) pairs with ∅ ≠ L ⊆ M ⊆ V and no
/// duplicates.
class MLLSpec {
 public:
  MLLSpec(VarSet vars, std::vector<EffectMarginPair> pairs);

  const VarSet& vars() const noexcept { return vars_; }
  const std::vector<EffectMarginPair>& pairs() const noexcept { return pairs_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  const EffectMarginPair& operator[](std::size_t i) const { return pairs_[i]; }

  /// Every nonempty L ⊆ V appears as an effect exactly once.
  bool is_complete() const noexcept { return complete_; }

  /// Distinct margins ordered by (size, mask).
  std::vector<Subset> margins() const;
  /// Effects listed with margin M, ascending.
  std::vector<Subset> effects_in(Subset margin) const;
  /// Margin of the first pair with this effect.
  std::optional<Subset> margin_of(Subset effect) const;
  std::optional<std::size_t> index_of(const EffectMarginPair& pair) const;

  /// Same pairs sorted by (margin size, margin, effect); used for
  /// order-insensitive comparison.
  MLLSpec sorted() const;

  friend bool operator==(const MLLSpec& a, const MLLSpec& b) {
    return a.vars_ == b.vars_ && a.pairs_ == b.pairs_;
  }

 private:
  VarSet vars_;
  std::vector<EffectMarginPair> pairs_;
  bool complete_ = false;
};

/// Parameter values, one per pair, in spec order.
struct MLLVector {
  MLLSpec spec;
  std::vector<double> values;

  MLLVector(MLLSpec s, std::vector<double> v);
};

/// λ_L^M(t). Requires ∅ ≠ L ⊆ M ⊆ V.
double lambda(const JointTable& t, Subset L, Subset M);

/// All λ_C^M for C ⊆ M at once, returned as an EtaVector over the variables
/// of M (dense indices).
EtaVector margin_parameters(const JointTable& t, Subset M);

MLLVector lambda_vector(const JointTable& t, const MLLSpec& spec);

/// The pairs λ_{A|B} = {(L, A∪B) : L ⊆ A∪B, L ∩ A ≠ ∅}, ordered by effect.
std::vector<EffectMarginPair> conditional_lambda_set(Subset A, Subset B);

/// f = λ_L^{M∪A} - λ_L^M, evaluated as
///   2^{-|A∪M|} Σ_{x_{MA}} (-1)^{|x_L|} log p(x_A | x_M).
double decompose_f(const JointTable& t, Subset L, Subset M, Subset A);

/// ∂λ_L^M / ∂η_K at t, other η_J held fixed.
///   K ⊆ M:  [K = L]
///   else:   2^{-|M|} Σ_x (-1)^{|x_{K△L}|} p(x_{V∖M} | x_M)
double dlambda_deta(const JointTable& t, Subset L, Subset M, Subset K);

/// Rows follow spec pairs; column j is effect K = j + 1.
/// Rows are assembled in parallel, one conditional transform per margin.
Eigen::MatrixXd jacobian(const JointTable& t, const MLLSpec& spec);

/// Entry-by-entry dlambda_deta; serial.
Eigen::MatrixXd jacobian_reference(const JointTable& t, const MLLSpec& spec);

/// κ_A^M(x_v) = λ_A^{Mv} + (-1)^{x_v} λ_{Av}^{Mv}: the (A, M) parameter of
/// the conditional slice p(· | X_v = x_v). Requires A ⊆ M, v ∉ M.
double kappa(const JointTable& t, Subset A, Subset M, int v, int xv);

struct NormBound {
  double norm = 0.0;   ///< sum of squared derivatives
  double bound = 0.0;  ///< 1 - ε
};

/// Σ_{∅≠C⊆M} |∂λ_C^M / ∂η_{J∪K}|² against 1 - ε, for J ⊆ M, ∅ ≠ K ⊆ V∖M.
NormBound column_norm_bound_check(const JointTable& t, Subset M, Subset J, Subset K);

/// Σ_{J⊆M} |∂λ_C^M / ∂η_{J∪K}|² against 1 - ε, for ∅ ≠ C ⊆ M, ∅ ≠ K ⊆ V∖M.
NormBound row_norm_bound_check(const JointTable& t, Subset M, Subset C, Subset K);

/// The 2^k × 2^k matrix 2^{-k/2} (-1)^{|A∩B|}.
Eigen::MatrixXd hadamard_matrix(int k);

}  // namespace mll
