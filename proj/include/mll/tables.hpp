#pragma once

// Probability-side objects on {0,1}^V: joint tables, log-linear parameter
// vectors, conditionals, and the Möbius maps between tables and parameters.
// Everything here is an immutable value; all functions are pure.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mll/subset.hpp"

namespace mll {

/// Cells below this are rejected: every result assumes strict positivity.
inline constexpr double kPositivityFloor = 1e-15;
inline constexpr double kSumTolerance = 1e-12;

/// Strictly positive distribution over {0,1}^V. Cell index of x is
/// sum_v x_v 2^{pos(v)}.
class JointTable {
 public:
  /// Validates length 2^n, entries >= 1e-15 and sum within 1e-12 of one.
  JointTable(VarSet vars, std::vector<double> p);

  /// Normalizes positive weights first, then validates.
  static JointTable normalized(VarSet vars, std::vector<double> weights);
  static JointTable uniform(VarSet vars);

  const VarSet& vars() const noexcept { return vars_; }
  int n() const noexcept { return vars_.size(); }
  std::size_t size() const noexcept { return p_.size(); }
  std::span<const double> p() const noexcept { return p_; }
  double operator[](std::size_t cell) const { return p_[cell]; }

  /// ε = min_x p(x).
  double min_cell() const noexcept;

 private:
  VarSet vars_;
  std::vector<double> p_;
};

/// Ordinary log-linear parameters η_L for every nonempty L ⊆ V. η_∅ is the
/// normalizing constant and is not stored.
class EtaVector {
 public:
  /// values[L] for L = 1 .. 2^n - 1; values[0] must be 0 (it is ignored).
  EtaVector(VarSet vars, std::vector<double> values);
  static EtaVector zeros(VarSet vars);

  const VarSet& vars() const noexcept { return vars_; }
  double operator[](Subset L) const { return values_[L]; }
  double& operator[](Subset L) { return values_[L]; }
  /// Indexed by subset mask, slot 0 unused.
  std::span<const double> values() const noexcept { return values_; }
  std::size_t effect_count() const noexcept { return values_.size() - 1; }

 private:
  VarSet vars_;
  std::vector<double> values_;
};

/// p(x_A | x_B) over a parent variable set. Entries are stored at
/// compress(x,A) + 2^{|A|} compress(x,B).
class ConditionalTable {
 public:
  ConditionalTable(VarSet vars, Subset target, Subset given, std::vector<double> values);

  const VarSet& vars() const noexcept { return vars_; }
  Subset target() const noexcept { return target_; }
  Subset given() const noexcept { return given_; }
  std::span<const double> values() const noexcept { return values_; }

  /// p(x_A | x_B) for the full cell x (bits outside A ∪ B ignored).
  double at(std::uint32_t x) const;
  /// Dense access by (x_A, x_B) indices.
  double at(std::uint32_t xa, std::uint32_t xb) const;

 private:
  VarSet vars_;
  Subset target_;
  Subset given_;
  std::vector<double> values_;
};

/// Natural-log Möbius inversion:
///   η_L = 2^{-n} Σ_x (-1)^{|x_L|} log p(x).
EtaVector eta_from_table(const JointTable& t);

/// log p(x) = c + Σ_L (-1)^{|x_L|} η_L with c fixing the total mass. Throws
/// DomainError when a parameter is not finite or the result underflows the
/// positivity floor.
JointTable table_from_eta(const EtaVector& eta);

/// Table over the variables of M (in the parent order).
JointTable marginalize(const JointTable& t, Subset M);

/// p(x_A | x_B) = p_{AB} / p_B. B may be empty.
ConditionalTable condition(const JointTable& t, Subset A, Subset B);

/// Dirichlet(1,...,1) draw, rejection-resampled until every cell clears
/// the positivity floor.
JointTable random_table(const VarSet& vars, std::mt19937_64& rng);

/// Dirichlet(alpha,...,alpha) draw.
JointTable random_table(const VarSet& vars, double alpha, std::mt19937_64& rng);

/// Renormalized p^α q^{1-α} cellwise.
JointTable geometric_mixture(const JointTable& p, const JointTable& q, double alpha);

/// Product of independent tables over disjoint variable sets; the result's
/// variables follow `vars`, and each factor's labels must partition them.
JointTable product(const VarSet& vars, std::span<const JointTable> factors);

}  // namespace mll
