#include "mll/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mll/error.hpp"
#include "mll/kernels.hpp"

namespace mll {

namespace {

void require_pair(const VarSet& vars, Subset L, Subset M) {
  if (L == 0) throw DomainError("effect must be nonempty");
  if (!is_subset(L, M))
    throw DomainError("effect " + vars.format(L) + " is not contained in margin " + vars.format(M));
  if (!is_subset(M, vars.full())) throw DomainError("margin outside the variable set");
}

bool margin_order(Subset a, Subset b) {
  const int pa = popcount(a), pb = popcount(b);
  return pa != pb ? pa < pb : a < b;
}

}  // namespace

MLLSpec::MLLSpec(VarSet vars, std::vector<EffectMarginPair> pairs)
    : vars_(std::move(vars)), pairs_(std::move(pairs)) {
  std::set<EffectMarginPair> seen;
  std::vector<int> effect_count(vars_.cells(), 0);
  for (const auto& pr : pairs_) {
    require_pair(vars_, pr.effect, pr.margin);
    if (!seen.insert(pr).second)
      throw DomainError("duplicate pair (" + vars_.format(pr.effect) + ", " +
                        vars_.format(pr.margin) + ")");
    ++effect_count[pr.effect];
  }
  complete_ = std::all_of(effect_count.begin() + 1, effect_count.end(),
                          [](int c) { return c == 1; });
}

std::vector<Subset> MLLSpec::margins() const {
  std::vector<Subset> out;
  for (const auto& pr : pairs_) out.push_back(pr.margin);
  std::sort(out.begin(), out.end(), margin_order);
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Subset> MLLSpec::effects_in(Subset margin) const {
  std::vector<Subset> out;
  for (const auto& pr : pairs_)
    if (pr.margin == margin) out.push_back(pr.effect);
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<Subset> MLLSpec::margin_of(Subset effect) const {
  for (const auto& pr : pairs_)
    if (pr.effect == effect) return pr.margin;
  return std::nullopt;
}

std::optional<std::size_t> MLLSpec::index_of(const EffectMarginPair& pair) const {
  for (std::size_t i = 0; i < pairs_.size(); ++i)
    if (pairs_[i] == pair) return i;
  return std::nullopt;
}

MLLSpec MLLSpec::sorted() const {
  auto ps = pairs_;
  std::sort(ps.begin(), ps.end(), [](const EffectMarginPair& a, const EffectMarginPair& b) {
    if (a.margin != b.margin) return margin_order(a.margin, b.margin);
    return a.effect < b.effect;
  });
  return MLLSpec(vars_, std::move(ps));
}

MLLVector::MLLVector(MLLSpec s, std::vector<double> v) : spec(std::move(s)), values(std::move(v)) {
  if (values.size() != spec.size())
    throw DomainError("parameter vector has " + std::to_string(values.size()) +
                      " values for " + std::to_string(spec.size()) + " pairs");
}

EtaVector margin_parameters(const JointTable& t, Subset M) {
  if (M == 0 || !is_subset(M, t.vars().full())) throw DomainError("invalid margin");
  auto lp = kernels::marginal_sums(t.p(), M);
  for (double& v : lp) v = std::log(v);
  kernels::walsh_hadamard(lp);
  const double scale = std::ldexp(1.0, -popcount(M));
  for (double& v : lp) v *= scale;
  return EtaVector(t.vars().restrict(M), std::move(lp));
}

double lambda(const JointTable& t, Subset L, Subset M) {
  require_pair(t.vars(), L, M);
  return margin_parameters(t, M)[compress(L, M)];
}

MLLVector lambda_vector(const JointTable& t, const MLLSpec& spec) {
  if (!(spec.vars() == t.vars())) throw DomainError("table and spec use different variables");
  std::vector<double> values(spec.size());
  for (Subset M : spec.margins()) {
    const EtaVector eta = margin_parameters(t, M);
    for (std::size_t i = 0; i < spec.size(); ++i)
      if (spec[i].margin == M) values[i] = eta[compress(spec[i].effect, M)];
  }
  return MLLVector(spec, std::move(values));
}

std::vector<EffectMarginPair> conditional_lambda_set(Subset A, Subset B) {
  if (A == 0) throw DomainError("conditional target must be nonempty");
  if (A & B) throw DomainError("target and conditioning sets overlap");
  const Subset AB = A | B;
  std::vector<EffectMarginPair> out;
  for_each_subset(AB, [&](Subset L) {
    if (L & A) out.push_back({L, AB});
  });
  std::sort(out.begin(), out.end());
  return out;
}

double decompose_f(const JointTable& t, Subset L, Subset M, Subset A) {
  require_pair(t.vars(), L, M);
  if (A & M) throw DomainError("decomposition requires disjoint A and M");
  if (!is_subset(A, t.vars().full())) throw DomainError("set outside the variable set");
  const Subset MA = M | A;
  const auto pma = kernels::marginal_sums(t.p(), MA);
  const auto pm = kernels::marginal_sums(t.p(), M);
  double acc = 0.0;
  for (std::uint32_t y = 0; y < pma.size(); ++y) {
    const std::uint32_t x = expand(y, MA);
    acc += parity(L, x) * std::log(pma[y] / pm[compress(x, M)]);
  }
  return std::ldexp(acc, -popcount(MA));
}

double dlambda_deta(const JointTable& t, Subset L, Subset M, Subset K) {
  require_pair(t.vars(), L, M);
  if (K == 0 || !is_subset(K, t.vars().full())) throw DomainError("invalid differentiation effect");
  if (is_subset(K, M)) return K == L ? 1.0 : 0.0;
  const auto c = kernels::conditional_on_margin(t.p(), M);
  const Subset S = K ^ L;
  double acc = 0.0;
  for (std::uint32_t x = 0; x < c.size(); ++x) acc += parity(S, x) * c[x];
  return std::ldexp(acc, -popcount(M));
}

Eigen::MatrixXd jacobian(const JointTable& t, const MLLSpec& spec) {
  if (!(spec.vars() == t.vars())) throw DomainError("table and spec use different variables");
  const std::size_t cells = t.size();
  const Subset V = t.vars().full();
  const auto margins = spec.margins();
  // Transformed conditional c(x) = p(x)/p_M(x_M) per proper margin: the
  // row entry for K ⊄ M is 2^{-|M|} ĉ(K △ L).
  std::vector<std::vector<double>> transformed(margins.size());
  for (std::size_t m = 0; m < margins.size(); ++m) {
    if (margins[m] == V) continue;
    transformed[m] = kernels::conditional_on_margin(t.p(), margins[m]);
    kernels::walsh_hadamard(transformed[m]);
  }
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(spec.size()),
                                            static_cast<Eigen::Index>(cells - 1));
  const std::ptrdiff_t rows = static_cast<std::ptrdiff_t>(spec.size());
#pragma omp parallel for schedule(dynamic) if (spec.size() * cells >= kernels::kParallelThreshold)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const auto& pr = spec[static_cast<std::size_t>(r)];
    const auto m = static_cast<std::size_t>(
        std::lower_bound(margins.begin(), margins.end(), pr.margin,
                         [](Subset a, Subset b) {
                           const int pa = popcount(a), pb = popcount(b);
                           return pa != pb ? pa < pb : a < b;
                         }) -
        margins.begin());
    const double scale = std::ldexp(1.0, -popcount(pr.margin));
    for (Subset K = 1; K < cells; ++K) {
      double v;
      if (is_subset(K, pr.margin))
        v = K == pr.effect ? 1.0 : 0.0;
      else
        v = scale * transformed[m][K ^ pr.effect];
      J(r, static_cast<Eigen::Index>(K - 1)) = v;
    }
  }
  return J;
}

Eigen::MatrixXd jacobian_reference(const JointTable& t, const MLLSpec& spec) {
  const std::size_t cells = t.size();
  Eigen::MatrixXd J(static_cast<Eigen::Index>(spec.size()), static_cast<Eigen::Index>(cells - 1));
  for (std::size_t r = 0; r < spec.size(); ++r)
    for (Subset K = 1; K < cells; ++K)
      J(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(K - 1)) =
          dlambda_deta(t, spec[r].effect, spec[r].margin, K);
  return J;
}

double kappa(const JointTable& t, Subset A, Subset M, int v, int xv) {
  if (v < 0 || v >= t.n()) throw DomainError("variable position out of range");
  const Subset vb = bit(v);
  if (!is_subset(A, M)) throw DomainError("kappa requires A ⊆ M");
  if ((A | M) & vb) throw DomainError("kappa requires v outside A ∪ M");
  if (A == 0) throw DomainError("kappa requires a nonempty effect");
  if (xv != 0 && xv != 1) throw DomainError("x_v must be 0 or 1");
  const EtaVector eta = margin_parameters(t, M | vb);
  const Subset Mv = M | vb;
  const double sign = xv == 0 ? 1.0 : -1.0;
  return eta[compress(A, Mv)] + sign * eta[compress(A | vb, Mv)];
}

NormBound column_norm_bound_check(const JointTable& t, Subset M, Subset J, Subset K) {
  const Subset V = t.vars().full();
  if (!is_subset(J, M) || !is_subset(M, V)) throw DomainError("column bound requires J ⊆ M ⊆ V");
  if (K == 0 || (K & M) || !is_subset(K, V))
    throw DomainError("column bound requires nonempty K ⊆ V∖M");
  const auto c = kernels::conditional_on_margin(t.p(), M);
  auto ch = c;
  kernels::walsh_hadamard(ch);
  const double scale = std::ldexp(1.0, -popcount(M));
  NormBound nb{0.0, 1.0 - t.min_cell()};
  for_each_subset(M, [&](Subset C) {
    if (C == 0) return;
    const double d = scale * ch[(J | K) ^ C];
    nb.norm += d * d;
  });
  return nb;
}

NormBound row_norm_bound_check(const JointTable& t, Subset M, Subset C, Subset K) {
  const Subset V = t.vars().full();
  if (C == 0 || !is_subset(C, M) || !is_subset(M, V))
    throw DomainError("row bound requires nonempty C ⊆ M ⊆ V");
  if (K == 0 || (K & M) || !is_subset(K, V))
    throw DomainError("row bound requires nonempty K ⊆ V∖M");
  auto ch = kernels::conditional_on_margin(t.p(), M);
  kernels::walsh_hadamard(ch);
  const double scale = std::ldexp(1.0, -popcount(M));
  NormBound nb{0.0, 1.0 - t.min_cell()};
  for_each_subset(M, [&](Subset J) {
    const double d = scale * ch[(J | K) ^ C];
    nb.norm += d * d;
  });
  return nb;
}

Eigen::MatrixXd hadamard_matrix(int k) {
  if (k < 0 || k > 12) throw DomainError("hadamard order out of range");
  const Eigen::Index n = Eigen::Index{1} << k;
  const double s = std::pow(2.0, -0.5 * k);
  Eigen::MatrixXd H(n, n);
  for (Eigen::Index b = 0; b < n; ++b)
    for (Eigen::Index a = 0; a < n; ++a)
      H(b, a) = s * parity(static_cast<Subset>(a), static_cast<std::uint32_t>(b));
  return H;
}

}  // namespace mll
