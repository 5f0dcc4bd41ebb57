#include "mll/tables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mll/error.hpp"
#include "mll/kernels.hpp"

namespace mll {

namespace {

std::string cell_message(const char* what, std::size_t cell, double value) {
  std::ostringstream os;
  os.precision(17);
  os << what << " at cell " << cell << " (value " << value << ")";
  return os.str();
}

}  // namespace

JointTable::JointTable(VarSet vars, std::vector<double> p)
    : vars_(std::move(vars)), p_(std::move(p)) {
  if (p_.size() != vars_.cells())
    throw DomainError("table has " + std::to_string(p_.size()) + " cells, expected " +
                      std::to_string(vars_.cells()));
  double sum = 0.0;
  for (std::size_t i = 0; i < p_.size(); ++i) {
    if (!std::isfinite(p_[i])) throw DomainError(cell_message("non-finite probability", i, p_[i]));
    if (p_[i] < kPositivityFloor)
      throw DomainError(cell_message("probability below positivity floor 1e-15", i, p_[i]));
    sum += p_[i];
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "probabilities sum to " << sum << ", not 1";
    throw DomainError(os.str());
  }
}

JointTable JointTable::normalized(VarSet vars, std::vector<double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total))
    throw DomainError("weights must have a positive finite total");
  for (double& w : weights) w /= total;
  return JointTable(std::move(vars), std::move(weights));
}

JointTable JointTable::uniform(VarSet vars) {
  const std::size_t cells = vars.cells();
  return JointTable(std::move(vars), std::vector<double>(cells, 1.0 / static_cast<double>(cells)));
}

double JointTable::min_cell() const noexcept { return *std::min_element(p_.begin(), p_.end()); }

EtaVector::EtaVector(VarSet vars, std::vector<double> values)
    : vars_(std::move(vars)), values_(std::move(values)) {
  if (values_.size() != vars_.cells())
    throw DomainError("eta vector must be indexed by all 2^n subsets");
  values_[0] = 0.0;
}

EtaVector EtaVector::zeros(VarSet vars) {
  const std::size_t cells = vars.cells();
  return EtaVector(std::move(vars), std::vector<double>(cells, 0.0));
}

ConditionalTable::ConditionalTable(VarSet vars, Subset target, Subset given,
                                   std::vector<double> values)
    : vars_(std::move(vars)), target_(target), given_(given), values_(std::move(values)) {
  if (target_ == 0) throw DomainError("conditional target must be nonempty");
  if (target_ & given_) throw DomainError("conditional target and given sets overlap");
  if (!is_subset(target_ | given_, vars_.full())) throw DomainError("conditional sets outside V");
  const std::size_t na = std::size_t{1} << popcount(target_);
  const std::size_t nb = std::size_t{1} << popcount(given_);
  if (values_.size() != na * nb) throw DomainError("conditional table has wrong length");
  for (std::size_t b = 0; b < nb; ++b) {
    double row = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      const double v = values_[a + na * b];
      if (!(v >= kPositivityFloor) || !std::isfinite(v))
        throw DomainError(cell_message("conditional entry not strictly positive", a + na * b, v));
      row += v;
    }
    if (std::abs(row - 1.0) > kSumTolerance)
      throw DomainError("conditional row " + std::to_string(b) + " does not sum to 1");
  }
}

double ConditionalTable::at(std::uint32_t x) const {
  return at(compress(x, target_), compress(x, given_));
}

double ConditionalTable::at(std::uint32_t xa, std::uint32_t xb) const {
  return values_[xa + (std::size_t{xb} << popcount(target_))];
}

EtaVector eta_from_table(const JointTable& t) {
  std::vector<double> lp(t.size());
  std::transform(t.p().begin(), t.p().end(), lp.begin(), [](double v) { return std::log(v); });
  kernels::walsh_hadamard(lp);
  const double scale = std::ldexp(1.0, -t.n());
  for (double& v : lp) v *= scale;
  return EtaVector(t.vars(), std::move(lp));
}

JointTable table_from_eta(const EtaVector& eta) {
  std::vector<double> lp(eta.values().begin(), eta.values().end());
  for (std::size_t L = 1; L < lp.size(); ++L)
    if (!std::isfinite(lp[L]))
      throw DomainError("log-linear parameter for effect " +
                        eta.vars().format(static_cast<Subset>(L)) + " is not finite");
  lp[0] = 0.0;
  kernels::walsh_hadamard(lp);
  const double top = *std::max_element(lp.begin(), lp.end());
  double total = 0.0;
  for (double& v : lp) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : lp) v /= total;
  const double smallest = *std::min_element(lp.begin(), lp.end());
  if (!(smallest >= kPositivityFloor)) {
    std::ostringstream os;
    os << "log-linear parameters too large: smallest cell probability " << smallest
       << " underflows the positivity floor";
    throw DomainError(os.str());
  }
  return JointTable(eta.vars(), std::move(lp));
}

JointTable marginalize(const JointTable& t, Subset M) {
  if (M == 0) throw DomainError("cannot marginalize onto the empty set");
  if (!is_subset(M, t.vars().full())) throw DomainError("margin outside the variable set");
  auto pm = kernels::marginal_sums(t.p(), M);
  return JointTable::normalized(t.vars().restrict(M), std::move(pm));
}

ConditionalTable condition(const JointTable& t, Subset A, Subset B) {
  if (A == 0) throw DomainError("conditional target must be nonempty");
  if (A & B) throw DomainError("target and conditioning sets overlap");
  const Subset AB = A | B;
  if (!is_subset(AB, t.vars().full())) throw DomainError("sets outside the variable set");
  const auto pab = kernels::marginal_sums(t.p(), AB);
  const auto pb = B == 0 ? std::vector<double>{1.0} : kernels::marginal_sums(t.p(), B);
  const std::size_t na = std::size_t{1} << popcount(A);
  std::vector<double> values(pab.size());
  for (std::uint32_t y = 0; y < pab.size(); ++y) {
    // Dense index over AB -> (xa, xb).
    const std::uint32_t x = expand(y, AB);
    const std::uint32_t xa = compress(x, A);
    const std::uint32_t xb = compress(x, B);
    values[xa + na * xb] = pab[y] / pb[xb];
  }
  // Row sums are 1 up to rounding; renormalize exactly.
  const std::size_t nb = values.size() / na;
  for (std::size_t b = 0; b < nb; ++b) {
    double row = 0.0;
    for (std::size_t a = 0; a < na; ++a) row += values[a + na * b];
    for (std::size_t a = 0; a < na; ++a) values[a + na * b] /= row;
  }
  return ConditionalTable(t.vars(), A, B, std::move(values));
}

JointTable random_table(const VarSet& vars, std::mt19937_64& rng) {
  return random_table(vars, 1.0, rng);
}

JointTable random_table(const VarSet& vars, double alpha, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> w(vars.cells());
  for (;;) {
    double total = 0.0;
    for (double& v : w) {
      v = gamma(rng);
      total += v;
    }
    const double smallest = *std::min_element(w.begin(), w.end());
    if (total > 0.0 && smallest / total >= 1e3 * kPositivityFloor)
      return JointTable::normalized(vars, w);
  }
}

JointTable geometric_mixture(const JointTable& p, const JointTable& q, double alpha) {
  if (!(p.vars() == q.vars())) throw DomainError("mixture of tables over different variables");
  std::vector<double> lw(p.size());
  for (std::size_t i = 0; i < lw.size(); ++i)
    lw[i] = alpha * std::log(p[i]) + (1.0 - alpha) * std::log(q[i]);
  const double top = *std::max_element(lw.begin(), lw.end());
  for (double& v : lw) v = std::exp(v - top);
  return JointTable::normalized(p.vars(), std::move(lw));
}

JointTable product(const VarSet& vars, std::span<const JointTable> factors) {
  Subset covered = 0;
  std::vector<Subset> masks;
  for (const auto& f : factors) {
    const Subset m = vars.embed(f.vars());
    if (m & covered) throw DomainError("product factors overlap");
    if (!(vars.restrict(m) == f.vars()))
      throw DomainError("product factor variables must follow the parent order");
    covered |= m;
    masks.push_back(m);
  }
  if (covered != vars.full()) throw DomainError("product factors do not cover the variables");
  std::vector<double> p(vars.cells(), 1.0);
  for (std::size_t x = 0; x < p.size(); ++x)
    for (std::size_t i = 0; i < factors.size(); ++i)
      p[x] *= factors[i][compress(static_cast<std::uint32_t>(x), masks[i])];
  return JointTable::normalized(vars, std::move(p));
}

}  // namespace mll
