#include "mll/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "mll/cimodels.hpp"
#include "mll/error.hpp"
#include "mll/kernels.hpp"

namespace mll {

namespace {

constexpr int kNewtonMaxIter = 200;
constexpr int kIpfMaxSweeps = 20000;
constexpr double kIpfTolerance = 1e-15;
constexpr double kConsistencyTolerance = 1e-9;

double sup_norm(const std::vector<double>& r) {
  double m = 0.0;
  for (double v : r) m = std::max(m, std::abs(v));
  return m;
}

double l2_norm(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return std::sqrt(s);
}

std::vector<double> residual_vector(const JointTable& t, const MLLVector& target) {
  const auto lv = lambda_vector(t, target.spec);
  std::vector<double> r(lv.values.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = target.values[i] - lv.values[i];
  return r;
}

void require_solvable(const MLLSpec& spec, const MLLVector& target, const SolveOptions& opts) {
  opts.validate();
  if (!spec.is_complete()) throw DomainError("inversion requires a complete collection");
  if (!(target.spec.sorted() == spec.sorted()))
    throw DomainError("target values belong to a different collection");
  for (double v : target.values)
    if (!std::isfinite(v)) throw DomainError("target values must be finite");
}

/// Target values in spec order (the target may list the same pairs in a
/// different order).
std::vector<double> aligned_values(const MLLSpec& spec, const MLLVector& target) {
  if (target.spec == spec) return target.values;
  std::vector<double> out(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const auto j = target.spec.index_of(spec[i]);
    if (!j) throw DomainError("target is missing a pair of the collection");
    out[i] = target.values[*j];
  }
  return out;
}

JointTable table_or_diverge(const EtaVector& eta, const std::vector<double>& trace) {
  try {
    return table_from_eta(eta);
  } catch (const DomainError& e) {
    throw SolveError(SolveFailure::Divergence,
                     std::string("iterate left the representable range: ") + e.what(), trace);
  }
}

double value_of(const MLLVector& target, const EffectMarginPair& pr) {
  const auto i = target.spec.index_of(pr);
  if (!i)
    throw DomainError("collection has no pair (" + target.spec.vars().format(pr.effect) + ", " +
                      target.spec.vars().format(pr.margin) + ")");
  return target.values[*i];
}

std::vector<double> values_of(const MLLVector& target, const std::vector<EffectMarginPair>& pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& pr : pairs) out.push_back(value_of(target, pr));
  return out;
}

/// 2^{-|M|} Σ_{x_M} (-1)^{|x_L|} log c(x) for a conditional over variables ⊆ M.
double parity_log_mean(const ConditionalTable& c, Subset L, Subset M) {
  double acc = 0.0;
  const std::uint32_t count = std::uint32_t{1} << popcount(M);
  for (std::uint32_t y = 0; y < count; ++y) {
    const std::uint32_t x = expand(y, M);
    acc += parity(L, x) * std::log(c.at(x));
  }
  return std::ldexp(acc, -popcount(M));
}

struct Fitted {
  std::vector<double> q;
  int sweeps = 0;
};

Fitted ipf(std::vector<double> q, const std::vector<Subset>& masks,
           const std::vector<std::vector<double>>& targets) {
  Fitted out;
  double previous = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int sweep = 1; sweep <= kIpfMaxSweeps; ++sweep) {
    for (std::size_t m = 0; m < masks.size(); ++m) {
      const auto qn = kernels::marginal_sums(q, masks[m]);
      for (std::uint32_t x = 0; x < q.size(); ++x) {
        const std::uint32_t y = compress(x, masks[m]);
        q[x] *= targets[m][y] / qn[y];
      }
    }
    double err = 0.0;
    for (std::size_t m = 0; m < masks.size(); ++m) {
      const auto qn = kernels::marginal_sums(q, masks[m]);
      for (std::size_t y = 0; y < qn.size(); ++y) err = std::max(err, std::abs(qn[y] - targets[m][y]));
    }
    out.sweeps = sweep;
    if (err <= kIpfTolerance) break;
    stalled = err >= 0.999 * previous ? stalled + 1 : 0;
    if (stalled >= 50) {
      out.sweeps = -sweep;
      break;
    }
    previous = err;
  }
  out.q = std::move(q);
  return out;
}

}  // namespace

const char* to_string(Method m) {
  switch (m) {
    case Method::Auto: return "AUTO";
    case Method::FixedPoint: return "FIXED_POINT";
    case Method::Hierarchical: return "HIERARCHICAL";
    case Method::Markov: return "MARKOV";
    case Method::Newton: return "NEWTON";
  }
  return "AUTO";
}

Method parse_method(const std::string& s) {
  std::string k;
  for (char c : s) k += c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (k == "auto") return Method::Auto;
  if (k == "fixed-point" || k == "fixedpoint") return Method::FixedPoint;
  if (k == "hierarchical") return Method::Hierarchical;
  if (k == "markov") return Method::Markov;
  if (k == "newton") return Method::Newton;
  throw DomainError("unknown method '" + s + "' (expected auto, fixed-point, hierarchical, markov, newton)");
}

void SolveOptions::validate() const {
  if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
  if (max_iter < 1) throw DomainError("max_iter must be at least 1");
  if (!(damping > 0.0 && damping <= 1.0)) throw DomainError("damping must lie in (0, 1]");
}

double residual(const JointTable& t, const MLLVector& target) {
  return sup_norm(residual_vector(t, target));
}

SolveResult invert_fixed_point(const MLLSpec& spec, const MLLVector& target_in,
                               const SolveOptions& opts) {
  require_solvable(spec, target_in, opts);
  const MLLVector target(spec, aligned_values(spec, target_in));
  const Subset V = spec.vars().full();
  EtaVector eta = EtaVector::zeros(spec.vars());
  for (std::size_t i = 0; i < spec.size(); ++i)
    if (spec[i].margin == V) eta[spec[i].effect] = target.values[i];

  std::vector<double> trace, trace_l2;
  double running_min = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iter; ++it) {
    JointTable t = table_or_diverge(eta, trace);
    const auto r = residual_vector(t, target);
    const double s = sup_norm(r);
    trace.push_back(s);
    trace_l2.push_back(l2_norm(r));
    if (s <= opts.tol) {
      SolveResult res{std::move(t)};
      res.iterations = it;
      res.final_residual = s;
      res.method_used = "FIXED_POINT";
      res.trace = std::move(trace);
      res.trace_l2 = std::move(trace_l2);
      if (lemma4_condition(spec)) res.contraction_certificate = contraction_certificate(spec, res.table);
      return res;
    }
    running_min = std::min(running_min, s);
    if (s > 10.0 * running_min) {
      std::ostringstream os;
      os << "fixed point diverged at iteration " << it << " (residual " << s
         << ", running minimum " << running_min << ")";
      throw SolveError(SolveFailure::Divergence, os.str(), trace);
    }
    for (std::size_t i = 0; i < spec.size(); ++i) eta[spec[i].effect] += opts.damping * r[i];
  }
  std::ostringstream os;
  os << "fixed point did not converge in " << opts.max_iter << " iterations (residual "
     << trace.back() << ")";
  throw SolveError(SolveFailure::NonConvergence, os.str(), trace);
}

double contraction_certificate(const MLLSpec& spec, const JointTable& t) {
  if (!spec.is_complete()) throw DomainError("certificate requires a complete collection");
  if (!lemma4_condition(spec))
    throw DomainError("certificate requires every proper-margin effect to leave at most one other proper margin");
  const Subset V = spec.vars().full();
  const Eigen::MatrixXd J = jacobian(t, spec);
  double best = 0.0;
  for (const auto& col : spec.pairs()) {
    if (col.margin == V) continue;
    const auto c = static_cast<Eigen::Index>(col.effect - 1);
    double s = 0.0;
    for (std::size_t r = 0; r < spec.size(); ++r)
      if (!is_subset(col.effect, spec[r].margin)) s += J(static_cast<Eigen::Index>(r), c) * J(static_cast<Eigen::Index>(r), c);
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

namespace {

JointTable reconstruct_impl(const VarSet& vars, Subset M, std::span<const JointTable> margins,
                            const std::map<Subset, double>& eta_targets, const SolveOptions& opts,
                            int* sweeps_out) {
  if (M == 0 || !is_subset(M, vars.full())) throw DomainError("invalid reconstruction margin");
  const VarSet local = vars.restrict(M);
  std::vector<Subset> masks;
  std::vector<std::vector<double>> targets;
  for (const auto& f : margins) {
    const Subset N = vars.embed(f.vars());
    if (!is_subset(N, M)) throw DomainError("given margin is not contained in the target margin");
    if (!(vars.restrict(N) == f.vars()))
      throw DomainError("given margin variables must follow the parent order");
    masks.push_back(compress(N, M));
    targets.emplace_back(f.p().begin(), f.p().end());
  }
  const Subset full = local.full();
  for (Subset K = 1; K <= full; ++K) {
    const bool covered = std::any_of(masks.begin(), masks.end(), [&](Subset N) { return is_subset(K, N); });
    const bool targeted = eta_targets.count(expand(K, M)) > 0;
    if (covered && targeted)
      throw DomainError("effect " + local.format(K) + " is fixed by a given margin and also targeted");
    if (!covered && !targeted)
      throw DomainError("effect " + local.format(K) + " has neither a margin nor a target");
  }
  for (const auto& [L, v] : eta_targets) {
    if (L == 0 || !is_subset(L, M)) throw DomainError("η target outside the margin");
    if (!std::isfinite(v)) throw DomainError("η target is not finite");
  }
  for (std::size_t i = 0; i < masks.size(); ++i)
    for (std::size_t j = i + 1; j < masks.size(); ++j) {
      const Subset I = masks[i] & masks[j];
      if (I == 0) continue;
      const auto a = kernels::marginal_sums(targets[i], compress(I, masks[i]));
      const auto b = kernels::marginal_sums(targets[j], compress(I, masks[j]));
      for (std::size_t y = 0; y < a.size(); ++y)
        if (std::abs(a[y] - b[y]) > kConsistencyTolerance)
          throw SolveError(SolveFailure::InconsistentMargins,
                           "given margins " + local.format(masks[i]) + " and " +
                               local.format(masks[j]) + " disagree on " + local.format(I));
    }

  EtaVector eta = EtaVector::zeros(local);
  for (const auto& [L, v] : eta_targets) eta[compress(L, M)] = v;
  JointTable start = table_from_eta(eta);
  if (masks.empty()) {
    if (sweeps_out) *sweeps_out = 0;
    return start;
  }
  Fitted fit = ipf(std::vector<double>(start.p().begin(), start.p().end()), masks, targets);
  if (fit.sweeps > 0) {
    if (sweeps_out) *sweeps_out = fit.sweeps;
    return JointTable::normalized(local, std::move(fit.q));
  }
  // IPF stalled: solve the mixed system directly.
  std::vector<EffectMarginPair> pairs;
  std::vector<double> values;
  std::vector<EtaVector> given_eta;
  for (const auto& f : margins) given_eta.push_back(eta_from_table(f));
  for (Subset K = 1; K <= full; ++K) {
    std::size_t m = 0;
    while (m < masks.size() && !is_subset(K, masks[m])) ++m;
    if (m < masks.size()) {
      pairs.push_back({K, masks[m]});
      values.push_back(given_eta[m][compress(K, masks[m])]);
    } else {
      pairs.push_back({K, full});
      values.push_back(eta[K]);
    }
  }
  MLLSpec mixed(local, pairs);
  SolveOptions nopts = opts;
  nopts.tol = std::min(opts.tol, 1e-12);
  auto res = newton_solve(mixed, MLLVector(mixed, values), nopts,
                          eta_from_table(JointTable::normalized(local, fit.q)));
  if (sweeps_out) *sweeps_out = -fit.sweeps + res.iterations;
  return res.table;
}

}  // namespace

JointTable reconstruct_mixed(const VarSet& vars, Subset M, std::span<const JointTable> margins,
                             const std::map<Subset, double>& eta_targets, const SolveOptions& opts) {
  return reconstruct_impl(vars, M, margins, eta_targets, opts, nullptr);
}

SolveResult invert_hierarchical(const MLLSpec& spec, const MLLVector& target_in,
                                const SolveOptions& opts) {
  require_solvable(spec, target_in, opts);
  const MLLVector target(spec, aligned_values(spec, target_in));
  const auto order = hierarchical_order(spec);
  if (!order) throw DomainError("collection is not hierarchical");
  const VarSet& vars = spec.vars();

  std::vector<JointTable> built;
  std::vector<Subset> built_masks;
  std::vector<double> trace;
  int sweeps_total = 0;
  for (std::size_t i = 0; i < order->size(); ++i) {
    const Subset M = (*order)[i];
    // Maximal intersections with earlier margins, each taken from the first
    // earlier margin that contains it.
    std::vector<Subset> inter;
    for (Subset N : built_masks)
      if (Subset I = N & M; I != 0) inter.push_back(I);
    std::sort(inter.begin(), inter.end());
    inter.erase(std::unique(inter.begin(), inter.end()), inter.end());
    std::vector<JointTable> given;
    for (Subset I : inter) {
      const bool dominated = std::any_of(inter.begin(), inter.end(), [&](Subset J) {
        return J != I && is_subset(I, J);
      });
      if (dominated) continue;
      std::size_t j = 0;
      while (!is_subset(I, built_masks[j])) ++j;
      given.push_back(marginalize(built[j], compress(I, built_masks[j])));
    }
    std::map<Subset, double> eta_targets;
    for (std::size_t k = 0; k < spec.size(); ++k)
      if (spec[k].margin == M) eta_targets[spec[k].effect] = target.values[k];
    int sweeps = 0;
    try {
      built.push_back(reconstruct_impl(vars, M, given, eta_targets, opts, &sweeps));
    } catch (const SolveError& e) {
      throw SolveError(SolveFailure::SubSolver,
                       "margin " + std::to_string(i) + " (" + vars.format(M) + "): " + e.what(),
                       e.trace());
    } catch (const DomainError& e) {
      throw SolveError(SolveFailure::SubSolver,
                       "margin " + std::to_string(i) + " (" + vars.format(M) + "): " + e.what());
    }
    built_masks.push_back(M);
    sweeps_total += std::abs(sweeps);
  }
  SolveResult res{built.back()};
  const auto r = residual_vector(res.table, target);
  res.final_residual = sup_norm(r);
  res.trace = {res.final_residual};
  res.trace_l2 = {l2_norm(r)};
  res.iterations = sweeps_total;
  res.method_used = "HIERARCHICAL";
  if (res.final_residual > opts.tol) {
    auto polished = newton_solve(spec, target, opts, eta_from_table(res.table));
    polished.iterations += sweeps_total;
    polished.method_used = "HIERARCHICAL>NEWTON";
    return polished;
  }
  return res;
}

void CycleChainSpec::validate() const {
  const std::size_t k = blocks.size();
  if (k < 2) throw DomainError("a chain needs at least two blocks");
  Subset used = 0;
  for (Subset b : blocks) {
    if (b == 0) throw DomainError("chain blocks must be nonempty");
    if (b & used) throw DomainError("chain blocks must be disjoint");
    if (!is_subset(b, vars.full())) throw DomainError("chain block outside the variable set");
    used |= b;
  }
  if (conditionals.size() != k) throw DomainError("chain needs one conditional per block");
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = conditionals[i];
    if (!(c.vars() == vars) || c.target() != blocks[(i + 1) % k] || c.given() != blocks[i])
      throw DomainError("conditional " + std::to_string(i) + " must be p(A_" +
                        std::to_string((i + 1) % k + 1) + " | A_" + std::to_string(i + 1) + ")");
  }
}

CycleChainSpec chain_from_table(const JointTable& t, const std::vector<Subset>& blocks) {
  CycleChainSpec c{t.vars(), blocks, {}};
  for (std::size_t i = 0; i < blocks.size(); ++i)
    c.conditionals.push_back(condition(t, blocks[(i + 1) % blocks.size()], blocks[i]));
  c.validate();
  return c;
}

Eigen::MatrixXd chain_transition(const CycleChainSpec& chain) {
  chain.validate();
  const std::size_t k = chain.blocks.size();
  const auto states = [&](std::size_t i) {
    return Eigen::Index{1} << popcount(chain.blocks[i % k]);
  };
  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(states(0), states(0));
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = chain.conditionals[i];
    Eigen::MatrixXd T(states(i), states(i + 1));
    for (Eigen::Index a = 0; a < T.rows(); ++a)
      for (Eigen::Index b = 0; b < T.cols(); ++b)
        T(a, b) = c.at(static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(a));
    M = M * T;
  }
  return M;
}

std::vector<double> stationary_vector(const Eigen::MatrixXd& M) {
  const Eigen::Index d = M.rows();
  if (d == 0 || M.cols() != d) throw DomainError("transition matrix must be square and nonempty");
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (!(M(i, j) > 0.0)) throw DomainError("transition probabilities must be strictly positive");
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(d, d) - M.transpose();
  A.row(d - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(d);
  rhs(d - 1) = 1.0;
  const Eigen::VectorXd pi = A.partialPivLu().solve(rhs);
  std::vector<double> out(pi.data(), pi.data() + d);
  for (double v : out)
    if (!(v > 0.0) || !std::isfinite(v))
      throw SolveError(SolveFailure::NonConvergence, "stationary solve produced a non-positive entry");
  return out;
}

JointTable stationary(const CycleChainSpec& chain) {
  const Eigen::MatrixXd M = chain_transition(chain);
  return JointTable::normalized(chain.vars.restrict(chain.blocks.front()), stationary_vector(M));
}

JointTable stationary_power(const CycleChainSpec& chain, double tol, int max_iter, int* iterations) {
  const Eigen::MatrixXd M = chain_transition(chain);
  const Eigen::Index d = M.rows();
  Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(d, 1.0 / static_cast<double>(d));
  int it = 0;
  for (; it < max_iter; ++it) {
    Eigen::RowVectorXd next = pi * M;
    next /= next.sum();
    const double change = (next - pi).cwiseAbs().maxCoeff();
    pi = next;
    if (change <= tol) {
      ++it;
      break;
    }
  }
  if (iterations) *iterations = it;
  return JointTable::normalized(chain.vars.restrict(chain.blocks.front()),
                                std::vector<double>(pi.data(), pi.data() + d));
}

SolveResult invert_cyclic(const MLLSpec& spec, const MLLVector& target_in, const SolveOptions& opts,
                          std::optional<std::vector<Subset>> blocks) {
  require_solvable(spec, target_in, opts);
  const MLLVector target(spec, aligned_values(spec, target_in));
  if (!blocks) blocks = detect_cycle(spec);
  if (!blocks) throw DomainError("collection has no cyclic conditional structure");
  const auto& A = *blocks;
  const std::size_t k = A.size();
  const VarSet& vars = spec.vars();

  CycleChainSpec chain{vars, A, {}};
  std::vector<std::optional<ConditionalTable>> cond(k);
  for (std::size_t i = 0; i < k; ++i) {
    const Subset prev = A[(i + k - 1) % k];
    cond[i] = conditional_from_lambda(vars, A[i], prev, values_of(target, conditional_lambda_set(A[i], prev)));
  }
  for (std::size_t j = 0; j < k; ++j) chain.conditionals.push_back(*cond[(j + 1) % k]);
  const JointTable pi = stationary(chain);
  const EtaVector pi_eta = eta_from_table(pi);

  const MLLSpec Q = cycle_hierarchical_target(spec, A);
  std::vector<double> qv = target.values;
  for (std::size_t i = 0; i < Q.size(); ++i)
    if (Q[i].margin == A.front()) qv[i] = pi_eta[compress(Q[i].effect, A.front())];
  SolveResult res = invert_hierarchical(Q, MLLVector(Q, qv), opts);
  const auto r = residual_vector(res.table, target);
  res.final_residual = sup_norm(r);
  res.trace.push_back(res.final_residual);
  res.trace_l2.push_back(l2_norm(r));
  res.method_used = "MARKOV>" + res.method_used;
  if (res.final_residual > opts.tol) {
    auto polished = newton_solve(spec, target, opts, eta_from_table(res.table));
    polished.method_used = res.method_used + ">NEWTON";
    return polished;
  }
  return res;
}

SolveResult invert_contraction(const MLLSpec& spec, const MLLVector& target_in,
                               const std::vector<EffectMarginPair>& moved, const SolveOptions& opts) {
  require_solvable(spec, target_in, opts);
  const MLLVector target(spec, aligned_values(spec, target_in));
  const MLLSpec Q = move_to_full(spec, moved);
  if (!hierarchical_order(Q)) throw DomainError("moving the pairs to V does not give a hierarchical collection");
  std::vector<std::size_t> w;
  for (std::size_t i = 0; i < spec.size(); ++i)
    if (std::find(moved.begin(), moved.end(), spec[i]) != moved.end()) w.push_back(i);
  if (w.size() != moved.size()) throw DomainError("moved pairs are not all in the collection");

  SolveOptions inner = opts;
  inner.tol = std::min(opts.tol, 1e-12);
  std::vector<double> qv = target.values;
  for (std::size_t i : w) qv[i] = 0.0;
  std::vector<double> trace, trace_l2;
  double running_min = std::numeric_limits<double>::infinity();
  int inner_iterations = 0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    SolveResult q = invert_hierarchical(Q, MLLVector(Q, qv), inner);
    inner_iterations += q.iterations;
    const auto r = residual_vector(q.table, target);
    const double s = sup_norm(r);
    trace.push_back(s);
    trace_l2.push_back(l2_norm(r));
    if (s <= opts.tol) {
      q.iterations = it;
      q.final_residual = s;
      q.method_used = "CONTRACTION";
      q.trace = std::move(trace);
      q.trace_l2 = std::move(trace_l2);
      return q;
    }
    running_min = std::min(running_min, s);
    if (s > 10.0 * running_min)
      throw SolveError(SolveFailure::Divergence, "partial fixed point diverged", trace);
    for (std::size_t i : w) qv[i] += opts.damping * r[i];
  }
  throw SolveError(SolveFailure::NonConvergence, "partial fixed point did not converge", trace);
}

SolveResult newton_solve(const MLLSpec& spec, const MLLVector& target_in, const SolveOptions& opts,
                         std::optional<EtaVector> start) {
  require_solvable(spec, target_in, opts);
  const MLLVector target(spec, aligned_values(spec, target_in));
  EtaVector eta = start ? *start : EtaVector::zeros(spec.vars());
  if (!(eta.vars() == spec.vars())) throw DomainError("starting point uses different variables");
  std::vector<double> trace, trace_l2;
  JointTable t = table_or_diverge(eta, trace);
  auto r = residual_vector(t, target);
  const int limit = std::min(opts.max_iter, kNewtonMaxIter);
  const auto n = static_cast<Eigen::Index>(spec.size());
  for (int it = 1;; ++it) {
    const double s = sup_norm(r);
    const double norm = l2_norm(r);
    trace.push_back(s);
    trace_l2.push_back(norm);
    if (s <= opts.tol) {
      SolveResult res{std::move(t)};
      res.iterations = it - 1;
      res.final_residual = s;
      res.method_used = "NEWTON";
      res.trace = std::move(trace);
      res.trace_l2 = std::move(trace_l2);
      return res;
    }
    if (it > limit) break;
    const Eigen::MatrixXd J = jacobian(t, spec);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) rhs(i) = r[static_cast<std::size_t>(i)];
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
    if (!lu.isInvertible())
      throw SolveError(SolveFailure::NonConvergence, "Newton: singular Jacobian", trace);
    const Eigen::VectorXd step = lu.solve(rhs);
    double alpha = 1.0;
    bool accepted = false;
    for (int h = 0; h < 40 && !accepted; ++h, alpha *= 0.5) {
      EtaVector trial = eta;
      for (Eigen::Index j = 0; j < n; ++j) trial[static_cast<Subset>(j + 1)] += alpha * step(j);
      try {
        JointTable tt = table_from_eta(trial);
        auto rr = residual_vector(tt, target);
        if (l2_norm(rr) < norm) {
          eta = std::move(trial);
          t = std::move(tt);
          r = std::move(rr);
          accepted = true;
        }
      } catch (const DomainError&) {
      }
    }
    if (!accepted)
      throw SolveError(SolveFailure::NonConvergence, "Newton: line search failed to reduce the residual",
                       trace);
  }
  std::ostringstream os;
  os << "Newton did not converge in " << limit << " iterations (residual " << trace.back() << ")";
  throw SolveError(SolveFailure::NonConvergence, os.str(), trace);
}

MLLVector interchange_target(const MLLSpec& spec, const MLLVector& target, const RuleStep& move) {
  if (move.rule != Rule::Interchange) throw DomainError("not an interchange step");
  const bool up = is_subset(move.from, move.to);
  const Subset small = up ? move.from : move.to;
  const Subset big = up ? move.to : move.from;
  const Subset A = big & ~small;
  const auto cond = conditional_from_lambda(spec.vars(), A, small,
                                            values_of(target, conditional_lambda_set(A, small)));
  const double f = parity_log_mean(cond, move.effect, big);
  const MLLSpec next = apply_interchange(spec, move);
  std::vector<double> values = aligned_values(spec, target);
  const auto i = spec.index_of({move.effect, move.from});
  values[*i] += up ? f : -f;
  return MLLVector(next, std::move(values));
}

namespace {

struct ChainRun {
  std::vector<std::string> methods;
  int iterations = 0;
  std::optional<double> certificate;
};

JointTable run_chain(const MLLSpec& spec, const MLLVector& target, std::span<const RuleStep> steps,
                     const SolveOptions& opts, ChainRun& run);

JointTable run_prop1(const MLLSpec& spec, const MLLVector& target, int v,
                     std::span<const RuleStep> rest, const SolveOptions& opts, ChainRun& run) {
  const VarSet& vars = spec.vars();
  const Subset V = vars.full();
  const Subset vb = bit(v);
  const Subset others = V & ~vb;
  const auto cond = conditional_from_lambda(vars, vb, others, values_of(target, conditional_lambda_set(vb, others)));
  const MLLSpec reduced = reduce_minus_v(spec, v);
  std::vector<double> rv;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (spec[i].effect & vb) continue;
    double val = target.values[i];
    if (spec[i].margin == V) val -= parity_log_mean(cond, spec[i].effect, V);
    rv.push_back(val);
  }
  const JointTable sub = run_chain(reduced, MLLVector(reduced, rv), rest, opts, run);
  std::vector<double> p(vars.cells());
  for (std::uint32_t x = 0; x < p.size(); ++x) p[x] = sub[compress(x, others)] * cond.at(x);
  return JointTable::normalized(vars, std::move(p));
}

JointTable run_prop2(const MLLSpec& spec, const MLLVector& target, int v,
                     std::span<const RuleStep> rest, const SolveOptions& opts, ChainRun& run) {
  const VarSet& vars = spec.vars();
  const Subset V = vars.full();
  const Subset vb = bit(v);
  const Subset others = V & ~vb;
  const MLLSpec reduced = reduce_minus_v(spec, v);
  std::vector<JointTable> slices;
  for (int xv = 0; xv < 2; ++xv) {
    std::vector<double> kv;
    for (std::size_t i = 0; i < spec.size(); ++i) {
      if (spec[i].effect & vb) continue;
      const double with_v = value_of(target, {spec[i].effect | vb, spec[i].margin});
      kv.push_back(target.values[i] + (xv == 0 ? with_v : -with_v));
    }
    // Both slices follow the same chain; record its methods once.
    ChainRun slice_run;
    slices.push_back(run_chain(reduced, MLLVector(reduced, kv), rest, opts, xv == 0 ? run : slice_run));
    run.iterations += slice_run.iterations;
  }
  const Subset Nv = *spec.margin_of(vb);
  const Subset Nrest = compress(Nv & ~vb, others);
  double f = 0.0;
  if (Nrest != 0) {
    double acc = 0.0;
    for (int xv = 0; xv < 2; ++xv) {
      const auto pm = kernels::marginal_sums(slices[static_cast<std::size_t>(xv)].p(), Nrest);
      for (double q : pm) acc += (xv == 0 ? 1.0 : -1.0) * std::log(q);
    }
    f = std::ldexp(acc, -popcount(Nv));
  }
  const double lam = value_of(target, {vb, Nv}) - f;
  const double w0 = std::exp(lam), w1 = std::exp(-lam);
  std::vector<double> p(vars.cells());
  for (std::uint32_t x = 0; x < p.size(); ++x) {
    const int xv = (x & vb) ? 1 : 0;
    p[x] = (xv ? w1 : w0) * slices[static_cast<std::size_t>(xv)][compress(x, others)];
  }
  return JointTable::normalized(vars, std::move(p));
}

JointTable run_chain(const MLLSpec& spec, const MLLVector& target, std::span<const RuleStep> steps,
                     const SolveOptions& opts, ChainRun& run) {
  if (steps.empty()) throw DomainError("rule chain ended without a base rule");
  const RuleStep& s = steps.front();
  const auto rest = steps.subspan(1);
  SolveOptions inner = opts;
  inner.tol = std::min(opts.tol, 1e-12);
  auto record = [&](const SolveResult& r) {
    run.methods.push_back(r.method_used);
    run.iterations += r.iterations;
    if (r.contraction_certificate) run.certificate = r.contraction_certificate;
    return r.table;
  };
  switch (s.rule) {
    case Rule::Interchange: {
      run.methods.push_back("INTERCHANGE");
      const MLLVector next = interchange_target(spec, target, s);
      return run_chain(next.spec, next, rest, opts, run);
    }
    case Rule::Nested:
      return run_chain(spec, target, rest, opts, run);
    case Rule::Prop1:
      run.methods.push_back("PROP1");
      return run_prop1(spec, target, s.variable, rest, opts, run);
    case Rule::Prop2:
      run.methods.push_back("PROP2");
      return run_prop2(spec, target, s.variable, rest, opts, run);
    case Rule::Hierarchical:
      return record(invert_hierarchical(spec, target, inner));
    case Rule::TwoMargin:
    case Rule::ThreeMargin:
    case Rule::Lemma4:
      return record(invert_fixed_point(spec, target, inner));
    case Rule::CyclicConditional:
      return record(invert_cyclic(spec, target, inner, s.blocks));
    case Rule::Contraction:
      return record(invert_contraction(spec, target, s.moved, inner));
  }
  throw DomainError("unsupported rule in chain");
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ">";
    out += parts[i];
  }
  return out;
}

}  // namespace

SolveResult invert(const MLLSpec& spec, const MLLVector& target_in, const SolveOptions& opts) {
  require_solvable(spec, target_in, opts);
  const MLLVector target(spec, aligned_values(spec, target_in));
  switch (opts.method) {
    case Method::Hierarchical: return invert_hierarchical(spec, target, opts);
    case Method::FixedPoint: return invert_fixed_point(spec, target, opts);
    case Method::Markov: return invert_cyclic(spec, target, opts);
    case Method::Newton: return newton_solve(spec, target, opts);
    case Method::Auto: break;
  }

  std::vector<std::string> failures;
  std::vector<double> last_trace;
  const auto report = classify(spec);
  if (report.verdict == Verdict::ProvenSmooth) {
    try {
      ChainRun run;
      JointTable t = run_chain(spec, target, report.rule_chain, opts, run);
      const auto r = residual_vector(t, target);
      SolveResult res{std::move(t)};
      res.final_residual = sup_norm(r);
      res.trace = {res.final_residual};
      res.trace_l2 = {l2_norm(r)};
      res.iterations = run.iterations;
      res.contraction_certificate = run.certificate;
      res.method_used = join(run.methods);
      if (res.final_residual <= opts.tol) return res;
      auto polished = newton_solve(spec, target, opts, eta_from_table(res.table));
      polished.iterations += res.iterations;
      polished.method_used = res.method_used + ">NEWTON";
      polished.contraction_certificate = res.contraction_certificate;
      return polished;
    } catch (const SolveError& e) {
      failures.push_back(std::string("rule chain: ") + e.what());
      last_trace = e.trace();
    } catch (const DomainError& e) {
      failures.push_back(std::string("rule chain: ") + e.what());
    }
  }

  SolveOptions damped = opts;
  damped.damping = std::min(opts.damping, 0.5);
  try {
    auto res = invert_fixed_point(spec, target, damped);
    res.method_used = "FIXED_POINT(damped)";
    return res;
  } catch (const SolveError& e) {
    failures.push_back(std::string("damped fixed point: ") + e.what());
    last_trace = e.trace();
  }

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 0.5);
  for (int s = 0; s < 5; ++s) {
    EtaVector start = EtaVector::zeros(spec.vars());
    if (s > 0)
      for (Subset L = 1; L < spec.vars().cells(); ++L) start[L] = normal(rng);
    try {
      auto res = newton_solve(spec, target, opts, start);
      res.method_used = "NEWTON(start " + std::to_string(s) + ")";
      return res;
    } catch (const SolveError& e) {
      failures.push_back("Newton start " + std::to_string(s) + ": " + e.what());
      last_trace = e.trace();
    }
  }
  std::string msg = "all methods failed";
  for (const auto& f : failures) msg += "; " + f;
  throw SolveError(SolveFailure::AllMethodsFailed, msg, last_trace);
}

}  // namespace mll
