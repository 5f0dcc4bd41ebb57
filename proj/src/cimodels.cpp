#include "mll/cimodels.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

#include "mll/error.hpp"
#include "mll/kernels.hpp"

namespace mll {

namespace {

bool margin_less(Subset a, Subset b) {
  const int pa = popcount(a), pb = popcount(b);
  return pa != pb ? pa < pb : a < b;
}

std::vector<EffectMarginPair> union_of_zero_pairs(const VarSet& vars,
                                                  const std::vector<CIStatement>& statements) {
  std::vector<EffectMarginPair> out;
  for (const auto& s : statements) {
    s.validate(vars);
    for (const auto& pr : ci_to_zero_params(s))
      if (std::find(out.begin(), out.end(), pr) == out.end()) out.push_back(pr);
  }
  return out;
}

/// Reason a set of zero pairs cannot sit in a complete collection, or empty.
std::string repeated_effect(const VarSet& vars, const std::vector<EffectMarginPair>& zeros) {
  for (std::size_t i = 0; i < zeros.size(); ++i)
    for (std::size_t j = i + 1; j < zeros.size(); ++j)
      if (zeros[i].effect == zeros[j].effect)
        return "effect " + vars.format(zeros[i].effect) + " is constrained in margins " +
               vars.format(zeros[i].margin) + " and " + vars.format(zeros[j].margin) +
               "; no complete collection contains both";
  return {};
}

MLLSpec assemble(const VarSet& vars, const std::vector<EffectMarginPair>& zeros,
                 const std::vector<Subset>& free_effects, const std::vector<Subset>& margins) {
  std::vector<EffectMarginPair> pairs = zeros;
  for (std::size_t i = 0; i < free_effects.size(); ++i) pairs.push_back({free_effects[i], margins[i]});
  return MLLSpec(vars, std::move(pairs)).sorted();
}

}  // namespace

void CIStatement::validate(const VarSet& vars) const {
  if (a == 0 || b == 0) throw DomainError("independence statement needs nonempty sides");
  if ((a & b) || (a & c) || (b & c)) throw DomainError("independence statement sets must be disjoint");
  if (!is_subset(a | b | c, vars.full())) throw DomainError("independence statement outside the variables");
}

std::string CIStatement::describe(const VarSet& vars) const {
  auto names = [&](Subset s) {
    std::string out;
    for (const auto& n : vars.labels(s)) out += (out.empty() ? "" : ",") + n;
    return out;
  };
  std::string out = names(a) + " _||_ " + names(b);
  if (c) out += " | " + names(c);
  return out;
}

double ci_discrepancy(const JointTable& t, const CIStatement& s) {
  s.validate(t.vars());
  const Subset abc = s.a | s.b | s.c;
  const auto pabc = kernels::marginal_sums(t.p(), abc);
  const auto pac = kernels::marginal_sums(t.p(), s.a | s.c);
  const auto pbc = kernels::marginal_sums(t.p(), s.b | s.c);
  const auto pc = s.c ? kernels::marginal_sums(t.p(), s.c) : std::vector<double>{1.0};
  double worst = 0.0;
  for (std::uint32_t y = 0; y < pabc.size(); ++y) {
    const std::uint32_t x = expand(y, abc);
    const double c = pc[compress(x, s.c)];
    const double joint = pabc[y] / c;
    const double prod = (pac[compress(x, s.a | s.c)] / c) * (pbc[compress(x, s.b | s.c)] / c);
    worst = std::max(worst, std::abs(joint - prod));
  }
  return worst;
}

bool ci_holds(const JointTable& t, const CIStatement& s, double tol) {
  return ci_discrepancy(t, s) <= tol;
}

std::vector<EffectMarginPair> ci_to_zero_params(const CIStatement& s) {
  if (s.a == 0 || s.b == 0) throw DomainError("independence statement needs nonempty sides");
  if ((s.a & s.b) || (s.a & s.c) || (s.b & s.c))
    throw DomainError("independence statement sets must be disjoint");
  const Subset abc = s.a | s.b | s.c;
  std::vector<EffectMarginPair> out;
  for_each_subset(abc, [&](Subset L) {
    if ((L & s.a) && (L & s.b)) out.push_back({L, abc});
  });
  std::sort(out.begin(), out.end());
  return out;
}

ConditionalTable conditional_from_lambda(const VarSet& vars, Subset A, Subset B,
                                         const std::vector<double>& values,
                                         const std::map<Subset, double>& b_values) {
  const auto pairs = conditional_lambda_set(A, B);
  if (!is_subset(A | B, vars.full())) throw DomainError("conditional sets outside the variables");
  if (values.size() != pairs.size())
    throw DomainError("conditional needs " + std::to_string(pairs.size()) + " values, got " +
                      std::to_string(values.size()));
  const Subset AB = A | B;
  const VarSet local = vars.restrict(AB);
  EtaVector eta = EtaVector::zeros(local);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!std::isfinite(values[i])) throw DomainError("conditional parameter is not finite");
    eta[compress(pairs[i].effect, AB)] = values[i];
  }
  for (const auto& [L, v] : b_values) {
    if (L == 0 || !is_subset(L, B)) throw DomainError("conditioning-side value outside B");
    eta[compress(L, AB)] = v;
  }
  const JointTable margin = table_from_eta(eta);
  const ConditionalTable c = condition(margin, compress(A, AB), compress(B, AB));
  return ConditionalTable(vars, A, B, std::vector<double>(c.values().begin(), c.values().end()));
}

void GibbsCycleSpec::validate() const {
  if (state == 0 || !is_subset(state, vars.full())) throw DomainError("Gibbs state must be a nonempty subset");
  if (steps.empty()) throw DomainError("Gibbs sweep needs at least one step");
  Subset readable = state;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    if (s.target == 0 || (s.target & s.given)) throw DomainError("Gibbs step targets must be nonempty and disjoint from the given set");
    if (!(s.table.vars() == vars) || s.table.target() != s.target || s.table.given() != s.given)
      throw DomainError("Gibbs step " + std::to_string(i) + " table does not match its sets");
    if (!is_subset(s.given, readable))
      throw DomainError("Gibbs step " + std::to_string(i) + " conditions on " + vars.format(s.given & ~readable) +
                        ", which is neither in the state nor drawn earlier in the sweep");
    readable |= s.target;
  }
}

Eigen::MatrixXd gibbs_transition(const GibbsCycleSpec& g) {
  g.validate();
  Subset U = g.state;
  for (const auto& s : g.steps) U |= s.target;
  const std::size_t states = std::size_t{1} << popcount(g.state);
  const std::size_t cells = std::size_t{1} << popcount(U);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(states), static_cast<Eigen::Index>(states));
  for (std::uint32_t s0 = 0; s0 < states; ++s0) {
    std::vector<double> dist(cells, 0.0);
    dist[compress(expand(s0, g.state), U)] = 1.0;
    for (const auto& st : g.steps) {
      std::vector<double> next(cells, 0.0);
      const std::uint32_t draws = std::uint32_t{1} << popcount(st.target);
      for (std::uint32_t u = 0; u < cells; ++u) {
        if (dist[u] == 0.0) continue;
        const std::uint32_t x = expand(u, U);
        const std::uint32_t given = compress(x, st.given);
        for (std::uint32_t b = 0; b < draws; ++b) {
          const std::uint32_t x2 = (x & ~st.target) | expand(b, st.target);
          next[compress(x2, U)] += dist[u] * st.table.at(b, given);
        }
      }
      dist = std::move(next);
    }
    for (std::uint32_t u = 0; u < cells; ++u)
      K(s0, compress(expand(u, U), g.state)) += dist[u];
  }
  return K;
}

JointTable gibbs_stationary(const GibbsCycleSpec& g) {
  return JointTable::normalized(g.vars.restrict(g.state), stationary_vector(gibbs_transition(g)));
}

ModelSpec model_spec(const VarSet& vars, const std::vector<CIStatement>& statements,
                     std::size_t search_limit) {
  ModelSpec m{vars, statements, union_of_zero_pairs(vars, statements), std::nullopt, {}, false};
  m.failure = repeated_effect(vars, m.zero_pairs);
  if (!m.failure.empty()) return m;

  std::vector<Subset> listed;
  std::set<Subset> constrained;
  for (const auto& pr : m.zero_pairs) {
    listed.push_back(pr.margin);
    constrained.insert(pr.effect);
  }
  std::sort(listed.begin(), listed.end(), margin_less);
  listed.erase(std::unique(listed.begin(), listed.end()), listed.end());

  std::vector<Subset> free_effects;
  std::vector<std::vector<Subset>> options;
  for (Subset L = 1; L <= vars.full(); ++L) {
    if (constrained.count(L)) continue;
    free_effects.push_back(L);
    std::vector<Subset> opt;
    for (Subset M : listed)
      if (is_subset(L, M)) opt.push_back(M);
    if (std::find(opt.begin(), opt.end(), vars.full()) == opt.end()) opt.push_back(vars.full());
    options.push_back(std::move(opt));
  }

  std::vector<Subset> choice(free_effects.size());
  for (std::size_t i = 0; i < choice.size(); ++i) choice[i] = options[i].front();
  MLLSpec greedy = assemble(vars, m.zero_pairs, free_effects, choice);
  m.embedding = greedy;
  if (classify(greedy).verdict == Verdict::ProvenSmooth) return m;

  // Mixed-radix walk over the alternatives, greedy assignment first.
  std::vector<std::size_t> digit(free_effects.size(), 0);
  for (std::size_t tried = 1; tried < search_limit; ++tried) {
    std::size_t i = 0;
    while (i < digit.size() && ++digit[i] == options[i].size()) digit[i++] = 0;
    if (i == digit.size()) break;
    for (std::size_t j = 0; j < digit.size(); ++j) choice[j] = options[j][digit[j]];
    MLLSpec candidate = assemble(vars, m.zero_pairs, free_effects, choice);
    if (classify(candidate).verdict == Verdict::ProvenSmooth) {
      m.embedding = candidate;
      m.searched = true;
      return m;
    }
  }
  return m;
}

ModelSpec model_spec(const VarSet& vars, const std::vector<CIStatement>& statements,
                     const MLLSpec& embedding) {
  ModelSpec m{vars, statements, union_of_zero_pairs(vars, statements), std::nullopt, {}, false};
  m.failure = repeated_effect(vars, m.zero_pairs);
  if (!m.failure.empty()) return m;
  if (!(embedding.vars() == vars)) throw DomainError("embedding uses different variables");
  if (!embedding.is_complete()) throw DomainError("embedding must be a complete collection");
  for (const auto& pr : m.zero_pairs)
    if (!embedding.index_of(pr))
      throw DomainError("embedding lacks the zero pair (" + vars.format(pr.effect) + ", " +
                        vars.format(pr.margin) + ")");
  m.embedding = embedding;
  return m;
}

std::vector<std::size_t> free_pair_indices(const ModelSpec& model) {
  if (!model.embedding) throw DomainError("model has no embedding: " + model.failure);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < model.embedding->size(); ++i)
    if (std::find(model.zero_pairs.begin(), model.zero_pairs.end(), (*model.embedding)[i]) ==
        model.zero_pairs.end())
      out.push_back(i);
  return out;
}

namespace {

struct Candidate {
  Subset target, given;
  ConditionalTable table;
};

/// Whether the sweep leaves p_S invariant when the state starts in p_S:
/// track sets whose joint law is correct; each step needs its given set
/// inside one of them.
bool preserves_law(const std::vector<const Candidate*>& seq, Subset S) {
  std::vector<Subset> correct{S};
  for (const auto* c : seq) {
    if (std::none_of(correct.begin(), correct.end(), [&](Subset G) { return is_subset(c->given, G); }))
      return false;
    for (Subset& G : correct) G &= ~c->target;
    correct.push_back(c->target | c->given);
  }
  return std::any_of(correct.begin(), correct.end(), [&](Subset G) { return is_subset(S, G); });
}

Subset read_before_drawn(const std::vector<const Candidate*>& seq) {
  Subset drawn = 0, read = 0;
  for (const auto* c : seq) {
    read |= c->given & ~drawn;
    drawn |= c->target;
  }
  return read;
}

}  // namespace

std::optional<GibbsCycleSpec> detect_gibbs(const ModelSpec& model, const MLLVector& target) {
  if (!model.embedding) return std::nullopt;
  const MLLSpec& Q = *model.embedding;
  const VarSet& vars = Q.vars();
  std::vector<Candidate> cands;
  for (Subset M : Q.margins()) {
    if (popcount(M) != 2 || M == vars.full()) continue;
    for (Subset a : {M & (~M + 1), M & (M - 1)}) {
      const Subset b = M & ~a;
      const auto pairs = conditional_lambda_set(a, b);
      std::vector<double> vals;
      bool ok = true;
      for (const auto& pr : pairs) {
        const auto i = target.spec.index_of(pr);
        if (!i) {
          ok = false;
          break;
        }
        vals.push_back(target.values[*i]);
      }
      if (!ok) continue;
      const ConditionalTable base = conditional_from_lambda(vars, a, b, vals);
      for (const auto& s : model.statements) {
        if (s.c != b) continue;
        Subset C = 0;
        if (s.a == a) C = s.b;
        else if (s.b == a) C = s.a;
        else continue;
        const Subset given = b | C;
        const std::size_t rows = std::size_t{1} << popcount(given);
        std::vector<double> v(2 * rows);
        for (std::uint32_t y = 0; y < rows; ++y) {
          const std::uint32_t x = expand(y, given);
          for (std::uint32_t xa = 0; xa < 2; ++xa) v[xa + 2 * y] = base.at(xa, compress(x, b));
        }
        if (std::none_of(cands.begin(), cands.end(), [&](const Candidate& c) {
              return c.target == a && c.given == given;
            }))
          cands.push_back({a, given, ConditionalTable(vars, a, given, std::move(v))});
      }
    }
  }
  if (cands.size() < 2 || cands.size() > 8) return std::nullopt;

  // Longest sweep first; within a length, lexicographic candidate order.
  const std::size_t k = cands.size();
  for (std::size_t len = k; len >= 2; --len) {
    std::vector<std::size_t> idx(k);
    std::iota(idx.begin(), idx.end(), 0);
    std::set<std::vector<std::size_t>> tried;
    do {
      std::vector<std::size_t> head(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(len));
      if (!tried.insert(head).second) continue;
      std::vector<const Candidate*> seq;
      Subset drawn = 0;
      for (std::size_t i : head) {
        seq.push_back(&cands[i]);
        drawn |= cands[i].target;
      }
      const Subset S = read_before_drawn(seq);
      if (S == 0 || !is_subset(S, drawn) || !preserves_law(seq, S)) continue;
      GibbsCycleSpec g{vars, {}, S};
      for (const auto* c : seq) g.steps.push_back({c->target, c->given, c->table});
      g.validate();
      return g;
    } while (std::next_permutation(idx.begin(), idx.end()));
  }
  return std::nullopt;
}

ModelMember model_member(const ModelSpec& model, const std::vector<double>& free_values,
                         const SolveOptions& opts) {
  if (!model.embedding) throw DomainError("model has no complete embedding: " + model.failure);
  const MLLSpec& Q = *model.embedding;
  const auto free = free_pair_indices(model);
  if (free_values.size() != free.size())
    throw DomainError("model has " + std::to_string(free.size()) + " free parameters, got " +
                      std::to_string(free_values.size()));
  std::vector<double> values(Q.size(), 0.0);
  for (std::size_t i = 0; i < free.size(); ++i) values[free[i]] = free_values[i];
  const MLLVector target(Q, values);
  const VarSet& vars = Q.vars();

  ModelMember out{SolveResult{JointTable::uniform(vars)}};
  out.gibbs = detect_gibbs(model, target);
  bool solved = false;
  if (out.gibbs) {
    const JointTable pi = gibbs_stationary(*out.gibbs);
    // Seed: π on the state, then the first-pass conditionals for the rest.
    std::vector<double> p(vars.cells());
    Subset covered = out.gibbs->state;
    std::vector<const GibbsStep*> used;
    for (const auto& st : out.gibbs->steps)
      if (!(st.target & covered) && is_subset(st.given, covered)) {
        used.push_back(&st);
        covered |= st.target;
      }
    for (std::uint32_t x = 0; x < p.size(); ++x) {
      double w = pi[compress(x, out.gibbs->state)];
      for (const auto* st : used) w *= st->table.at(x);
      p[x] = w;
    }
    const JointTable seed = JointTable::normalized(vars, std::move(p));
    try {
      out.result = newton_solve(Q, target, opts, eta_from_table(seed));
      out.result.method_used = "GIBBS>NEWTON";
      out.gibbs_used = true;
      solved = true;
      const JointTable ps = marginalize(out.result.table, out.gibbs->state);
      double diff = 0.0;
      for (std::size_t i = 0; i < ps.size(); ++i) diff = std::max(diff, std::abs(ps[i] - pi[i]));
      out.gibbs_check = diff;
    } catch (const SolveError&) {
    }
  }
  if (!solved) out.result = invert(Q, target, opts);

  for (const auto& s : model.statements)
    out.max_ci_discrepancy = std::max(out.max_ci_discrepancy, ci_discrepancy(out.result.table, s));
  if (out.max_ci_discrepancy > 1e-9)
    throw SolveError(SolveFailure::SubSolver,
                     "recovered table violates an independence statement by " +
                         std::to_string(out.max_ci_discrepancy),
                     out.result.trace);
  return out;
}

}  // namespace mll
