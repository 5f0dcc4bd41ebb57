#include "mll/classify.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "mll/error.hpp"

namespace mll {

namespace {

std::vector<EffectMarginPair> pair_key(const MLLSpec& spec) {
  auto ps = spec.pairs();
  std::sort(ps.begin(), ps.end());
  return ps;
}

/// margin_of for a complete spec as a dense table.
std::vector<Subset> margin_table(const MLLSpec& spec) {
  std::vector<Subset> m(spec.vars().cells(), 0);
  for (const auto& pr : spec.pairs()) m[pr.effect] = pr.margin;
  return m;
}

void require_complete(const MLLSpec& spec, const char* what) {
  if (!spec.is_complete())
    throw DomainError(std::string(what) + " requires a complete collection");
}

bool nested(const MLLSpec& spec) {
  const auto ms = spec.margins();
  for (std::size_t i = 0; i + 1 < ms.size(); ++i)
    if (!is_subset(ms[i], ms[i + 1]) || ms[i] == ms[i + 1]) return false;
  return true;
}

std::optional<int> prop1_variable(const MLLSpec& spec) {
  const Subset V = spec.vars().full();
  if (spec.vars().size() < 2) return std::nullopt;
  for (int v = 0; v < spec.vars().size(); ++v) {
    const bool ok = std::all_of(spec.pairs().begin(), spec.pairs().end(), [&](const auto& pr) {
      return !(pr.margin & bit(v)) || pr.margin == V;
    });
    if (ok) return v;
  }
  return std::nullopt;
}

std::vector<int> prop1_variables(const MLLSpec& spec) {
  std::vector<int> out;
  const Subset V = spec.vars().full();
  if (spec.vars().size() < 2) return out;
  for (int v = 0; v < spec.vars().size(); ++v)
    if (std::all_of(spec.pairs().begin(), spec.pairs().end(), [&](const auto& pr) {
          return !(pr.margin & bit(v)) || pr.margin == V;
        }))
      out.push_back(v);
  return out;
}

std::vector<int> prop2_variables(const MLLSpec& spec) {
  std::vector<int> out;
  if (spec.vars().size() < 2) return out;
  const auto m = margin_table(spec);
  const Subset V = spec.vars().full();
  for (int v = 0; v < spec.vars().size(); ++v) {
    const Subset vb = bit(v);
    if (m[vb] == 0) continue;
    bool ok = true;
    for (Subset A = 1; A <= V && ok; ++A) {
      if (A & vb) continue;
      ok = m[A] != 0 && m[A] == m[A | vb];
    }
    if (ok) out.push_back(v);
  }
  return out;
}

std::string join_margins(const VarSet& vars, const std::vector<Subset>& ms, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < ms.size(); ++i) {
    if (i) out += sep;
    out += vars.format(ms[i]);
  }
  return out;
}

std::optional<RuleStep> contraction_step(const MLLSpec& spec, std::size_t max_pairs);

struct Found {
  std::vector<RuleStep> chain;
  std::vector<MLLSpec> specs;
};

class Classifier {
 public:
  explicit Classifier(const ClassifyOptions& opts) : opts_(opts) {}

  std::optional<Found> run(const MLLSpec& spec) {
    if (auto f = as_given(spec)) return f;
    const auto closure = interchange_closure(spec);
    for (Rule family : {Rule::Prop1, Rule::Prop2, Rule::ThreeMargin, Rule::Lemma4,
                        Rule::CyclicConditional, Rule::Contraction}) {
      if (family == Rule::Contraction && !opts_.contraction_rule) continue;
      for (const auto& member : closure) {
        if (auto f = try_rule(member.spec, family)) {
          Found out;
          out.chain = member.moves;
          out.specs = member.specs;
          out.chain.insert(out.chain.end(), f->chain.begin(), f->chain.end());
          out.specs.insert(out.specs.end(), f->specs.begin(), f->specs.end());
          return out;
        }
      }
    }
    return std::nullopt;
  }

 private:
  struct Member {
    MLLSpec spec;
    std::vector<RuleStep> moves;
    std::vector<MLLSpec> specs;
  };

  std::optional<Found> as_given(const MLLSpec& spec) {
    if (auto order = hierarchical_order(spec)) {
      RuleStep s{Rule::Hierarchical};
      s.order = *order;
      return Found{{s}, {}};
    }
    if (spec.margins().size() <= 2) return Found{{RuleStep{Rule::TwoMargin}}, {}};
    return std::nullopt;
  }

  std::vector<Member> interchange_closure(const MLLSpec& spec) const {
    std::vector<Member> out;
    std::set<std::vector<EffectMarginPair>> seen{pair_key(spec)};
    out.push_back({spec, {}, {}});
    for (std::size_t i = 0; i < out.size() && out.size() < opts_.interchange_limit; ++i) {
      for (const auto& mv : interchange_moves(out[i].spec)) {
        MLLSpec next = apply_interchange(out[i].spec, mv);
        if (!seen.insert(pair_key(next)).second) continue;
        Member m{next, out[i].moves, out[i].specs};
        m.moves.push_back(mv);
        m.specs.push_back(next);
        out.push_back(std::move(m));
        if (out.size() >= opts_.interchange_limit) break;
      }
    }
    return out;
  }

  std::optional<Found> recurse_reduced(const MLLSpec& spec, Rule rule, int v) {
    MLLSpec reduced = reduce_minus_v(spec, v);
    auto sub = run(reduced);
    if (!sub) return std::nullopt;
    RuleStep s{rule};
    s.variable = v;
    Found f{{s}, {reduced}};
    f.chain.insert(f.chain.end(), sub->chain.begin(), sub->chain.end());
    f.specs.insert(f.specs.end(), sub->specs.begin(), sub->specs.end());
    return f;
  }

  std::optional<Found> try_rule(const MLLSpec& spec, Rule family) {
    switch (family) {
      case Rule::Prop1: {
        const auto vs = prop1_variables(spec);
        const bool is_nested = nested(spec);
        for (int v : vs) {
          if (auto f = recurse_reduced(spec, Rule::Prop1, v)) {
            if (is_nested) f->chain.insert(f->chain.begin(), RuleStep{Rule::Nested});
            return f;
          }
        }
        return std::nullopt;
      }
      case Rule::Prop2:
        for (int v : prop2_variables(spec))
          if (auto f = recurse_reduced(spec, Rule::Prop2, v)) return f;
        return std::nullopt;
      case Rule::ThreeMargin:
        if (spec.margins().size() <= 3) return Found{{RuleStep{Rule::ThreeMargin}}, {}};
        return std::nullopt;
      case Rule::Lemma4:
        if (lemma4_condition(spec)) return Found{{RuleStep{Rule::Lemma4}}, {}};
        return std::nullopt;
      case Rule::CyclicConditional:
        if (auto blocks = detect_cycle(spec)) {
          RuleStep s{Rule::CyclicConditional};
          s.blocks = *blocks;
          return Found{{s}, {cycle_hierarchical_target(spec, *blocks)}};
        }
        return std::nullopt;
      case Rule::Contraction:
        if (auto s = contraction_step(spec, opts_.contraction_max_pairs))
          return Found{{*s}, {move_to_full(spec, s->moved)}};
        return std::nullopt;
      default:
        return std::nullopt;
    }
  }

  ClassifyOptions opts_;
};

std::optional<RuleStep> contraction_step(const MLLSpec& spec, std::size_t max_pairs) {
  const Subset V = spec.vars().full();
  std::vector<EffectMarginPair> proper;
  for (const auto& pr : spec.pairs())
    if (pr.margin != V) proper.push_back(pr);
  std::sort(proper.begin(), proper.end());
  if (proper.empty() || proper.size() > max_pairs) return std::nullopt;
  const auto m = margin_table(spec);
  const std::size_t count = proper.size();
  // Subsets of the proper pairs by increasing size, then lexicographically.
  for (std::size_t r = 1; r <= count; ++r) {
    std::vector<bool> pick(count, false);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(r), true);
    do {
      std::vector<EffectMarginPair> W;
      std::set<Subset> in_w;
      for (std::size_t i = 0; i < count; ++i)
        if (pick[i]) {
          W.push_back(proper[i]);
          in_w.insert(proper[i].effect);
        }
      bool ok = true;
      for (const auto& pr : W) {
        for (Subset K = 1; K <= V && ok; ++K)
          if ((K & ~pr.margin) && m[K] != V && !in_w.count(K)) ok = false;
        if (!ok) break;
      }
      for (std::size_t i = 0; ok && i < W.size(); ++i) {
        std::set<Subset> others;
        for (const auto& pr : W)
          if (W[i].effect & ~pr.margin) others.insert(pr.margin);
        ok = others.size() <= 1;
      }
      if (ok && hierarchical_order(move_to_full(spec, W))) {
        RuleStep s{Rule::Contraction};
        s.moved = W;
        return s;
      }
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  return std::nullopt;
}

}  // namespace

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::ProvenSmooth: return "PROVEN_SMOOTH";
    case Verdict::NotSmoothIncomplete: return "NOT_SMOOTH_INCOMPLETE";
    case Verdict::Unknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

const char* to_string(Rule r) {
  switch (r) {
    case Rule::Hierarchical: return "Hierarchical";
    case Rule::TwoMargin: return "TwoMargin";
    case Rule::Prop1: return "Prop1";
    case Rule::Nested: return "Nested";
    case Rule::Prop2: return "Prop2";
    case Rule::ThreeMargin: return "ThreeMargin";
    case Rule::Lemma4: return "Lemma4";
    case Rule::CyclicConditional: return "CyclicConditional";
    case Rule::Contraction: return "Contraction";
    case Rule::Interchange: return "Interchange";
  }
  return "?";
}

std::string RuleStep::describe(const VarSet& vars) const {
  std::string out = to_string(rule);
  switch (rule) {
    case Rule::Prop1:
    case Rule::Prop2:
      out += " remove v=" + vars.name(variable);
      break;
    case Rule::Hierarchical:
      out += " order " + join_margins(vars, order, ",");
      break;
    case Rule::Interchange:
      out += " " + vars.format(effect) + ": " + vars.format(from) + " -> " + vars.format(to);
      break;
    case Rule::CyclicConditional:
      out += " blocks " + join_margins(vars, blocks, "|");
      break;
    case Rule::Contraction: {
      out += " W=";
      for (std::size_t i = 0; i < moved.size(); ++i) {
        if (i) out += ",";
        out += vars.format(moved[i].effect) + "@" + vars.format(moved[i].margin);
      }
      break;
    }
    default:
      break;
  }
  return out;
}

const RuleStep* ClassificationReport::base_step() const {
  for (const auto& s : rule_chain)
    if (s.rule != Rule::Interchange) return &s;
  return nullptr;
}

bool is_complete(const MLLSpec& spec) { return spec.is_complete(); }

std::optional<std::vector<Subset>> hierarchical_order(const MLLSpec& spec) {
  require_complete(spec, "hierarchy check");
  const auto ms = spec.margins();
  const std::size_t k = ms.size();
  std::vector<std::set<std::size_t>> adj(k);
  std::vector<int> indeg(k, 0);
  auto idx = [&](Subset M) {
    return static_cast<std::size_t>(std::find(ms.begin(), ms.end(), M) - ms.begin());
  };
  for (const auto& pr : spec.pairs()) {
    const std::size_t from = idx(pr.margin);
    for (std::size_t j = 0; j < k; ++j)
      if (j != from && is_subset(pr.effect, ms[j]) && adj[from].insert(j).second) ++indeg[j];
  }
  // ms is already in (size, mask) order, so the lowest ready index is the tie-break.
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < k; ++i)
    if (indeg[i] == 0) ready.push(i);
  std::vector<Subset> order;
  while (!ready.empty()) {
    const std::size_t u = ready.top();
    ready.pop();
    order.push_back(ms[u]);
    for (std::size_t w : adj[u])
      if (--indeg[w] == 0) ready.push(w);
  }
  if (order.size() != k) return std::nullopt;
  return order;
}

bool is_hierarchical(const MLLSpec& spec) { return hierarchical_order(spec).has_value(); }

MLLSpec reduce_minus_v(const MLLSpec& spec, int v) {
  if (v < 0 || v >= spec.vars().size()) throw DomainError("variable position out of range");
  if (spec.vars().size() < 2) throw DomainError("cannot remove the only variable");
  const Subset rest = spec.vars().full() & ~bit(v);
  std::vector<EffectMarginPair> pairs;
  for (const auto& pr : spec.pairs()) {
    if (pr.effect & bit(v)) continue;
    pairs.push_back({compress(pr.effect, rest), compress(pr.margin & ~bit(v), rest)});
  }
  return MLLSpec(spec.vars().restrict(rest), std::move(pairs));
}

std::vector<RuleStep> interchange_moves(const MLLSpec& spec) {
  require_complete(spec, "interchange");
  std::vector<RuleStep> out;
  const auto ms = spec.margins();
  const auto m = margin_table(spec);
  const Subset V = spec.vars().full();
  for (const auto& pr : spec.pairs()) {
    for (Subset N2 : ms) {
      if (N2 == pr.margin) continue;
      Subset big, small;
      if (is_subset(pr.margin, N2)) {
        big = N2;
        small = pr.margin;
      } else if (is_subset(N2, pr.margin)) {
        big = pr.margin;
        small = N2;
      } else {
        continue;
      }
      if (!is_subset(pr.effect, small)) continue;
      const Subset A = big & ~small;
      bool ok = true;
      for (Subset K = 1; K <= V && ok; ++K)
        if (is_subset(K, big) && (K & A) && m[K] != big) ok = false;
      if (!ok) continue;
      RuleStep s{Rule::Interchange};
      s.effect = pr.effect;
      s.from = pr.margin;
      s.to = N2;
      out.push_back(s);
    }
  }
  return out;
}

MLLSpec apply_interchange(const MLLSpec& spec, const RuleStep& move) {
  auto pairs = spec.pairs();
  bool found = false;
  for (auto& pr : pairs)
    if (pr.effect == move.effect && pr.margin == move.from) {
      pr.margin = move.to;
      found = true;
    }
  if (!found) throw DomainError("interchange refers to a pair not in the collection");
  return MLLSpec(spec.vars(), std::move(pairs));
}

bool lemma4_condition(const MLLSpec& spec) {
  const Subset V = spec.vars().full();
  std::vector<Subset> proper;
  for (Subset M : spec.margins())
    if (M != V) proper.push_back(M);
  for (const auto& pr : spec.pairs()) {
    if (pr.margin == V) continue;
    int c = 0;
    for (Subset N : proper)
      if (N != pr.margin && (pr.effect & ~N)) ++c;
    if (c > 1) return false;
  }
  return true;
}

namespace {

/// Expected margins of a block cycle, or nothing when blocks claim an effect
/// twice.
std::optional<std::vector<Subset>> cycle_margins(const std::vector<Subset>& seq, Subset V) {
  std::vector<Subset> e(std::size_t{V} + 1, 0);
  const std::size_t k = seq.size();
  for (std::size_t i = 0; i < k; ++i) {
    const Subset Ai = seq[i];
    const Subset M = Ai | seq[(i + k - 1) % k];
    bool clash = false;
    for_each_subset(M, [&](Subset L) {
      if (L == 0 || !(L & Ai)) return;
      if (e[L] != 0) clash = true;
      e[L] = M;
    });
    if (clash) return std::nullopt;
  }
  for (Subset L = 1; L <= V; ++L)
    if (e[L] == 0) e[L] = V;
  return e;
}

bool search_cycle(std::vector<Subset>& seq, Subset used, Subset V, const std::vector<Subset>& m) {
  if (seq.size() >= 3) {
    if (auto e = cycle_margins(seq, V)) {
      bool match = true;
      for (Subset L = 1; L <= V && match; ++L) match = (*e)[L] == m[L];
      if (match) return true;
    }
  }
  const Subset free = V & ~used;
  bool found = false;
  for_each_subset(free, [&](Subset b) {
    if (found || b == 0) return;
    seq.push_back(b);
    if (search_cycle(seq, used | b, V, m)) {
      found = true;
      return;
    }
    seq.pop_back();
  });
  return found;
}

}  // namespace

std::optional<std::vector<Subset>> detect_cycle(const MLLSpec& spec) {
  if (!spec.is_complete() || spec.vars().size() < 3) return std::nullopt;
  const Subset V = spec.vars().full();
  const auto m = margin_table(spec);
  std::vector<Subset> seq;
  if (search_cycle(seq, 0, V, m)) return seq;
  return std::nullopt;
}

MLLSpec cycle_hierarchical_target(const MLLSpec& spec, const std::vector<Subset>& blocks) {
  if (blocks.size() < 2) throw DomainError("a cycle needs at least two blocks");
  const Subset A1 = blocks.front();
  auto pairs = spec.pairs();
  for (auto& pr : pairs)
    if (is_subset(pr.effect, A1)) pr.margin = A1;
  return MLLSpec(spec.vars(), std::move(pairs));
}

MLLSpec move_to_full(const MLLSpec& spec, const std::vector<EffectMarginPair>& moved) {
  auto pairs = spec.pairs();
  for (auto& pr : pairs)
    if (std::find(moved.begin(), moved.end(), pr) != moved.end()) pr.margin = spec.vars().full();
  return MLLSpec(spec.vars(), std::move(pairs));
}

std::optional<RuleStep> rule_applies(const MLLSpec& spec, Rule rule) {
  require_complete(spec, "rule check");
  switch (rule) {
    case Rule::Hierarchical:
      if (auto o = hierarchical_order(spec)) {
        RuleStep s{rule};
        s.order = *o;
        return s;
      }
      return std::nullopt;
    case Rule::TwoMargin:
      if (spec.margins().size() <= 2) return RuleStep{rule};
      return std::nullopt;
    case Rule::ThreeMargin:
      if (spec.margins().size() <= 3) return RuleStep{rule};
      return std::nullopt;
    case Rule::Nested:
      if (nested(spec)) return RuleStep{rule};
      return std::nullopt;
    case Rule::Prop1:
      if (auto v = prop1_variable(spec)) {
        RuleStep s{rule};
        s.variable = *v;
        return s;
      }
      return std::nullopt;
    case Rule::Prop2: {
      const auto vs = prop2_variables(spec);
      if (vs.empty()) return std::nullopt;
      RuleStep s{rule};
      s.variable = vs.front();
      return s;
    }
    case Rule::Lemma4:
      if (lemma4_condition(spec)) return RuleStep{rule};
      return std::nullopt;
    case Rule::CyclicConditional:
      if (auto b = detect_cycle(spec)) {
        RuleStep s{rule};
        s.blocks = *b;
        return s;
      }
      return std::nullopt;
    case Rule::Contraction:
      return contraction_step(spec, ClassifyOptions{}.contraction_max_pairs);
    case Rule::Interchange: {
      auto mv = interchange_moves(spec);
      if (mv.empty()) return std::nullopt;
      return mv.front();
    }
  }
  return std::nullopt;
}

ClassificationReport classify(const MLLSpec& spec, const ClassifyOptions& opts) {
  ClassificationReport rep;
  if (!spec.is_complete()) {
    rep.verdict = Verdict::NotSmoothIncomplete;
    std::vector<int> seen(spec.vars().cells(), 0);
    for (const auto& pr : spec.pairs()) ++seen[pr.effect];
    for (Subset L = 1; L < seen.size(); ++L) {
      if (seen[L] == 0) {
        rep.reason = "effect " + spec.vars().format(L) + " is missing";
        break;
      }
      if (seen[L] > 1) {
        rep.reason = "effect " + spec.vars().format(L) + " appears in " +
                     std::to_string(seen[L]) + " margins";
        break;
      }
    }
    return rep;
  }
  Classifier c(opts);
  if (auto f = c.run(spec)) {
    rep.verdict = Verdict::ProvenSmooth;
    rep.rule_chain = std::move(f->chain);
    rep.reduced_specs = std::move(f->specs);
  } else {
    rep.verdict = Verdict::Unknown;
    rep.reason = "no rule applies";
  }
  return rep;
}

// --- relabeling ---------------------------------------------------------

namespace {

Subset permute_mask(Subset s, const std::vector<int>& perm) {
  Subset out = 0;
  while (s) {
    const int i = std::countr_zero(s);
    out |= bit(perm[static_cast<std::size_t>(i)]);
    s &= s - 1;
  }
  return out;
}

std::vector<std::uint32_t> encode(const MLLSpec& spec, const std::vector<int>& perm) {
  std::vector<std::uint32_t> code;
  code.reserve(spec.size());
  for (const auto& pr : spec.pairs())
    code.push_back((permute_mask(pr.margin, perm) << 16) | permute_mask(pr.effect, perm));
  std::sort(code.begin(), code.end());
  return code;
}

void check_permutation(const std::vector<int>& perm, int n) {
  if (static_cast<int>(perm.size()) != n) throw DomainError("permutation has the wrong length");
  std::vector<int> s = perm;
  std::sort(s.begin(), s.end());
  for (int i = 0; i < n; ++i)
    if (s[static_cast<std::size_t>(i)] != i) throw DomainError("not a permutation");
}

}  // namespace

MLLSpec permute(const MLLSpec& spec, const std::vector<int>& perm) {
  check_permutation(perm, spec.vars().size());
  std::vector<EffectMarginPair> pairs;
  for (const auto& pr : spec.pairs())
    pairs.push_back({permute_mask(pr.effect, perm), permute_mask(pr.margin, perm)});
  return MLLSpec(spec.vars(), std::move(pairs));
}

std::vector<std::uint32_t> canonical_code(const MLLSpec& spec) {
  const int n = spec.vars().size();
  if (n > 8) throw DomainError("canonical form is limited to 8 variables");
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::uint32_t> best = encode(spec, perm);
  while (std::next_permutation(perm.begin(), perm.end())) best = std::min(best, encode(spec, perm));
  return best;
}

MLLSpec canonical_form(const MLLSpec& spec) {
  std::vector<EffectMarginPair> pairs;
  for (std::uint32_t c : canonical_code(spec)) pairs.push_back({c & 0xFFFFu, c >> 16});
  return MLLSpec(spec.vars(), std::move(pairs));
}

// --- enumeration --------------------------------------------------------

namespace {

void check_enumeration_size(int n, int max) {
  if (n < 1 || n > max)
    throw DomainError("enumeration supports 1 to " + std::to_string(max) + " variables, got " +
                      std::to_string(n));
}

std::vector<std::vector<int>> all_permutations(int n) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<std::vector<int>> out;
  do out.push_back(perm);
  while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

std::string cycle_type(const std::vector<int>& perm) {
  std::vector<bool> seen(perm.size(), false);
  std::vector<int> lengths;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (seen[i]) continue;
    int len = 0;
    for (std::size_t j = i; !seen[j]; j = static_cast<std::size_t>(perm[j])) {
      seen[j] = true;
      ++len;
    }
    lengths.push_back(len);
  }
  std::sort(lengths.rbegin(), lengths.rend());
  std::string out;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (i) out += "+";
    out += std::to_string(lengths[i]);
  }
  return out;
}

/// |Fix(g)| by the cycle formula: an assignment fixed by g is constant on
/// each effect orbit, so each cycle (L, gL, ..., g^{c-1}L) contributes the
/// number of margins M ⊇ L with g^c M = M.
std::uint64_t fixed_count(int n, const std::vector<int>& perm) {
  const Subset V = (Subset{1} << n) - 1;
  std::vector<bool> seen(std::size_t{V} + 1, false);
  std::uint64_t total = 1;
  for (Subset L = 1; L <= V; ++L) {
    if (seen[L]) continue;
    int c = 0;
    for (Subset K = L; !seen[K]; K = permute_mask(K, perm)) {
      seen[K] = true;
      ++c;
    }
    std::uint64_t choices = 0;
    for (Subset M = L; M <= V; ++M) {
      if (!is_subset(L, M)) continue;
      Subset g = M;
      for (int r = 0; r < c; ++r) g = permute_mask(g, perm);
      if (g == M) ++choices;
    }
    total *= choices;
  }
  return total;
}

MLLSpec decode_assignment(const VarSet& vars, std::uint64_t index) {
  const Subset V = vars.full();
  const int n = vars.size();
  std::vector<EffectMarginPair> pairs;
  for (Subset L = 1; L <= V; ++L) {
    const Subset free = V & ~L;
    const std::uint64_t radix = std::uint64_t{1} << (n - popcount(L));
    const auto digit = static_cast<std::uint32_t>(index % radix);
    index /= radix;
    pairs.push_back({L, L | expand(digit, free)});
  }
  return MLLSpec(vars, std::move(pairs));
}

}  // namespace

std::uint64_t labeled_complete_count(int n) {
  check_enumeration_size(n, 4);
  std::uint64_t total = 1;
  for (Subset L = 1; L < (Subset{1} << n); ++L) total *= std::uint64_t{1} << (n - popcount(L));
  return total;
}

BurnsideCount burnside_complete(int n) {
  check_enumeration_size(n, 4);
  BurnsideCount b;
  std::map<std::string, std::array<std::uint64_t, 2>> by_type;
  for (const auto& perm : all_permutations(n)) {
    const std::uint64_t f = fixed_count(n, perm);
    ++b.group_order;
    b.fixed_sum += f;
    auto& slot = by_type[cycle_type(perm)];
    ++slot[0];
    slot[1] = f;
  }
  b.orbits = b.fixed_sum / b.group_order;
  for (auto it = by_type.rbegin(); it != by_type.rend(); ++it) b.by_cycle_type.emplace_back(*it);
  return b;
}

std::vector<MLLSpec> labeled_complete_specs(int n, bool parallel) {
  check_enumeration_size(n, 3);
  const VarSet vars = VarSet::numbered(n);
  const std::uint64_t total = labeled_complete_count(n);
  std::vector<std::optional<MLLSpec>> slots(total);
  const auto count = static_cast<std::int64_t>(total);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t i = 0; i < count; ++i)
    slots[static_cast<std::size_t>(i)] = decode_assignment(vars, static_cast<std::uint64_t>(i));
  std::vector<MLLSpec> out;
  out.reserve(total);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

EnumerationResult enumerate_complete(int n, bool up_to_symmetry) {
  check_enumeration_size(n, 4);
  EnumerationResult r;
  r.n = n;
  r.up_to_symmetry = up_to_symmetry;
  r.labeled = labeled_complete_count(n);
  r.burnside = burnside_complete(n);
  if (n > 3) {
    r.count = up_to_symmetry ? r.burnside.orbits : r.labeled;
    return r;
  }
  auto specs = labeled_complete_specs(n, true);
  r.materialized = true;
  if (!up_to_symmetry) {
    r.count = specs.size();
    r.specs = std::move(specs);
    return r;
  }
  std::vector<std::vector<std::uint32_t>> codes(specs.size());
  const auto count = static_cast<std::int64_t>(specs.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i)
    codes[static_cast<std::size_t>(i)] = canonical_code(specs[static_cast<std::size_t>(i)]);
  std::sort(codes.begin(), codes.end());
  codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
  const VarSet vars = VarSet::numbered(n);
  for (const auto& code : codes) {
    std::vector<EffectMarginPair> pairs;
    for (std::uint32_t c : code) pairs.push_back({c & 0xFFFFu, c >> 16});
    r.specs.emplace_back(vars, std::move(pairs));
  }
  r.count = r.specs.size();
  return r;
}

CensusReport census(int n, const ClassifyOptions& opts, bool parallel) {
  check_enumeration_size(n, 3);
  CensusReport rep;
  rep.n = n;
  const auto en = enumerate_complete(n, true);
  rep.labeled_complete = en.labeled;
  rep.complete_orbits = en.count;
  rep.burnside = en.burnside;

  std::vector<ClassificationReport> reports(en.specs.size());
  ClassifyOptions without = opts;
  without.contraction_rule = false;
  std::vector<char> proven_without(en.specs.size(), 0);
  const auto count = static_cast<std::int64_t>(en.specs.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto& s = en.specs[static_cast<std::size_t>(i)];
    reports[static_cast<std::size_t>(i)] = classify(s, opts);
    proven_without[static_cast<std::size_t>(i)] =
        classify(s, without).verdict == Verdict::ProvenSmooth;
  }

  for (std::size_t i = 0; i < en.specs.size(); ++i) {
    const auto& r = reports[i];
    rep.proven_without_contraction += proven_without[i] ? 1 : 0;
    if (r.verdict != Verdict::ProvenSmooth) {
      ++rep.unknown;
    } else {
      ++rep.proven_smooth;
      if (!r.rule_chain.empty() && r.rule_chain.front().rule == Rule::Interchange)
        ++rep.via_interchange;
      switch (r.base_step()->rule) {
        case Rule::Hierarchical: ++rep.hierarchical; break;
        case Rule::TwoMargin: ++rep.two_margin_extra; break;
        case Rule::Nested:
          ++rep.nested_first;
          ++rep.prop1_first;
          break;
        case Rule::Prop1: ++rep.prop1_first; break;
        case Rule::Prop2: ++rep.prop2_first; break;
        case Rule::ThreeMargin: ++rep.three_margin_first; break;
        case Rule::Lemma4: ++rep.lemma4_first; break;
        case Rule::CyclicConditional: ++rep.cyclic_first; break;
        case Rule::Contraction: ++rep.contraction_first; break;
        case Rule::Interchange: break;
      }
    }
    rep.entries.push_back({en.specs[i], r});
  }

  if (n == 3) {
    rep.families = {
        {"Hierarchical", rep.hierarchical, 23},
        {"TwoMargin", rep.two_margin_extra, 4},
        {"Prop1", rep.prop1_first, 5},
        {"Prop2", rep.prop2_first, 1},
        {"Lemma4 (incl. ThreeMargin)", rep.three_margin_first + rep.lemma4_first, 26},
        {"Contraction", rep.contraction_first, 3},
        {"CyclicConditional", rep.cyclic_first, 1},
        {"ProvenSmooth total", rep.proven_smooth, 63},
    };
  }
  return rep;
}

}  // namespace mll
