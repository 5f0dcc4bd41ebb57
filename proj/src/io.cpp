#include "mll/io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "mll/error.hpp"

namespace mll::io {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string strip_comment(std::string_view line) {
  const auto pos = line.find('#');
  return trim(pos == std::string_view::npos ? line : line.substr(0, pos));
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

const json& field(const json& j, const char* name, const std::string& where) {
  if (!j.is_object()) throw DomainError(where + ": expected a JSON object");
  const auto it = j.find(name);
  if (it == j.end()) throw DomainError(where + ": missing field '" + name + "'");
  return *it;
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw DomainError(where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw DomainError(where + "[" + std::to_string(i) + "]: expected a number");
    out.push_back(j[i].get<double>());
  }
  return out;
}

template <class F>
auto with_context(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const DomainError& e) {
    throw DomainError(where + ": " + e.what());
  }
}

/// Each character of the token names one variable.
Subset chars_subset(const std::string& token, const VarSet& vars, const std::string& where) {
  Subset s = 0;
  for (char c : token) {
    const std::string name(1, c);
    if (!vars.contains(name)) throw DomainError(where + ": unknown variable '" + name + "'");
    const Subset b = bit(vars.position(name));
    if (s & b) throw DomainError(where + ": variable '" + name + "' repeated in '" + token + "'");
    s |= b;
  }
  return s;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw DomainError(what + ": invalid JSON (" + e.what() + ")");
  }
}

json to_json(const VarSet& vars, Subset s) { return vars.labels(s); }

json to_json(const JointTable& t) {
  return json{{"variables", t.vars().names()}, {"p", std::vector<double>(t.p().begin(), t.p().end())}};
}

json to_json(const MLLSpec& spec) {
  json pairs = json::array();
  for (const auto& pr : spec.pairs())
    pairs.push_back({{"margin", to_json(spec.vars(), pr.margin)}, {"effect", to_json(spec.vars(), pr.effect)}});
  return json{{"variables", spec.vars().names()}, {"pairs", pairs}};
}

json to_json(const MLLVector& v) { return json{{"spec", to_json(v.spec)}, {"values", v.values}}; }

json to_json(const SolveResult& r, bool trace) {
  json out{{"method_used", r.method_used},
           {"iterations", r.iterations},
           {"final_residual", r.final_residual},
           {"table", to_json(r.table)}};
  if (r.contraction_certificate) out["contraction_certificate"] = *r.contraction_certificate;
  if (trace) {
    out["trace"] = r.trace;
    out["trace_l2"] = r.trace_l2;
  }
  return out;
}

json to_json(const ClassificationReport& r, const VarSet& vars) {
  json chain = json::array();
  for (const auto& s : r.rule_chain) chain.push_back(s.describe(vars));
  json reduced = json::array();
  for (const auto& s : r.reduced_specs) reduced.push_back(spec_to_text(s));
  json out{{"verdict", to_string(r.verdict)}, {"rule_chain", chain}, {"reduced_specs", reduced}};
  if (!r.reason.empty()) out["reason"] = r.reason;
  return out;
}

json to_json(const CIStatement& s, const VarSet& vars) {
  return json{{"a", to_json(vars, s.a)}, {"b", to_json(vars, s.b)}, {"c", to_json(vars, s.c)},
              {"text", s.describe(vars)}};
}

VarSet parse_variables(const json& j, const std::string& where) {
  if (!j.is_array()) throw DomainError(where + ": expected an array of variable names");
  std::vector<std::string> names;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].is_string()) names.push_back(j[i].get<std::string>());
    else if (j[i].is_number_integer()) names.push_back(std::to_string(j[i].get<long long>()));
    else throw DomainError(where + "[" + std::to_string(i) + "]: expected a variable name");
  }
  return with_context(where, [&] { return VarSet(std::move(names)); });
}

Subset parse_subset(const json& j, const VarSet& vars, const std::string& where) {
  if (!j.is_array()) throw DomainError(where + ": expected an array of variable names");
  Subset s = 0;
  for (std::size_t i = 0; i < j.size(); ++i) {
    std::string name;
    if (j[i].is_string()) name = j[i].get<std::string>();
    else if (j[i].is_number_integer()) name = std::to_string(j[i].get<long long>());
    else throw DomainError(where + "[" + std::to_string(i) + "]: expected a variable name");
    if (!vars.contains(name)) throw DomainError(where + "[" + std::to_string(i) + "]: unknown variable '" + name + "'");
    const Subset b = bit(vars.position(name));
    if (s & b) throw DomainError(where + ": variable '" + name + "' listed twice");
    s |= b;
  }
  return s;
}

JointTable parse_table(const json& j) {
  const VarSet vars = parse_variables(field(j, "variables", "table"), "table.variables");
  auto p = numbers(field(j, "p", "table"), "table.p");
  if (p.size() != vars.cells())
    throw DomainError("table.p: expected " + std::to_string(vars.cells()) + " entries for " +
                      std::to_string(vars.size()) + " variables, got " + std::to_string(p.size()));
  return with_context("table.p", [&] { return JointTable(vars, std::move(p)); });
}

MLLSpec parse_spec(const json& j) {
  const VarSet vars = parse_variables(field(j, "variables", "spec"), "spec.variables");
  const json& pairs = field(j, "pairs", "spec");
  if (!pairs.is_array()) throw DomainError("spec.pairs: expected an array");
  std::vector<EffectMarginPair> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string where = "spec.pairs[" + std::to_string(i) + "]";
    const Subset M = parse_subset(field(pairs[i], "margin", where), vars, where + ".margin");
    const Subset L = parse_subset(field(pairs[i], "effect", where), vars, where + ".effect");
    if (L == 0) throw DomainError(where + ".effect: must be nonempty");
    if (!is_subset(L, M)) throw DomainError(where + ": effect " + vars.format(L) + " is not inside margin " + vars.format(M));
    out.push_back({L, M});
  }
  return with_context("spec", [&] { return MLLSpec(vars, std::move(out)); });
}

MLLVector parse_lambda(const json& j) {
  MLLSpec spec = parse_spec(field(j, "spec", "lambda"));
  auto values = numbers(field(j, "values", "lambda"), "lambda.values");
  if (values.size() != spec.size())
    throw DomainError("lambda.values: expected " + std::to_string(spec.size()) + " values, got " +
                      std::to_string(values.size()));
  return MLLVector(std::move(spec), std::move(values));
}

CycleChainSpec parse_chain(const json& j) {
  auto blocks_of = [](const json& b, const VarSet& vars) {
    if (!b.is_array()) throw DomainError("chain.blocks: expected an array of subsets");
    std::vector<Subset> out;
    for (std::size_t i = 0; i < b.size(); ++i)
      out.push_back(parse_subset(b[i], vars, "chain.blocks[" + std::to_string(i) + "]"));
    return out;
  };
  if (j.is_object() && j.contains("table")) {
    const JointTable t = with_context("chain.table", [&] { return parse_table(j["table"]); });
    const auto blocks = blocks_of(field(j, "blocks", "chain"), t.vars());
    return with_context("chain", [&] { return chain_from_table(t, blocks); });
  }
  const VarSet vars = parse_variables(field(j, "variables", "chain"), "chain.variables");
  CycleChainSpec chain{vars, blocks_of(field(j, "blocks", "chain"), vars), {}};
  const json& conds = field(j, "conditionals", "chain");
  if (!conds.is_array()) throw DomainError("chain.conditionals: expected an array");
  for (std::size_t i = 0; i < conds.size(); ++i) {
    const std::string where = "chain.conditionals[" + std::to_string(i) + "]";
    const Subset A = parse_subset(field(conds[i], "target", where), vars, where + ".target");
    const Subset B = parse_subset(field(conds[i], "given", where), vars, where + ".given");
    auto vals = numbers(field(conds[i], "values", where), where + ".values");
    chain.conditionals.push_back(with_context(where, [&] { return ConditionalTable(vars, A, B, std::move(vals)); }));
  }
  with_context("chain", [&] {
    chain.validate();
    return 0;
  });
  return chain;
}

MLLSpec parse_spec_text(std::string_view text) {
  struct Line {
    int number;
    std::string margin;
    std::vector<std::string> effects;
  };
  std::vector<Line> lines;
  std::set<char> names;
  std::istringstream in{std::string(text)};
  int number = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++number;
    const std::string line = strip_comment(raw);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(number);
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw DomainError(where + ": expected 'MARGIN: EFFECT ...'");
    Line l{number, trim(std::string_view(line).substr(0, colon)), split_ws(line.substr(colon + 1))};
    if (l.margin.empty() || l.margin.find_first_of(" \t") != std::string::npos)
      throw DomainError(where + ": margin must be one token of single-character names");
    if (l.effects.empty()) throw DomainError(where + ": margin " + l.margin + " lists no effects");
    names.insert(l.margin.begin(), l.margin.end());
    for (const auto& e : l.effects) names.insert(e.begin(), e.end());
    lines.push_back(std::move(l));
  }
  if (lines.empty()) throw DomainError("spec text contains no margins");
  std::vector<std::string> ordered;
  for (char c : names) ordered.emplace_back(1, c);
  const VarSet vars(ordered);
  std::vector<EffectMarginPair> pairs;
  std::set<EffectMarginPair> seen;
  for (const auto& l : lines) {
    const std::string where = "line " + std::to_string(l.number);
    const Subset M = chars_subset(l.margin, vars, where);
    for (const auto& e : l.effects) {
      const Subset L = chars_subset(e, vars, where);
      if (!is_subset(L, M)) throw DomainError(where + ": effect " + e + " is not inside margin " + l.margin);
      if (!seen.insert({L, M}).second) throw DomainError(where + ": duplicate pair (" + e + ", " + l.margin + ")");
      pairs.push_back({L, M});
    }
  }
  return MLLSpec(vars, std::move(pairs));
}

std::string spec_to_text(const MLLSpec& spec) {
  std::string out;
  for (Subset M : spec.margins()) {
    out += spec.vars().format(M) + ":";
    for (Subset L : spec.effects_in(M)) out += " " + spec.vars().format(L);
    out += "\n";
  }
  return out;
}

MLLSpec parse_spec_any(std::string_view content) {
  const std::string t = trim(content);
  if (!t.empty() && t.front() == '{') return parse_spec(parse_json(t, "spec"));
  return parse_spec_text(t);
}

namespace {

/// "2,4", "2 4" or "24" (when names are single characters).
Subset parse_ci_side(const std::string& s, const VarSet& vars, const std::string& where) {
  std::string spaced = s;
  std::replace(spaced.begin(), spaced.end(), ',', ' ');
  Subset out = 0;
  for (const auto& tok : split_ws(spaced)) {
    Subset part = 0;
    if (vars.contains(tok)) part = bit(vars.position(tok));
    else if (vars.single_char_names()) part = chars_subset(tok, vars, where);
    else throw DomainError(where + ": unknown variable '" + tok + "'");
    if (out & part) throw DomainError(where + ": variable repeated in '" + s + "'");
    out |= part;
  }
  return out;
}

}  // namespace

CIModelInput parse_ci_text(std::string_view text) {
  struct Line {
    int number;
    std::string a, b, c;
  };
  std::vector<Line> lines;
  std::optional<VarSet> declared;
  std::set<char> names;
  std::istringstream in{std::string(text)};
  int number = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++number;
    const std::string line = strip_comment(raw);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(number);
    if (line.rfind("variables:", 0) == 0) {
      auto toks = split_ws(line.substr(10));
      declared = with_context(where, [&] { return VarSet(toks); });
      continue;
    }
    const auto sep = line.find("_||_");
    if (sep == std::string::npos) throw DomainError(where + ": expected 'A _||_ B | C'");
    const std::string rest = line.substr(sep + 4);
    const auto bar = rest.find('|');
    Line l{number, trim(line.substr(0, sep)), trim(rest.substr(0, bar)),
           bar == std::string::npos ? std::string() : trim(rest.substr(bar + 1))};
    if (l.a.empty() || l.b.empty()) throw DomainError(where + ": both sides of _||_ must be nonempty");
    for (const auto* s : {&l.a, &l.b, &l.c})
      for (char ch : *s)
        if (ch != ',' && !std::isspace(static_cast<unsigned char>(ch))) names.insert(ch);
    lines.push_back(std::move(l));
  }
  CIModelInput out;
  if (declared) {
    out.vars = *declared;
  } else {
    if (names.empty()) throw DomainError("CI text contains no statements and no 'variables:' line");
    std::vector<std::string> ordered;
    for (char c : names) ordered.emplace_back(1, c);
    out.vars = VarSet(ordered);
  }
  for (const auto& l : lines) {
    const std::string where = "line " + std::to_string(l.number);
    CIStatement s{parse_ci_side(l.a, out.vars, where), parse_ci_side(l.b, out.vars, where),
                  parse_ci_side(l.c, out.vars, where)};
    with_context(where, [&] {
      s.validate(out.vars);
      return 0;
    });
    out.statements.push_back(s);
  }
  return out;
}

CIModelInput parse_ci(const json& j) {
  CIModelInput out;
  out.vars = parse_variables(field(j, "variables", "ci"), "ci.variables");
  const json& st = field(j, "statements", "ci");
  if (!st.is_array()) throw DomainError("ci.statements: expected an array");
  for (std::size_t i = 0; i < st.size(); ++i) {
    const std::string where = "ci.statements[" + std::to_string(i) + "]";
    CIStatement s{parse_subset(field(st[i], "a", where), out.vars, where + ".a"),
                  parse_subset(field(st[i], "b", where), out.vars, where + ".b"),
                  st[i].contains("c") ? parse_subset(st[i]["c"], out.vars, where + ".c") : Subset{0}};
    with_context(where, [&] {
      s.validate(out.vars);
      return 0;
    });
    out.statements.push_back(s);
  }
  if (j.contains("embedding")) {
    out.embedding = with_context("ci.embedding", [&] { return parse_spec(j["embedding"]); });
    if (!(out.embedding->vars() == out.vars))
      throw DomainError("ci.embedding.variables: must equal ci.variables");
  }
  return out;
}

CIModelInput parse_ci_any(std::string_view content) {
  const std::string t = trim(content);
  if (!t.empty() && t.front() == '{') return parse_ci(parse_json(t, "ci"));
  return parse_ci_text(t);
}

std::vector<double> parse_values(const json& j, const std::string& where) {
  if (j.is_object()) return numbers(field(j, "free_values", where), where + ".free_values");
  return numbers(j, where);
}

}  // namespace mll::io
