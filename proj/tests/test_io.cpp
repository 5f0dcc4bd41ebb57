#include <doctest.h>

#include "support.hpp"

using namespace test;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const DomainError& e) {
    return e.what();
  }
  return "";
}

bool mentions(const std::string& msg, const std::string& part) { return msg.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("spec text") {
  const auto sp = io::parse_spec_text("# chain\n12: 1 2 12\n\n23: 3 23   # trailing comment\n123: 13 123\n");
  CHECK(sp.vars().names() == std::vector<std::string>{"1", "2", "3"});
  CHECK(sp.size() == 7);
  CHECK(sp.margins() == std::vector<Subset>{S("12"), S("23"), S("123")});
  CHECK(io::parse_spec_text(io::spec_to_text(sp)).sorted() == sp.sorted());
  const auto letters = io::parse_spec_text("ab: a b ab\n");
  CHECK(letters.vars().names() == std::vector<std::string>{"a", "b"});

  CHECK(mentions(error_of([] { io::parse_spec_text("12 1 2\n"); }), "line 1"));
  CHECK(mentions(error_of([] { io::parse_spec_text("1: 1\n12: 2 3\n"); }), "line 2"));
  CHECK(mentions(error_of([] { io::parse_spec_text("12: 1 2 3\n"); }), "effect 3 is not inside margin 12"));
  CHECK(mentions(error_of([] { io::parse_spec_text("12: 1 1\n"); }), "duplicate pair"));
  CHECK(mentions(error_of([] { io::parse_spec_text("12:\n"); }), "lists no effects"));
  CHECK(mentions(error_of([] { io::parse_spec_text("# nothing\n"); }), "no margins"));
}

TEST_CASE("spec JSON") {
  const auto sp = spec(kContraction);
  const auto j = io::to_json(sp);
  CHECK(j["variables"] == io::json({"1", "2", "3"}));
  CHECK(io::parse_spec(j).sorted() == sp.sorted());
  CHECK(io::parse_spec_any("  " + j.dump()).sorted() == sp.sorted());
  CHECK(io::parse_spec_any(kContraction).sorted() == sp.sorted());

  auto bad = j;
  bad["pairs"][1]["effect"] = io::json::array({"9"});
  CHECK(mentions(error_of([&] { io::parse_spec(bad); }), "spec.pairs[1].effect"));
  bad = j;
  bad["pairs"][0]["effect"] = io::json::array({"1"});
  CHECK(mentions(error_of([&] { io::parse_spec(bad); }), "not inside margin"));
  bad = j;
  bad.erase("pairs");
  CHECK(mentions(error_of([&] { io::parse_spec(bad); }), "missing field 'pairs'"));
  CHECK(mentions(error_of([] { io::parse_json("{\"variables\": [", "spec"); }), "invalid JSON"));
}

TEST_CASE("table JSON") {
  std::mt19937_64 rng(1);
  const auto t = random_table(VarSet({"a", "b", "c"}), rng);
  const auto back = io::parse_table(io::parse_json(io::to_json(t).dump(), "table"));
  CHECK(back.vars() == t.vars());
  CHECK(max_diff(back, t) == 0.0);
  CHECK(mentions(error_of([] { io::parse_table(io::json{{"variables", {"1"}}, {"p", {0.5}}}); }), "expected 2 entries"));
  CHECK(mentions(error_of([] { io::parse_table(io::json{{"variables", {"1"}}, {"p", {0.5, "x"}}}); }), "table.p[1]"));
  CHECK(mentions(error_of([] { io::parse_table(io::json{{"variables", {"1"}}, {"p", {0.5, 0.6}}}); }), "table.p"));
  CHECK(mentions(error_of([] { io::parse_table(io::json{{"variables", {"1", "1"}}, {"p", {0.25, 0.25, 0.25, 0.25}}}); }), "table"));
}

TEST_CASE("lambda JSON round trip") {
  std::mt19937_64 rng(2);
  const auto sp = spec(kChain);
  const auto lv = lambda_vector(random_table(sp.vars(), rng), sp);
  const auto back = io::parse_lambda(io::parse_json(io::to_json(lv).dump(), "lambda"));
  CHECK(back.spec.sorted() == sp.sorted());
  CHECK(back.values == lv.values);
  auto j = io::to_json(lv);
  j["values"].erase(0);
  CHECK(mentions(error_of([&] { io::parse_lambda(j); }), "expected 7 values, got 6"));
}

TEST_CASE("chain JSON") {
  std::mt19937_64 rng(3);
  const auto t = random_table(VarSet::numbered(3), rng);
  const auto from_table = io::parse_chain(io::json{{"table", io::to_json(t)}, {"blocks", {{"1"}, {"2", "3"}}}});
  CHECK(from_table.blocks == std::vector<Subset>{S("1"), S("23")});
  CHECK(max_diff(stationary(from_table), marginalize(t, S("1"))) < 1e-12);

  io::json conds = io::json::array();
  for (std::size_t i = 0; i < from_table.conditionals.size(); ++i) {
    const auto& c = from_table.conditionals[i];
    conds.push_back({{"target", io::to_json(c.vars(), c.target())},
                     {"given", io::to_json(c.vars(), c.given())},
                     {"values", std::vector<double>(c.values().begin(), c.values().end())}});
  }
  const auto explicit_chain = io::parse_chain(io::json{{"variables", {"1", "2", "3"}}, {"blocks", {{"1"}, {"2", "3"}}}, {"conditionals", conds}});
  CHECK(max_diff(stationary(explicit_chain), stationary(from_table)) < 1e-15);
  conds[0]["values"][0] = 2.0;
  CHECK(mentions(error_of([&] { io::parse_chain(io::json{{"variables", {"1", "2", "3"}}, {"blocks", {{"1"}, {"2", "3"}}}, {"conditionals", conds}}); }), "chain"));
}

TEST_CASE("CI text and JSON") {
  const auto in = io::parse_ci_text("1 _||_ 2 | 3\n1 _||_ 3 | 4\n# comment\n1 _||_ 2,4\n");
  CHECK(in.vars.size() == 4);
  REQUIRE(in.statements.size() == 3);
  CHECK(in.statements[0] == CIStatement{S("1"), S("2"), S("3")});
  CHECK(in.statements[2] == CIStatement{S("1"), S("24"), 0});
  CHECK(io::parse_ci_text("1 _||_ 2 4 | 3\n").statements[0] == CIStatement{S("1"), S("24"), S("3")});
  CHECK(mentions(error_of([] { io::parse_ci_text("1 _||_ 2 | 1\n"); }), "disjoint"));
  const auto declared = io::parse_ci_text("variables: 1 2 3 4 5\n1 _||_ 2\n");
  CHECK(declared.vars.size() == 5);

  CHECK(mentions(error_of([] { io::parse_ci_text("1 _||_ 2\n1 2\n"); }), "line 2"));
  CHECK(mentions(error_of([] { io::parse_ci_text(" _||_ 2\n"); }), "nonempty"));
  CHECK(mentions(error_of([] { io::parse_ci_text("variables: 1 2\n1 _||_ 3\n"); }), "unknown variable"));

  io::json j{{"variables", {"1", "2", "3", "4"}},
             {"statements", {{{"a", {"1"}}, {"b", {"2"}}, {"c", {"3"}}}, {{"a", {"2"}}, {"b", {"4"}}}}},
             {"embedding", io::to_json(spec(kLoopGibbs))}};
  const auto ji = io::parse_ci_any(j.dump());
  CHECK(ji.statements.size() == 2);
  CHECK(ji.statements[1].c == 0);
  REQUIRE(ji.embedding);
  CHECK(ji.embedding->sorted() == spec(kLoopGibbs).sorted());
  const auto js = io::to_json(ji.statements[0], ji.vars);
  CHECK(js["a"] == io::json({"1"}));
  j["statements"][0]["a"] = {"7"};
  CHECK(mentions(error_of([&] { io::parse_ci(j); }), "ci.statements[0].a"));
}

TEST_CASE("free values") {
  CHECK(io::parse_values(io::json{0.1, 0.2}, "values") == std::vector<double>{0.1, 0.2});
  CHECK(io::parse_values(io::json{{"free_values", {0.5}}}, "values") == std::vector<double>{0.5});
  CHECK(mentions(error_of([] { io::parse_values(io::json{{"x", 1}}, "values"); }), "free_values"));
}

TEST_CASE("result and report JSON") {
  const auto sp = spec(kContraction);
  SolveOptions o;
  o.method = Method::FixedPoint;
  const auto r = invert(sp, MLLVector(sp, std::vector<double>(sp.size(), 0.1)), o);
  const auto with = io::to_json(r, true);
  CHECK(with.contains("trace"));
  CHECK(with["trace"].size() == r.trace.size());
  CHECK(with.contains("contraction_certificate"));
  CHECK_FALSE(io::to_json(r, false).contains("trace"));
  CHECK(max_diff(io::parse_table(with["table"]), r.table) == 0.0);

  const auto rep = io::to_json(classify(spec(kLoop)), spec(kLoop).vars());
  CHECK(rep["verdict"] == "PROVEN_SMOOTH");
  CHECK(rep["rule_chain"].size() == 2);
}
