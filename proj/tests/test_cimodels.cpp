#include <doctest.h>

#include "support.hpp"

using namespace test;

namespace {

const VarSet V4 = VarSet::numbered(4);

std::vector<CIStatement> loop_statements() { return {{S("1"), S("2"), S("3")}, {S("1"), S("3"), S("4")}, {S("1"), S("4"), S("2")}}; }

std::vector<CIStatement> gibbs_loop_statements() {
  return {{S("1"), S("2"), S("3")}, {S("2"), S("4"), S("1")}, {S("1"), S("3"), S("4")}, {S("3"), S("4"), S("2")}};
}

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng, double sd = 0.5) {
  std::normal_distribution<double> nd(0, sd);
  std::vector<double> v(n);
  for (double& x : v) x = nd(rng);
  return v;
}

/// p(x1, x3) p(x2 | x3) on three variables.
JointTable conditional_product(std::mt19937_64& rng) {
  const VarSet v = VarSet::numbered(3);
  const auto t13 = random_table(v.restrict(S("13")), rng);
  const auto t23 = random_table(v.restrict(S("23")), rng);
  std::vector<double> p(8);
  for (std::uint32_t x = 0; x < 8; ++x) {
    const std::uint32_t x3 = (x >> 2) & 1;
    const double p3 = t23[0 | x3 << 1] + t23[1 | x3 << 1];
    p[x] = t13[(x & 1) | x3 << 1] * t23[((x >> 1) & 1) | x3 << 1] / p3;
  }
  return JointTable::normalized(v, p);
}

}  // namespace

TEST_CASE("ci_holds") {
  std::mt19937_64 rng(1);
  const VarSet v = VarSet::numbered(3);
  const std::vector<JointTable> f{random_table(v.restrict(S("1")), rng), random_table(v.restrict(S("2")), rng),
                                  random_table(v.restrict(S("3")), rng)};
  const auto indep = product(v, f);
  for (const CIStatement& s : {CIStatement{S("1"), S("2"), 0}, CIStatement{S("1"), S("2"), S("3")},
                               CIStatement{S("1"), S("23"), 0}, CIStatement{S("3"), S("12"), 0}})
    CHECK(ci_holds(indep, s));
  int generic = 0;
  for (int k = 0; k < 100; ++k)
    if (!ci_holds(random_table(v, rng), {S("1"), S("2"), S("3")})) ++generic;
  CHECK(generic == 100);
  for (int k = 0; k < 20; ++k) {
    const auto t = conditional_product(rng);
    CHECK(ci_holds(t, {S("1"), S("2"), S("3")}));
    CHECK(ci_discrepancy(t, {S("1"), S("2"), S("3")}) < 1e-15);
  }
  CHECK_THROWS_AS(CIStatement({S("1"), S("1"), 0}).validate(v), DomainError);
  CHECK_THROWS_AS(CIStatement({0, S("1"), 0}).validate(v), DomainError);
  CHECK_THROWS_AS(CIStatement({S("1"), S("2"), S("4")}).validate(v), DomainError);
}

TEST_CASE("ci_to_zero_params") {
  using P = std::vector<EffectMarginPair>;
  CHECK(ci_to_zero_params({S("1"), S("2"), S("3")}) == P{{S("12"), S("123")}, {S("123"), S("123")}});
  CHECK(ci_to_zero_params({S("1"), S("3"), S("4")}) == P{{S("13"), S("134")}, {S("134"), S("134")}});
  CHECK(ci_to_zero_params({S("1"), S("2"), 0}) == P{{S("12"), S("12")}});
  // Block statement: union of the pairwise parts inside margin 123.
  CHECK(ci_to_zero_params({S("1"), S("23"), 0}) ==
        P{{S("12"), S("123")}, {S("13"), S("123")}, {S("123"), S("123")}});
}

TEST_CASE("zero parameters and conditional independence agree") {
  std::mt19937_64 rng(2);
  const VarSet v = VarSet::numbered(3);
  const CIStatement s{S("1"), S("2"), S("3")};
  for (int k = 0; k < 20; ++k) {
    const auto t = conditional_product(rng);
    for (const auto& pr : ci_to_zero_params(s)) CHECK(std::abs(lambda(t, pr.effect, pr.margin)) < 1e-10);
  }
  const auto model = model_spec(v, {s});
  REQUIRE(model.embedding);
  for (int k = 0; k < 20; ++k) {
    const auto m = model_member(model, random_values(free_pair_indices(model).size(), rng));
    CHECK(ci_holds(m.result.table, s));
  }
}

TEST_CASE("conditional_from_lambda") {
  std::mt19937_64 rng(3);
  const VarSet v = VarSet::numbered(3);
  const Subset A = S("1"), B = S("23");
  const auto pairs = conditional_lambda_set(A, B);
  SUBCASE("zeros give the uniform conditional") {
    const auto c = conditional_from_lambda(v, A, B, std::vector<double>(pairs.size(), 0.0));
    for (std::uint32_t x = 0; x < 8; ++x) CHECK(std::abs(c.at(x) - 0.5) < 1e-15);
  }
  SUBCASE("values extracted from a joint reproduce condition()") {
    for (int k = 0; k < 50; ++k) {
      const auto t = random_table(v, rng);
      std::vector<double> vals;
      for (const auto& pr : pairs) vals.push_back(lambda(t, pr.effect, pr.margin));
      const auto c = conditional_from_lambda(v, A, B, vals);
      const auto ref = condition(t, A, B);
      for (std::uint32_t x = 0; x < 8; ++x) CHECK(std::abs(c.at(x) - ref.at(x)) < 1e-10);
    }
  }
  SUBCASE("effects of B are a parameter cut") {
    std::normal_distribution<double> nd(0, 1);
    const auto vals = random_values(pairs.size(), rng);
    const auto base = conditional_from_lambda(v, A, B, vals);
    for (int k = 0; k < 50; ++k) {
      const std::map<Subset, double> bv{{S("2"), nd(rng)}, {S("3"), nd(rng)}, {S("23"), nd(rng)}};
      const auto c = conditional_from_lambda(v, A, B, vals, bv);
      for (std::uint32_t x = 0; x < 8; ++x) CHECK(std::abs(c.at(x) - base.at(x)) < 1e-12);
    }
  }
  CHECK_THROWS_AS(conditional_from_lambda(v, A, B, {0.0}), DomainError);
}

TEST_CASE("gibbs_stationary") {
  std::mt19937_64 rng(4);
  SUBCASE("independent joint") {
    const VarSet v = VarSet::numbered(3);
    const std::vector<JointTable> f{random_table(v.restrict(S("1")), rng), random_table(v.restrict(S("2")), rng),
                                    random_table(v.restrict(S("3")), rng)};
    const auto t = product(v, f);
    const GibbsCycleSpec g{v,
                           {{S("3"), S("12"), condition(t, S("3"), S("12"))},
                            {S("1"), S("23"), condition(t, S("1"), S("23"))},
                            {S("2"), S("13"), condition(t, S("2"), S("13"))}},
                           S("12")};
    const auto pi = gibbs_stationary(g);
    CHECK(max_diff(pi, marginalize(t, S("12"))) < 1e-12);
  }
  SUBCASE("block chain shape agrees with the cyclic chain solver") {
    const VarSet v = VarSet::numbered(4);
    for (int k = 0; k < 20; ++k) {
      const auto t = random_table(v, rng);
      const std::vector<Subset> blocks{S("1"), S("23"), S("4")};
      const auto chain = chain_from_table(t, blocks);
      GibbsCycleSpec g{v, {}, S("1")};
      for (std::size_t i = 0; i < blocks.size(); ++i)
        g.steps.push_back({blocks[(i + 1) % blocks.size()], blocks[i], chain.conditionals[i]});
      const auto pi = gibbs_stationary(g);
      CHECK(max_diff(pi, stationary(chain)) < 1e-12);
      double total = 0;
      for (std::size_t i = 0; i < pi.size(); ++i) total += pi[i];
      CHECK(std::abs(total - 1) < 1e-14);
      const Eigen::MatrixXd M = gibbs_transition(g);
      Eigen::RowVectorXd row(static_cast<Eigen::Index>(pi.size()));
      for (std::size_t i = 0; i < pi.size(); ++i) row[static_cast<Eigen::Index>(i)] = pi[i];
      CHECK((row * M - row).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("four-statement sweep from a model member") {
    const auto q = spec(kLoopGibbs);
    const auto model = model_spec(V4, gibbs_loop_statements(), q);
    const auto m = model_member(model, random_values(free_pair_indices(model).size(), rng));
    const auto& t = m.result.table;
    const GibbsCycleSpec g{V4,
                           {{S("4"), S("12"), condition(t, S("4"), S("12"))},
                            {S("3"), S("24"), condition(t, S("3"), S("24"))},
                            {S("1"), S("34"), condition(t, S("1"), S("34"))},
                            {S("2"), S("13"), condition(t, S("2"), S("13"))}},
                           S("12")};
    CHECK(max_diff(gibbs_stationary(g), marginalize(t, S("12"))) < 1e-8);
  }
  SUBCASE("unreadable conditioning set") {
    const VarSet v = VarSet::numbered(3);
    const auto t = JointTable::uniform(v);
    const GibbsCycleSpec g{v, {{S("3"), S("2"), condition(t, S("3"), S("2"))}}, S("1")};
    CHECK_THROWS_AS(g.validate(), DomainError);
    CHECK_THROWS_AS(gibbs_stationary(g), DomainError);
  }
}

TEST_CASE("model_spec") {
  SUBCASE("three-statement loop model") {
    const auto m = model_spec(V4, loop_statements());
    using P = std::vector<EffectMarginPair>;
    std::vector<EffectMarginPair> zeros = m.zero_pairs;
    std::sort(zeros.begin(), zeros.end());
    P expect{{S("12"), S("123")}, {S("123"), S("123")}, {S("13"), S("134")},
             {S("134"), S("134")}, {S("14"), S("124")}, {S("124"), S("124")}};
    std::sort(expect.begin(), expect.end());
    CHECK(zeros == expect);
    REQUIRE(m.embedding);
    CHECK(is_complete(*m.embedding));
    CHECK(classify(*m.embedding).verdict == Verdict::ProvenSmooth);
    for (const auto& z : m.zero_pairs)
      CHECK(std::find(m.embedding->pairs().begin(), m.embedding->pairs().end(), z) != m.embedding->pairs().end());
    CHECK(free_pair_indices(m).size() == 15 - 6);
  }
  SUBCASE("Drton model has no complete embedding") {
    const auto m = model_spec(V4, {{S("1"), S("24"), 0}, {S("2"), S("4"), S("13")}});
    CHECK_FALSE(m.embedding);
    CHECK(m.failure.find("124") != std::string::npos);
    CHECK(m.failure.find("1234") != std::string::npos);
  }
  SUBCASE("no statements") {
    const auto m = model_spec(VarSet::numbered(3), {});
    REQUIRE(m.embedding);
    CHECK(m.embedding->sorted() == spec("123: 1 2 3 12 13 23 123\n").sorted());
    CHECK(m.zero_pairs.empty());
  }
  SUBCASE("explicit embedding must contain the zero pairs") {
    const auto q = spec(kLoopGibbs);
    const auto m = model_spec(V4, gibbs_loop_statements(), q);
    CHECK(free_pair_indices(m).size() == 7);
    CHECK_THROWS_AS(model_spec(V4, loop_statements(), q), DomainError);
  }
}

TEST_CASE("model_member") {
  std::mt19937_64 rng(5);
  SUBCASE("zeros give the uniform table") {
    const auto m = model_spec(V4, loop_statements());
    const auto r = model_member(m, std::vector<double>(free_pair_indices(m).size(), 0.0));
    CHECK(max_diff(r.result.table, JointTable::uniform(V4)) < 1e-12);
  }
  SUBCASE("loop members satisfy the three statements") {
    const auto m = model_spec(V4, loop_statements());
    // The free parameters are not variation independent; small draws stay inside the image.
    for (int k = 0; k < 20; ++k) {
      const auto r = model_member(m, random_values(free_pair_indices(m).size(), rng, 0.1));
      for (const auto& s : loop_statements()) CHECK(ci_holds(r.result.table, s, 1e-9));
      CHECK(r.max_ci_discrepancy <= 1e-9);
      CHECK(r.result.final_residual <= 1e-10);
    }
  }
  SUBCASE("four-statement members from seven free parameters") {
    const auto m = model_spec(V4, gibbs_loop_statements(), spec(kLoopGibbs));
    const auto idx = free_pair_indices(m);
    std::vector<EffectMarginPair> free;
    for (auto i : idx) free.push_back(m.embedding->pairs()[i]);
    std::sort(free.begin(), free.end());
    std::vector<EffectMarginPair> expect{{S("1"), S("14")}, {S("4"), S("14")}, {S("14"), S("14")},
                                         {S("2"), S("23")}, {S("3"), S("23")}, {S("23"), S("23")},
                                         {S("1234"), S("1234")}};
    std::sort(expect.begin(), expect.end());
    CHECK(free == expect);
    for (int k = 0; k < 20; ++k) {
      const auto vals = random_values(idx.size(), rng);
      const auto r = model_member(m, vals);
      for (const auto& s : gibbs_loop_statements()) CHECK(ci_holds(r.result.table, s, 1e-9));
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto& pr = m.embedding->pairs()[idx[i]];
        CHECK(std::abs(lambda(r.result.table, pr.effect, pr.margin) - vals[i]) < 1e-9);
      }
      CHECK(r.gibbs_used);
      REQUIRE(r.gibbs_check);
      CHECK(*r.gibbs_check < 1e-8);
    }
  }
  SUBCASE("draws outside the image are reported, never returned") {
    const auto m = model_spec(V4, loop_statements());
    int failed = 0;
    for (int k = 0; k < 50; ++k) {
      try {
        const auto r = model_member(m, random_values(free_pair_indices(m).size(), rng, 1.0));
        for (const auto& s : loop_statements()) CHECK(ci_holds(r.result.table, s, 1e-9));
      } catch (const SolveError&) {
        ++failed;
      }
    }
    MESSAGE(failed << " of 50 wide draws lie outside the image");
    CHECK(failed > 0);
  }
  SUBCASE("wrong number of free values") {
    const auto m = model_spec(V4, loop_statements());
    CHECK_THROWS_AS(model_member(m, {0.0}), DomainError);
  }
}
