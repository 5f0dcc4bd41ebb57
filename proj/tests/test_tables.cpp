#include <doctest.h>

#include "support.hpp"

using namespace test;

TEST_CASE("parity") {
  CHECK(parity(0, 0b111) == 1);
  CHECK(parity(S("13"), 0b101) == 1);
  CHECK(parity(S("13"), 0b001) == -1);
}

TEST_CASE("VarSet bit convention and validation") {
  const VarSet v({"a", "b", "c"});
  CHECK(v.full() == 0b111);
  CHECK(v.position("a") == 0);
  CHECK(v.format(0b101) == "ac");
  CHECK(VarSet::numbered(3).names() == std::vector<std::string>{"1", "2", "3"});
  CHECK_THROWS_AS(VarSet({"a", "a"}), DomainError);
  CHECK_THROWS_AS(VarSet(std::vector<std::string>{}), DomainError);
  CHECK_THROWS_AS(VarSet::numbered(17), DomainError);
}

TEST_CASE("JointTable validation") {
  const VarSet v = VarSet::numbered(1);
  CHECK_NOTHROW(JointTable(v, {0.8, 0.2}));
  CHECK_THROWS_AS(JointTable(v, {0.8, 0.3}), DomainError);
  CHECK_THROWS_AS(JointTable(v, {1.0, 0.0}), DomainError);
  CHECK_THROWS_AS(JointTable(v, {1.0 - 1e-16, 1e-16}), DomainError);
  CHECK_THROWS_AS(JointTable(v, {0.2, 0.3, 0.5}), DomainError);
  CHECK(JointTable::normalized(v, {4, 1})[0] == doctest::Approx(0.8));
}

TEST_CASE("eta_from_table") {
  SUBCASE("uniform gives zero") {
    const auto eta = eta_from_table(JointTable::uniform(VarSet::numbered(4)));
    for (Subset L = 1; L < 16; ++L) CHECK(std::abs(eta[L]) < 1e-15);
  }
  SUBCASE("n=1 log-odds") {
    const auto eta = eta_from_table(JointTable(VarSet::numbered(1), {0.8, 0.2}));
    CHECK(std::abs(eta[1] - 0.5 * std::log(4.0)) < 1e-15);
  }
  SUBCASE("closed form for eta_13 on three variables") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 20; ++k) {
      const auto t = random_table(VarSet::numbered(3), rng);
      // Cells as x1 x2 x3 strings; index = x1 + 2 x2 + 4 x3.
      auto p = [&](const char* s) { return t[(s[0] - '0') + 2 * (s[1] - '0') + 4 * (s[2] - '0')]; };
      const double closed = std::log(p("000") * p("010") * p("101") * p("111") /
                                     (p("100") * p("110") * p("001") * p("011"))) / 8.0;
      CHECK(std::abs(eta_from_table(t)[S("13")] - closed) < 1e-13);
    }
  }
}

TEST_CASE("table_from_eta") {
  const VarSet v = VarSet::numbered(1);
  EtaVector e = EtaVector::zeros(v);
  e[1] = 0.5 * std::log(4.0);
  const auto t = table_from_eta(e);
  CHECK(std::abs(t[0] - 0.8) < 1e-15);
  CHECK(std::abs(t[1] - 0.2) < 1e-15);
  CHECK(max_diff(table_from_eta(EtaVector::zeros(VarSet::numbered(3))), JointTable::uniform(VarSet::numbered(3))) < 1e-16);

  SUBCASE("round trip from random eta") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0, 1);
    for (int n = 1; n <= 4; ++n) {
      EtaVector eta = EtaVector::zeros(VarSet::numbered(n));
      for (Subset L = 1; L < (1u << n); ++L) eta[L] = nd(rng);
      const auto back = eta_from_table(table_from_eta(eta));
      for (Subset L = 1; L < (1u << n); ++L) CHECK(std::abs(back[L] - eta[L]) < 1e-12);
    }
  }
  SUBCASE("overflow is reported") {
    EtaVector big = EtaVector::zeros(VarSet::numbered(2));
    big[1] = 1e3;
    CHECK_THROWS_AS(table_from_eta(big), DomainError);
    big[1] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(table_from_eta(big), DomainError);
  }
}

TEST_CASE("Moebius round trip on Dirichlet tables") {
  std::mt19937_64 rng(11);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const auto t = random_table(VarSet::numbered(1 + k % 4), rng);
    worst = std::max(worst, max_diff(table_from_eta(eta_from_table(t)), t));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("geometric mixture is linear in eta") {
  std::mt19937_64 rng(5);
  const VarSet v = VarSet::numbered(3);
  for (double a : {0.0, 0.3, 0.75, 1.0}) {
    const auto p = random_table(v, rng), q = random_table(v, rng);
    const auto m = eta_from_table(geometric_mixture(p, q, a));
    const auto ep = eta_from_table(p), eq = eta_from_table(q);
    for (Subset L = 1; L < 8; ++L) CHECK(std::abs(m[L] - (a * ep[L] + (1 - a) * eq[L])) < 1e-12);
  }
}

TEST_CASE("marginalize") {
  std::mt19937_64 rng(2);
  const VarSet v = VarSet::numbered(3);
  const auto t = random_table(v, rng);
  CHECK(max_diff(marginalize(t, v.full()), t) == 0.0);
  const auto u = marginalize(JointTable::uniform(v), S("12"));
  CHECK(u.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(u[i] - 0.25) < 1e-16);
  CHECK(max_diff(marginalize(marginalize(t, S("12")), S("1")), marginalize(t, S("1"))) < 1e-15);
  for (Subset M = 1; M < 8; ++M) {
    const auto m = marginalize(t, M);
    const auto b = brute_marginal(t, M);
    CHECK(m.vars() == v.restrict(M));
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(std::abs(m[i] - b[i]) < 1e-15);
  }
  CHECK_THROWS_AS(marginalize(t, 0), DomainError);
  CHECK_THROWS_AS(marginalize(t, 0b1000), DomainError);
}

TEST_CASE("condition") {
  std::mt19937_64 rng(9);
  const VarSet v = VarSet::numbered(3);
  SUBCASE("independence makes the conditional constant") {
    const auto pa = random_table(v.restrict(S("1")), rng);
    const auto pb = random_table(v.restrict(S("23")), rng);
    const std::vector<JointTable> f{pa, pb};
    const auto c = condition(product(v, f), S("1"), S("23"));
    for (std::uint32_t xb = 0; xb < 4; ++xb)
      for (std::uint32_t xa = 0; xa < 2; ++xa) CHECK(std::abs(c.at(xa, xb) - pa[xa]) < 1e-14);
  }
  SUBCASE("empty given set is the marginal") {
    const auto t = random_table(v, rng);
    const auto c = condition(t, S("13"), 0);
    const auto m = marginalize(t, S("13"));
    for (std::uint32_t y = 0; y < 4; ++y) CHECK(std::abs(c.at(y, 0) - m[y]) < 1e-15);
  }
  SUBCASE("cellwise division and reconstruction") {
    const auto t = random_table(v, rng);
    const auto c = condition(t, S("1"), S("23"));
    const auto pb = brute_marginal(t, S("23"));
    for (std::uint32_t x = 0; x < 8; ++x) {
      CHECK(std::abs(c.at(x) - t[x] / pb[compress(x, S("23"))]) < 1e-15);
      CHECK(std::abs(c.at(x) * pb[compress(x, S("23"))] - t[x]) < 1e-14);
    }
    const auto c2 = condition(t, S("2"), S("3"));
    const auto p23 = brute_marginal(t, S("23"));
    const auto p3 = brute_marginal(t, S("3"));
    for (std::uint32_t x = 0; x < 8; ++x)
      CHECK(std::abs(c2.at(x) * p3[compress(x, S("3"))] - p23[compress(x, S("23"))]) < 1e-14);
  }
  CHECK_THROWS_AS(condition(JointTable::uniform(v), S("12"), S("2")), DomainError);
  CHECK_THROWS_AS(condition(JointTable::uniform(v), 0, S("2")), DomainError);
}

TEST_CASE("ConditionalTable validation") {
  const VarSet v = VarSet::numbered(2);
  CHECK_NOTHROW(ConditionalTable(v, S("1"), S("2"), {0.3, 0.7, 0.6, 0.4}));
  CHECK_THROWS_AS(ConditionalTable(v, S("1"), S("2"), {0.3, 0.6, 0.6, 0.4}), DomainError);
  CHECK_THROWS_AS(ConditionalTable(v, S("1"), S("2"), {0.0, 1.0, 0.6, 0.4}), DomainError);
  CHECK_THROWS_AS(ConditionalTable(v, S("1"), S("1"), {0.5, 0.5}), DomainError);
}

TEST_CASE("random tables are valid Dirichlet draws") {
  std::mt19937_64 rng(1);
  double mean0 = 0.0;
  const int N = 4000;
  for (int k = 0; k < N; ++k) {
    const auto t = random_table(VarSet::numbered(2), rng);
    CHECK(t.min_cell() >= kPositivityFloor);
    mean0 += t[0];
  }
  CHECK(std::abs(mean0 / N - 0.25) < 0.02);
}
