#include <doctest.h>

#include "support.hpp"

using namespace test;

namespace {

/// Table whose (1,3) margin is (0.4, 0.1, 0.1, 0.4) with X2 uniform.
JointTable odds_table() {
  std::vector<double> p(8);
  const double p13[4] = {0.4, 0.1, 0.1, 0.4};
  for (std::uint32_t x = 0; x < 8; ++x) p[x] = 0.5 * p13[compress(x, S("13"))];
  return JointTable(VarSet::numbered(3), p);
}

/// η perturbed along K, mapped through λ.
std::vector<double> lambda_at(const EtaVector& eta, Subset K, double h, const MLLSpec& spec) {
  EtaVector e = eta;
  e[K] += h;
  return lambda_vector(table_from_eta(e), spec).values;
}

/// Random (not necessarily complete) collection on n variables.
MLLSpec random_spec(int n, std::mt19937_64& rng) {
  const Subset V = (Subset{1} << n) - 1;
  std::vector<EffectMarginPair> pairs;
  std::bernoulli_distribution keep(0.4);
  for (Subset M = 1; M <= V; ++M)
    for_each_subset(M, [&](Subset L) {
      if (L && keep(rng)) pairs.push_back({L, M});
    });
  if (pairs.empty()) pairs.push_back({V, V});
  return MLLSpec(VarSet::numbered(n), pairs);
}

}  // namespace

TEST_CASE("lambda") {
  CHECK(std::abs(lambda(odds_table(), S("13"), S("13")) - std::log(2.0)) < 1e-15);
  CHECK(std::abs(lambda(JointTable::uniform(VarSet::numbered(3)), S("12"), S("123"))) < 1e-15);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 10; ++k) {
    const auto t = random_table(VarSet::numbered(4), rng);
    const auto eta = eta_from_table(t);
    for (Subset M = 1; M < 16; ++M)
      for_each_subset(M, [&](Subset L) {
        if (L) CHECK(std::abs(lambda(t, L, M) - brute_lambda(t, L, M)) < 1e-13);
      });
    for (Subset L = 1; L < 16; ++L) CHECK(std::abs(lambda(t, L, 15) - eta[L]) < 1e-15);
  }
  CHECK_THROWS_AS(lambda(odds_table(), S("12"), S("13")), DomainError);
  CHECK_THROWS_AS(lambda(odds_table(), 0, S("13")), DomainError);
}

TEST_CASE("lambda_vector") {
  std::mt19937_64 rng(2);
  const auto sp = spec(kChain);
  const auto t = random_table(sp.vars(), rng);
  const auto v = lambda_vector(t, sp);
  REQUIRE(v.values.size() == sp.size());
  for (std::size_t i = 0; i < sp.size(); ++i)
    CHECK(std::abs(v.values[i] - lambda(t, sp[i].effect, sp[i].margin)) < 1e-15);
  for (double x : lambda_vector(JointTable::uniform(sp.vars()), sp).values) CHECK(std::abs(x) < 1e-16);
  const MLLSpec top(sp.vars(), {{7, 7}});
  CHECK(std::abs(lambda_vector(t, top).values[0] - eta_from_table(t)[7]) < 1e-15);
}

TEST_CASE("conditional_lambda_set") {
  const auto a = conditional_lambda_set(S("1"), 0);
  REQUIRE(a.size() == 1);
  CHECK(a[0] == EffectMarginPair{S("1"), S("1")});
  const auto b = conditional_lambda_set(S("1"), S("23"));
  const std::vector<EffectMarginPair> expect{{S("1"), S("123")}, {S("12"), S("123")}, {S("13"), S("123")}, {S("123"), S("123")}};
  CHECK(b == expect);
  const auto c = conditional_lambda_set(S("23"), S("1"));
  CHECK(c.size() == 6);
  std::vector<EffectMarginPair> brute;
  for (Subset L = 1; L < 8; ++L)
    if (L & S("23")) brute.push_back({L, 7});
  CHECK(c == brute);
  CHECK_THROWS_AS(conditional_lambda_set(S("12"), S("2")), DomainError);
}

TEST_CASE("decompose_f satisfies the additive identity") {
  std::mt19937_64 rng(3);
  for (int n : {3, 4}) {
    const Subset V = (Subset{1} << n) - 1;
    for (int k = 0; k < 5; ++k) {
      const auto t = random_table(VarSet::numbered(n), rng);
      for (Subset M = 1; M <= V; ++M)
        for_each_subset(V & ~M, [&](Subset A) {
          for_each_subset(M, [&](Subset L) {
            if (!L) return;
            const double lhs = lambda(t, L, M | A);
            CHECK(std::abs(lhs - (lambda(t, L, M) + decompose_f(t, L, M, A))) < 1e-12);
          });
        });
    }
  }
  CHECK_THROWS_AS(decompose_f(JointTable::uniform(VarSet::numbered(3)), S("1"), S("12"), S("2")), DomainError);
}

TEST_CASE("decompose_f vanishes under the required independence") {
  std::mt19937_64 rng(4);
  const VarSet v = VarSet::numbered(3);
  SUBCASE("product p_M p_A") {
    const std::vector<JointTable> f{random_table(v.restrict(S("12")), rng), random_table(v.restrict(S("3")), rng)};
    const auto t = product(v, f);
    for (Subset L : {S("1"), S("2"), S("12")}) CHECK(std::abs(decompose_f(t, L, S("12"), S("3"))) < 1e-12);
  }
  SUBCASE("X3 independent of X1 given X2") {
    const auto p12 = random_table(v.restrict(S("12")), rng);
    const auto p23 = random_table(v.restrict(S("23")), rng);
    const auto c = condition(p23, S("2"), S("1"));  // p(x3 | x2) on the restricted set
    std::vector<double> p(8);
    for (std::uint32_t x = 0; x < 8; ++x) p[x] = p12[compress(x, S("12"))] * c.at(compress(x, S("23")));
    const JointTable t(v, p);
    CHECK(std::abs(decompose_f(t, S("1"), S("12"), S("3"))) < 1e-12);
    CHECK(std::abs(decompose_f(t, S("12"), S("12"), S("3"))) < 1e-12);
    CHECK(std::abs(decompose_f(t, S("2"), S("12"), S("3"))) > 1e-6);
  }
  SUBCASE("uniform and two-lambda oracle") {
    CHECK(std::abs(decompose_f(JointTable::uniform(v), S("2"), S("2"), S("1"))) < 1e-15);
    const auto t = random_table(v, rng);
    CHECK(std::abs(decompose_f(t, S("2"), S("2"), S("1")) - (brute_lambda(t, S("2"), S("12")) - brute_lambda(t, S("2"), S("2")))) < 1e-14);
  }
}

TEST_CASE("f depends only on the conditional") {
  std::mt19937_64 rng(5);
  const VarSet v = VarSet::numbered(3);
  const auto joint = random_table(v, rng);
  const auto cond = condition(joint, S("3"), S("12"));
  double first = 0.0;
  for (int k = 0; k < 5; ++k) {
    const auto pm = random_table(v.restrict(S("12")), rng);
    std::vector<double> p(8);
    for (std::uint32_t x = 0; x < 8; ++x) p[x] = pm[compress(x, S("12"))] * cond.at(x);
    const double f = decompose_f(JointTable(v, p), S("1"), S("12"), S("3"));
    if (k == 0) first = f;
    CHECK(std::abs(f - first) < 1e-13);
  }
}

TEST_CASE("dlambda_deta") {
  std::mt19937_64 rng(6);
  const VarSet v = VarSet::numbered(3);
  const auto u = JointTable::uniform(v);
  CHECK(std::abs(dlambda_deta(u, S("1"), S("13"), S("2"))) < 1e-15);
  CHECK(std::abs(dlambda_deta(u, S("1"), S("13"), S("123"))) < 1e-15);
  const auto t = random_table(v, rng);
  CHECK(dlambda_deta(t, S("13"), S("13"), S("13")) == 1.0);
  CHECK(dlambda_deta(t, S("13"), S("13"), S("1")) == 0.0);
  CHECK(dlambda_deta(t, S("2"), S("123"), S("2")) == 1.0);
  const auto eta = eta_from_table(t);
  const MLLSpec one(v, {{S("1"), S("13")}});
  const double h = 1e-5;
  const double fd = (lambda_at(eta, S("2"), h, one)[0] - lambda_at(eta, S("2"), -h, one)[0]) / (2 * h);
  const double an = dlambda_deta(t, S("1"), S("13"), S("2"));
  CHECK(std::abs(an - fd) <= 1e-6 * std::abs(fd));
  CHECK_THROWS_AS(dlambda_deta(t, S("2"), S("13"), S("1")), DomainError);
}

TEST_CASE("Jacobian") {
  std::mt19937_64 rng(7);
  SUBCASE("all effects in V is the identity") {
    std::vector<EffectMarginPair> pairs;
    for (Subset L = 1; L < 16; ++L) pairs.push_back({L, 15});
    const MLLSpec sp(VarSet::numbered(4), pairs);
    const auto J = jacobian(random_table(sp.vars(), rng), sp);
    CHECK((J - Eigen::MatrixXd::Identity(15, 15)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("complete specs at uniform are permutations") {
    for (const char* text : {kChain, kContraction, kCycle, kOpen, kLoop}) {
      const auto sp = spec(text);
      const auto J = jacobian(JointTable::uniform(sp.vars()), sp);
      for (std::size_t i = 0; i < sp.size(); ++i)
        for (Eigen::Index k = 0; k < J.cols(); ++k)
          CHECK(std::abs(J(static_cast<Eigen::Index>(i), k) - (sp[i].effect == Subset(k + 1) ? 1.0 : 0.0)) < 1e-15);
    }
  }
  SUBCASE("matches central finite differences and the serial reference") {
    double worst = 0.0;
    for (int k = 0; k < 30; ++k) {
      const int n = 2 + k % 3;
      const auto sp = random_spec(n, rng);
      const auto t = random_table(sp.vars(), rng);
      const auto J = jacobian(t, sp);
      CHECK((J - jacobian_reference(t, sp)).cwiseAbs().maxCoeff() < 1e-13);
      const auto eta = eta_from_table(t);
      const double h = 1e-5;
      for (Subset K = 1; K < (Subset{1} << n); ++K) {
        const auto up = lambda_at(eta, K, h, sp), dn = lambda_at(eta, K, -h, sp);
        for (std::size_t i = 0; i < sp.size(); ++i) {
          const double fd = (up[i] - dn[i]) / (2 * h);
          const double a = J(static_cast<Eigen::Index>(i), K - 1);
          worst = std::max(worst, std::abs(a - fd) / std::max(1.0, std::abs(fd)));
        }
      }
    }
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("kappa is the parameter of the conditional slice") {
  std::mt19937_64 rng(8);
  const VarSet v = VarSet::numbered(3);
  const auto t = random_table(v, rng);
  const int vv = 0;  // variable 1
  for (Subset M : {S("2"), S("3"), S("23")})
    for_each_subset(M, [&](Subset A) {
      if (!A) return;
      for (int xv = 0; xv < 2; ++xv) {
        // Slice p(x_M | x_1 = xv) over M, renormalized.
        std::vector<double> w(std::size_t{1} << popcount(M), 0.0);
        for (std::uint32_t x = 0; x < 8; ++x)
          if (static_cast<int>(x & 1) == xv) w[compress(x, M)] += t[x];
        const JointTable slice = JointTable::normalized(v.restrict(M), w);
        const double direct = brute_lambda(slice, compress(A, M), slice.vars().full());
        CHECK(std::abs(kappa(t, A, M, vv, xv) - direct) < 1e-12);
        CHECK(std::abs(kappa(t, A, M, vv, xv) - (lambda(t, A, M | 1) + (xv ? -1 : 1) * lambda(t, A | 1, M | 1))) < 1e-14);
      }
    });
  const std::vector<JointTable> f{random_table(v.restrict(S("1")), rng), random_table(v.restrict(S("23")), rng)};
  const auto prod = product(v, f);
  CHECK(std::abs(kappa(prod, S("2"), S("23"), 0, 0) - kappa(prod, S("2"), S("23"), 0, 1)) < 1e-13);
  CHECK(std::abs(kappa(prod, S("2"), S("23"), 0, 0) - lambda(prod, S("2"), S("23"))) < 1e-13);
  CHECK(std::abs(kappa(JointTable::uniform(v), S("2"), S("23"), 0, 1)) < 1e-15);
  CHECK_THROWS_AS(kappa(t, S("2"), S("12"), 0, 0), DomainError);
}

TEST_CASE("column and row norm bounds") {
  std::mt19937_64 rng(9);
  const VarSet v3 = VarSet::numbered(3);
  const auto u = column_norm_bound_check(JointTable::uniform(v3), S("23"), 0, S("1"));
  CHECK(std::abs(u.norm) < 1e-15);
  CHECK(u.bound == doctest::Approx(1 - 1.0 / 8));
  const auto t = random_table(v3, rng);
  const auto r = column_norm_bound_check(t, S("23"), 0, S("1"));
  CHECK(r.norm <= r.bound + 1e-12);
  CHECK(std::abs(r.bound - (1 - t.min_cell())) < 1e-15);

  SUBCASE("near a vertex") {
    std::vector<double> p(8, 1e-6);
    p[3] = 1 - 7e-6;
    const JointTable corner(v3, p);
    const auto c = column_norm_bound_check(corner, S("23"), 0, S("1"));
    CHECK(c.bound == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(c.norm <= c.bound);
  }
  SUBCASE("every admissible triple, n <= 4") {
    for (int k = 0; k < 100; ++k) {
      const int n = 2 + k % 3;
      const Subset V = (Subset{1} << n) - 1;
      const auto tt = random_table(VarSet::numbered(n), rng);
      for (Subset M = 1; M < V; ++M)
        for_each_subset(V & ~M, [&](Subset K) {
          if (!K) return;
          for_each_subset(M, [&](Subset J) {
            const auto col = column_norm_bound_check(tt, M, J, K);
            CHECK(col.norm <= col.bound + 1e-12);
            if (J) {
              const auto row = row_norm_bound_check(tt, M, J, K);
              CHECK(row.norm <= row.bound + 1e-12);
            }
          });
        });
    }
  }
  CHECK_THROWS_AS(column_norm_bound_check(t, S("23"), S("1"), S("1")), DomainError);
}

TEST_CASE("Hadamard matrix is orthogonal") {
  for (int k = 0; k <= 8; ++k) {
    const auto H = hadamard_matrix(k);
    const auto I = Eigen::MatrixXd::Identity(H.rows(), H.cols());
    CHECK((H * H.transpose() - I).cwiseAbs().maxCoeff() <= 1e-12);
  }
}
