#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "testutil.hpp"

#include <stieltjes/poly.hpp>

using namespace stieltjes;
using testutil::multiset_distance;

TEST_CASE("roots of simple quadratics") {
  auto r1 = roots(ComplexPoly({-1.0, 0.0, 1.0}));  // z^2 - 1
  CHECK(multiset_distance(r1, {cdouble(1, 0), cdouble(-1, 0)}) < 1e-12);

  auto r2 = roots(ComplexPoly({1.0, 0.0, 1.0}));  // z^2 + 1
  CHECK(multiset_distance(r2, {cdouble(0, 1), cdouble(0, -1)}) < 1e-12);

  auto r3 = roots(ComplexPoly::from_roots({1.0, 2.0, 3.0}));
  CHECK(multiset_distance(r3, {cdouble(1, 0), cdouble(2, 0), cdouble(3, 0)}) < 1e-10);
}

TEST_CASE("root residual contract") {
  auto g = testutil::rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 2 + int(g() % 10);
    std::vector<cdouble> pts;
    for (int k = 0; k < n; ++k) pts.push_back(testutil::random_in_disk(g));
    ComplexPoly p = ComplexPoly::from_roots(pts);
    auto r = roots(p);
    REQUIRE(int(r.size()) == p.degree());
    for (const cdouble& z : r) {
      double bound = 1e-10 * p.coeff_max() * std::pow(1.0 + std::abs(z), p.degree());
      CHECK(std::abs(p(z)) <= bound);
    }
  }
}

TEST_CASE("roots of expand is the identity on random multisets") {
  auto g = testutil::rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    int n = 3 + int(g() % 10);  // up to 12
    std::vector<cdouble> pts;
    for (int k = 0; k < n; ++k) pts.push_back(testutil::random_in_disk(g));
    auto r = roots(ComplexPoly::from_roots(pts));
    CHECK(multiset_distance(r, pts) < 1e-8);
  }
}

TEST_CASE("multiple zeros are merged and repeated") {
  // (z-1)^2 (z+2): double zero must appear twice at the cluster mean.
  ComplexPoly p = ComplexPoly::from_roots({1.0, 1.0, -2.0});
  auto r = roots(p);
  REQUIRE(r.size() == 3);
  int near_one = 0;
  for (const cdouble& z : r)
    if (std::abs(z - cdouble(1, 0)) < 1e-5) ++near_one;
  CHECK(near_one == 2);
}

TEST_CASE("roots rejects degenerate input") {
  CHECK_THROWS_AS(roots(ComplexPoly()), std::invalid_argument);
  CHECK_THROWS_AS(roots(ComplexPoly::constant(3.0)), std::invalid_argument);
}

TEST_CASE("eval_with_derivs") {
  ComplexPoly sq({0.0, 0.0, 1.0});  // z^2
  auto v = sq.eval_with_derivs(cdouble(2, 0), 2);
  CHECK(std::abs(v[0] - cdouble(4, 0)) < 1e-15);
  CHECK(std::abs(v[1] - cdouble(4, 0)) < 1e-15);
  CHECK(std::abs(v[2] - cdouble(2, 0)) < 1e-15);

  ComplexPoly one = ComplexPoly::constant(1.0);
  auto vc = one.eval_with_derivs(cdouble(5, 3), 1);
  CHECK(std::abs(vc[0] - cdouble(1, 0)) < 1e-15);
  CHECK(std::abs(vc[1]) == 0.0);

  ComplexPoly p({0.0, -1.0, 0.0, 1.0});  // z^3 - z
  auto vp = p.eval_with_derivs(cdouble(0, 0), 1);
  CHECK(std::abs(vp[0]) == 0.0);
  CHECK(std::abs(vp[1] - cdouble(-1, 0)) < 1e-15);
}

TEST_CASE("exact_quotient") {
  ComplexPoly num({-1.0, 0.0, 1.0});  // z^2 - 1
  ComplexPoly q = exact_quotient(num, ComplexPoly({-1.0, 1.0}), 1e-12);
  CHECK(q.degree() == 1);
  CHECK(std::abs(q.coeff(0) - cdouble(1, 0)) < 1e-14);
  CHECK(std::abs(q.coeff(1) - cdouble(1, 0)) < 1e-14);

  double rnorm = 0.0;
  CHECK_THROWS_AS(exact_quotient(num, ComplexPoly({-2.0, 1.0}), 1e-12, &rnorm),
                  NotDivisible);
  // The reported remainder norm is |num(2)| = 3.
  try {
    exact_quotient(num, ComplexPoly({-2.0, 1.0}), 1e-12);
  } catch (const NotDivisible& e) {
    CHECK(e.remainder_norm == doctest::Approx(3.0).epsilon(1e-12));
  }
}

TEST_CASE("exact_quotient round trip on random factors") {
  auto g = testutil::rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    int dq = 1 + int(g() % 10), dd = 1 + int(g() % 10);
    std::vector<cdouble> qc, dc;
    for (int k = 0; k <= dq; ++k) qc.push_back(testutil::random_in_disk(g) + cdouble(0.1, 0));
    for (int k = 0; k <= dd; ++k) dc.push_back(testutil::random_in_disk(g) + cdouble(0.1, 0));
    ComplexPoly q(qc), d(dc);
    ComplexPoly back = exact_quotient(q * d, d, 1e-9);
    REQUIRE(back.degree() == q.degree());
    for (int k = 0; k <= q.degree(); ++k)
      CHECK(std::abs(back.coeff(size_t(k)) - q.coeff(size_t(k))) < 1e-10);
  }
}
