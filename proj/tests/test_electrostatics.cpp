#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "testutil.hpp"

#include <stieltjes/electrostatics.hpp>

#include <Eigen/Dense>

using namespace stieltjes;
using testutil::multiset_distance;

namespace {

// Independent brute-force oracle for the weighted energy: unordered pairs,
// long-double accumulation, field evaluated through raw logs.
long double energy_oracle(const std::vector<cdouble>& z,
                          const std::vector<cdouble>& poles,
                          const std::vector<cdouble>& rho) {
  long double e = 0.0L;
  for (size_t i = 0; i < z.size(); ++i)
    for (size_t j = i + 1; j < z.size(); ++j)
      e += -2.0L * std::log((long double)std::abs(z[i] - z[j]));
  for (const cdouble& x : z)
    for (size_t k = 0; k < poles.size(); ++k) {
      std::complex<double> l = std::log(x - poles[k]);
      e += -1.0L * (rho[k].real() * l.real() - rho[k].imag() * l.imag());
    }
  return e;
}

// Attractive charge 1-n at the origin balances n unit charges on any circle.
ExternalField roots_of_unity_field(int n) {
  return ExternalField({cdouble(0.0)}, {cdouble(1.0 - n, 0.0)});
}

DiscreteConfig scaled_roots(int n, double r) {
  std::vector<cdouble> pts;
  for (int k = 0; k < n; ++k) {
    double th = 2.0 * kPi * k / n;
    pts.emplace_back(r * std::cos(th), r * std::sin(th));
  }
  return DiscreteConfig(pts);
}

// Gauss-Legendre nodes (zeros of the degree-n Legendre polynomial) from the
// symmetric Jacobi matrix of the three-term recurrence.
std::vector<double> legendre_zeros_oracle(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  for (int k = 0; k < n; ++k) out[size_t(k)] = es.eigenvalues()(k);
  return out;
}

const ExternalField kJacobiField({cdouble(-1.0), cdouble(1.0)},
                                 {cdouble(1.0), cdouble(1.0)});

}  // namespace

TEST_CASE("energy basics") {
  // Two points at distance 1, no field.
  ExternalField nofield({}, {});
  CHECK(discrete_energy(DiscreteConfig({cdouble(0), cdouble(1)}), nofield) == 0.0);
  // Coincident points give the +infinity sentinel, not an exception.
  CHECK(std::isinf(discrete_energy(DiscreteConfig({cdouble(1), cdouble(1)}), nofield)));
}

TEST_CASE("energy matches the double-sum oracle and is radius-independent") {
  // 4th roots of unity with the balancing central charge: E = -8 log 2 at
  // every radius (the radial terms cancel exactly).
  const double frozen = -8.0 * std::log(2.0);  // -5.545177444479562
  for (double r : {0.5, 1.0, 2.0}) {
    auto cfg = scaled_roots(4, r);
    auto field = roots_of_unity_field(4);
    double e = discrete_energy(cfg, field);
    double oracle = double(energy_oracle(cfg.points, field.poles, field.residues));
    CHECK(e == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(e == doctest::Approx(frozen).epsilon(1e-12));
  }
}

TEST_CASE("scaled roots of unity are critical at every radius") {
  for (int n : {3, 5, 8}) {
    for (double r : {0.5, 1.0, 2.0}) {
      auto res = gradient_residual(scaled_roots(n, r), roots_of_unity_field(n));
      CHECK(residual_max(res) < 1e-12);
    }
  }
}

TEST_CASE("gradient matches finite differences of the energy") {
  auto g = testutil::rng(5);
  ExternalField field({cdouble(-1.0), cdouble(0.5, 0.5)},
                      {cdouble(1.0, 0.2), cdouble(0.7)});
  std::vector<cdouble> pts;
  for (int k = 0; k < 5; ++k)
    pts.push_back(testutil::random_in_disk(g) + cdouble(0.0, 2.0));
  DiscreteConfig cfg(pts);
  auto res = gradient_residual(cfg, field);
  const double h = 1e-5;
  for (size_t k = 0; k < pts.size(); ++k) {
    auto bump = [&](cdouble dz) {
      DiscreteConfig c = cfg;
      c.points[k] += dz;
      return discrete_energy(c, field);
    };
    double gx = (bump(h) - bump(-h)) / (2 * h);
    double gy = (bump(cdouble(0, h)) - bump(cdouble(0, -h))) / (2 * h);
    // residual_k = -2 dE/dzeta_k, and 2 dE/dzeta = dE/dx - i dE/dy.
    cdouble fd = -(cdouble(gx, -gy));
    CHECK(std::abs(res[k] - fd) < 1e-6);
  }
}

TEST_CASE("residual is empty-sum clean for a single point") {
  ExternalField field({cdouble(0.0)}, {cdouble(2.0)});
  DiscreteConfig cfg({cdouble(3.0, 1.0)});
  auto res = gradient_residual(cfg, field);
  REQUIRE(res.size() == 1);
  CHECK(std::abs(res[0] - field.BA(cfg.points[0])) == 0.0);
  CHECK_THROWS_AS(gradient_residual(DiscreteConfig({cdouble(0.0)}), field),
                  std::domain_error);
}

TEST_CASE("rotation covariance of the residual") {
  auto g = testutil::rng(17);
  cdouble u = std::polar(1.0, 0.7341);
  std::vector<cdouble> poles{cdouble(-1.0), cdouble(1.0), cdouble(0.3, 0.8)};
  std::vector<cdouble> rho{cdouble(1.0), cdouble(0.5), cdouble(0.25)};
  std::vector<cdouble> pts;
  for (int k = 0; k < 6; ++k) pts.push_back(testutil::random_in_disk(g, 2.0));
  auto res = gradient_residual(DiscreteConfig(pts), ExternalField(poles, rho));
  std::vector<cdouble> rpoles, rpts;
  for (auto& a : poles) rpoles.push_back(u * a);
  for (auto& z : pts) rpts.push_back(u * z);
  auto rres = gradient_residual(DiscreteConfig(rpts), ExternalField(rpoles, rho));
  for (size_t k = 0; k < res.size(); ++k)
    CHECK(std::abs(rres[k] - std::conj(u) * res[k]) < 1e-13);
}

TEST_CASE("solver recovers the degree-2 Legendre configuration") {
  const double s = 1.0 / std::sqrt(3.0);
  // The exact configuration is a fixed point returned unchanged.
  DiscreteConfig exact({cdouble(-s), cdouble(s)});
  auto out = solve_critical(exact, kJacobiField);
  CHECK(out.points[0] == exact.points[0]);
  CHECK(out.points[1] == exact.points[1]);
  // A perturbed start converges back.
  DiscreteConfig perturbed({cdouble(-s + 3e-2, 1e-2), cdouble(s - 2e-2, -1e-2)});
  auto sol = solve_critical(perturbed, kJacobiField);
  CHECK(multiset_distance(sol.points, exact.points) < 1e-10);
  CHECK(residual_max(gradient_residual(sol, kJacobiField)) < 1e-11);
}

TEST_CASE("solver matches the Legendre three-term-recurrence oracle at n=5") {
  auto oracle = legendre_zeros_oracle(5);
  // Sanity-pin the oracle itself against the classical node values.
  CHECK(oracle[4] == doctest::Approx(0.9061798459386640).epsilon(1e-13));
  CHECK(oracle[3] == doctest::Approx(0.5384693101056831).epsilon(1e-13));
  CHECK(std::abs(oracle[2]) < 1e-14);

  std::vector<cdouble> seed;
  for (int k = 0; k < 5; ++k) seed.emplace_back(-0.8 + 0.4 * k, 0.0);
  auto sol = solve_critical(DiscreteConfig(seed), kJacobiField);
  std::vector<cdouble> oracle_c(oracle.begin(), oracle.end());
  CHECK(multiset_distance(sol.points, oracle_c) < 1e-9);
}

TEST_CASE("real Stieltjes solve preserves interval occupation") {
  ExternalField field({cdouble(-1.0), cdouble(0.0), cdouble(1.0)},
                      {cdouble(1.0), cdouble(1.0), cdouble(1.0)});
  // n=6 split (3,3) over (-1,0) and (0,1).
  std::vector<cdouble> seed;
  for (int k = 0; k < 3; ++k) seed.emplace_back(-1.0 + 0.25 * (k + 1), 0.0);
  for (int k = 0; k < 3; ++k) seed.emplace_back(0.25 * (k + 1), 0.0);
  auto sol = solve_critical(DiscreteConfig(seed), field);
  CHECK(residual_max(gradient_residual(sol, field)) < 1e-11);
  int left = 0, right = 0;
  for (const cdouble& z : sol.points) {
    CHECK(std::abs(z.imag()) < 1e-12);
    if (z.real() > -1 && z.real() < 0) ++left;
    if (z.real() > 0 && z.real() < 1) ++right;
  }
  CHECK(left == 3);
  CHECK(right == 3);
}

TEST_CASE("homotopy continuation reaches complex-pole configurations") {
  ExternalField field({cdouble(0.0), cdouble(1.0), cdouble(1.0, 1.0)},
                      {cdouble(1.0), cdouble(1.0), cdouble(1.0)});
  // Seed on the projected axis; continuation carries it to the complex field.
  std::vector<cdouble> seed{cdouble(0.3, 0.1), cdouble(0.7, 0.4), cdouble(0.9, 0.7)};
  auto sol = solve_critical_continued(DiscreteConfig(seed), field);
  CHECK(residual_max(gradient_residual(sol, field)) < 1e-11);
}

TEST_CASE("variational functional vanishes on critical configurations") {
  // Critical Legendre-type config, h = A(z)/(z - z0) vanishing at the poles.
  auto oracle = legendre_zeros_oracle(4);
  std::vector<cdouble> pts(oracle.begin(), oracle.end());
  DiscreteConfig cfg(pts);
  ComplexPoly A = kJacobiField.A();
  cdouble z0(1.7, 0.9);
  auto h = [&](cdouble z) { return A(z) / (z - z0); };
  auto hp = [&](cdouble z) {
    ComplexPoly dA = A.derivative();
    return (dA(z) * (z - z0) - A(z)) / ((z - z0) * (z - z0));
  };
  DiscreteConfig refined = solve_critical(cfg, kJacobiField);
  cdouble f = variational_functional(refined, kJacobiField, h, hp);
  CHECK(std::abs(f) < 1e-9);
}

TEST_CASE("variational functional on non-critical data matches a direct sum") {
  ExternalField field({cdouble(-1.0), cdouble(1.0)}, {cdouble(1.0), cdouble(1.0)});
  DiscreteConfig cfg({cdouble(0.3, 0.0), cdouble(0.1, 0.4)});
  ComplexPoly A = field.A();
  auto h = [&](cdouble z) { return z * A(z); };
  auto hp = [&](cdouble z) { return A(z) + z * A.derivative()(z); };
  cdouble f = variational_functional(cfg, field, h, hp);
  // Independent direct evaluation over the single unordered pair.
  const cdouble a = cfg.points[0], b = cfg.points[1];
  cdouble direct = 2.0 * (h(a) - h(b)) / (a - b) -
                   2.0 * (field.phi_prime(a) * h(a) + field.phi_prime(b) * h(b));
  CHECK(std::abs(f - direct) < 1e-12);
  CHECK(std::abs(f) > 1e-3);  // genuinely non-critical

  auto bad_h = [&](cdouble z) { return z + 5.0; };
  CHECK_THROWS_AS(variational_functional(cfg, field, bad_h, hp),
                  std::invalid_argument);
}

TEST_CASE("boundedness certificate") {
  // Jacobi family: fixed residues, zeros stay in (-1,1), no flag.
  std::vector<std::pair<DiscreteConfig, ExternalField>> jacobi;
  for (int n : {4, 8, 16}) {
    std::vector<cdouble> seed;
    for (int k = 0; k < n; ++k)  // arcsine-spaced seeds, the realistic start
      seed.emplace_back(-std::cos(kPi * (k + 0.5) / n), 0.0);
    jacobi.emplace_back(solve_critical(DiscreteConfig(seed), kJacobiField),
                        kJacobiField);
  }
  auto rep = boundedness_certificate(jacobi);
  for (double m : rep.max_modulus) CHECK(m < 1.0);
  CHECK(rep.condition_above_minus_half);
  CHECK(!rep.flagged);

  // Scaled roots of unity with growing radius: condition sum (1-n)/n <= -1/2,
  // support unbounded, flag raised.
  std::vector<std::pair<DiscreteConfig, ExternalField>> rou;
  double radius = 1.0;
  for (int n : {4, 8, 16}) {
    rou.emplace_back(scaled_roots(n, radius), roots_of_unity_field(n));
    radius *= 2.0;
  }
  auto rep2 = boundedness_certificate(rou);
  CHECK(rep2.flagged);
  CHECK(!rep2.condition_above_minus_half);
  CHECK(rep2.condition_sum.back() == doctest::Approx((1.0 - 16.0) / 16.0));

  // A single fixed configuration is trivially bounded.
  auto rep3 = boundedness_certificate({{scaled_roots(5, 1.0), roots_of_unity_field(5)}});
  CHECK(rep3.max_modulus.size() == 1);
  CHECK(rep3.max_modulus[0] == doctest::Approx(1.0));
}
