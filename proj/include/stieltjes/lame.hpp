#pragma once

// Heine-Stieltjes / Van Vleck pairs (V, Q) of
//   A(z) Q''(z) + B(z) Q'(z) - lambda V(z) Q(z) = 0,
// with A = prod(z - a_k) of degree p+1, B/A = sum rho_k/(z - a_k),
// lambda = n(n + alpha - 1), alpha = sum rho_k, V monic of degree p-1.
//
// For p = 2 the monomial coefficient recurrence of Q is linear in the single
// Van Vleck root v, giving an (n+1)x(n+1) eigenproblem (tridiagonal after
// shifting one pole to the origin). For general real Stieltjes data the pairs
// are found by the electrostatic Newton solver over interval occupations.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "electrostatics.hpp"
#include "parallel.hpp"
#include "poly.hpp"

namespace stieltjes {

struct LameProblem {
  std::vector<cdouble> poles;
  std::vector<cdouble> residues;
  int n = 0;

  LameProblem(std::vector<cdouble> a, std::vector<cdouble> rho, int degree)
      : poles(std::move(a)), residues(std::move(rho)), n(degree) {
    if (poles.size() != residues.size())
      throw std::invalid_argument("one residue per pole required");
    if (n < 0) throw std::invalid_argument("degree must be nonnegative");
  }

  int p() const { return static_cast<int>(poles.size()) - 1; }
  cdouble alpha() const {
    cdouble s = 0.0;
    for (const cdouble& r : residues) s += r;
    return s;
  }
  cdouble lambda() const { return double(n) * (double(n) + alpha() - 1.0); }
  ExternalField field() const { return ExternalField(poles, residues); }
  ComplexPoly A() const { return ComplexPoly::from_roots(poles); }
  ComplexPoly B() const { return field().B(); }
};

struct HSPair {
  ComplexPoly vanvleck;  // monic degree p-1 (zero polynomial when p = 0)
  ComplexPoly stieltjes; // monic degree n
  cdouble lambda = 0.0;
  bool degenerate_lambda = false;   // lambda = 0: quotient reported unscaled
  bool possibly_degenerate = false; // eigenvalue cluster within 1e-8
};

// Heine's count sigma(n) = binom(n+p-1, n).
inline long heine_count(int n, int p) {
  long num = 1, den = 1;
  for (int k = 1; k <= p - 1; ++k) {
    num *= n + k;
    den *= k;
  }
  return den == 0 ? 1 : num / den;
}

// Coefficient-norm residual of the differential equation, relative to A Q''.
inline double hs_residual(const HSPair& pair, const LameProblem& prob) {
  ComplexPoly Q = pair.stieltjes;
  ComplexPoly lhs = prob.A() * Q.derivative().derivative() +
                    prob.B() * Q.derivative() -
                    pair.lambda * (pair.vanvleck * Q);
  ComplexPoly ref = prob.A() * Q.derivative().derivative();
  double scale = ref.coeff_norm();
  if (scale == 0.0) scale = (prob.B() * Q.derivative()).coeff_norm();
  if (scale == 0.0) scale = 1.0;
  return lhs.coeff_norm() / scale;
}

// All Van Vleck roots v (and the corresponding Q) for p = 2 by the shifted
// tridiagonal eigenproblem. Eigenvalues closer than 1e-8 are deduplicated and
// flagged possibly-degenerate.
inline std::vector<HSPair> heun_spectrum(const LameProblem& prob) {
  if (prob.p() != 2) throw std::invalid_argument("heun_spectrum requires p = 2");
  const int n = prob.n;
  const cdouble lambda = prob.lambda();

  if (n == 0) {
    HSPair trivial;
    trivial.stieltjes = ComplexPoly::constant(1.0);
    trivial.vanvleck = ComplexPoly();  // equation reads 0 = 0
    trivial.lambda = 0.0;
    trivial.degenerate_lambda = true;
    return {trivial};
  }

  // Shift so pole a_0 sits at the origin: kills the sub-subdiagonal of the
  // coefficient operator and leaves a tridiagonal matrix.
  const cdouble shift = prob.poles[0];
  std::vector<cdouble> sp;
  for (const cdouble& a : prob.poles) sp.push_back(a - shift);
  LameProblem shifted(sp, prob.residues, n);
  ComplexPoly A = shifted.A();  // z^3 + A2 z^2 + A1 z (A0 = 0)
  ComplexPoly B = shifted.B();
  const cdouble A2 = A.coeff(2), A1 = A.coeff(1);
  const cdouble B2 = B.coeff(2), B1 = B.coeff(1), B0 = B.coeff(0);

  // Row m of M c = -(lambda v) c collects the z^m coefficient of
  // A Q'' + B Q' - lambda z Q for Q = sum c_j z^j.
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(n + 1, n + 1);
  for (int m = 0; m <= n; ++m) {
    if (m >= 1)
      M(m, m - 1) = double(m - 1) * double(m - 2) + double(m - 1) * B2 - lambda;
    M(m, m) = double(m) * double(m - 1) * A2 + double(m) * B1;
    if (m + 1 <= n) M(m, m + 1) = double(m + 1) * double(m) * A1 + double(m + 1) * B0;
  }

  std::vector<HSPair> pairs;
  if (lambda == cdouble(0.0)) {
    // Degenerate lambda: solutions satisfy A Q'' + B Q' = 0; report kernel
    // vectors with the quotient left unscaled.
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M, Eigen::ComputeFullV);
    for (int k = 0; k <= n; ++k) {
      if (svd.singularValues()(k) < 1e-10 * svd.singularValues()(0)) {
        Eigen::VectorXcd c = svd.matrixV().col(k);
        if (std::abs(c(n)) < 1e-8) continue;
        std::vector<cdouble> qc(static_cast<size_t>(n) + 1);
        for (int j = 0; j <= n; ++j) qc[size_t(j)] = c(j) / c(n);
        HSPair pr;
        pr.stieltjes = taylor_shift(ComplexPoly(std::move(qc)), -shift);
        pr.vanvleck = ComplexPoly();
        pr.lambda = 0.0;
        pr.degenerate_lambda = true;
        pairs.push_back(std::move(pr));
      }
    }
    return pairs;
  }

  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M, /*computeEigenvectors=*/true);
  struct Raw {
    cdouble v;
    Eigen::VectorXcd c;
  };
  std::vector<Raw> raw;
  for (int k = 0; k <= n; ++k) {
    cdouble v = -es.eigenvalues()(k) / lambda + shift;
    raw.push_back({v, es.eigenvectors().col(k)});
  }
  std::sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) {
    if (a.v.real() != b.v.real()) return a.v.real() < b.v.real();
    return a.v.imag() < b.v.imag();
  });

  for (size_t i = 0; i < raw.size(); ++i) {
    bool dup = false, close = false;
    for (size_t j = 0; j < i; ++j) {
      double d = std::abs(raw[i].v - raw[j].v);
      if (d < 1e-8) dup = true;
      else if (d < 1e-6) close = true;
    }
    if (dup) continue;
    if (std::abs(raw[i].c(n)) < 1e-12) continue;  // defective: deg Q < n
    std::vector<cdouble> qc(static_cast<size_t>(n) + 1);
    for (int j = 0; j <= n; ++j) qc[size_t(j)] = raw[i].c(j) / raw[i].c(n);
    HSPair pr;
    // Eigenvectors live in the shifted frame; compose back to the original.
    pr.stieltjes = taylor_shift(ComplexPoly(std::move(qc)), -shift);
    pr.vanvleck = ComplexPoly({-raw[i].v, 1.0});
    pr.lambda = lambda;
    pr.possibly_degenerate = close;
    pairs.push_back(std::move(pr));
  }
  return pairs;
}

// Van Vleck polynomial of a critical configuration:
// V = (A Q'' + B Q') / (lambda Q) with Q = prod (z - zeta_k).
inline ComplexPoly vanvleck_of(const DiscreteConfig& cfg, const LameProblem& prob) {
  ComplexPoly Q = ComplexPoly::from_roots(cfg.points);
  ComplexPoly num = prob.A() * Q.derivative().derivative() + prob.B() * Q.derivative();
  ComplexPoly V = exact_quotient(num, Q, 1e-7);
  cdouble lambda = prob.lambda();
  if (lambda != cdouble(0.0)) V = (1.0 / lambda) * V;
  return V;
}

struct EnumerationResult {
  std::vector<HSPair> pairs;
  std::vector<std::vector<int>> occupations;         // matching pairs[i]
  std::vector<std::vector<int>> failed_occupations;  // Newton divergence
};

// Real Stieltjes enumeration: one saddle per occupation vector (n_1..n_p),
// seeded equispaced inside each pole gap.
inline EnumerationResult stieltjes_enumerate(const LameProblem& prob) {
  const int p = prob.p();
  if (p < 1) throw std::invalid_argument("enumeration requires p >= 1");
  std::vector<double> a;
  for (const cdouble& z : prob.poles) {
    if (std::abs(z.imag()) > 0)
      throw std::invalid_argument("real Stieltjes data requires real poles");
    a.push_back(z.real());
  }
  for (const cdouble& r : prob.residues)
    if (r.real() <= 0 || std::abs(r.imag()) > 0)
      throw std::invalid_argument("real Stieltjes data requires residues > 0");
  std::sort(a.begin(), a.end());

  // All occupation vectors with sum n over the p gaps.
  std::vector<std::vector<int>> occs;
  std::vector<int> cur(static_cast<size_t>(p), 0);
  std::function<void(int, int)> rec = [&](int gap, int left) {
    if (gap == p - 1) {
      cur[size_t(gap)] = left;
      occs.push_back(cur);
      return;
    }
    for (int k = 0; k <= left; ++k) {
      cur[size_t(gap)] = k;
      rec(gap + 1, left - k);
    }
  };
  rec(0, prob.n);

  EnumerationResult out;
  ExternalField field = prob.field();
  std::vector<std::pair<bool, std::pair<DiscreteConfig, std::vector<int>>>> solved =
      parallel_map(occs, [&](const std::vector<int>& occ) {
        std::vector<cdouble> seed;
        for (int gap = 0; gap < p; ++gap) {
          double lo = a[size_t(gap)], hi = a[size_t(gap) + 1];
          int m = occ[size_t(gap)];
          for (int k = 0; k < m; ++k)
            seed.emplace_back(lo + (hi - lo) * (k + 1.0) / (m + 1.0), 0.0);
        }
        try {
          DiscreteConfig sol = solve_critical(DiscreteConfig(seed), field);
          return std::make_pair(true, std::make_pair(sol, occ));
        } catch (const Diverged&) {
          return std::make_pair(false, std::make_pair(DiscreteConfig(), occ));
        }
      });
  for (auto& [ok, payload] : solved) {
    if (!ok) {
      out.failed_occupations.push_back(payload.second);
      continue;
    }
    HSPair pr;
    pr.stieltjes = ComplexPoly::from_roots(payload.first.points);
    pr.vanvleck = vanvleck_of(payload.first, prob);
    pr.lambda = prob.lambda();
    out.pairs.push_back(std::move(pr));
    out.occupations.push_back(payload.second);
  }
  return out;
}

}  // namespace stieltjes
