#pragma once

// Composite Gauss-Legendre quadrature with dyadic panel refinement and
// endpoint substitutions that remove inverse-square-root singularities.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

namespace stieltjes {

namespace detail {

struct GaussRule {
  std::array<double, 32> nodes;    // on (-1, 1)
  std::array<double, 32> weights;
};

// 32-point Gauss-Legendre rule, generated once by Newton iteration on the
// Legendre recurrence (deterministic, accurate to machine precision).
inline const GaussRule& gauss32() {
  static const GaussRule rule = [] {
    GaussRule r{};
    const int n = 32;
    for (int i = 0; i < n; ++i) {
      // Chebyshev-based initial guess for the i-th root of P_n.
      double x = std::cos(3.14159265358979323846 * (i + 0.75) / (n + 0.5));
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        double dp = n * (x * p1 - p0) / (x * x - 1.0);
        double dx = p1 / dp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      double dp = n * (x * p1 - p0) / (x * x - 1.0);
      r.nodes[size_t(i)] = x;
      r.weights[size_t(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return r;
  }();
  return rule;
}

}  // namespace detail

// Integral of f over [a, b] with a fixed number of equal panels, 32 Gauss
// nodes per panel. T is double or std::complex<double>.
template <class T, class F>
T composite_gauss(F&& f, double a, double b, int panels) {
  const auto& rule = detail::gauss32();
  T total{};
  double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    double lo = a + p * h;
    double mid = lo + 0.5 * h, half = 0.5 * h;
    T acc{};
    for (size_t i = 0; i < rule.nodes.size(); ++i)
      acc += rule.weights[i] * f(mid + half * rule.nodes[i]);
    total += half * acc;
  }
  return total;
}

// Panel count doubles until two successive refinements agree to tol
// (relative to 1 + |result|). err_out receives the last disagreement.
template <class T, class F>
T adaptive_gauss(F&& f, double a, double b, double tol = 1e-11,
                 double* err_out = nullptr, int max_panels = 4096) {
  T prev = composite_gauss<T>(f, a, b, 1);
  double err = 1e300;
  for (int panels = 2; panels <= max_panels; panels *= 2) {
    T cur = composite_gauss<T>(f, a, b, panels);
    err = std::abs(cur - prev) / (1.0 + std::abs(cur));
    prev = cur;
    if (err <= tol) break;
  }
  if (err_out) *err_out = err;
  return prev;
}

// Integral of g over [0, L] where g may carry an integrable power singularity
// at 0: substituting t = s^2 gives \int g(s^2) 2s ds, smooth for g ~ t^(-1/2).
template <class T, class F>
T adaptive_gauss_sqrt0(F&& g, double L, double tol = 1e-11,
                       double* err_out = nullptr) {
  auto h = [&](double s) { return g(s * s) * (2.0 * s); };
  return adaptive_gauss<T>(h, 0.0, std::sqrt(L), tol, err_out);
}

}  // namespace stieltjes
