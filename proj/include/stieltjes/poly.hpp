#pragma once

// Complex polynomial arithmetic and root finding. Coefficients are stored in
// ascending degree order; the leading (highest-index) coefficient of a nonzero
// polynomial is nonzero.

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stieltjes {

using cdouble = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;

// Thrown by exact_quotient when the division leaves a remainder above tolerance.
struct NotDivisible : std::runtime_error {
  double remainder_norm;
  explicit NotDivisible(double rnorm)
      : std::runtime_error("polynomial division left remainder of norm " +
                           std::to_string(rnorm)),
        remainder_norm(rnorm) {}
};

class ComplexPoly {
 public:
  ComplexPoly() : c_{} {}  // zero polynomial
  explicit ComplexPoly(std::vector<cdouble> coeffs) : c_(std::move(coeffs)) {
    trim();
  }
  static ComplexPoly constant(cdouble a) { return ComplexPoly({a}); }
  static ComplexPoly identity() { return ComplexPoly({0.0, 1.0}); }  // z

  // Monic polynomial with the given zeros.
  static ComplexPoly from_roots(const std::vector<cdouble>& roots) {
    // Build in descending order, then flip to the stored ascending layout.
    std::vector<cdouble> c{1.0};
    for (const cdouble& r : roots) {
      c.push_back(0.0);
      for (size_t j = c.size() - 1; j >= 1; --j) c[j] -= r * c[j - 1];
    }
    std::reverse(c.begin(), c.end());
    return ComplexPoly(std::move(c));
  }

  bool is_zero() const { return c_.empty(); }
  int degree() const { return static_cast<int>(c_.size()) - 1; }  // -1 for zero
  const std::vector<cdouble>& coeffs() const { return c_; }
  cdouble coeff(size_t k) const { return k < c_.size() ? c_[k] : cdouble(0.0); }
  cdouble leading() const {
    return c_.empty() ? cdouble(0.0) : c_.back();
  }

  double coeff_norm() const {  // Euclidean norm of the coefficient vector
    double s = 0.0;
    for (const cdouble& a : c_) s += std::norm(a);
    return std::sqrt(s);
  }
  double coeff_max() const {
    double m = 0.0;
    for (const cdouble& a : c_) m = std::max(m, std::abs(a));
    return m;
  }

  cdouble operator()(cdouble z) const {  // Horner evaluation
    cdouble r = 0.0;
    for (size_t k = c_.size(); k-- > 0;) r = r * z + c_[k];
    return r;
  }

  // p(z), p'(z), ..., p^(k)(z) in one Horner sweep.
  std::vector<cdouble> eval_with_derivs(cdouble z, int k) const {
    std::vector<cdouble> out(static_cast<size_t>(k) + 1, cdouble(0.0));
    for (size_t j = c_.size(); j-- > 0;) {
      for (int m = k; m >= 1; --m) out[m] = out[m] * z + out[m - 1];
      out[0] = out[0] * z + c_[j];
    }
    double fact = 1.0;
    for (int m = 2; m <= k; ++m) {
      fact *= m;
      out[m] *= fact;
    }
    return out;
  }

  ComplexPoly derivative() const {
    if (c_.size() <= 1) return ComplexPoly();
    std::vector<cdouble> d(c_.size() - 1);
    for (size_t k = 1; k < c_.size(); ++k) d[k - 1] = double(k) * c_[k];
    return ComplexPoly(std::move(d));
  }

  friend ComplexPoly operator+(const ComplexPoly& a, const ComplexPoly& b) {
    std::vector<cdouble> c(std::max(a.c_.size(), b.c_.size()), cdouble(0.0));
    for (size_t k = 0; k < a.c_.size(); ++k) c[k] += a.c_[k];
    for (size_t k = 0; k < b.c_.size(); ++k) c[k] += b.c_[k];
    return ComplexPoly(std::move(c));
  }
  friend ComplexPoly operator-(const ComplexPoly& a, const ComplexPoly& b) {
    std::vector<cdouble> c(std::max(a.c_.size(), b.c_.size()), cdouble(0.0));
    for (size_t k = 0; k < a.c_.size(); ++k) c[k] += a.c_[k];
    for (size_t k = 0; k < b.c_.size(); ++k) c[k] -= b.c_[k];
    return ComplexPoly(std::move(c));
  }
  friend ComplexPoly operator*(const ComplexPoly& a, const ComplexPoly& b) {
    if (a.is_zero() || b.is_zero()) return ComplexPoly();
    std::vector<cdouble> c(a.c_.size() + b.c_.size() - 1, cdouble(0.0));
    for (size_t i = 0; i < a.c_.size(); ++i)
      for (size_t j = 0; j < b.c_.size(); ++j) c[i + j] += a.c_[i] * b.c_[j];
    return ComplexPoly(std::move(c));
  }
  friend ComplexPoly operator*(cdouble s, const ComplexPoly& a) {
    std::vector<cdouble> c = a.c_;
    for (cdouble& x : c) x *= s;
    return ComplexPoly(std::move(c));
  }

  // Quotient and remainder of Euclidean division.
  std::pair<ComplexPoly, ComplexPoly> divmod(const ComplexPoly& den) const {
    if (den.is_zero()) throw std::invalid_argument("division by zero polynomial");
    std::vector<cdouble> rem = c_;
    int dn = den.degree();
    int dq = degree() - dn;
    if (dq < 0) return {ComplexPoly(), *this};
    std::vector<cdouble> q(static_cast<size_t>(dq) + 1, cdouble(0.0));
    for (int k = dq; k >= 0; --k) {
      cdouble f = rem[static_cast<size_t>(k + dn)] / den.c_.back();
      q[static_cast<size_t>(k)] = f;
      for (int j = 0; j <= dn; ++j)
        rem[static_cast<size_t>(k + j)] -= f * den.c_[static_cast<size_t>(j)];
    }
    rem.resize(static_cast<size_t>(dn));
    return {ComplexPoly(std::move(q)), ComplexPoly(std::move(rem))};
  }

 private:
  void trim() {
    while (!c_.empty() && c_.back() == cdouble(0.0)) c_.pop_back();
  }
  std::vector<cdouble> c_;
};

// Composition p(z + a) by repeated synthetic division (Taylor shift).
inline ComplexPoly taylor_shift(const ComplexPoly& p, cdouble a) {
  std::vector<cdouble> d = p.coeffs();
  const int n = static_cast<int>(d.size()) - 1;
  for (int k = 0; k < n; ++k)
    for (int j = n - 1; j >= k; --j)
      d[static_cast<size_t>(j)] += a * d[static_cast<size_t>(j) + 1];
  return ComplexPoly(std::move(d));
}

// num / den when the division is exact to tolerance; the relative remainder
// norm can be retrieved through remainder_norm_out.
inline ComplexPoly exact_quotient(const ComplexPoly& num, const ComplexPoly& den,
                                  double tol,
                                  double* remainder_norm_out = nullptr) {
  auto [q, r] = num.divmod(den);
  double rnorm = r.coeff_norm();
  double scale = num.coeff_norm();
  if (remainder_norm_out) *remainder_norm_out = rnorm;
  if (rnorm > tol * (scale > 0 ? scale : 1.0)) throw NotDivisible(rnorm);
  return q;
}

namespace detail {

// Companion-matrix eigenvalues of a monic-normalized polynomial.
inline std::vector<cdouble> companion_roots(const std::vector<cdouble>& c) {
  int n = static_cast<int>(c.size()) - 1;
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 1; i < n; ++i) M(i, i - 1) = 1.0;
  for (int i = 0; i < n; ++i) M(i, n - 1) = -c[static_cast<size_t>(i)] / c.back();
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M, /*computeEigenvectors=*/false);
  std::vector<cdouble> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = es.eigenvalues()(i);
  return out;
}

// One synchronized Aberth-Ehrlich sweep; returns the largest relative step.
inline double aberth_sweep(const ComplexPoly& p, const ComplexPoly& dp,
                           std::vector<cdouble>& z) {
  const size_t n = z.size();
  std::vector<cdouble> corr(n, cdouble(0.0));
  for (size_t k = 0; k < n; ++k) {
    auto pv = p.eval_with_derivs(z[k], 1);
    cdouble num = pv[0], der = pv[1];
    (void)dp;
    cdouble N;
    if (std::abs(der) > 0.0) {
      N = num / der;
    } else {
      N = cdouble(0.0);
    }
    cdouble S = 0.0;
    for (size_t j = 0; j < n; ++j) {
      if (j == k) continue;
      cdouble d = z[k] - z[j];
      if (std::abs(d) < 1e-300) d = cdouble(1e-300, 0.0);
      S += 1.0 / d;
    }
    cdouble denom = 1.0 - N * S;
    corr[k] = (std::abs(denom) > 1e-300) ? N / denom : N;
  }
  double maxstep = 0.0;
  for (size_t k = 0; k < n; ++k) {
    z[k] -= corr[k];
    maxstep = std::max(maxstep, std::abs(corr[k]) / (1.0 + std::abs(z[k])));
  }
  return maxstep;
}

inline bool aberth_converged(const ComplexPoly& p, const std::vector<cdouble>& z) {
  double cmax = p.coeff_max();
  int deg = p.degree();
  for (const cdouble& r : z) {
    double bound = 1e-12 * cmax * std::pow(1.0 + std::abs(r), deg);
    if (std::abs(p(r)) > bound) return false;
  }
  return true;
}

}  // namespace detail

// All zeros of p, with multiplicity. Simultaneous Aberth-Ehrlich iteration;
// the initial guesses come from a Cauchy-bound circle, with companion-matrix
// eigenvalues as fallback initializer if the first run stalls. Clusters closer
// than 1e-7*(1+|root|) are merged to their mean (multiple zeros repeat).
inline std::vector<cdouble> roots(const ComplexPoly& p_in) {
  if (p_in.is_zero()) throw std::invalid_argument("roots of the zero polynomial");
  if (p_in.degree() < 1) throw std::invalid_argument("roots of a constant polynomial");

  // Strip exact zero roots at the origin first (no accuracy loss).
  std::vector<cdouble> c = p_in.coeffs();
  size_t zero_roots = 0;
  while (zero_roots < c.size() - 1 && c[zero_roots] == cdouble(0.0)) ++zero_roots;
  c.erase(c.begin(), c.begin() + static_cast<long>(zero_roots));
  ComplexPoly p{std::vector<cdouble>(c)};
  int n = p.degree();

  std::vector<cdouble> z;
  if (n >= 1) {
    // Cauchy bound initializer: staggered circle of radius ~ root bound.
    double bound = 0.0;
    for (int k = 0; k < n; ++k)
      bound = std::max(bound, std::abs(p.coeff(static_cast<size_t>(k)) / p.leading()));
    double radius = 1.0 + bound;
    z.resize(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
      double th = 2.0 * kPi * (k + 0.25) / n + 0.5;  // avoid axis alignment
      z[static_cast<size_t>(k)] = radius * cdouble(std::cos(th), std::sin(th));
    }
    ComplexPoly dp = p.derivative();
    bool ok = false;
    for (int pass = 0; pass < 2 && !ok; ++pass) {
      if (pass == 1) z = detail::companion_roots(p.coeffs());  // fallback init
      for (int it = 0; it < 400; ++it) {
        double step = detail::aberth_sweep(p, dp, z);
        if (step < 1e-14) break;
      }
      ok = detail::aberth_converged(p, z);
    }
    if (!ok) {
      // Keep the better of the two attempts; residual contract is checked by
      // callers that need it. Companion values are already in z here.
      for (int it = 0; it < 400; ++it)
        if (detail::aberth_sweep(p, p.derivative(), z) < 1e-15) break;
    }
  }
  for (size_t k = 0; k < zero_roots; ++k) z.push_back(cdouble(0.0));

  // Merge clusters (multiple-zero detection).
  std::sort(z.begin(), z.end(), [](const cdouble& a, const cdouble& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  std::vector<cdouble> merged;
  size_t i = 0;
  while (i < z.size()) {
    size_t j = i + 1;
    cdouble sum = z[i];
    while (j < z.size() &&
           std::abs(z[j] - z[i]) < 1e-7 * (1.0 + std::abs(z[i]))) {
      sum += z[j];
      ++j;
    }
    cdouble mean = sum / double(j - i);
    for (size_t k = i; k < j; ++k) merged.push_back(mean);
    i = j;
  }
  return merged;
}

}  // namespace stieltjes
