#pragma once

// Discrete weighted logarithmic energy, its gradient (the criticality
// residual), a damped-Newton saddle solver, and the variational functional.
//
// Field convention: residues rho_k define B/A(z) = sum_k rho_k/(z - a_k);
// the analytic field potential is Phi with Phi'(z) = -B/(2A), i.e.
// phi(z) = Re Phi(z) = -sum_k Re[rho_k Log(z - a_k)]/2 (principal branch per
// summand; only Re Phi and Phi' are ever used).

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "poly.hpp"

namespace stieltjes {

struct ExternalField {
  std::vector<cdouble> poles;
  std::vector<cdouble> residues;

  ExternalField() = default;
  ExternalField(std::vector<cdouble> a, std::vector<cdouble> rho)
      : poles(std::move(a)), residues(std::move(rho)) {
    if (poles.size() != residues.size())
      throw std::invalid_argument("one residue per pole required");
    for (size_t i = 0; i < poles.size(); ++i)
      for (size_t j = i + 1; j < poles.size(); ++j)
        if (poles[i] == poles[j])
          throw std::invalid_argument("field poles must be pairwise distinct");
  }

  int p() const { return static_cast<int>(poles.size()) - 1; }

  cdouble BA(cdouble z) const {  // B/A at z
    cdouble s = 0.0;
    for (size_t k = 0; k < poles.size(); ++k) s += residues[k] / (z - poles[k]);
    return s;
  }
  cdouble BA_deriv(cdouble z) const {
    cdouble s = 0.0;
    for (size_t k = 0; k < poles.size(); ++k) {
      cdouble d = z - poles[k];
      s -= residues[k] / (d * d);
    }
    return s;
  }
  cdouble phi_prime(cdouble z) const { return -0.5 * BA(z); }
  double phi(cdouble z) const {  // Re Phi, principal log branch per summand
    double s = 0.0;
    for (size_t k = 0; k < poles.size(); ++k) {
      cdouble l = std::log(z - poles[k]);
      s -= 0.5 * (residues[k].real() * l.real() - residues[k].imag() * l.imag());
    }
    return s;
  }

  // A(z) = prod (z - a_k) and B(z) = sum_k rho_k prod_{j != k} (z - a_j).
  ComplexPoly A() const { return ComplexPoly::from_roots(poles); }
  ComplexPoly B() const {
    ComplexPoly b;
    for (size_t k = 0; k < poles.size(); ++k) {
      std::vector<cdouble> others;
      for (size_t j = 0; j < poles.size(); ++j)
        if (j != k) others.push_back(poles[j]);
      b = b + residues[k] * ComplexPoly::from_roots(others);
    }
    return b;
  }
};

struct DiscreteConfig {
  std::vector<cdouble> points;

  DiscreteConfig() = default;
  explicit DiscreteConfig(std::vector<cdouble> pts) : points(std::move(pts)) {}

  int n() const { return static_cast<int>(points.size()); }

  double min_gap() const {
    double g = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < points.size(); ++i)
      for (size_t j = i + 1; j < points.size(); ++j)
        g = std::min(g, std::abs(points[i] - points[j]));
    return g;
  }
  bool coincident() const { return points.size() > 1 && min_gap() == 0.0; }
  bool touches_pole(const ExternalField& f) const {
    for (const cdouble& z : points)
      for (const cdouble& a : f.poles)
        if (z == a) return true;
    return false;
  }
};

// Weighted discrete energy; +infinity sentinel on coincident points.
inline double discrete_energy(const DiscreteConfig& cfg, const ExternalField& field) {
  if (cfg.coincident()) return std::numeric_limits<double>::infinity();
  double e = 0.0;
  const auto& z = cfg.points;
  for (size_t i = 0; i < z.size(); ++i)
    for (size_t j = 0; j < z.size(); ++j)
      if (i != j) e -= std::log(std::abs(z[i] - z[j]));
  for (const cdouble& x : z) e += 2.0 * field.phi(x);
  return e;
}

// Criticality residual: entry k is 2*sum_{j!=k} 1/(z_k - z_j) + (B/A)(z_k).
// The configuration is critical exactly when every entry vanishes.
inline std::vector<cdouble> gradient_residual(const DiscreteConfig& cfg,
                                              const ExternalField& field) {
  if (cfg.touches_pole(field))
    throw std::domain_error("configuration point sits on a field pole");
  const auto& z = cfg.points;
  std::vector<cdouble> r(z.size(), cdouble(0.0));
  for (size_t k = 0; k < z.size(); ++k) {
    cdouble s = 0.0;
    for (size_t j = 0; j < z.size(); ++j)
      if (j != k) s += 1.0 / (z[k] - z[j]);
    r[k] = 2.0 * s + field.BA(z[k]);
  }
  return r;
}

inline double residual_max(const std::vector<cdouble>& r) {
  double m = 0.0;
  for (const cdouble& x : r) m = std::max(m, std::abs(x));
  return m;
}

struct Diverged : std::runtime_error {
  double last_residual;
  explicit Diverged(double res)
      : std::runtime_error("Newton iteration did not reach tolerance; last residual " +
                           std::to_string(res)),
        last_residual(res) {}
};

struct SolveOptions {
  int max_iter = 200;
  double tol = 1e-11;          // max residual entry modulus
  double min_step = std::pow(2.0, -20.0);
  double gap_floor = 1e-13;    // collision guard during iteration
};

// Damped Newton on the residual system. Saddle points are targeted, so the
// damping acts on ||residual||^2 (Armijo backtracking, factor 1/2); trial
// steps that collide points (gap below floor) or hit a pole are halved first.
inline DiscreteConfig solve_critical(const DiscreteConfig& init,
                                     const ExternalField& field,
                                     const SolveOptions& opts = {}) {
  const int n = init.n();
  DiscreteConfig cfg = init;
  std::vector<cdouble> F = gradient_residual(cfg, field);
  double fnorm = residual_max(F);
  if (fnorm < opts.tol) return cfg;

  auto sumsq = [](const std::vector<cdouble>& v) {
    double s = 0.0;
    for (const cdouble& x : v) s += std::norm(x);
    return s;
  };

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    // Explicit Jacobian of the residual: d/dz_j [1/(z_k - z_j)] = 1/(z_k-z_j)^2.
    Eigen::MatrixXcd J(n, n);
    for (int k = 0; k < n; ++k) {
      cdouble diag = field.BA_deriv(cfg.points[size_t(k)]);
      for (int j = 0; j < n; ++j) {
        if (j == k) continue;
        cdouble d = cfg.points[size_t(k)] - cfg.points[size_t(j)];
        cdouble inv2 = 1.0 / (d * d);
        J(k, j) = 2.0 * inv2;
        diag -= 2.0 * inv2;
      }
      J(k, k) = diag;
    }
    Eigen::VectorXcd rhs(n);
    for (int k = 0; k < n; ++k) rhs(k) = -F[size_t(k)];
    Eigen::VectorXcd delta = J.partialPivLu().solve(rhs);

    double f2 = sumsq(F);
    double step = 1.0;
    // Trust cap: the residual decays like 1/|z| at infinity, so an undamped
    // step can "converge" by blowing the configuration up. Bound the largest
    // single-iteration displacement by the problem diameter.
    {
      double diam = 1.0;
      for (const cdouble& a : field.poles) diam = std::max(diam, std::abs(a));
      for (const cdouble& z : cfg.points) diam = std::max(diam, std::abs(z));
      double dmax = 0.0;
      for (int k = 0; k < n; ++k) dmax = std::max(dmax, std::abs(delta(k)));
      if (dmax > 2.0 * diam) step = 2.0 * diam / dmax;
    }
    DiscreteConfig trial;
    std::vector<cdouble> Ftrial;
    bool accepted = false;
    while (step >= opts.min_step) {
      trial = cfg;
      for (int k = 0; k < n; ++k) trial.points[size_t(k)] += step * delta(k);
      bool collided = trial.min_gap() < opts.gap_floor || trial.touches_pole(field);
      if (!collided) {
        Ftrial = gradient_residual(trial, field);
        if (sumsq(Ftrial) <= (1.0 - 1e-4 * step) * f2) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) throw Diverged(fnorm);
    cfg = trial;
    F = Ftrial;
    fnorm = residual_max(F);
    if (fnorm < opts.tol) return cfg;
  }
  throw Diverged(fnorm);
}

// Newton with homotopy in the pole positions: poles are first projected onto
// their principal axis (least-squares line through the centroid), then moved
// back to the true positions over `steps` continuation stages.
inline DiscreteConfig solve_critical_continued(const DiscreteConfig& init,
                                               const ExternalField& field,
                                               int steps = 16,
                                               const SolveOptions& opts = {}) {
  const size_t m = field.poles.size();
  cdouble centroid = 0.0;
  for (const cdouble& a : field.poles) centroid += a;
  centroid /= double(m);
  // Principal axis direction from the 2x2 covariance of the pole cloud.
  double sxx = 0, sxy = 0, syy = 0;
  for (const cdouble& a : field.poles) {
    cdouble d = a - centroid;
    sxx += d.real() * d.real();
    sxy += d.real() * d.imag();
    syy += d.imag() * d.imag();
  }
  double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  cdouble axis(std::cos(theta), std::sin(theta));
  std::vector<cdouble> projected(m);
  for (size_t k = 0; k < m; ++k) {
    cdouble d = field.poles[k] - centroid;
    double t = d.real() * axis.real() + d.imag() * axis.imag();
    projected[k] = centroid + t * axis;
  }
  // Distinct-pole guard: if the projection collides poles, start closer to
  // the true configuration.
  auto distinct = [](const std::vector<cdouble>& a) {
    for (size_t i = 0; i < a.size(); ++i)
      for (size_t j = i + 1; j < a.size(); ++j)
        if (std::abs(a[i] - a[j]) < 1e-9) return false;
    return true;
  };
  double s0 = 0.0;
  while (s0 < 1.0) {
    std::vector<cdouble> mix(m);
    for (size_t k = 0; k < m; ++k)
      mix[k] = (1.0 - s0) * projected[k] + s0 * field.poles[k];
    if (distinct(mix)) break;
    s0 += 1.0 / steps;
  }

  DiscreteConfig cfg = init;
  for (int s = 0; s <= steps; ++s) {
    double t = s0 + (1.0 - s0) * double(s) / steps;
    std::vector<cdouble> mix(m);
    for (size_t k = 0; k < m; ++k)
      mix[k] = (1.0 - t) * projected[k] + t * field.poles[k];
    ExternalField stage(mix, field.residues);
    cfg = solve_critical(cfg, stage, opts);
  }
  return cfg;
}

// Variational functional f(h) = sum_{i != j} (h(z_i)-h(z_j))/(z_i-z_j)
//                              - 2 sum_k Phi'(z_k) h(z_k).
// h must vanish at every field pole; hprime supplies the confluent value of
// the difference quotient when evaluation points coincide.
template <class H, class HPrime>
cdouble variational_functional(const DiscreteConfig& cfg, const ExternalField& field,
                               H&& h, HPrime&& hprime) {
  double scale = 0.0;
  for (const cdouble& z : cfg.points) scale = std::max(scale, std::abs(h(z)));
  for (const cdouble& a : field.poles)
    if (std::abs(h(a)) > 1e-10 * (1.0 + scale))
      throw std::invalid_argument("variation h must vanish at the field poles");
  cdouble f = 0.0;
  const auto& z = cfg.points;
  for (size_t i = 0; i < z.size(); ++i)
    for (size_t j = 0; j < z.size(); ++j) {
      if (i == j) continue;
      cdouble d = z[i] - z[j];
      f += (d == cdouble(0.0)) ? hprime(z[i]) : (h(z[i]) - h(z[j])) / d;
    }
  for (const cdouble& x : z) f -= 2.0 * field.phi_prime(x) * h(x);
  return f;
}

struct BoundednessReport {
  std::vector<int> n_values;
  std::vector<double> max_modulus;      // max |zeta| per configuration
  std::vector<double> condition_sum;    // Re sum_k rho_k(n) / n per configuration
  bool condition_above_minus_half = true;  // all condition sums > -1/2
  bool flagged = false;  // condition sum at or below -1/2 + margin for some n
};

// Reports, for a family of critical configurations, the spread of the points
// and whether Re(sum residues)/n stays above the -1/2 boundedness threshold.
inline BoundednessReport boundedness_certificate(
    const std::vector<std::pair<DiscreteConfig, ExternalField>>& family,
    double margin = 0.05) {
  BoundednessReport rep;
  for (const auto& [cfg, field] : family) {
    auto res = gradient_residual(cfg, field);
    if (residual_max(res) > 1e-9)
      throw std::invalid_argument("boundedness certificate requires critical configs");
    double mx = 0.0;
    for (const cdouble& z : cfg.points) mx = std::max(mx, std::abs(z));
    cdouble rho_sum = 0.0;
    for (const cdouble& r : field.residues) rho_sum += r;
    double cond = rho_sum.real() / std::max(1, cfg.n());
    rep.n_values.push_back(cfg.n());
    rep.max_modulus.push_back(mx);
    rep.condition_sum.push_back(cond);
    if (cond <= -0.5) rep.condition_above_minus_half = false;
    if (cond <= -0.5 + margin) rep.flagged = true;
  }
  return rep;
}

}  // namespace stieltjes
