#pragma once

// Horizontal-trajectory analysis of the quadratic differential -(V/A) dz^2:
// local emanating directions at critical points, adaptive trajectory tracing
// (arc-length RK4(5) with branch continuity), metric length (1/pi)|sqrt(V/A)|,
// the critical graph, and the three-pole configuration classifier.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "parallel.hpp"
#include "poly.hpp"
#include "quadrature.hpp"

namespace stieltjes {

struct CriticalPoint {
  cdouble z;
  int order = 1;  // multiplicity of the zero of V; -1 for a simple pole of A
};

struct QuadDiff {
  ComplexPoly V;  // monic, degree p-1
  ComplexPoly A;  // monic, degree p+1, simple roots
  std::vector<CriticalPoint> critical;  // zeros of V first, then poles of A
  bool degenerate = false;              // a zero of V collides with a pole

  QuadDiff(ComplexPoly V_, ComplexPoly A_) : V(std::move(V_)), A(std::move(A_)) {
    if (A.degree() < 2 || V.degree() != A.degree() - 2)
      throw std::invalid_argument("need deg V = deg A - 2 >= 0");
    if (std::abs(V.leading() - 1.0) > 1e-9 || std::abs(A.leading() - 1.0) > 1e-9)
      throw std::invalid_argument("V and A must be monic");
    std::vector<cdouble> apoles = roots(A);
    for (size_t i = 0; i < apoles.size(); ++i)
      for (size_t j = i + 1; j < apoles.size(); ++j)
        if (std::abs(apoles[i] - apoles[j]) < 1e-7 * (1.0 + std::abs(apoles[i])))
          throw std::invalid_argument("A must have simple roots");
    if (V.degree() >= 1) {
      std::vector<cdouble> vz = roots(V);  // merged clusters repeat their mean
      std::sort(vz.begin(), vz.end(), [](cdouble a, cdouble b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
      });
      for (size_t i = 0; i < vz.size();) {
        size_t j = i;
        while (j < vz.size() && std::abs(vz[j] - vz[i]) < 1e-10) ++j;
        critical.push_back({vz[i], static_cast<int>(j - i)});
        i = j;
      }
    }
    for (const cdouble& a : apoles) {
      for (const CriticalPoint& c : critical)
        if (c.order >= 1 && std::abs(c.z - a) < 1e-9 * (1.0 + std::abs(a)))
          degenerate = true;
      critical.push_back({a, -1});
    }
  }

  int p() const { return A.degree() - 1; }
  cdouble R(cdouble z) const { return V(z) / A(z); }

  double scale() const {
    double s = 1.0;
    for (const CriticalPoint& c : critical) s = std::max(s, std::abs(c.z));
    return s;
  }
  // Index of the nearest critical point and its distance.
  std::pair<int, double> nearest_critical(cdouble z) const {
    int best = -1;
    double d = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < critical.size(); ++k) {
      double dk = std::abs(z - critical[k].z);
      if (dk < d) {
        d = dk;
        best = static_cast<int>(k);
      }
    }
    return {best, d};
  }
};

// Directions of the k+2 horizontal rays leaving a critical point of order k
// (k = -1 at a simple pole gives a single ray). Locally -R(z) ~ c0 (z-c)^k,
// and -R dz^2 > 0 along z = c + t e^{i theta} forces
// theta_m = (-arg c0 + 2 pi m)/(k+2).
inline std::vector<cdouble> emanating_directions(const QuadDiff& qd, cdouble c) {
  const CriticalPoint* cp = nullptr;
  for (const CriticalPoint& q : qd.critical)
    if (std::abs(q.z - c) < 1e-7 * (1.0 + std::abs(c))) cp = &q;
  if (!cp) throw std::domain_error("not a critical point of the differential");
  cdouble c0;
  if (cp->order >= 1) {
    double kfact = 1.0;
    for (int m = 2; m <= cp->order; ++m) kfact *= m;
    cdouble vk = qd.V.eval_with_derivs(cp->z, cp->order)[size_t(cp->order)];
    c0 = -vk / (kfact * qd.A(cp->z));
  } else {
    c0 = -qd.V(cp->z) / qd.A.derivative()(cp->z);
  }
  int count = cp->order + 2;
  std::vector<cdouble> dirs;
  for (int m = 0; m < count; ++m) {
    double theta = (-std::arg(c0) + 2.0 * kPi * m) / count;
    dirs.emplace_back(std::cos(theta), std::sin(theta));
  }
  return dirs;
}

enum class TrajKind { Critical, Closed, Truncated, RecurrentSuspect };

struct Trajectory {
  std::vector<cdouble> points;
  TrajKind kind = TrajKind::Truncated;
  double omega_length = 0.0;                            // accumulated by the tracer
  std::optional<cdouble> start_endpoint, end_endpoint;  // snapped critical points
  int tube_reentries = 0;
};

namespace detail {

// Unimodular direction u with (-R)(z) u^2 > 0, branch nearest to u_ref.
// Returns false when the direction would turn too sharply from u_ref (branch
// ambiguity: caller halves the step) or R vanishes.
inline bool horizontal_direction(const QuadDiff& qd, cdouble z, cdouble u_ref,
                                 cdouble* u_out, double* speed_out = nullptr) {
  cdouble mr = -qd.R(z);
  double amp = std::abs(mr);
  if (amp == 0.0) return false;
  cdouble w = std::sqrt(mr);
  cdouble u = std::conj(w) / std::abs(w);
  double cosang = u.real() * u_ref.real() + u.imag() * u_ref.imag();
  if (cosang < 0.0) {
    u = -u;
    cosang = -cosang;
  }
  if (cosang < 0.25) return false;  // turned by more than ~75 degrees
  *u_out = u;
  if (speed_out) *speed_out = std::sqrt(amp);  // d(pi * omega-length)/ds
  return true;
}

// Integral of sqrt(-R) along the straight chord from z to the critical point
// c, branch started at w0 and continued by sign nearness; the substitution
// t = 1 - s^2 absorbs the inverse-square-root or root behaviour at c. Nodes
// are traversed in order, keeping the sign continuation well defined.
inline cdouble chord_xi(const QuadDiff& qd, cdouble z, cdouble c, cdouble w0) {
  cdouble dz = c - z;
  cdouble prev = w0;
  auto integrand = [&](double s) -> cdouble {
    double t = 1.0 - s * s;
    cdouble w = std::sqrt(-qd.R(z + t * dz));
    if (std::norm(w - prev) > std::norm(w + prev)) w = -w;
    prev = w;
    return w * dz * 2.0 * s;
  };
  return composite_gauss<cdouble>(integrand, 0.0, 1.0, 24);
}

inline double point_segment_distance(cdouble p, cdouble a, cdouble b) {
  cdouble ab = b - a;
  double len2 = std::norm(ab);
  if (len2 == 0.0) return std::abs(p - a);
  double t = ((p - a).real() * ab.real() + (p - a).imag() * ab.imag()) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return std::abs(p - (a + t * ab));
}

// Uniform spatial hash over polyline segments for tube re-entry queries.
class SegmentGrid {
 public:
  explicit SegmentGrid(double cell) : cell_(cell) {}

  void insert(size_t idx, cdouble a, cdouble b, double pad) {
    auto [ilo, jlo] = key(std::min(a.real(), b.real()) - pad,
                          std::min(a.imag(), b.imag()) - pad);
    auto [ihi, jhi] = key(std::max(a.real(), b.real()) + pad,
                          std::max(a.imag(), b.imag()) + pad);
    for (long i = ilo; i <= ihi; ++i)
      for (long j = jlo; j <= jhi; ++j) cells_[{i, j}].push_back(idx);
  }
  const std::vector<size_t>* bucket(cdouble p) const {
    auto it = cells_.find(key(p.real(), p.imag()));
    return it == cells_.end() ? nullptr : &it->second;
  }

 private:
  std::pair<long, long> key(double x, double y) const {
    return {static_cast<long>(std::floor(x / cell_)),
            static_cast<long>(std::floor(y / cell_))};
  }
  double cell_;
  std::map<std::pair<long, long>, std::vector<size_t>> cells_;
};

}  // namespace detail

struct TraceOptions {
  double rtol = 1e-11;           // per-step tolerance (relative to 1+|z|)
  double snap_radius = 1e-7;     // critical-point disk, scaled by (1+|c|)
  double detect_radius = 1e-4;   // chord-test activation distance
  double start_pushoff = 1e-5;   // separatrix push-off radius from a critical start
  double closure_pos = 1e-8;     // Poincare-section offset for closure
  double closure_ang = 1e-6;     // direction match for closure (radians)
  double tube_radius = 1e-4;
  int tube_limit = 3;            // re-entries marking recurrence
  double max_step = 0.5;
  int max_steps = 400000;
};

// Adaptive horizontal-trajectory tracer. Terminates on reaching a critical
// point (snap disk, or a chord with vanishing Im xi when close), on closing up
// (Poincare section through the start), or on exhausting the metric-length
// budget (recurrent-suspect if the path re-entered its own tube >= 3 times).
inline Trajectory trace(const QuadDiff& qd, cdouble start, cdouble dir,
                        double budget = 50.0, const TraceOptions& opts = {}) {
  for (const CriticalPoint& c : qd.critical)
    if (c.order == -1 && start == c.z)
      throw std::domain_error("trace may not start at a pole of A");
  dir /= std::abs(dir);

  Trajectory traj;
  cdouble z = start;

  // A start on (or numerically at) a critical point is recorded as the first
  // endpoint; the path begins at the exact critical point and pushes off along
  // dir (the separatrix is tangent there, so the straight offset is accurate
  // to O(r0^2)).
  {
    auto [ci, d] = qd.nearest_critical(start);
    if (ci >= 0) {
      const cdouble c = qd.critical[size_t(ci)].z;
      double r0 = opts.start_pushoff * (1.0 + std::abs(c));
      if (d < 0.5 * r0) {
        traj.start_endpoint = c;
        traj.points.push_back(c);
        z = c + r0 * dir;
      } else if (d < 3.0 * r0) {
        traj.start_endpoint = c;  // pushed off by the caller
        traj.points.push_back(c);
      }
    }
  }
  traj.points.push_back(z);

  cdouble u;
  if (!detail::horizontal_direction(qd, z, dir, &u))
    throw std::domain_error("no horizontal direction at the start point");
  const cdouble z0 = z, u0 = u;
  const bool from_critical = traj.start_endpoint.has_value();

  // Fehlberg 4(5) tableau.
  static const double a2[] = {0.25};
  static const double a3[] = {3.0 / 32, 9.0 / 32};
  static const double a4[] = {1932.0 / 2197, -7200.0 / 2197, 7296.0 / 2197};
  static const double a5[] = {439.0 / 216, -8.0, 3680.0 / 513, -845.0 / 4104};
  static const double a6[] = {-8.0 / 27, 2.0, -3544.0 / 2565, 1859.0 / 4104,
                              -11.0 / 40};
  static const double b4[] = {25.0 / 216, 0.0, 1408.0 / 2565, 2197.0 / 4104,
                              -1.0 / 5, 0.0};
  static const double b5[] = {16.0 / 135, 0.0, 6656.0 / 12825, 28561.0 / 56430,
                              -9.0 / 50, 2.0 / 55};

  // One embedded step of size hc from (zc, uc): fifth-order landing point and
  // tangent, metric-length increment, and the embedded error estimate.
  auto rk_step = [&](cdouble zc, cdouble uc, double hc, cdouble* z_out,
                     cdouble* u_out, double* q_out, double* err_out) -> bool {
    static const double* rows[] = {a2, a3, a4, a5, a6};
    cdouble kz[6];
    double kq[6];
    double sp;
    if (!detail::horizontal_direction(qd, zc, uc, &kz[0], &sp)) return false;
    kq[0] = sp / kPi;
    for (int i = 2; i <= 6; ++i) {
      cdouble zi = zc;
      for (int j = 0; j < i - 1; ++j) zi += hc * rows[i - 2][j] * kz[j];
      if (!detail::horizontal_direction(qd, zi, kz[i - 2], &kz[i - 1], &sp))
        return false;
      kq[i - 1] = sp / kPi;
    }
    cdouble z4 = zc, z5 = zc;
    double q4 = 0.0, q5 = 0.0;
    for (int i = 0; i < 6; ++i) {
      z4 += hc * b4[i] * kz[i];
      z5 += hc * b5[i] * kz[i];
      q4 += hc * b4[i] * kq[i];
      q5 += hc * b5[i] * kq[i];
    }
    cdouble u5;
    if (!detail::horizontal_direction(qd, z5, kz[5], &u5)) return false;
    *z_out = z5;
    *u_out = u5;
    *q_out = q5;
    *err_out = std::abs(z5 - z4) + std::abs(q5 - q4);
    return true;
  };

  detail::SegmentGrid grid(std::max(8.0 * opts.tube_radius, 0.05));
  std::vector<std::pair<cdouble, cdouble>> segments;
  std::vector<double> seg_arc;  // arc length at segment start
  bool inside_tube = false;

  double s_arc = 0.0;
  double h = std::min(opts.max_step, 0.05 * qd.nearest_critical(z).second);
  if (h <= 0.0) h = 1e-3;

  for (int step = 0; step < opts.max_steps; ++step) {
    if (traj.omega_length >= budget) break;
    cdouble z_new, u_new;
    double qstep, err;
    if (!rk_step(z, u, h, &z_new, &u_new, &qstep, &err)) {
      h *= 0.5;
      if (h < 1e-14) break;
      continue;
    }
    double tol = opts.rtol * (1.0 + std::abs(z));
    if (err > tol) {
      h = std::max(1e-14, 0.9 * h * std::pow(tol / std::max(err, 1e-300), 0.2));
      continue;
    }

    // (a) critical-point arrival. The chord test catches separatrices that
    // approach a critical point without entering the snap disk: close by, a
    // straight chord to the point with Im int sqrt(-R) ~ 0 identifies the
    // incoming ray, and the real part supplies the remaining metric length.
    {
      auto [ci, d] = qd.nearest_critical(z_new);
      const cdouble c = qd.critical[size_t(ci)].z;
      double local = 1.0 + std::abs(c);
      bool leaving_start = from_critical && traj.start_endpoint &&
                           *traj.start_endpoint == c &&
                           s_arc < 20.0 * opts.start_pushoff * local;
      if (!leaving_start && d < opts.detect_radius * local) {
        bool arrived = d < opts.snap_radius * local;
        cdouble toward = c - z_new;
        bool heading = toward.real() * u_new.real() + toward.imag() * u_new.imag() > 0.0;
        double tail = 0.0;
        if (arrived || heading) {
          cdouble w0 = std::sqrt(-qd.R(z_new));
          if ((w0 * u_new).real() < 0.0) w0 = -w0;
          cdouble xi = detail::chord_xi(qd, z_new, c, w0);
          tail = std::abs(xi.real()) / kPi;
          if (!arrived && std::abs(xi.imag()) < 1e-7 * (1.0 + 0.01 * s_arc))
            arrived = true;
        }
        if (arrived) {
          traj.points.push_back(z_new);
          traj.points.push_back(c);
          traj.omega_length += qstep + tail;
          traj.end_endpoint = c;
          traj.kind = TrajKind::Critical;
          return traj;
        }
      }
    }

    // (b) closure through the Poincare section at the start. A chord across
    // a curved step is far less accurate than the integrator, so the crossing
    // is landed by genuine sub-steps with Newton on the step size; only then
    // is the transverse offset compared against the closure tolerance.
    if (!from_critical && s_arc > 0.1) {
      auto along = [&](cdouble w) {
        return (w - z0).real() * u0.real() + (w - z0).imag() * u0.imag();
      };
      double g_old = along(z), g_new = along(z_new);
      if (g_old <= 0.0 && g_new > 0.0 &&
          (u_new.real() * u0.real() + u_new.imag() * u0.imag()) > 0.0 &&
          detail::point_segment_distance(z0, z, z_new) <
              0.02 * (1.0 + std::abs(z0))) {
        cdouble zc = z, uc = u;
        double qacc = 0.0;
        double hc = h * std::clamp(g_old / (g_old - g_new), 0.05, 0.95);
        bool landed = false;
        for (int it = 0; it < 50; ++it) {
          cdouble zs, us;
          double qs, es;
          if (!rk_step(zc, uc, hc, &zs, &us, &qs, &es)) break;
          zc = zs;
          uc = us;
          qacc += qs;
          double gc = along(zc);
          if (std::abs(gc) < 1e-12 * (1.0 + std::abs(z0))) {
            landed = true;
            break;
          }
          double gp = uc.real() * u0.real() + uc.imag() * u0.imag();
          if (std::abs(gp) < 0.1) break;  // nearly tangential: not a crossing
          hc = std::clamp(-gc / gp, -h, h);
        }
        if (landed) {
          double offset = std::abs(-(zc - z0).real() * u0.imag() +
                                   (zc - z0).imag() * u0.real());
          if (offset < opts.closure_pos * (1.0 + std::abs(z0)) &&
              std::abs(std::arg(uc / u0)) <= opts.closure_ang) {
            traj.points.push_back(z0);
            traj.omega_length += qacc;
            traj.kind = TrajKind::Closed;
            return traj;
          }
        }
      }
    }

    // (c) tube re-entry bookkeeping (recurrence heuristic).
    {
      double dmin = std::numeric_limits<double>::infinity();
      if (const auto* bucket = grid.bucket(z_new)) {
        for (size_t idx : *bucket) {
          if (s_arc - seg_arc[idx] < 0.25) continue;  // skip the recent past
          dmin = std::min(dmin,
                          detail::point_segment_distance(z_new, segments[idx].first,
                                                         segments[idx].second));
        }
      }
      bool now_inside = dmin < opts.tube_radius;
      if (now_inside && !inside_tube) {
        ++traj.tube_reentries;
        if (traj.tube_reentries >= 2 * opts.tube_limit) {
          traj.points.push_back(z_new);
          traj.kind = TrajKind::RecurrentSuspect;
          return traj;
        }
      }
      inside_tube = now_inside;
    }

    segments.emplace_back(z, z_new);
    seg_arc.push_back(s_arc);
    grid.insert(segments.size() - 1, z, z_new, opts.tube_radius);

    z = z_new;
    u = u_new;
    s_arc += h;
    traj.omega_length += qstep;
    traj.points.push_back(z);

    double grow = 0.9 * std::pow(tol / std::max(err, 1e-300), 0.2);
    h *= std::clamp(grow, 0.2, 4.0);
    h = std::min({h, opts.max_step, 0.05 * qd.nearest_critical(z).second});
    if (h < 1e-14) break;
  }
  traj.kind = traj.tube_reentries >= opts.tube_limit ? TrajKind::RecurrentSuspect
                                                     : TrajKind::Truncated;
  return traj;
}

namespace detail {

// |sqrt(-R(z))| stabilized near the critical point with index ci: once the
// parametric distance drops below the matching radius the leading factor of R
// is evaluated from that exact distance, so refinement points that round onto
// the singular point itself can no longer produce an infinity.
inline double abs_sqrt_R_stable(const QuadDiff& qd, size_t ci, cdouble z,
                                double dist) {
  const CriticalPoint& cp = qd.critical[ci];
  if (dist < 1e-8 * (1.0 + std::abs(cp.z))) {
    if (cp.order == -1) {
      cdouble ap = qd.A.eval_with_derivs(cp.z, 1)[1];
      double c0 = std::abs(qd.V(cp.z) / ap);
      return std::sqrt(c0 / std::max(dist, 1e-300));
    }
    auto vd = qd.V.eval_with_derivs(cp.z, cp.order);
    double fact = 1.0;
    for (int m = 2; m <= cp.order; ++m) fact *= m;
    double c0 = std::abs(vd[size_t(cp.order)] / (fact * qd.A(cp.z)));
    return std::sqrt(c0) * std::pow(dist, 0.5 * cp.order);
  }
  return std::sqrt(std::abs(qd.R(z)));
}

}  // namespace detail

// Metric length (1/pi) int |sqrt(V/A)| |dz| of a sampled polyline. Segments
// ending exactly on a critical point are parametrized from that endpoint with
// the substitution z = e + s^2 (x - e), which removes the inverse-square-root
// (pole) or root (zero) behaviour and keeps the distance to the endpoint in
// exact parametric form.
inline double omega_length(const QuadDiff& qd, const std::vector<cdouble>& polyline) {
  if (polyline.size() < 2) return 0.0;
  // Integral from a regular point x to the critical point with index ci.
  auto one_sided = [&](cdouble x, size_t ci) {
    cdouble e = qd.critical[ci].z;
    cdouble d = x - e;
    double len = std::abs(d);
    if (len == 0.0) return 0.0;
    return adaptive_gauss<double>(
        [&](double s) {
          double dist = s * s * len;
          return detail::abs_sqrt_R_stable(qd, ci, e + (s * s) * d, dist) * 2.0 *
                 s * len / kPi;
        },
        0.0, 1.0, 1e-12);
  };
  double total = 0.0;
  for (size_t i = 0; i + 1 < polyline.size(); ++i) {
    cdouble a = polyline[i], b = polyline[i + 1];
    if (a == b) continue;
    cdouble dz = b - a;
    double len = std::abs(dz);
    auto [ia, da] = qd.nearest_critical(a);
    auto [ib, db] = qd.nearest_critical(b);
    bool sing_a = da < 1e-12, sing_b = db < 1e-12;
    if (!sing_a && !sing_b) {
      total += adaptive_gauss<double>(
          [&](double t) {
            return std::sqrt(std::abs(qd.R(a + t * dz))) * len / kPi;
          },
          0.0, 1.0, 1e-12);
    } else if (sing_b && !sing_a) {
      total += one_sided(a, size_t(ib));
    } else if (sing_a && !sing_b) {
      total += one_sided(b, size_t(ia));
    } else {
      cdouble mid = a + 0.5 * dz;
      total += one_sided(mid, size_t(ia));
      total += one_sided(mid, size_t(ib));
    }
  }
  return total;
}

inline double omega_length(const QuadDiff& qd, const Trajectory& traj) {
  return omega_length(qd, traj.points);
}

// Accumulated |Im int sqrt(-R) dz| along the polyline, branch continued from
// the initial direction; a traced horizontal trajectory keeps this near zero.
inline double im_xi_drift(const QuadDiff& qd, const std::vector<cdouble>& polyline) {
  if (polyline.size() < 2) return 0.0;
  cdouble u0 = polyline[1] - polyline[0];
  u0 /= std::abs(u0);
  cdouble prev = std::sqrt(-qd.R(polyline[0] + 1e-9 * u0));
  if ((prev * u0).real() < 0.0) prev = -prev;
  double drift = 0.0;
  const auto& rule = detail::gauss32();
  auto eval = [&](cdouble zp) {
    cdouble w = std::sqrt(-qd.R(zp));
    if (std::norm(w - prev) > std::norm(w + prev)) w = -w;
    prev = w;
    return w;
  };
  for (size_t i = 0; i + 1 < polyline.size(); ++i) {
    cdouble a = polyline[i], b = polyline[i + 1];
    if (a == b) continue;
    cdouble dz = b - a;
    bool sing_a = qd.nearest_critical(a).second < 1e-12;
    bool sing_b = qd.nearest_critical(b).second < 1e-12;
    cdouble seg = 0.0;
    // Stored nodes descend; walk them in ascending order so the branch
    // continuation steps through adjacent points.
    for (int k = 31; k >= 0; --k) {
      double x = rule.nodes[size_t(k)], wgt = rule.weights[size_t(k)];
      double s = 0.5 * (x + 1.0);
      if (sing_b && !sing_a) {
        double sv = 1.0 - s;  // t = 1 - sv^2 ascends as s ascends
        seg += 0.5 * wgt * eval(a + (1.0 - sv * sv) * dz) * dz * 2.0 * sv;
      } else if (sing_a && !sing_b) {
        seg += 0.5 * wgt * eval(a + s * s * dz) * dz * 2.0 * s;
      } else {
        seg += 0.5 * wgt * eval(a + s * dz) * dz;
      }
    }
    drift += std::abs(seg.imag());
  }
  return drift;
}

struct CriticalGraph {
  std::vector<CriticalPoint> points;
  std::vector<Trajectory> trajectories;            // deduplicated
  std::vector<std::pair<int, int>> arc_endpoints;  // indices into points, -1 none
  bool is_closed = false;  // every traced trajectory critical or closed
};

namespace detail {

inline int endpoint_index(const std::vector<CriticalPoint>& pts,
                          const std::optional<cdouble>& e) {
  if (!e) return -1;
  for (size_t k = 0; k < pts.size(); ++k)
    if (std::abs(pts[k].z - *e) < 1e-9 * (1.0 + std::abs(*e)))
      return static_cast<int>(k);
  return -1;
}

// Sample of the polyline at half its Euclidean length (arc fingerprint).
inline cdouble half_arc_point(const std::vector<cdouble>& pts) {
  double total = 0.0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) total += std::abs(pts[i + 1] - pts[i]);
  double goal = 0.5 * total, run = 0.0;
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    double seg = std::abs(pts[i + 1] - pts[i]);
    if (run + seg >= goal && seg > 0.0)
      return pts[i] + (goal - run) / seg * (pts[i + 1] - pts[i]);
    run += seg;
  }
  return pts.back();
}

}  // namespace detail

// Traces every emanating trajectory from every finite critical point and
// assembles the critical graph; arcs discovered from both ends are merged.
inline CriticalGraph critical_graph(const QuadDiff& qd, double budget = 50.0,
                                    const TraceOptions& opts = {}) {
  CriticalGraph g;
  g.points = qd.critical;

  struct Task {
    cdouble start;
    cdouble dir;
  };
  std::vector<Task> tasks;
  for (const CriticalPoint& c : qd.critical) {
    // Poles may not be passed to trace directly; push off along the single
    // ray by the same radius trace uses, so the start is still recognized.
    double r0 = (c.order == -1 ? opts.start_pushoff * (1.0 + std::abs(c.z)) : 0.0);
    for (const cdouble& d : emanating_directions(qd, c.z))
      tasks.push_back({c.z + r0 * d, d});
  }

  std::vector<Trajectory> traced = parallel_map(
      tasks, [&](const Task& t) { return trace(qd, t.start, t.dir, budget, opts); });

  g.is_closed = true;
  for (Trajectory& t : traced) {
    if (t.kind != TrajKind::Critical && t.kind != TrajKind::Closed)
      g.is_closed = false;
    if (t.kind == TrajKind::Critical) {
      int e0 = detail::endpoint_index(g.points, t.start_endpoint);
      int e1 = detail::endpoint_index(g.points, t.end_endpoint);
      double len = omega_length(qd, t);
      cdouble mid = detail::half_arc_point(t.points);
      bool dup = false;
      for (size_t k = 0; k < g.trajectories.size(); ++k) {
        if (g.trajectories[k].kind != TrajKind::Critical) continue;
        auto [f0, f1] = g.arc_endpoints[k];
        if (!((f0 == e0 && f1 == e1) || (f0 == e1 && f1 == e0))) continue;
        double lk = omega_length(qd, g.trajectories[k]);
        if (std::abs(lk - len) > 1e-4 * (1.0 + lk)) continue;
        if (std::abs(detail::half_arc_point(g.trajectories[k].points) - mid) <
            1e-3 * (1.0 + std::abs(mid)))
          dup = true;
      }
      if (dup) continue;
      g.arc_endpoints.emplace_back(e0, e1);
      g.trajectories.push_back(std::move(t));
    } else {
      g.arc_endpoints.emplace_back(detail::endpoint_index(g.points, t.start_endpoint),
                                   -1);
      g.trajectories.push_back(std::move(t));
    }
  }
  return g;
}

// Winding number of a closed polyline around a probe point.
inline int winding_number(const std::vector<cdouble>& loop, cdouble probe) {
  double total = 0.0;
  for (size_t i = 0; i + 1 < loop.size(); ++i) {
    cdouble a = loop[i] - probe, b = loop[i + 1] - probe;
    total += std::arg(b / a);
  }
  return static_cast<int>(std::lround(total / (2.0 * kPi)));
}

enum class P2Config { Exterior, InteriorClosed, InteriorRecurrent, Chebotarev, Degenerate };

struct Inconclusive : std::runtime_error {
  explicit Inconclusive(const std::string& what) : std::runtime_error(what) {}
};

// Three-pole classifier: traces the three separatrices of the single zero v,
// finds the loop beta formed by two of them, and locates the third trajectory
// gamma relative to beta by a winding-number test on its early samples.
inline P2Config classify_p2(const QuadDiff& qd, double budget = 50.0,
                            const TraceOptions& opts = {}) {
  if (qd.p() != 2) throw std::invalid_argument("classifier requires p = 2");
  cdouble v = -qd.V.coeff(0);
  double scale = qd.scale();
  for (const CriticalPoint& c : qd.critical)
    if (c.order == -1 && std::abs(c.z - v) < 1e-9 * scale) return P2Config::Degenerate;
  if (qd.degenerate) return P2Config::Degenerate;

  auto dirs = emanating_directions(qd, v);
  std::vector<Trajectory> t = parallel_map(
      dirs, [&](const cdouble& d) { return trace(qd, v, d, budget, opts); });

  auto ends_at = [&](const Trajectory& tr, cdouble target) {
    return tr.kind == TrajKind::Critical && tr.end_endpoint &&
           std::abs(*tr.end_endpoint - target) < 1e-9 * scale;
  };

  std::vector<int> loops, others;
  int pole_hits = 0;
  for (int i = 0; i < 3; ++i) {
    if (ends_at(t[size_t(i)], v))
      loops.push_back(i);
    else {
      others.push_back(i);
      if (t[size_t(i)].kind == TrajKind::Critical) ++pole_hits;
    }
  }

  if (loops.empty() && pole_hits == 3) {
    // All three separatrices reach poles: the graph is the Chebotarev tree
    // when the three endpoints are distinct.
    bool distinct = true;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j)
        if (std::abs(*t[size_t(i)].end_endpoint - *t[size_t(j)].end_endpoint) <
            1e-9 * scale)
          distinct = false;
    if (distinct) return P2Config::Chebotarev;
    throw Inconclusive("three separatrices hit poles but endpoints coincide");
  }

  if (loops.size() >= 2 && others.size() == 1) {
    const Trajectory& beta = t[size_t(loops[0])];
    Trajectory gamma = std::move(t[size_t(others[0])]);
    // A dense recurrent trajectory needs far more metric length than the
    // separatrix budget before the re-entry tube accumulates evidence: its
    // transverse return gaps shrink only like 1/(number of transits). Re-run
    // the undecided third trajectory with an extended budget before giving up.
    if (gamma.kind == TrajKind::Truncated &&
        gamma.tube_reentries < opts.tube_limit) {
      double extended = std::max(10.0 * budget, 300.0);
      gamma = trace(qd, v, dirs[size_t(others[0])], extended, opts);
    }
    // Probe gamma shortly after it leaves v, away from the loop itself.
    double diam = 0.0;
    for (const cdouble& zb : beta.points) diam = std::max(diam, std::abs(zb - v));
    int votes_in = 0, votes = 0;
    double run = 0.0;
    for (size_t i = 1; i + 1 < gamma.points.size() && votes < 5; ++i) {
      run += std::abs(gamma.points[i] - gamma.points[i - 1]);
      if (run < 0.02 * diam) continue;
      if (run > 0.4 * diam) break;
      double db = std::numeric_limits<double>::infinity();
      for (size_t j = 0; j + 1 < beta.points.size(); ++j)
        db = std::min(db, detail::point_segment_distance(
                              gamma.points[i], beta.points[j], beta.points[j + 1]));
      if (db < 10.0 * opts.tube_radius) continue;
      ++votes;
      if (winding_number(beta.points, gamma.points[i]) != 0) ++votes_in;
    }
    if (votes == 0) throw Inconclusive("no usable probe sample on gamma");
    bool inside = 2 * votes_in > votes;
    if (!inside) {
      if (gamma.kind == TrajKind::Critical) return P2Config::Exterior;
      throw Inconclusive("gamma leaves the loop but does not terminate");
    }
    if (gamma.kind == TrajKind::Critical || gamma.kind == TrajKind::Closed)
      return P2Config::InteriorClosed;
    if (gamma.kind == TrajKind::RecurrentSuspect) return P2Config::InteriorRecurrent;
    throw Inconclusive("gamma truncated before classification");
  }

  throw Inconclusive("loop structure not resolved: " + std::to_string(loops.size()) +
                     " loops, " + std::to_string(pole_hits) + " pole hits");
}

}  // namespace stieltjes
