#pragma once
// Periods of sqrt(V/A) along systems of cuts, and the Newton solvers built on
// top of them.
//
// Throughout, R(z) = V(z)/A(z) with V, A monic and deg V = deg A - 2, so that
// z*sqrt(R(z)) -> 1 as z -> infinity.  A *cut system* is a collection of p
// disjoint arcs pairing up the 2p branch points of sqrt(R) (simple poles of A
// and odd-order zeros of V); sqrt(R) is then single valued off the cuts, and
// the branch is normalized at infinity as above.  The period of a cut is
//
//     w(gamma) = (1/(pi*i)) * Integral over gamma of sqrt(R)_+ dt,
//
// where sqrt(R)_+ is the boundary value from the right of the direction of
// traversal.  With this normalization the periods of any cut system sum to 1
// (residue at infinity), they are independent of the orientation of each arc,
// and for a closed configuration they equal the masses of the limit measure
// on the arcs.  Companion arcs (which are not cuts) are integrated with the
// same global branch; their periods come out purely imaginary exactly when
// the configuration is closed.
//
// The solvers:
//   * chebotarev_center    - zero of (Im u_1, Im u_2) where u_k integrates
//                            from pole a_k straight to the zero v (p = 2);
//   * solve_period_system  - invert v -> u_k(v) for a prescribed period;
//   * continue_distinguished_arc - trace the arc of configurations whose
//                            period interpolates from 0 to the center mass;
//   * sample_V_arcs        - predictor/corrector sampling of the level curves
//                            Im W = 0 through the center, W = u_k + 2n*L.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "poly.hpp"
#include "qdiff.hpp"
#include "quadrature.hpp"

namespace stieltjes {

// A system of cuts for sqrt(V/A): `arcs` are polylines pairing the branch
// points; `companions` are extra polylines integrated with the same branch
// (they need not, and must not, be cuts).
struct CutSystem {
  std::vector<std::vector<cdouble>> arcs;
  std::vector<std::vector<cdouble>> companions;
};

// Thrown when a requested arc or branch-continuation path cannot be realized
// without passing through (or unacceptably close to) a singular point.
class RerouteNeeded : public std::runtime_error {
 public:
  explicit RerouteNeeded(const std::string& what) : std::runtime_error(what) {}
};

// Thrown by the period solvers when the Newton path leaves the cell of
// exterior configurations through one of its boundary strata.
class BoundaryHit : public std::runtime_error {
 public:
  enum class Kind {
    ZeroPoleCoalescence,  // a zero of V ran into a pole of A
    ZeroZeroCoalescence,  // two zeros of V collided
    ArcsMeet,             // the solved configuration is no longer exterior
  };
  Kind kind;
  cdouble where;
  BoundaryHit(Kind k, cdouble z, const std::string& what)
      : std::runtime_error(what), kind(k), where(z) {}
};

namespace detail {

// V/A with co-located zero/pole pairs divided out, so that every remaining
// critical point is a genuine singularity of R.  Degenerate configurations
// (a zero of V sitting on a pole of A) are thereby evaluated through the
// removable factor instead of as 0/0.
struct SqrtRField {
  ComplexPoly V;
  ComplexPoly A;
  std::vector<CriticalPoint> critical;  // surviving zeros first, then poles
  cdouble R(cdouble z) const { return V(z) / A(z); }
};

inline SqrtRField make_field(const QuadDiff& qd) {
  SqrtRField f{qd.V, qd.A, {}};
  std::vector<CriticalPoint> zeros, poles;
  for (const CriticalPoint& c : qd.critical)
    (c.order >= 1 ? zeros : poles).push_back(c);
  std::vector<bool> pole_used(poles.size(), false);
  for (CriticalPoint& z : zeros) {
    for (size_t j = 0; j < poles.size() && z.order > 0; ++j) {
      if (pole_used[j]) continue;
      if (std::abs(z.z - poles[j].z) < 1e-9 * (1.0 + std::abs(z.z))) {
        f.V = f.V.divmod(ComplexPoly({-z.z, 1.0})).first;
        f.A = f.A.divmod(ComplexPoly({-poles[j].z, 1.0})).first;
        pole_used[j] = true;
        z.order -= 1;
      }
    }
  }
  for (const CriticalPoint& z : zeros)
    if (z.order >= 1) f.critical.push_back(z);
  for (size_t j = 0; j < poles.size(); ++j)
    if (!pole_used[j]) f.critical.push_back(poles[j]);
  return f;
}

// Index into field.critical of the singular point z sits on, or -1.
inline int field_singular_index(const SqrtRField& f, cdouble z) {
  for (size_t k = 0; k < f.critical.size(); ++k)
    if (std::abs(z - f.critical[k].z) < 1e-7 * (1.0 + std::abs(z)))
      return static_cast<int>(k);
  return -1;
}

// Continue a branch value w0 of sqrt(R) from z0 to z1 along the straight
// segment, bisecting until each hop rotates the value by at most 1.2 rad.
inline cdouble continue_sqrt(const SqrtRField& f, cdouble z0, cdouble w0,
                             cdouble z1, int depth = 0) {
  if (depth > 48)
    throw RerouteNeeded("branch continuation stalled near a branch point");
  // Keep every hop short relative to the nearest singular point: the value
  // then cannot rotate by ~pi within one hop, which would alias the sign
  // choice below.
  cdouble zm = 0.5 * (z0 + z1);
  double near = std::numeric_limits<double>::infinity();
  for (const CriticalPoint& c : f.critical)
    near = std::min(near, std::abs(zm - c.z));
  if (std::abs(z1 - z0) > 0.25 * near) {
    cdouble wm = continue_sqrt(f, z0, w0, zm, depth + 1);
    return continue_sqrt(f, zm, wm, z1, depth + 1);
  }
  cdouble w1 = std::sqrt(f.R(z1));
  if (!(std::abs(w1) > 0.0) || !std::isfinite(std::abs(w1)))
    throw RerouteNeeded("branch continuation hit a singular point");
  cdouble r = w1 / w0;
  if (r.real() < 0.0) {
    w1 = -w1;
    r = -r;
  }
  if (std::abs(std::arg(r)) <= 1.2) return w1;
  cdouble wm = continue_sqrt(f, z0, w0, zm, depth + 1);
  return continue_sqrt(f, zm, wm, z1, depth + 1);
}

// Proper or touching intersection of segments [a,b] and [c,d].
inline bool segments_cross(cdouble a, cdouble b, cdouble c, cdouble d) {
  auto orient = [](cdouble p, cdouble q, cdouble r) {
    double v = (q.real() - p.real()) * (r.imag() - p.imag()) -
               (q.imag() - p.imag()) * (r.real() - p.real());
    double s = std::abs(q - p) * std::abs(r - p);
    if (std::abs(v) <= 1e-14 * std::max(1.0, s)) return 0;
    return v > 0.0 ? 1 : -1;
  };
  int o1 = orient(a, b, c), o2 = orient(a, b, d);
  int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 * o2 < 0 && o3 * o4 < 0) return true;
  auto between = [](cdouble p, cdouble q, cdouble r) {
    return std::min(p.real(), q.real()) - 1e-12 <= r.real() &&
           r.real() <= std::max(p.real(), q.real()) + 1e-12 &&
           std::min(p.imag(), q.imag()) - 1e-12 <= r.imag() &&
           r.imag() <= std::max(p.imag(), q.imag()) + 1e-12;
  };
  if (o1 == 0 && between(a, b, c)) return true;
  if (o2 == 0 && between(a, b, d)) return true;
  if (o3 == 0 && between(c, d, a)) return true;
  if (o4 == 0 && between(c, d, b)) return true;
  return false;
}

// Drop duplicate consecutive vertices and insert a clear interior vertex into
// any segment whose two endpoints are both singular, so that every arc has at
// least one regular vertex and singular vertices appear only at the ends.
inline std::vector<cdouble> refine_arc(const SqrtRField& f,
                                       const std::vector<cdouble>& pts_in) {
  std::vector<cdouble> pts;
  for (const cdouble& z : pts_in)
    if (pts.empty() || std::abs(z - pts.back()) > 1e-13 * (1.0 + std::abs(z)))
      pts.push_back(z);
  if (pts.size() < 2)
    throw std::invalid_argument("arc needs two distinct endpoints");
  std::vector<cdouble> out;
  out.push_back(pts[0]);
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    cdouble a = pts[i], b = pts[i + 1];
    if (field_singular_index(f, a) >= 0 && field_singular_index(f, b) >= 0) {
      bool placed = false;
      for (double t : {0.5, 0.4, 0.6, 0.3, 0.7}) {
        cdouble m = a + t * (b - a);
        double clear = std::numeric_limits<double>::infinity();
        for (const CriticalPoint& c : f.critical)
          clear = std::min(clear, std::abs(m - c.z));
        if (clear > 1e-6 * (1.0 + std::abs(m))) {
          out.push_back(m);
          placed = true;
          break;
        }
      }
      if (!placed)
        throw RerouteNeeded("no clear interior point between two branch points");
    }
    out.push_back(b);
  }
  return out;
}

struct ArcIntegral {
  cdouble value = 0.0;
  double err = 0.0;
};

enum class SqrtMult { One, OverTminusV };

// Integral over a polyline of sqrt(R) dt (or sqrt(R)/(t - v_ref) dt), with the
// branch propagated by continuity from `seed` (a point with a known branch
// value) or, by default, the principal square root at the first regular
// vertex.  Segments ending at a branch point are integrated under
// t = e + s^2 (x - e) with the singular factor of sqrt(R) split off
// analytically, which makes the integrand smooth in s:
//   * pole e:        sqrt(R) = g(t)/sqrt(t-e),  g = sqrt(V/(A/(t-e)));
//   * simple zero e: sqrt(R) = g(t)*sqrt(t-e),  g = sqrt((V/(t-e))/A);
// with sqrt(t-e) realized as s*sqrt(x-e) along the parametrization.  For the
// multiplier 1/(t - v_ref) with e = v_ref the factor cancels exactly.
// Each segment is integrated by 32-point Gauss panels, doubling the panel
// count until two passes agree; the branch is walked node to node inside a
// pass, and for regular segments the walked endpoint value must agree with
// the independently continued vertex value before a pass is accepted.
inline ArcIntegral arc_sqrtR_integral(
    const SqrtRField& f, const std::vector<cdouble>& pts_in, SqrtMult mult,
    cdouble v_ref = 0.0,
    std::optional<std::pair<cdouble, cdouble>> seed = std::nullopt) {
  std::vector<cdouble> pts = refine_arc(f, pts_in);
  const size_t n = pts.size();
  std::vector<int> sing(n);
  for (size_t i = 0; i < n; ++i) sing[i] = field_singular_index(f, pts[i]);
  for (size_t i = 1; i + 1 < n; ++i)
    if (sing[i] >= 0)
      throw std::invalid_argument("arc passes through a branch point");
  size_t i0 = (sing[0] >= 0) ? 1 : 0;
  size_t i1 = (sing[n - 1] >= 0) ? n - 2 : n - 1;
  for (size_t i : {i0, i1}) {
    if (sing[i] >= 0) throw std::invalid_argument("arc has no regular vertex");
  }

  // Branch values at the regular vertices.
  std::vector<cdouble> W(n);
  size_t rs = i0;  // vertex carrying the seed value
  if (seed) {
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = i0; i <= i1; ++i) {
      double d = std::abs(pts[i] - seed->first);
      if (d < best) {
        best = d;
        rs = i;
      }
    }
    W[rs] = continue_sqrt(f, seed->first, seed->second, pts[rs]);
  } else {
    W[rs] = std::sqrt(f.R(pts[rs]));
  }
  for (size_t i = rs; i + 1 <= i1; ++i)
    W[i + 1] = continue_sqrt(f, pts[i], W[i], pts[i + 1]);
  for (size_t i = rs; i > i0; --i)
    W[i - 1] = continue_sqrt(f, pts[i], W[i], pts[i - 1]);

  const GaussRule& rule = gauss32();
  ArcIntegral total;

  // Composite Gauss pass over [0,1] with sign continuity between nodes.
  // eval(t, w_prev) returns {integrand value, branch tracker}; the tracker of
  // the final node is returned for the endpoint consistency gate.
  auto paneled = [&](auto&& eval, cdouble track0, const cdouble* track_end,
                     double floor_tol) -> ArcIntegral {
    cdouble prev_val = 0.0;
    double delta = std::numeric_limits<double>::infinity();
    cdouble I = 0.0;
    for (int P = 1; P <= 256; P *= 2) {
      cdouble track = track0;
      cdouble sum = 0.0;
      for (int p = 0; p < P; ++p) {
        double t0 = double(p) / P, t1 = double(p + 1) / P;
        double tm = 0.5 * (t0 + t1), th = 0.5 * (t1 - t0);
        for (int i = 31; i >= 0; --i) {  // nodes stored descending
          double t = tm + th * rule.nodes[size_t(i)];
          auto [val, w] = eval(t, track);
          track = w;
          sum += th * rule.weights[size_t(i)] * val;
        }
      }
      bool branch_ok = true;
      if (track_end)
        branch_ok = ((track / *track_end).real() > 0.0);
      if (P > 1) delta = std::abs(sum - prev_val);
      prev_val = sum;
      I = sum;
      if (P > 1 && branch_ok &&
          delta <= std::max(floor_tol, 1e-12 * std::abs(sum)))
        break;
    }
    return {I, delta};
  };

  auto mult_factor = [&](cdouble z) -> cdouble {
    return (mult == SqrtMult::One) ? cdouble(1.0) : 1.0 / (z - v_ref);
  };

  // Regular interior segments.
  for (size_t k = i0; k < i1; ++k) {
    cdouble a = pts[k], b = pts[k + 1], dz = b - a;
    auto eval = [&](double t, cdouble wp) -> std::pair<cdouble, cdouble> {
      cdouble z = a + t * dz;
      cdouble w = std::sqrt(f.R(z));
      if ((w / wp).real() < 0.0) w = -w;
      return {w * mult_factor(z) * dz, w};
    };
    ArcIntegral seg = paneled(eval, W[k], &W[k + 1], 1e-13);
    total.value += seg.value;
    total.err += seg.err;
  }

  // Segments with one singular endpoint.
  auto singular_segment = [&](size_t ie, size_t ix, double dirsign) {
    cdouble e = pts[ie], x = pts[ix];
    const CriticalPoint& cp = f.critical[size_t(sing[ie])];
    cdouble d = x - e;
    cdouble sqrt_d = std::sqrt(d);
    bool is_pole = (cp.order == -1);
    if (!is_pole && cp.order != 1)
      throw std::invalid_argument(
          "arc endpoint at a higher-order zero is not supported");
    ComplexPoly lin({-e, 1.0});
    ComplexPoly num = is_pole ? f.V : f.V.divmod(lin).first;
    ComplexPoly den = is_pole ? f.A.divmod(lin).first : f.A;
    cdouble g_seed = is_pole ? W[ix] * sqrt_d : W[ix] / sqrt_d;
    bool cancel = (mult == SqrtMult::OverTminusV && !is_pole &&
                   std::abs(e - v_ref) < 1e-12 * (1.0 + std::abs(e)));
    // Walk s from 1 (regular end, where g is seeded) down to 0.
    auto eval = [&](double u, cdouble gp) -> std::pair<cdouble, cdouble> {
      double s = 1.0 - u;
      cdouble z = e + s * s * d;
      cdouble g = std::sqrt(num(z) / den(z));
      if ((g / gp).real() < 0.0) g = -g;
      cdouble val;
      if (is_pole)
        val = 2.0 * sqrt_d * g * mult_factor(z);
      else if (cancel)
        val = 2.0 * sqrt_d * g;
      else
        val = 2.0 * s * s * sqrt_d * d * g * mult_factor(z);
      return {val, g};
    };
    ArcIntegral seg = paneled(eval, g_seed, nullptr, 1e-14);
    total.value += dirsign * seg.value;
    total.err += seg.err;
  };
  if (i0 == 1) singular_segment(0, 1, +1.0);
  if (i1 == n - 2) singular_segment(n - 1, n - 2, -1.0);

  return total;
}

// A branch seed produced by routing from the normalization point at infinity:
// `value` is sqrt(R) at `at`, continued from the far field where
// sqrt(R) ~ 1/z; `sign` is -1 when the route could only reach the arc from
// the left of its direction of traversal (the boundary value there is the
// negative of the right-hand one).
struct BranchSeed {
  cdouble at;
  cdouble value;
  double sign = 1.0;
};

// Route the normalized branch from far outside the configuration to the arc
// `target`.  The route follows a circle of radius ~64*scale and then a
// straight radial chord to a point just right (or left) of an interior vertex
// of the arc; the radial chord must not cross any cut and must stay clear of
// all singular points.  For companions (`offset_sides=false`) the route lands
// on the arc itself, which is legitimate since companions are not cuts.
inline BranchSeed anchored_seed(const SqrtRField& f,
                                const std::vector<std::vector<cdouble>>& cuts,
                                const std::vector<cdouble>& target,
                                bool offset_sides) {
  cdouble centroid = 0.0;
  double spread = 1.0;
  for (const CriticalPoint& c : f.critical) centroid += c.z;
  if (!f.critical.empty()) centroid /= double(f.critical.size());
  for (const CriticalPoint& c : f.critical)
    spread = std::max(spread, std::abs(c.z - centroid));
  const double R_far = 64.0 * spread;
  const double eps = 1e-3 * spread;

  std::vector<cdouble> pts = refine_arc(f, target);
  std::vector<double> cum(pts.size(), 0.0);
  for (size_t i = 1; i < pts.size(); ++i)
    cum[i] = cum[i - 1] + std::abs(pts[i] - pts[i - 1]);
  double L = cum.back();

  // Far-field branch value: sqrt(R) ~ 1/z.
  cdouble z_far = centroid + R_far;
  cdouble w_far = std::sqrt(f.R(z_far));
  if (std::abs(w_far - 1.0 / z_far) > std::abs(w_far + 1.0 / z_far))
    w_far = -w_far;

  std::vector<std::pair<size_t, int>> cands;  // (vertex, side)
  for (double frac : {0.5, 0.25, 0.75}) {
    size_t vi = 0;
    double best = std::numeric_limits<double>::infinity();
    for (size_t i = 1; i + 1 < pts.size(); ++i) {
      double d = std::abs(cum[i] - frac * L);
      if (d < best) {
        best = d;
        vi = i;
      }
    }
    if (vi == 0) continue;
    for (int side : (offset_sides ? std::vector<int>{+1, -1}
                                  : std::vector<int>{0}))
      if (std::find(cands.begin(), cands.end(), std::make_pair(vi, side)) ==
          cands.end())
        cands.emplace_back(vi, side);
  }
  if (cands.empty()) throw RerouteNeeded("arc has no interior vertex to seed");

  for (auto [vi, side] : cands) {
    cdouble tangent = pts[vi + 1] - pts[vi - 1];
    if (!(std::abs(tangent) > 0.0)) continue;
    cdouble that = tangent / std::abs(tangent);
    cdouble n_right(that.imag(), -that.real());
    cdouble Q = pts[vi] + double(side) * eps * n_right;
    double thQ = std::arg(Q - centroid);

    // Descend from the circle to Q along a straight chord; if the natural
    // radial direction is blocked, come in from other circle points.
    for (double dth : {0.0, 0.9, -0.9, 1.8, -1.8, 2.7, -2.7}) {
      cdouble circle_pt = centroid + R_far * std::polar(1.0, thQ + dth);
      bool ok = true;
      for (const std::vector<cdouble>& arc : cuts) {
        for (size_t s = 0; s + 1 < arc.size() && ok; ++s)
          if (segments_cross(circle_pt, Q, arc[s], arc[s + 1])) ok = false;
        if (!ok) break;
      }
      if (ok)
        for (const CriticalPoint& c : f.critical)
          if (point_segment_distance(c.z, circle_pt, Q) <
              1e-6 * (1.0 + std::abs(c.z))) {
            ok = false;
            break;
          }
      if (!ok) continue;

      // Continue the branch: around the circle, then down the chord.
      double th1 = thQ + dth;
      cdouble z = z_far, w = w_far;
      const int chords = 12;
      for (int j = 1; j <= chords; ++j) {
        cdouble zn = centroid + R_far * std::polar(1.0, th1 * j / chords);
        w = continue_sqrt(f, z, w, zn);
        z = zn;
      }
      w = continue_sqrt(f, z, w, Q);
      return {Q, w, side == -1 ? -1.0 : 1.0};
    }
  }
  throw RerouteNeeded("no crossing-free route from infinity to the arc");
}

}  // namespace detail

// Branch points of sqrt(V/A): simple poles of A and odd-order zeros of V,
// after removable zero/pole pairs are divided out.
inline std::vector<cdouble> branch_points(const QuadDiff& qd) {
  detail::SqrtRField f = detail::make_field(qd);
  std::vector<cdouble> b;
  for (const CriticalPoint& c : f.critical)
    if (c.order == -1 || c.order % 2 == 1) b.push_back(c.z);
  return b;
}

// Check that `cuts.arcs` is a valid cut system: every arc joins two distinct
// branch points, every branch point is used exactly once, arcs do not cross,
// and arc interiors stay clear of all singular points.  Structural violations
// throw std::invalid_argument; clearance violations throw RerouteNeeded.
inline void validate_cut_system(const QuadDiff& qd, const CutSystem& cuts) {
  detail::SqrtRField f = detail::make_field(qd);
  std::vector<cdouble> bp = branch_points(qd);
  std::vector<int> used(bp.size(), 0);
  double scale = qd.scale();

  auto snap = [&](cdouble z) -> int {
    for (size_t k = 0; k < bp.size(); ++k)
      if (std::abs(z - bp[k]) < 1e-7 * (1.0 + std::abs(z)))
        return static_cast<int>(k);
    return -1;
  };

  for (const std::vector<cdouble>& arc : cuts.arcs) {
    if (arc.size() < 2)
      throw std::invalid_argument("cut arc needs at least two vertices");
    int e0 = snap(arc.front()), e1 = snap(arc.back());
    if (e0 < 0 || e1 < 0 || e0 == e1)
      throw std::invalid_argument("cut must join two distinct branch points");
    ++used[size_t(e0)];
    ++used[size_t(e1)];
    // Interior clearance from every singular point.
    for (size_t s = 0; s + 1 < arc.size(); ++s)
      for (const CriticalPoint& c : f.critical) {
        if (std::abs(c.z - arc.front()) < 1e-7 * (1.0 + std::abs(c.z)) ||
            std::abs(c.z - arc.back()) < 1e-7 * (1.0 + std::abs(c.z)))
          continue;  // own endpoints
        if (detail::point_segment_distance(c.z, arc[s], arc[s + 1]) <
            1e-9 * scale)
          throw RerouteNeeded("cut passes through a singular point");
      }
  }
  for (size_t k = 0; k < bp.size(); ++k)
    if (used[k] != 1)
      throw std::invalid_argument(
          "each branch point must be an endpoint of exactly one cut");

  // Arcs must not cross each other (shared endpoints excepted) or themselves.
  auto endpoints_touch = [&](cdouble a, cdouble b) {
    return std::abs(a - b) < 1e-9 * (1.0 + std::abs(a));
  };
  for (size_t i = 0; i < cuts.arcs.size(); ++i)
    for (size_t j = i; j < cuts.arcs.size(); ++j) {
      const auto& A1 = cuts.arcs[i];
      const auto& A2 = cuts.arcs[j];
      for (size_t s = 0; s + 1 < A1.size(); ++s)
        for (size_t t = 0; t + 1 < A2.size(); ++t) {
          if (i == j && t <= s + 1 && s <= t + 1) continue;  // same/adjacent
          bool share = false;
          for (cdouble u : {A1[s], A1[s + 1]})
            for (cdouble v : {A2[t], A2[t + 1]})
              if (endpoints_touch(u, v)) share = true;
          if (share) continue;
          if (detail::segments_cross(A1[s], A1[s + 1], A2[t], A2[t + 1]))
            throw std::invalid_argument("cut arcs cross each other");
        }
    }
}

// Straight-segment cut system for a configuration whose branch points are in
// generic position: enumerate the perfect matchings of the branch points and
// keep the non-crossing one whose segments stay farthest from the remaining
// singular points.
inline CutSystem straight_cut_system(const QuadDiff& qd) {
  detail::SqrtRField f = detail::make_field(qd);
  std::vector<cdouble> bp = branch_points(qd);
  if (bp.size() % 2 != 0)
    throw std::invalid_argument("odd number of branch points");
  std::vector<std::vector<std::pair<size_t, size_t>>> matchings;
  std::vector<std::pair<size_t, size_t>> current;
  std::vector<bool> taken(bp.size(), false);
  auto rec = [&](auto&& self) -> void {
    size_t i = 0;
    while (i < bp.size() && taken[i]) ++i;
    if (i == bp.size()) {
      matchings.push_back(current);
      return;
    }
    taken[i] = true;
    for (size_t j = i + 1; j < bp.size(); ++j) {
      if (taken[j]) continue;
      taken[j] = true;
      current.emplace_back(i, j);
      self(self);
      current.pop_back();
      taken[j] = false;
    }
    taken[i] = false;
  };
  rec(rec);

  double best_score = -1.0;
  std::vector<std::pair<size_t, size_t>> best;
  for (const auto& m : matchings) {
    double score = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (size_t a = 0; a < m.size() && ok; ++a) {
      cdouble p1 = bp[m[a].first], q1 = bp[m[a].second];
      score = std::min(score, std::abs(q1 - p1));
      for (size_t b = a + 1; b < m.size() && ok; ++b) {
        cdouble p2 = bp[m[b].first], q2 = bp[m[b].second];
        if (detail::segments_cross(p1, q1, p2, q2)) ok = false;
        for (cdouble u : {p1, q1})
          score = std::min(score, detail::point_segment_distance(u, p2, q2));
        for (cdouble u : {p2, q2})
          score = std::min(score, detail::point_segment_distance(u, p1, q1));
      }
      for (const CriticalPoint& c : f.critical) {
        if (std::abs(c.z - p1) < 1e-9 * (1.0 + std::abs(c.z)) ||
            std::abs(c.z - q1) < 1e-9 * (1.0 + std::abs(c.z)))
          continue;
        score = std::min(score, detail::point_segment_distance(c.z, p1, q1));
      }
    }
    if (ok && score > best_score) {
      best_score = score;
      best = m;
    }
  }
  if (best.empty() || best_score < 1e-6)
    throw RerouteNeeded("no clear non-crossing straight cut system");
  CutSystem cuts;
  for (auto [i, j] : best)
    cuts.arcs.push_back({bp[i], bp[j]});
  return cuts;
}

// Period of one arc of the cut system (or one companion), with the branch of
// sqrt(R) normalized at infinity and continued around the cuts.
inline cdouble period_w(const QuadDiff& qd, const CutSystem& cuts, size_t index,
                        bool companion = false, double* err_out = nullptr) {
  detail::SqrtRField f = detail::make_field(qd);
  const std::vector<cdouble>& arc =
      companion ? cuts.companions.at(index) : cuts.arcs.at(index);
  detail::BranchSeed seed =
      detail::anchored_seed(f, cuts.arcs, arc, /*offset_sides=*/!companion);
  detail::ArcIntegral I = detail::arc_sqrtR_integral(
      f, arc, detail::SqrtMult::One, 0.0, std::make_pair(seed.at, seed.value));
  if (err_out) *err_out = I.err / kPi;
  return seed.sign * I.value / cdouble(0.0, kPi);
}

struct PeriodChart {
  std::vector<cdouble> v;       // zeros of V, in the order stored by QuadDiff
  std::vector<cdouble> w;       // one period per cut arc
  std::vector<cdouble> wtilde;  // one period per companion arc
  double err = 0.0;             // summed quadrature error estimates
};

// All periods of a cut system at once.  For any valid cut system the w sum
// to 1 exactly (residue of sqrt(R) at infinity).
inline PeriodChart period_chart(const QuadDiff& qd, const CutSystem& cuts) {
  validate_cut_system(qd, cuts);
  PeriodChart chart;
  for (const CriticalPoint& c : qd.critical)
    if (c.order >= 1) chart.v.push_back(c.z);
  for (size_t i = 0; i < cuts.arcs.size(); ++i) {
    double e = 0.0;
    chart.w.push_back(period_w(qd, cuts, i, false, &e));
    chart.err += e;
  }
  for (size_t i = 0; i < cuts.companions.size(); ++i) {
    double e = 0.0;
    chart.wtilde.push_back(period_w(qd, cuts, i, true, &e));
    chart.err += e;
  }
  return chart;
}

// Derivative of the first p-1 periods with respect to the zeros of V:
//   d w_j / d v_k = -(1/(2 pi i)) Integral over gamma_j of sqrt(R)_+/(t - v_k) dt,
// which is the termwise derivative of the period integrand.  Requires all
// zeros of V simple.
inline Eigen::MatrixXcd period_jacobian(const QuadDiff& qd,
                                        const CutSystem& cuts) {
  validate_cut_system(qd, cuts);
  std::vector<cdouble> v;
  for (const CriticalPoint& c : qd.critical) {
    if (c.order > 1)
      throw std::invalid_argument("period Jacobian needs simple zeros of V");
    if (c.order == 1) v.push_back(c.z);
  }
  const size_t m = v.size();  // = p - 1
  if (cuts.arcs.size() != m + 1)
    throw std::invalid_argument("cut system size does not match the degree");
  detail::SqrtRField f = detail::make_field(qd);
  Eigen::MatrixXcd J(m, m);
  for (size_t j = 0; j < m; ++j) {
    const std::vector<cdouble>& arc = cuts.arcs[j];
    detail::BranchSeed seed = detail::anchored_seed(f, cuts.arcs, arc, true);
    for (size_t k = 0; k < m; ++k) {
      detail::ArcIntegral I = detail::arc_sqrtR_integral(
          f, arc, detail::SqrtMult::OverTminusV, v[k],
          std::make_pair(seed.at, seed.value));
      J(long(j), long(k)) = -seed.sign * I.value / cdouble(0.0, 2.0 * kPi);
    }
  }
  return J;
}

// Period and its v-derivative along one straight path (for p = 2, where V has
// the single zero v):  w = (1/(pi i)) Integral of sqrt(R),
// dw = -(1/(2 pi i)) Integral of sqrt(R)/(t - v), both over [from, to] with
// the same deterministic branch seed, so their signs are consistent.
struct PathPeriod {
  cdouble w = 0.0;
  cdouble dw = 0.0;
  double err = 0.0;
};

inline PathPeriod path_period(const std::vector<cdouble>& poles, cdouble from,
                              cdouble to, cdouble v) {
  if (poles.size() != 3)
    throw std::invalid_argument("path periods are implemented for p = 2");
  if (std::abs(to - from) < 1e-12 * (1.0 + std::abs(from))) return {};
  QuadDiff qd(ComplexPoly::from_roots({v}), ComplexPoly::from_roots(poles));
  detail::SqrtRField f = detail::make_field(qd);
  std::vector<cdouble> path = {from, to};
  detail::ArcIntegral I1 =
      detail::arc_sqrtR_integral(f, path, detail::SqrtMult::One, v);
  detail::ArcIntegral I2 =
      detail::arc_sqrtR_integral(f, path, detail::SqrtMult::OverTminusV, v);
  PathPeriod out;
  out.w = I1.value / cdouble(0.0, kPi);
  out.dw = -I2.value / cdouble(0.0, 2.0 * kPi);
  out.err = (I1.err + 0.5 * I2.err) / kPi;
  return out;
}

// Same, anchored at pole k and normalized so Re w >= 0 (the sign that carries
// the mass when the configuration is closed); w and dw flip together.
inline PathPeriod anchored_period(const std::vector<cdouble>& poles, size_t k,
                                  cdouble v) {
  PathPeriod pp = path_period(poles, poles.at(k), v, v);
  if (pp.w.real() < 0.0) {
    pp.w = -pp.w;
    pp.dw = -pp.dw;
  }
  return pp;
}

// ----------------------------------------------------------------------------
// Solvers (p = 2: three poles, one zero).

struct ChebotarevCenter {
  cdouble v;                   // the center
  CutSystem cuts;              // cuts of the centered configuration
  std::vector<double> masses;  // one mass per pole, summing to 1
  double residual = 0.0;       // final size of (Im u_1, Im u_2)
  bool degenerate = false;     // center collided with a pole
};

// Solve Im u_i = Im u_j = 0 for the zero v, where u_k integrates sqrt(R)
// from pole a_k straight to v.  The unique solution is the center of the
// Chebotarev continuum spanned by the three poles.  If the Newton iteration
// runs into a pole the center is probed there exactly (the zero/pole pair is
// removable) and the configuration is reported as degenerate.
inline ChebotarevCenter chebotarev_center(const std::vector<cdouble>& poles) {
  if (poles.size() != 3)
    throw std::invalid_argument("chebotarev_center is implemented for p = 2");
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = i + 1; j < 3; ++j)
      if (std::abs(poles[i] - poles[j]) < 1e-9 * (1.0 + std::abs(poles[i])))
        throw std::invalid_argument("poles must be distinct");
  double scale = 1.0;
  for (cdouble a : poles) scale = std::max(scale, std::abs(a));

  auto F_at = [&](cdouble v, size_t k1, size_t k2) {
    PathPeriod u1 = anchored_period(poles, k1, v);
    PathPeriod u2 = anchored_period(poles, k2, v);
    return std::array<PathPeriod, 2>{u1, u2};
  };

  // Collinear poles make the Im-period system rank deficient (every point of
  // the spanning segment zeroes it).  There the continuum is the segment
  // itself and the zero of V sits exactly on the inner pole, which the
  // removable zero/pole factor turns into the arcsine configuration of the
  // segment.  Detect this case up front and probe the inner pole directly.
  {
    cdouble e1 = poles[1] - poles[0], e2 = poles[2] - poles[0];
    double area =
        std::abs(e1.real() * e2.imag() - e1.imag() * e2.real());
    if (area < 1e-9 * scale * scale) {
      for (size_t j = 0; j < 3; ++j) {
        size_t o1 = (j == 0) ? 1 : 0;
        size_t o2 = (j == 2) ? 1 : 2;
        if (detail::point_segment_distance(poles[j], poles[o1], poles[o2]) >
            1e-7 * scale)
          continue;  // outer pole
        PathPeriod u1 = anchored_period(poles, o1, poles[j]);
        PathPeriod u2 = anchored_period(poles, o2, poles[j]);
        double fp = std::max(std::abs(u1.w.imag()), std::abs(u2.w.imag()));
        if (fp < 1e-9) {
          ChebotarevCenter out;
          out.v = poles[j];
          out.degenerate = true;
          out.residual = fp;
          out.cuts.arcs = {{poles[o1], poles[j], poles[o2]}};
          out.masses = {0.0, 0.0, 0.0};
          out.masses[o1] = u1.w.real();
          out.masses[o2] = u2.w.real();
          return out;
        }
      }
      throw std::runtime_error(
          "collinear poles without a probeable inner pole");
    }
  }

  cdouble v = (poles[0] + poles[1] + poles[2]) / 3.0;
  size_t k1 = 0, k2 = 1;
  ChebotarevCenter out;
  double fnorm = std::numeric_limits<double>::infinity();
  std::array<PathPeriod, 2> U;

  for (int iter = 0; iter < 80; ++iter) {
    // Pole collision: probe the pole itself through the removable factor.
    for (size_t j = 0; j < 3; ++j) {
      if (std::abs(v - poles[j]) < 1e-6 * scale) {
        size_t p1 = (j == 0) ? 1 : 0;
        size_t p2 = (j == 2) ? 1 : 2;
        auto Up = F_at(poles[j], p1, p2);
        double fp = std::max(std::abs(Up[0].w.imag()), std::abs(Up[1].w.imag()));
        if (fp < 1e-9) {
          out.v = poles[j];
          out.degenerate = true;
          out.residual = fp;
          size_t o1 = p1, o2 = p2;
          out.cuts.arcs = {{poles[o1], poles[j], poles[o2]}};
          out.masses = {0.0, 0.0, 0.0};
          out.masses[o1] = anchored_period(poles, o1, poles[j]).w.real();
          out.masses[o2] = anchored_period(poles, o2, poles[j]).w.real();
          return out;
        }
      }
    }
    U = F_at(v, k1, k2);
    double f1 = U[0].w.imag(), f2 = U[1].w.imag();
    fnorm = std::max(std::abs(f1), std::abs(f2));
    if (fnorm < 1e-11) break;
    cdouble c1 = U[0].dw, c2 = U[1].dw;
    // Im(u + c*(dx + i dy)) linearizes with rows (Im c, Re c).
    double a11 = c1.imag(), a12 = c1.real();
    double a21 = c2.imag(), a22 = c2.real();
    double det = a11 * a22 - a12 * a21;
    if (std::abs(det) < 1e-14) {
      v += 1e-6 * scale * cdouble(1.0, 1.0);
      continue;
    }
    double dx = (-f1 * a22 + f2 * a12) / det;
    double dy = (-a11 * f2 + a21 * f1) / det;
    cdouble step(dx, dy);
    double lambda = 1.0;
    for (int bt = 0; bt < 7; ++bt) {
      cdouble vt = v + lambda * step;
      bool near_pole = false;
      for (cdouble a : poles)
        if (std::abs(vt - a) < 1e-6 * scale) near_pole = true;
      if (near_pole) {
        v = vt;  // let the collision probe above take over
        break;
      }
      auto Ut = F_at(vt, k1, k2);
      double ft =
          std::max(std::abs(Ut[0].w.imag()), std::abs(Ut[1].w.imag()));
      if (ft < (1.0 - 1e-4) * fnorm || bt == 6) {
        v = vt;
        break;
      }
      lambda *= 0.5;
    }
  }
  if (!(fnorm < 1e-10))
    throw std::runtime_error("chebotarev_center did not converge");

  out.v = v;
  out.residual = fnorm;
  out.masses.resize(3);
  for (size_t k = 0; k < 3; ++k)
    out.masses[k] = anchored_period(poles, k, v).w.real();
  // Canonical cuts: a straight cut from poles[1] to the center, and a cut
  // from poles[2] to poles[0] bypassing the center on the side away from
  // poles[1].
  cdouble away = (v - poles[1]) / std::abs(v - poles[1]);
  cdouble q = v + 1e-3 * scale * away;
  out.cuts.arcs = {{poles[1], v}, {poles[2], q, poles[0]}};
  return out;
}

struct SolveOptions {
  int max_iter = 60;
  double tol = 1e-10;        // |w - target|
  bool verify_cell = false;  // classify the result and require exterior
  double classify_budget = 60.0;
};

// Invert the anchored period map v -> u_k(v) for a prescribed target value.
// target = 0 returns the pole itself (the zero of V sits on a_k exactly when
// the period vanishes).  Newton steps that run into a pole or yield a
// non-exterior configuration throw BoundaryHit.
inline cdouble solve_period_system(const std::vector<cdouble>& poles, size_t k,
                                   cdouble target, cdouble v_init,
                                   const SolveOptions& opts = {}) {
  if (poles.size() != 3)
    throw std::invalid_argument("solve_period_system is implemented for p = 2");
  if (std::abs(target) < 1e-14) return poles.at(k);
  double scale = 1.0;
  for (cdouble a : poles) scale = std::max(scale, std::abs(a));
  cdouble centroid = (poles[0] + poles[1] + poles[2]) / 3.0;

  cdouble v = v_init;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    for (size_t j = 0; j < 3; ++j)
      if (std::abs(v - poles[j]) < 1e-8 * scale)
        throw BoundaryHit(BoundaryHit::Kind::ZeroPoleCoalescence, poles[j],
                          "period continuation ran into a pole");
    if (std::abs(v - centroid) > 64.0 * scale)
      throw std::runtime_error("period solve diverged");
    PathPeriod pp = anchored_period(poles, k, v);
    cdouble G = pp.w - target;
    if (std::abs(G) <= opts.tol) {
      if (opts.verify_cell) {
        QuadDiff qd(ComplexPoly::from_roots({v}),
                    ComplexPoly::from_roots(poles));
        if (classify_p2(qd, opts.classify_budget) != P2Config::Exterior)
          throw BoundaryHit(BoundaryHit::Kind::ArcsMeet, v,
                            "solved configuration is not exterior");
      }
      return v;
    }
    if (!(std::abs(pp.dw) > 0.0))
      throw std::runtime_error("degenerate period derivative");
    cdouble step = -G / pp.dw;
    double lambda = 1.0;
    for (int bt = 0; bt < 8; ++bt) {
      cdouble vt = v + lambda * step;
      bool near_pole = false;
      for (cdouble a : poles)
        if (std::abs(vt - a) < 1e-8 * scale) near_pole = true;
      if (near_pole && bt < 7) {
        lambda *= 0.5;
        continue;
      }
      cdouble Gt = anchored_period(poles, k, vt).w - target;
      if (std::abs(Gt) < (1.0 - 1e-4) * std::abs(G) || bt == 7) {
        v = vt;
        break;
      }
      lambda *= 0.5;
    }
  }
  throw std::runtime_error("period solve did not converge");
}

// One sample of a continued arc of configurations: at parameter t the zero v
// solves u_k(v) = t.
struct ArcSample {
  double t;
  cdouble v;
};

// Trace the distinguished arc attached to pole k: the family of zeros v whose
// anchored period u_k(v) runs over [0, m_k], from the pole itself (t = 0) to
// the Chebotarev center (t = m_k).  Samples are equally spaced in t and each
// solve is warm started from the previous ones.
inline std::vector<ArcSample> continue_distinguished_arc(
    const std::vector<cdouble>& poles, size_t k, int steps,
    const ChebotarevCenter* center = nullptr) {
  if (steps < 1) throw std::invalid_argument("need at least one step");
  ChebotarevCenter cc = center ? *center : chebotarev_center(poles);
  double m = cc.masses.at(k);
  std::vector<ArcSample> out;
  out.push_back({0.0, poles.at(k)});

  cdouble aprime =
      ComplexPoly::from_roots(poles).derivative()(poles.at(k));
  cdouble dir = (cc.v - poles.at(k)) / std::abs(cc.v - poles.at(k));

  int solves = 0;
  for (int j = 1; j <= steps; ++j) {
    double t_target = m * j / steps;
    // Warm start: small-period expansion at the pole for the first sample,
    // linear extrapolation afterwards.
    cdouble v_init;
    if (out.size() == 1) {
      double delta =
          std::pow(2.0 / kPi * t_target * std::sqrt(std::abs(aprime)), 2.0 / 3.0);
      v_init = poles.at(k) + delta * dir;
    } else if (out.size() == 2) {
      v_init = out.back().v;
    } else {
      v_init = 2.0 * out.back().v - out[out.size() - 2].v;
    }
    // On failure, approach the target through intermediate periods.
    double t_have = out.back().t;
    cdouble v_have = out.back().v;
    double t_try = t_target;
    while (true) {
      if (++solves > 40 * steps)
        throw std::runtime_error("arc continuation stalled");
      try {
        cdouble v_new = solve_period_system(poles, k, t_try, v_init);
        t_have = t_try;
        v_have = v_new;
        if (t_try == t_target) break;
        t_try = t_target;
        v_init = v_new;
      } catch (const std::runtime_error&) {
        t_try = 0.5 * (t_have + t_try);
        v_init = v_have;
        if (t_try - t_have < 1e-6 * m)
          throw std::runtime_error("arc continuation stalled");
      }
    }
    out.push_back({t_target, v_have});
  }
  return out;
}

// A sampled level arc of Im W = 0 through the Chebotarev center, where
// W(v) = u_k(v) + 2n*L(v), u_k anchored at pole `anchor` and L the period of
// the straight segment joining the other two poles (`twist` = n).
struct VArc {
  size_t anchor;
  int twist;
  int side;  // +1/-1: the two rays leaving the center
  std::vector<cdouble> points;
  std::vector<cdouble> values;  // W along the arc
  int pole_hit = -1;            // pole the arc passed through, if any
};

struct VArcOptions {
  int max_twist = 1;
  int max_points = 120;
  double step = 0.02;       // predictor step, in units of the pole scale
  double max_length = 6.0;  // arc length budget, in units of the pole scale
};

// Predictor/corrector sampling of the level curves Im W = 0 seeded at the
// center.  Twist classes whose W is not real at the center do not pass
// through it and are skipped; each traced arc stops at its point budget,
// length budget, or when it reaches a non-anchor pole or the reference
// segment of L.
inline std::vector<VArc> sample_V_arcs(const std::vector<cdouble>& poles,
                                       const VArcOptions& opts = {}) {
  if (poles.size() != 3)
    throw std::invalid_argument("sample_V_arcs is implemented for p = 2");
  ChebotarevCenter cc = chebotarev_center(poles);
  double scale = 1.0;
  for (cdouble a : poles) scale = std::max(scale, std::abs(a));
  const double h = opts.step * scale;

  std::vector<VArc> arcs;
  for (size_t k = 0; k < 3; ++k) {
    size_t o1 = (k == 0) ? 1 : 0;
    size_t o2 = (k == 2) ? 1 : 2;
    for (int n = -opts.max_twist; n <= opts.max_twist; ++n) {
      // W and W' with branch continuity along the traced arc: both the
      // anchored period and the loop period keep their seed-determined signs
      // aligned with the values at the previous sample.
      cdouble u_prev = 0.0, l_prev = 0.0;
      bool have_prev = false;
      auto eval_W = [&](cdouble v) -> std::pair<cdouble, cdouble> {
        PathPeriod u = path_period(poles, poles[k], v, v);
        PathPeriod l = path_period(poles, poles[o1], poles[o2], v);
        if (have_prev) {
          if (std::abs(-u.w - u_prev) < std::abs(u.w - u_prev)) {
            u.w = -u.w;
            u.dw = -u.dw;
          }
          if (std::abs(-l.w - l_prev) < std::abs(l.w - l_prev)) {
            l.w = -l.w;
            l.dw = -l.dw;
          }
        } else {
          if (u.w.real() < 0.0) {
            u.w = -u.w;
            u.dw = -u.dw;
          }
          if (l.w.real() < 0.0) {
            l.w = -l.w;
            l.dw = -l.dw;
          }
        }
        u_prev = u.w;
        l_prev = l.w;
        have_prev = true;
        return {u.w + 2.0 * double(n) * l.w, u.dw + 2.0 * double(n) * l.dw};
      };

      have_prev = false;
      auto [W0, dW0] = eval_W(cc.v);
      if (std::abs(W0.imag()) > 1e-8 * scale) continue;  // not through center
      if (!(std::abs(dW0) > 0.0)) continue;

      for (int side : {+1, -1}) {
        VArc arc;
        arc.anchor = k;
        arc.twist = n;
        arc.side = side;
        arc.points.push_back(cc.v);
        arc.values.push_back(W0);
        have_prev = false;
        eval_W(cc.v);  // reset the branch tracker at the center
        cdouble d = double(side) * std::conj(dW0) / std::abs(dW0);
        cdouble v = cc.v;
        double length = 0.0;
        while (int(arc.points.size()) < opts.max_points &&
               length < opts.max_length * scale) {
          cdouble v_next = v + h * d;
          // Stop at a non-anchor pole; step through the anchor pole.  The
          // proximity window covers a full predictor step so a passage cannot
          // slip between samples.
          double prox = std::max(1e-3 * scale, 0.75 * h);
          bool stop = false, skip_corrector = false;
          for (size_t j = 0; j < 3; ++j) {
            if (std::abs(v_next - poles[j]) < prox) {
              arc.pole_hit = int(j);
              if (j == k)
                skip_corrector = true;
              else
                stop = true;
            }
          }
          if (detail::point_segment_distance(v_next, poles[o1], poles[o2]) <
              1e-3 * scale)
            stop = true;
          if (stop) break;
          cdouble Wn, dWn;
          bool ok = true;
          try {
            std::tie(Wn, dWn) = eval_W(v_next);
            if (!skip_corrector) {
              for (int c = 0; c < 3 && std::abs(Wn.imag()) >
                                          1e-12 * (1.0 + std::abs(Wn));
                   ++c) {
                cdouble delta =
                    -cdouble(0.0, 1.0) * std::conj(dWn) * Wn.imag() /
                    (std::abs(dWn) * std::abs(dWn));
                v_next += delta;
                std::tie(Wn, dWn) = eval_W(v_next);
              }
              if (std::abs(Wn.imag()) > 0.1 * h * std::abs(dWn)) ok = false;
            }
          } catch (const std::exception&) {
            ok = false;
          }
          if (!ok) break;
          cdouble d_new = std::conj(dWn) / std::abs(dWn);
          if (std::abs(-d_new - d) < std::abs(d_new - d)) d_new = -d_new;
          d = d_new;
          length += std::abs(v_next - v);
          v = v_next;
          arc.points.push_back(v);
          arc.values.push_back(Wn);
        }
        if (arc.points.size() >= 3) arcs.push_back(std::move(arc));
      }
    }
  }
  return arcs;
}

}  // namespace stieltjes
