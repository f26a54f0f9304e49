#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "testutil.hpp"

#include <algorithm>
#include <complex>
#include <vector>

#include "stieltjes/qdiff.hpp"

using namespace stieltjes;

namespace {

// -dz^2/(z^2-1): horizontal trajectories are the segment (-1,1) and the
// confocal ellipses around it.
QuadDiff segment_qd() {
  return QuadDiff(ComplexPoly::constant(1.0), ComplexPoly({-1.0, 0.0, 1.0}));
}

// -(z/(z^3-1)) dz^2: the three-pole star with center at the centroid.
QuadDiff equilateral_qd() {
  return QuadDiff(ComplexPoly::identity(), ComplexPoly({-1.0, 0.0, 0.0, 1.0}));
}

// Poles {-1, 0, 1} with the zero of V at v.
QuadDiff collinear_qd(cdouble v) {
  return QuadDiff(ComplexPoly({-v, 1.0}), ComplexPoly({0.0, -1.0, 0.0, 1.0}));
}

std::vector<cdouble> reversed(std::vector<cdouble> p) {
  std::reverse(p.begin(), p.end());
  return p;
}

}  // namespace

TEST_CASE("construction validates shape and flags degeneracy") {
  CHECK_THROWS_AS(QuadDiff(ComplexPoly::identity(), ComplexPoly({-1.0, 0.0, 1.0})),
                  std::invalid_argument);  // deg V too high
  CHECK_THROWS_AS(QuadDiff(ComplexPoly::constant(2.0), ComplexPoly({-1.0, 0.0, 1.0})),
                  std::invalid_argument);  // not monic
  // (z-1)^2 has a double root.
  CHECK_THROWS_AS(QuadDiff(ComplexPoly::constant(1.0), ComplexPoly({1.0, -2.0, 1.0})),
                  std::invalid_argument);
  // Zero of V on a pole of A.
  QuadDiff deg(ComplexPoly({0.0, 1.0}), ComplexPoly({0.0, -1.0, 0.0, 1.0}));
  CHECK(deg.degenerate);
}

TEST_CASE("emanating directions: counts and angles") {
  QuadDiff seg = segment_qd();
  auto at_pole = emanating_directions(seg, cdouble(1.0));
  REQUIRE(at_pole.size() == 1);
  CHECK(std::abs(at_pole[0] - cdouble(-1.0)) < 1e-12);  // into the segment

  QuadDiff eq = equilateral_qd();
  auto at_zero = emanating_directions(eq, cdouble(0.0));
  REQUIRE(at_zero.size() == 3);
  for (int m = 0; m < 3; ++m) {
    cdouble expect = std::polar(1.0, 2.0 * kPi * m / 3.0);
    CHECK(std::abs(at_zero[size_t(m)] - expect) < 1e-12);
  }

  // Double zero: V = z^2 with poles at the 4th roots of unity.
  QuadDiff dz(ComplexPoly({0.0, 0.0, 1.0}), ComplexPoly({-1.0, 0.0, 0.0, 0.0, 1.0}));
  auto four = emanating_directions(dz, cdouble(0.0));
  REQUIRE(four.size() == 4);
  for (int m = 0; m < 4; ++m)
    CHECK(std::abs(four[size_t(m)] - std::polar(1.0, kPi * m / 2.0)) < 1e-12);

  CHECK_THROWS_AS(emanating_directions(seg, cdouble(0.5, 0.5)), std::domain_error);
}

TEST_CASE("segment fixture: the real segment is a critical trajectory") {
  QuadDiff qd = segment_qd();
  CHECK_THROWS_AS(trace(qd, cdouble(1.0), cdouble(-1.0)), std::domain_error);

  Trajectory right = trace(qd, cdouble(0.0), cdouble(1.0));
  REQUIRE(right.kind == TrajKind::Critical);
  REQUIRE(right.end_endpoint.has_value());
  CHECK(std::abs(*right.end_endpoint - cdouble(1.0)) < 1e-12);
  for (const cdouble& z : right.points) CHECK(std::abs(z.imag()) < 1e-9);

  Trajectory left = trace(qd, cdouble(0.0), cdouble(-1.0));
  REQUIRE(left.kind == TrajKind::Critical);
  CHECK(std::abs(*left.end_endpoint - cdouble(-1.0)) < 1e-12);

  // Reversal: the two half-traces concatenate to one maximal trajectory.
  std::vector<cdouble> whole = reversed(left.points);
  whole.insert(whole.end(), right.points.begin() + 1, right.points.end());
  CHECK(std::abs(whole.front() - cdouble(-1.0)) < 1e-12);
  CHECK(std::abs(whole.back() - cdouble(1.0)) < 1e-12);
  CHECK(omega_length(qd, whole) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(im_xi_drift(qd, whole) < 1e-6 * std::max(1.0, omega_length(qd, whole)));

  // Tracer metric bookkeeping agrees with polyline re-quadrature.
  CHECK(right.omega_length ==
        doctest::Approx(omega_length(qd, right)).epsilon(1e-6));

  // Retracing a polyline doubles its length.
  std::vector<cdouble> doubled = right.points;
  auto back = reversed(right.points);
  doubled.insert(doubled.end(), back.begin() + 1, back.end());
  CHECK(omega_length(qd, doubled) ==
        doctest::Approx(2.0 * omega_length(qd, right.points)).epsilon(1e-9));
}

TEST_CASE("segment fixture: the confocal ellipse closes up") {
  QuadDiff qd = segment_qd();
  Trajectory loop = trace(qd, cdouble(0.0, 2.0), cdouble(1.0));
  REQUIRE(loop.kind == TrajKind::Closed);
  CHECK(std::abs(loop.points.front() - loop.points.back()) < 1e-7);
  // Every trajectory of the ring domain has the same metric length: the
  // period of sqrt(-R) around the two branch points, |2 pi i| / pi = 2.
  CHECK(loop.omega_length == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(im_xi_drift(qd, loop.points) < 1e-6 * loop.omega_length);
}

TEST_CASE("equilateral star: bisector branches of length one third") {
  QuadDiff qd = equilateral_qd();
  for (int m = 0; m < 3; ++m) {
    cdouble dir = std::polar(1.0, 2.0 * kPi * m / 3.0);
    Trajectory br = trace(qd, cdouble(0.0), dir);
    REQUIRE(br.kind == TrajKind::Critical);
    REQUIRE(br.start_endpoint.has_value());
    CHECK(std::abs(*br.start_endpoint) < 1e-12);
    REQUIRE(br.end_endpoint.has_value());
    CHECK(std::abs(*br.end_endpoint - dir) < 1e-9);  // vertex of the triangle
    CHECK(omega_length(qd, br) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(im_xi_drift(qd, br.points) < 1e-6);
  }
}

TEST_CASE("equilateral star: critical graph is the closed three-arc tree") {
  QuadDiff qd = equilateral_qd();
  CriticalGraph g = critical_graph(qd);
  CHECK(g.is_closed);
  REQUIRE(g.points.size() == 4);  // zero + three poles
  int critical_arcs = 0;
  for (size_t k = 0; k < g.trajectories.size(); ++k) {
    REQUIRE(g.trajectories[k].kind == TrajKind::Critical);
    auto [e0, e1] = g.arc_endpoints[k];
    CHECK(e0 >= 0);
    CHECK(e1 >= 0);
    // Each arc joins the center (order-1 zero) to a pole.
    CHECK(((g.points[size_t(e0)].order == 1) != (g.points[size_t(e1)].order == 1)));
    ++critical_arcs;
  }
  CHECK(critical_arcs == 3);
  CHECK(classify_p2(qd) == P2Config::Chebotarev);
}

TEST_CASE("collinear three poles, zero between the outer poles: exterior loop") {
  QuadDiff qd = collinear_qd(cdouble(-0.5));
  CHECK(classify_p2(qd) == P2Config::Exterior);

  CriticalGraph g = critical_graph(qd);
  CHECK(g.is_closed);
  // Expect the loop (v to v), the pole-pole arc, and the pole-v arc.
  int loop_arcs = 0, pole_pole = 0, pole_zero = 0;
  for (size_t k = 0; k < g.trajectories.size(); ++k) {
    auto [e0, e1] = g.arc_endpoints[k];
    REQUIRE(e0 >= 0);
    REQUIRE(e1 >= 0);
    int o0 = g.points[size_t(e0)].order, o1 = g.points[size_t(e1)].order;
    if (e0 == e1 && o0 == 1) ++loop_arcs;
    else if (o0 == -1 && o1 == -1) ++pole_pole;
    else ++pole_zero;
  }
  CHECK(loop_arcs == 1);
  CHECK(pole_pole == 1);
  CHECK(pole_zero == 1);
}

TEST_CASE("generic complex zero: interior recurrent configuration") {
  QuadDiff qd = collinear_qd(cdouble(0.5, 0.6));
  P2Config cfg = classify_p2(qd, 30.0);
  CHECK(cfg == P2Config::InteriorRecurrent);
}

TEST_CASE("degenerate placements are reported") {
  CHECK(classify_p2(collinear_qd(cdouble(0.0))) == P2Config::Degenerate);
}
