#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "hullinv/hullgeom.hpp"
#include "hullinv/offsets_io.hpp"
#include "test_util.hpp"

using namespace hullinv::hullgeom;

namespace {

SectionOffsets section_of(std::vector<Point> pts, int index = 0) {
  return SectionOffsets{index, std::move(pts)};
}

// Brute-force straight-point predicate: distance of p to the chord a-b.
double chord_distance(Point a, Point b, Point p) {
  const double dy = b.y - a.y, dz = b.z - a.z;
  return std::abs(dy * (p.z - a.z) - dz * (p.y - a.y)) / std::hypot(dy, dz);
}

// Independent basis by the textbook recursion, with the right end closed.
double cox_de_boor(const std::vector<double>& t, int j, int k, double u) {
  if (k == 1) {
    const double last = t.back();
    if (u == last) {
      // Right-closed on the last non-empty span.
      int span = static_cast<int>(t.size()) - 2;
      while (t[span] == t[span + 1]) --span;
      return j == span ? 1.0 : 0.0;
    }
    return (t[j] <= u && u < t[j + 1]) ? 1.0 : 0.0;
  }
  double a = 0.0, b = 0.0;
  if (t[j + k - 1] != t[j]) a = (u - t[j]) / (t[j + k - 1] - t[j]) * cox_de_boor(t, j, k - 1, u);
  if (t[j + k] != t[j + 1]) b = (t[j + k] - u) / (t[j + k] - t[j + 1]) * cox_de_boor(t, j + 1, k - 1, u);
  return a + b;
}

// Dense normal equations solved by Gauss-Jordan with partial pivoting.
std::vector<Point> normal_equation_fit(const std::vector<Point>& p, const std::vector<double>& u,
                                       int n) {
  const auto kv = open_uniform_knots(n);
  const int c = n + 1;
  std::vector<double> m(c * (c + 2), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    std::vector<double> row(c);
    for (int j = 0; j < c; ++j) row[j] = cox_de_boor(kv.knots, j, kOrder, u[i]);
    for (int r = 0; r < c; ++r) {
      for (int s = 0; s < c; ++s) m[r * (c + 2) + s] += row[r] * row[s];
      m[r * (c + 2) + c] += row[r] * p[i].y;
      m[r * (c + 2) + c + 1] += row[r] * p[i].z;
    }
  }
  const int w = c + 2;
  for (int col = 0; col < c; ++col) {
    int piv = col;
    for (int r = col + 1; r < c; ++r) {
      if (std::abs(m[r * w + col]) > std::abs(m[piv * w + col])) piv = r;
    }
    for (int s = 0; s < w; ++s) std::swap(m[col * w + s], m[piv * w + s]);
    for (int r = 0; r < c; ++r) {
      if (r == col) continue;
      const double f = m[r * w + col] / m[col * w + col];
      for (int s = 0; s < w; ++s) m[r * w + s] -= f * m[col * w + s];
    }
  }
  std::vector<Point> q(c);
  for (int r = 0; r < c; ++r) q[r] = {m[r * w + c] / m[r * w + r], m[r * w + c + 1] / m[r * w + r]};
  return q;
}

Point eval_with(const std::vector<Point>& q, const KnotVector& kv, double u) {
  Point out;
  for (int j = 0; j <= kv.n; ++j) {
    const double b = cox_de_boor(kv.knots, j, kOrder, u);
    out.y += b * q[j].y;
    out.z += b * q[j].z;
  }
  return out;
}

}  // namespace

TEST_SUITE("hullgeom") {

TEST_CASE("remove_straight_segments drops exactly collinear interior points") {
  std::vector<Point> pts{{0, 0}, {100, 0}};
  for (int i = 1; i <= 5; ++i) pts.push_back({100, 100.0 * i});
  pts.push_back({100, 600});
  pts.push_back({200, 700});
  const auto out = remove_straight_segments(section_of(pts), 0.1);
  const std::vector<Point> expect{{0, 0}, {100, 0}, {100, 600}, {200, 700}};
  CHECK(out.points == expect);
}

TEST_CASE("remove_straight_segments leaves a curve-only section unchanged") {
  std::vector<Point> pts;
  for (int i = 0; i < 30; ++i) {
    const double a = 0.5 * std::numbers::pi * i / 29.0;
    pts.push_back({5000.0 * std::sin(a), 5000.0 * (1.0 - std::cos(a))});
  }
  CHECK(remove_straight_segments(section_of(pts), 0.5).points == pts);
}

TEST_CASE("remove_straight_segments on a wall plus bilge arc matches a brute-force predicate") {
  // Bilge arc from the keel up to the wall foot, then a vertical wall.
  std::vector<Point> pts;
  const double r = 4000.0;
  for (int i = 0; i <= 15; ++i) {
    const double a = 0.5 * std::numbers::pi * i / 15.0;
    pts.push_back({25000.0 + r * std::sin(a), r * (1.0 - std::cos(a))});
  }
  for (int i = 1; i <= 20; ++i) pts.push_back({29000.0, r + 850.0 * i});
  const auto out = remove_straight_segments(section_of(pts), 0.5);

  // Expected: the arc (0..15) and the wall top; the wall interior goes.
  std::vector<Point> expect(pts.begin(), pts.begin() + 16);
  expect.push_back(pts.back());
  CHECK(out.points == expect);
  // Brute force: each removed point is within tol of the chord its survivors
  // span, and each kept arc point is farther than tol from its neighbours' chord.
  for (std::size_t i = 16; i + 1 < pts.size(); ++i) {
    CHECK(chord_distance(pts[15], pts.back(), pts[i]) <= 0.5);
  }
  for (std::size_t i = 1; i < 15; ++i) {
    CHECK(chord_distance(pts[i - 1], pts[i + 1], pts[i]) > 0.5);
  }
  // Every arc point survives.
  for (int i = 0; i <= 15; ++i) {
    CHECK(std::find(out.points.begin(), out.points.end(), pts[i]) != out.points.end());
  }
}

TEST_CASE("remove_straight_segments rejects a result with fewer than three points") {
  std::vector<Point> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({100.0, 100.0 * i});
  CHECK_THROWS_AS(remove_straight_segments(section_of(pts), 0.5), GeometryError);
}

TEST_CASE("chord_params examples") {
  const std::vector<Point> a{{0, 0}, {3, 4}, {6, 8}};
  CHECK(chord_params(a) == std::vector<double>{0.0, 0.5, 1.0});
  const std::vector<Point> b{{0, 0}, {1, 0}};
  CHECK(chord_params(b) == std::vector<double>{0.0, 1.0});
  const std::vector<Point> c{{0, 0}, {1, 0}, {1, 2}};
  const auto u = chord_params(c);
  CHECK(u[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(u[2] == 1.0);
  const std::vector<Point> dup{{0, 0}, {0, 0}, {1, 1}};
  try {
    chord_params(dup);
    FAIL("expected duplicate-point error");
  } catch (const GeometryError& e) {
    CHECK(e.code() == GeometryErrc::kDuplicatePoint);
  }
}

TEST_CASE("open_uniform_knots") {
  CHECK(open_uniform_knots(4).knots == std::vector<double>{0, 0, 0, 1.0 / 3, 2.0 / 3, 1, 1, 1});
  CHECK(open_uniform_knots(2).knots == std::vector<double>{0, 0, 0, 1, 1, 1});
  const auto kv = open_uniform_knots(22);
  REQUIRE(kv.knots.size() == 26);
  for (int i = 1; i <= 20; ++i) CHECK(kv.knots[2 + i] == doctest::Approx(i / 21.0).epsilon(1e-15));
  for (std::size_t i = 1; i < kv.knots.size(); ++i) CHECK(kv.knots[i] >= kv.knots[i - 1]);
  try {
    open_uniform_knots(1);
    FAIL("expected insufficient-controls error");
  } catch (const GeometryError& e) {
    CHECK(e.code() == GeometryErrc::kInsufficientControls);
  }
}

TEST_CASE("basis endpoints, partition of unity and agreement with an independent recursion") {
  const auto kv = open_uniform_knots(22);
  for (int j = 0; j <= 22; ++j) {
    CHECK(basis(kv, j, 0.0) == (j == 0 ? 1.0 : 0.0));
    CHECK(basis(kv, j, 1.0) == (j == 22 ? 1.0 : 0.0));
  }
  hullinv::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const double u = rng.uniform();
    const auto row = basis_row(kv, u);
    double s = 0.0;
    for (int j = 0; j <= 22; ++j) {
      s += row[j];
      CHECK(row[j] == doctest::Approx(basis(kv, j, u)).epsilon(1e-13));
      CHECK(basis(kv, j, u) == doctest::Approx(cox_de_boor(kv.knots, j, kOrder, u)).epsilon(1e-13));
    }
    CHECK(std::abs(s - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(basis(kv, 0, 1.5), GeometryError);
  CHECK_THROWS_AS(basis(kv, 0, -0.1), GeometryError);
}

TEST_CASE("eval_curve properties") {
  const auto kv = open_uniform_knots(6);
  ControlPolygon constant{0, std::vector<Point>(7, Point{1234.5, 678.0})};
  for (double u : {0.0, 0.13, 0.5, 0.77, 1.0}) {
    const auto p = eval_curve(constant, kv, u);
    CHECK(p.y == doctest::Approx(1234.5).epsilon(1e-14));
    CHECK(p.z == doctest::Approx(678.0).epsilon(1e-14));
  }
  ControlPolygon q{0, {}};
  hullinv::Rng rng(5);
  for (int j = 0; j < 7; ++j) q.controls.push_back({rng.uniform(0, 29000), rng.uniform(0, 21000)});
  CHECK(eval_curve(q, kv, 0.0) == q.controls.front());
  CHECK(eval_curve(q, kv, 1.0) == q.controls.back());

  // Controls on the line z = 0.4 y + 300.
  ControlPolygon line{0, {}};
  for (int j = 0; j < 7; ++j) {
    const double y = 1000.0 + 2500.0 * j + (j % 2) * 700.0;
    line.controls.push_back({y, 0.4 * y + 300.0});
  }
  for (int i = 0; i <= 20; ++i) {
    const auto p = eval_curve(line, kv, i / 20.0);
    CHECK(std::abs(p.z - (0.4 * p.y + 300.0)) <= 1e-9 * std::abs(p.z));
  }
  ControlPolygon bad{0, std::vector<Point>(5)};
  try {
    eval_curve(bad, kv, 0.5);
    FAIL("expected shape error");
  } catch (const GeometryError& e) {
    CHECK(e.code() == GeometryErrc::kShape);
  }
}

TEST_CASE("fit is exact for quadratic curves at their own parameters") {
  // y, z quadratic in t; 50 samples at uniformly spaced t.
  std::vector<Point> pts;
  std::vector<double> t;
  for (int i = 0; i < 50; ++i) {
    const double s = i / 49.0;
    t.push_back(s);
    pts.push_back({2000.0 + 15000.0 * s + 9000.0 * s * s, 500.0 + 25000.0 * s - 7000.0 * s * s});
  }
  const auto q = fit_control_points(section_of(pts), t, 22);
  const auto kv = open_uniform_knots(22);
  const auto oracle = normal_equation_fit(pts, t, 22);
  for (int i = 0; i < 50; ++i) {
    const auto p = eval_curve(q, kv, t[i]);
    const double scale = std::hypot(pts[i].y, pts[i].z);
    CHECK(std::hypot(p.y - pts[i].y, p.z - pts[i].z) < 1e-9 * scale);
    // The independent solve lands on the same curve.
    const auto o = eval_with(oracle, kv, t[i]);
    CHECK(std::hypot(o.y - pts[i].y, o.z - pts[i].z) < 1e-9 * scale);
  }
}

TEST_CASE("fit recovers a known control polygon from its own curve points") {
  hullinv::Rng rng(99);
  const int n = 22;
  const auto kv = open_uniform_knots(n);
  ControlPolygon known{3, {}};
  double y = 0.0, z = 0.0;
  for (int j = 0; j <= n; ++j) {
    y += rng.uniform(200, 1200);
    z += rng.uniform(200, 900);
    known.controls.push_back({y, z});
  }
  // Points on the curve at 50 parameters; the fit must use the same ones.
  std::vector<double> u;
  std::vector<Point> pts;
  for (int i = 0; i < 50; ++i) {
    u.push_back(i / 49.0);
    pts.push_back(eval_curve(known, kv, u.back()));
  }
  const auto q = fit_control_points(section_of(pts, 3), u, n);
  CHECK(q.section_index == 3);
  for (int j = 0; j <= n; ++j) {
    CHECK(std::abs(q.controls[j].y - known.controls[j].y) < 1e-8 * 30000);
    CHECK(std::abs(q.controls[j].z - known.controls[j].z) < 1e-8 * 30000);
  }
  const auto rec = reconstruct_offsets(q, 50);
  for (int i = 0; i < 50; ++i) {
    CHECK(std::hypot(rec.points[i].y - pts[i].y, rec.points[i].z - pts[i].z) < 1e-6);
  }
}

TEST_CASE("fit of collinear data gives collinear controls") {
  std::vector<Point> pts;
  for (int i = 0; i < 50; ++i) {
    const double s = std::pow(i / 49.0, 1.3);
    pts.push_back({1000.0 + 20000.0 * s, 2000.0 + 15000.0 * s});
  }
  const auto q = fit_control_points(section_of(pts), 22);
  // Perpendicular distance of every control to the source line.
  const Point a = pts.front(), b = pts.back();
  for (const auto& c : q.controls) CHECK(chord_distance(a, b, c) < 1e-6);
}

TEST_CASE("chord-parameter fit of a ship-like section stays sub-millimetre") {
  std::vector<Point> pts;
  for (int i = 0; i < 50; ++i) {
    const double a = 0.5 * std::numbers::pi * i / 49.0;
    pts.push_back({20000.0 * std::sin(a), 15000.0 * (1.0 - std::cos(a))});
  }
  const auto q = fit_control_points(section_of(pts), 22);
  const auto kv = open_uniform_knots(22);
  const auto u = chord_params(pts);
  for (int i = 0; i < 50; ++i) {
    const auto p = eval_curve(q, kv, u[i]);
    CHECK(std::hypot(p.y - pts[i].y, p.z - pts[i].z) < 1.0);
  }
}

TEST_CASE("fit errors") {
  std::vector<Point> few;
  for (int i = 0; i < 10; ++i) few.push_back({100.0 * i, 50.0 * i * i});
  try {
    fit_control_points(section_of(few), 22);
    FAIL("expected rank-deficient error");
  } catch (const GeometryError& e) {
    CHECK(e.code() == GeometryErrc::kRankDeficientFit);
  }
  // Data clustered in one knot span leaves most basis functions unsupported.
  std::vector<Point> clustered;
  std::vector<double> u;
  for (int i = 0; i < 40; ++i) {
    u.push_back(0.001 * i);
    clustered.push_back({10.0 * i, 5.0 * i});
  }
  try {
    fit_control_points(section_of(clustered), u, 22);
    FAIL("expected rank-deficient error");
  } catch (const GeometryError& e) {
    CHECK(e.code() == GeometryErrc::kRankDeficientFit);
  }
  CHECK_THROWS_AS(fit_control_points(section_of(few), 1), GeometryError);
}

TEST_CASE("reconstruct_offsets endpoints and constant polygon") {
  ControlPolygon q{0, {{0, 0}, {10, 50}, {40, 90}, {100, 100}}};
  const auto two = reconstruct_offsets(q, 2);
  REQUIRE(two.points.size() == 2);
  CHECK(two.points[0] == q.controls.front());
  CHECK(two.points[1] == q.controls.back());
  ControlPolygon c{0, std::vector<Point>(5, Point{7.0, 9.0})};
  for (const auto& p : reconstruct_offsets(c, 17).points) {
    CHECK(p.y == doctest::Approx(7.0).epsilon(1e-14));
    CHECK(p.z == doctest::Approx(9.0).epsilon(1e-14));
  }
}

TEST_CASE("interp_at_z_levels") {
  std::vector<Point> wall;
  for (int i = 0; i < 50; ++i) wall.push_back({12345.0, 300.0 * i});
  for (double y : interp_at_z_levels(section_of(wall), 50)) CHECK(y == 12345.0);

  std::vector<Point> curve;
  for (int i = 0; i < 40; ++i) curve.push_back({8000.0 * std::sqrt(i / 39.0), 9000.0 * i / 39.0});
  const auto a = interp_at_z_levels(section_of(curve));
  const auto b = interp_at_z_levels(section_of(curve));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] - b[i] == 0.0);

  // Quarter circle of radius 21000 sampled at the comparison levels.
  const double r = 21000.0;
  std::vector<Point> circle;
  for (int i = 0; i < 50; ++i) {
    const double z = r * i / 49.0;
    circle.push_back({std::sqrt(std::max(0.0, r * r - (r - z) * (r - z))), z});
  }
  const auto y = interp_at_z_levels(section_of(circle), 50);
  for (int i = 0; i < 50; ++i) {
    const double z = r * i / 49.0;
    CHECK(std::abs(y[i] - std::sqrt(std::max(0.0, r * r - (r - z) * (r - z)))) < 0.5);
  }

  std::vector<Point> flat{{0, 500}, {100, 500}, {200, 500}};
  try {
    interp_at_z_levels(section_of(flat));
    FAIL("expected flat-section error");
  } catch (const GeometryError& e) {
    CHECK(e.code() == GeometryErrc::kFlatSection);
  }
}

TEST_CASE("offsets file parse errors carry the line number") {
  std::istringstream in("units mm\nsection 0 3\n0 0\n10 oops\n20 20\n");
  try {
    hullinv::io::read_offsets(in, "bad.off");
    FAIL("expected parse error");
  } catch (const hullinv::io::ParseError& e) {
    CHECK(e.line() == 4);
  }
  std::ostringstream out;
  const std::vector<SectionOffsets> secs{section_of({{0, 0}, {1.5, 2.25}, {3, 7}}, 2)};
  hullinv::io::write_offsets(out, secs);
  std::istringstream back(out.str());
  const auto read = hullinv::io::read_offsets(back);
  REQUIRE(read.size() == 1);
  CHECK(read[0].section_index == 2);
  CHECK(read[0].points == secs[0].points);
}

}  // TEST_SUITE
