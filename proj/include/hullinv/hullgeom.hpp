#pragma once

// Quadratic B-spline machinery for hull sections.
//
// A section is an ordered run of (y, z) girth points in millimetres. Sections
// of varying length are converted to a fixed number of control points by a
// least-squares fit against an open-uniform knot vector with chord-length
// parameters, and converted back by uniform evaluation of the curve.
//
// All functions are pure.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hullinv::hullgeom {

inline constexpr int kOrder = 3;  // quadratic
inline constexpr int kDefaultControls = 23;
inline constexpr double kMaxHalfBreadth = 29000.0;  // mm
inline constexpr double kMaxDepth = 21000.0;        // mm
inline constexpr double kDefaultStraightTol = 0.5;  // mm
inline constexpr int kDefaultZLevels = 50;

struct Point {
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

enum class GeometryErrc {
  kDegenerateSection,
  kDuplicatePoint,
  kInsufficientControls,
  kDomain,
  kShape,
  kRankDeficientFit,
  kFlatSection,
  kOutOfRange,
};

class GeometryError : public std::runtime_error {
 public:
  GeometryError(GeometryErrc code, const std::string& what, std::optional<int> section = {});
  GeometryErrc code() const noexcept { return code_; }
  std::optional<int> section() const noexcept { return section_; }

 private:
  GeometryErrc code_;
  std::optional<int> section_;
};

struct SectionOffsets {
  int section_index = 0;
  std::vector<Point> points;

  // Throws GeometryError if fewer than 3 points, a coordinate is outside the
  // hull envelope, or two consecutive points coincide.
  void validate() const;
};

struct KnotVector {
  int order = kOrder;
  int n = 0;  // control count - 1
  std::vector<double> knots;

  int control_count() const { return n + 1; }
};

struct ControlPolygon {
  int section_index = 0;
  std::vector<Point> controls;
};

// Dense (m+1) x (n+1) matrix of basis values, row-major.
struct BasisMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// Drops interior points lying within `tol` of the line through their surviving
// neighbours. The first and last points are always kept.
SectionOffsets remove_straight_segments(const SectionOffsets& offsets,
                                        double tol = kDefaultStraightTol);

// Normalised cumulative chord length, u_0 = 0 and u_m = 1.
std::vector<double> chord_params(std::span<const Point> points);

KnotVector open_uniform_knots(int n, int k = kOrder);

// N_j^k(u) by the Cox-de Boor recursion, 0/0 := 0, with the last non-empty
// span closed on the right so the basis sums to one at u = 1.
double basis(const KnotVector& knots, int j, double u);

// All n+1 basis values at u, computed by the triangular de Boor scheme over
// the single active span. Agrees with basis() to rounding.
std::vector<double> basis_row(const KnotVector& knots, double u);

BasisMatrix basis_matrix(const KnotVector& knots, std::span<const double> params);

Point eval_curve(const ControlPolygon& q, const KnotVector& knots, double u);

// Least-squares control points through Householder QR on the basis matrix.
// `n` is the control count minus one. y and z share the chord parametrisation.
ControlPolygon fit_control_points(const SectionOffsets& p, int n = kDefaultControls - 1);
// Same fit at caller-supplied parameters in [0, 1], one per point.
ControlPolygon fit_control_points(const SectionOffsets& p, std::span<const double> params,
                                  int n = kDefaultControls - 1);

// Curve evaluated at `count` uniformly spaced parameters in [0, 1].
SectionOffsets reconstruct_offsets(const ControlPolygon& q, int count);

// y at `levels` equally spaced z values between the section's min and max z,
// interpolated linearly along the point sequence. Where the section crosses a
// level more than once the first crossing in arc order wins.
std::vector<double> interp_at_z_levels(const SectionOffsets& offsets,
                                       int levels = kDefaultZLevels);

}  // namespace hullinv::hullgeom
