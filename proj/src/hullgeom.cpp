#include "hullinv/hullgeom.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hullinv::hullgeom {

GeometryError::GeometryError(GeometryErrc code, const std::string& what,
                             std::optional<int> section)
    : std::runtime_error(section ? "section " + std::to_string(*section) + ": " + what : what),
      code_(code),
      section_(section) {}

void SectionOffsets::validate() const {
  if (points.size() < 3) {
    throw GeometryError(GeometryErrc::kDegenerateSection,
                        "a section needs at least 3 points, got " + std::to_string(points.size()),
                        section_index);
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& p = points[i];
    if (!std::isfinite(p.y) || !std::isfinite(p.z) || p.y < 0.0 || p.y > kMaxHalfBreadth ||
        p.z < 0.0 || p.z > kMaxDepth) {
      std::ostringstream msg;
      msg << "point " << i << " (" << p.y << ", " << p.z << ") lies outside the hull envelope";
      throw GeometryError(GeometryErrc::kOutOfRange, msg.str(), section_index);
    }
    if (i > 0 && p == points[i - 1]) {
      throw GeometryError(GeometryErrc::kDuplicatePoint,
                          "points " + std::to_string(i - 1) + " and " + std::to_string(i) +
                              " coincide",
                          section_index);
    }
  }
}

namespace {

double distance_to_line(const Point& p, const Point& a, const Point& b) {
  const double dy = b.y - a.y;
  const double dz = b.z - a.z;
  const double len = std::hypot(dy, dz);
  if (len == 0.0) {
    return std::hypot(p.y - a.y, p.z - a.z);
  }
  return std::abs(dy * (p.z - a.z) - dz * (p.y - a.y)) / len;
}

}  // namespace

SectionOffsets remove_straight_segments(const SectionOffsets& offsets, double tol) {
  if (!(tol > 0.0)) {
    throw GeometryError(GeometryErrc::kDomain, "straight-segment tolerance must be positive",
                        offsets.section_index);
  }
  offsets.validate();
  const auto& pts = offsets.points;
  SectionOffsets out{offsets.section_index, {}};
  out.points.reserve(pts.size());
  out.points.push_back(pts.front());
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    if (distance_to_line(pts[i], out.points.back(), pts[i + 1]) > tol) {
      out.points.push_back(pts[i]);
    }
  }
  out.points.push_back(pts.back());
  if (out.points.size() < 3) {
    throw GeometryError(GeometryErrc::kDegenerateSection,
                        "section is straight; fewer than 3 points survive removal",
                        offsets.section_index);
  }
  return out;
}

std::vector<double> chord_params(std::span<const Point> points) {
  if (points.size() < 2) {
    throw GeometryError(GeometryErrc::kDegenerateSection, "chord parameters need >= 2 points");
  }
  std::vector<double> cumulative(points.size(), 0.0);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double chord = std::hypot(points[i].y - points[i - 1].y, points[i].z - points[i - 1].z);
    if (chord == 0.0) {
      throw GeometryError(GeometryErrc::kDuplicatePoint,
                          "zero-length chord between points " + std::to_string(i - 1) + " and " +
                              std::to_string(i));
    }
    cumulative[i] = cumulative[i - 1] + chord;
  }
  const double total = cumulative.back();
  std::vector<double> u(points.size());
  u.front() = 0.0;
  for (std::size_t i = 1; i + 1 < points.size(); ++i) {
    u[i] = cumulative[i] / total;
  }
  u.back() = 1.0;
  return u;
}

KnotVector open_uniform_knots(int n, int k) {
  if (k < 1) {
    throw GeometryError(GeometryErrc::kDomain, "order must be >= 1");
  }
  if (n < k - 1) {
    throw GeometryError(GeometryErrc::kInsufficientControls,
                        "open uniform knots need n >= k-1 (n=" + std::to_string(n) +
                            ", k=" + std::to_string(k) + ")");
  }
  KnotVector kv{k, n, std::vector<double>(static_cast<std::size_t>(n + k + 1), 0.0)};
  const int interior_den = n - k + 2;
  for (int i = k; i <= n; ++i) {
    kv.knots[i] = static_cast<double>(i - k + 1) / interior_den;
  }
  for (int i = n + 1; i <= n + k; ++i) {
    kv.knots[i] = 1.0;
  }
  return kv;
}

namespace {

void check_param(double u) {
  if (!(u >= 0.0 && u <= 1.0)) {
    std::ostringstream msg;
    msg << "parameter " << u << " outside [0, 1]";
    throw GeometryError(GeometryErrc::kDomain, msg.str());
  }
}

double cox_de_boor(const std::vector<double>& t, int j, int r, double u) {
  if (r == 1) {
    if (t[j] <= u && u < t[j + 1]) return 1.0;
    // Closed right end: the last non-empty span owns u = t_last.
    const double last = t.back();
    return (u == last && t[j] < t[j + 1] && t[j + 1] == last) ? 1.0 : 0.0;
  }
  double value = 0.0;
  const double left_den = t[j + r - 1] - t[j];
  if (left_den != 0.0) {
    value += (u - t[j]) / left_den * cox_de_boor(t, j, r - 1, u);
  }
  const double right_den = t[j + r] - t[j + 1];
  if (right_den != 0.0) {
    value += (t[j + r] - u) / right_den * cox_de_boor(t, j + 1, r - 1, u);
  }
  return value;
}

// Index s of the span [t_s, t_{s+1}) containing u, with u = 1 mapped to the
// last non-empty span.
int find_span(const KnotVector& kv, double u) {
  const int p = kv.order - 1;
  if (u >= kv.knots[kv.n + 1]) {
    return kv.n;
  }
  auto it = std::upper_bound(kv.knots.begin() + p, kv.knots.begin() + kv.n + 1, u);
  return static_cast<int>(it - kv.knots.begin()) - 1;
}

}  // namespace

double basis(const KnotVector& knots, int j, double u) {
  check_param(u);
  if (j < 0 || j > knots.n) {
    throw GeometryError(GeometryErrc::kDomain, "basis index " + std::to_string(j) +
                                                   " outside [0, " + std::to_string(knots.n) + "]");
  }
  return cox_de_boor(knots.knots, j, knots.order, u);
}

std::vector<double> basis_row(const KnotVector& knots, double u) {
  check_param(u);
  const int p = knots.order - 1;
  const int span = find_span(knots, u);
  const auto& t = knots.knots;
  std::vector<double> local(static_cast<std::size_t>(p + 1), 0.0);
  std::vector<double> left(static_cast<std::size_t>(p + 1), 0.0);
  std::vector<double> right(static_cast<std::size_t>(p + 1), 0.0);
  local[0] = 1.0;
  for (int d = 1; d <= p; ++d) {
    left[d] = u - t[span + 1 - d];
    right[d] = t[span + d] - u;
    double saved = 0.0;
    for (int r = 0; r < d; ++r) {
      const double tmp = local[r] / (right[r + 1] + left[d - r]);
      local[r] = saved + right[r + 1] * tmp;
      saved = left[d - r] * tmp;
    }
    local[d] = saved;
  }
  std::vector<double> row(static_cast<std::size_t>(knots.n + 1), 0.0);
  for (int r = 0; r <= p; ++r) {
    row[span - p + r] = local[r];
  }
  return row;
}

BasisMatrix basis_matrix(const KnotVector& knots, std::span<const double> params) {
  BasisMatrix m{params.size(), static_cast<std::size_t>(knots.n + 1), {}};
  m.values.reserve(m.rows * m.cols);
  for (const double u : params) {
    const auto row = basis_row(knots, u);
    m.values.insert(m.values.end(), row.begin(), row.end());
  }
  return m;
}

Point eval_curve(const ControlPolygon& q, const KnotVector& knots, double u) {
  if (static_cast<int>(q.controls.size()) != knots.n + 1) {
    throw GeometryError(GeometryErrc::kShape,
                        "control polygon has " + std::to_string(q.controls.size()) +
                            " points but the knot vector expects " +
                            std::to_string(knots.n + 1),
                        q.section_index);
  }
  const auto row = basis_row(knots, u);
  Point out;
  for (std::size_t j = 0; j < row.size(); ++j) {
    out.y += row[j] * q.controls[j].y;
    out.z += row[j] * q.controls[j].z;
  }
  return out;
}

namespace {

// Householder QR least squares for A x = B with two right-hand sides. A is
// rows x cols row-major and is overwritten. Returns cols x 2 solution.
std::vector<Point> qr_solve(std::vector<double> a, std::size_t rows, std::size_t cols,
                            std::vector<Point> b, int section) {
  std::vector<double> diag(cols, 0.0);
  for (std::size_t k = 0; k < cols; ++k) {
    double norm = 0.0;
    for (std::size_t i = k; i < rows; ++i) {
      norm = std::hypot(norm, a[i * cols + k]);
    }
    if (norm == 0.0) {
      throw GeometryError(GeometryErrc::kRankDeficientFit,
                          "basis column " + std::to_string(k) + " has no data support", section);
    }
    const double alpha = a[k * cols + k] > 0.0 ? -norm : norm;
    // v = x - alpha e1, stored in place below the diagonal.
    a[k * cols + k] -= alpha;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < rows; ++i) {
      vnorm2 += a[i * cols + k] * a[i * cols + k];
    }
    for (std::size_t c = k + 1; c < cols; ++c) {
      double s = 0.0;
      for (std::size_t i = k; i < rows; ++i) s += a[i * cols + k] * a[i * cols + c];
      const double f = 2.0 * s / vnorm2;
      for (std::size_t i = k; i < rows; ++i) a[i * cols + c] -= f * a[i * cols + k];
    }
    double sy = 0.0, sz = 0.0;
    for (std::size_t i = k; i < rows; ++i) {
      sy += a[i * cols + k] * b[i].y;
      sz += a[i * cols + k] * b[i].z;
    }
    const double fy = 2.0 * sy / vnorm2;
    const double fz = 2.0 * sz / vnorm2;
    for (std::size_t i = k; i < rows; ++i) {
      b[i].y -= fy * a[i * cols + k];
      b[i].z -= fz * a[i * cols + k];
    }
    diag[k] = alpha;
  }

  double max_diag = 0.0, min_diag = INFINITY;
  for (const double d : diag) {
    max_diag = std::max(max_diag, std::abs(d));
    min_diag = std::min(min_diag, std::abs(d));
  }
  // cond(R) bounds cond(N^T N) as its square root.
  constexpr double kMinReciprocalCondition = 1e-8;
  if (min_diag < kMinReciprocalCondition * max_diag) {
    std::ostringstream msg;
    msg << "basis matrix is numerically rank deficient (R diagonal ratio " << min_diag / max_diag
        << "); too many controls for the data";
    throw GeometryError(GeometryErrc::kRankDeficientFit, msg.str(), section);
  }

  std::vector<Point> x(cols);
  for (std::size_t kk = cols; kk-- > 0;) {
    double sy = b[kk].y, sz = b[kk].z;
    for (std::size_t c = kk + 1; c < cols; ++c) {
      sy -= a[kk * cols + c] * x[c].y;
      sz -= a[kk * cols + c] * x[c].z;
    }
    x[kk] = Point{sy / diag[kk], sz / diag[kk]};
  }
  return x;
}

}  // namespace

ControlPolygon fit_control_points(const SectionOffsets& p, int n) {
  if (n < kOrder - 1) {
    throw GeometryError(GeometryErrc::kInsufficientControls,
                        "need at least " + std::to_string(kOrder) + " controls", p.section_index);
  }
  if (p.points.size() < static_cast<std::size_t>(n + 1)) {
    throw GeometryError(GeometryErrc::kRankDeficientFit,
                        std::to_string(p.points.size()) + " data points cannot determine " +
                            std::to_string(n + 1) + " controls",
                        p.section_index);
  }
  std::vector<double> params;
  try {
    params = chord_params(p.points);
  } catch (const GeometryError& e) {
    throw GeometryError(e.code(), e.what(), p.section_index);
  }
  return fit_control_points(p, params, n);
}

ControlPolygon fit_control_points(const SectionOffsets& p, std::span<const double> params, int n) {
  if (n < kOrder - 1) {
    throw GeometryError(GeometryErrc::kInsufficientControls,
                        "need at least " + std::to_string(kOrder) + " controls", p.section_index);
  }
  if (params.size() != p.points.size()) {
    throw GeometryError(GeometryErrc::kShape, "one parameter per point is required",
                        p.section_index);
  }
  if (p.points.size() < static_cast<std::size_t>(n + 1)) {
    throw GeometryError(GeometryErrc::kRankDeficientFit,
                        std::to_string(p.points.size()) + " data points cannot determine " +
                            std::to_string(n + 1) + " controls",
                        p.section_index);
  }
  const KnotVector kv = open_uniform_knots(n);
  BasisMatrix basis_mat = basis_matrix(kv, params);
  auto controls = qr_solve(std::move(basis_mat.values), basis_mat.rows, basis_mat.cols,
                           p.points, p.section_index);
  return ControlPolygon{p.section_index, std::move(controls)};
}

SectionOffsets reconstruct_offsets(const ControlPolygon& q, int count) {
  if (count < 2) {
    throw GeometryError(GeometryErrc::kDomain, "reconstruction needs count >= 2",
                        q.section_index);
  }
  if (q.controls.size() < static_cast<std::size_t>(kOrder)) {
    throw GeometryError(GeometryErrc::kInsufficientControls,
                        "control polygon needs at least 3 points", q.section_index);
  }
  const KnotVector kv = open_uniform_knots(static_cast<int>(q.controls.size()) - 1);
  SectionOffsets out{q.section_index, {}};
  out.points.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double u = (i == count - 1) ? 1.0 : static_cast<double>(i) / (count - 1);
    out.points.push_back(eval_curve(q, kv, u));
  }
  return out;
}

std::vector<double> interp_at_z_levels(const SectionOffsets& offsets, int levels) {
  if (levels < 2) {
    throw GeometryError(GeometryErrc::kDomain, "need at least 2 z levels", offsets.section_index);
  }
  const auto& pts = offsets.points;
  if (pts.size() < 2) {
    throw GeometryError(GeometryErrc::kDegenerateSection, "need at least 2 points",
                        offsets.section_index);
  }
  const auto [lo_it, hi_it] = std::minmax_element(
      pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.z < b.z; });
  const double z_min = lo_it->z;
  const double z_max = hi_it->z;
  if (!(z_max > z_min)) {
    throw GeometryError(GeometryErrc::kFlatSection, "section spans no z range",
                        offsets.section_index);
  }
  std::vector<double> ys(static_cast<std::size_t>(levels));
  for (int l = 0; l < levels; ++l) {
    const double z = (l == levels - 1) ? z_max : z_min + (z_max - z_min) * l / (levels - 1);
    bool found = false;
    for (std::size_t i = 0; i + 1 < pts.size() && !found; ++i) {
      const Point& a = pts[i];
      const Point& b = pts[i + 1];
      const double lo = std::min(a.z, b.z);
      const double hi = std::max(a.z, b.z);
      if (z < lo || z > hi) continue;
      if (a.z == b.z) {
        ys[l] = a.y;
      } else {
        const double w = (z - a.z) / (b.z - a.z);
        ys[l] = a.y + w * (b.y - a.y);
      }
      found = true;
    }
    // Unreachable for finite data: every level lies within [z_min, z_max].
    if (!found) {
      throw GeometryError(GeometryErrc::kFlatSection, "no crossing for z level",
                          offsets.section_index);
    }
  }
  return ys;
}

}  // namespace hullinv::hullgeom
