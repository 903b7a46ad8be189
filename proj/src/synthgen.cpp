#include "hullinv/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "hullinv/rng.hpp"

namespace hullinv::synth {

using hullgeom::ControlPolygon;
using hullgeom::Point;
using hullgeom::SectionOffsets;

namespace {

enum class Group { kTransom, kAft, kForward, kMidship };

struct SectionDesign {
  double z_lo;       // mm, bottom of the profile
  double z_hi;       // mm, top of the profile
  double breadth;    // mm, half-breadth reached at z_hi
  double bulb;       // mm, peak of the bulb bump at bulb_scale = 1
  double bulb_z;     // mm, height of the bump centre
  double fullness;   // power-law exponent at fullness multiplier 1
  double wall;       // mm, height of the vertical flat-of-side run at the top
  Group group;
  bool lobe = false; // bulb-only section: linear rise plus a half-sine lobe
};

constexpr double kBulbWidth = 2000.0;

// clang-format off
constexpr std::array<SectionDesign, kSections> kDesign = {{
    {15000.0, 21000.0, 17000.0,    0.0, 6500.0, 2.0,    0.0, Group::kTransom},
    {13000.0, 21000.0, 19000.0,    0.0, 6500.0, 2.2,    0.0, Group::kTransom},
    {11000.0, 21000.0, 21000.0,    0.0, 6500.0, 2.4,    0.0, Group::kTransom},
    { 2500.0,  9500.0,  2500.0, 2400.0, 6000.0, 2.0,    0.0, Group::kAft, true},
    { 1500.0, 21000.0, 23000.0, 1600.0, 6500.0, 2.5,    0.0, Group::kAft},
    {  800.0, 21000.0, 25000.0, 1800.0, 6500.0, 2.7,    0.0, Group::kAft},
    {  400.0, 21000.0, 26500.0, 1600.0, 6500.0, 2.9,    0.0, Group::kAft},
    {  200.0, 21000.0, 27500.0, 1200.0, 6500.0, 3.1,    0.0, Group::kAft},
    {  100.0, 21000.0, 28200.0,  800.0, 6500.0, 3.3,    0.0, Group::kAft},
    {    0.0, 21000.0, 28800.0,    0.0, 6500.0, 3.5,    0.0, Group::kForward},
    {    0.0, 21000.0, 29000.0,    0.0, 6500.0, 3.7,    0.0, Group::kForward},
    {    0.0, 21000.0, 29000.0,    0.0, 6500.0, 3.9,    0.0, Group::kForward},
    {    0.0, 21000.0, 29000.0,    0.0, 6500.0, 4.1,  800.0, Group::kForward},
    {    0.0, 21000.0, 29000.0,    0.0, 6500.0, 4.3, 1200.0, Group::kMidship},
}};
// clang-format on

constexpr int kDenseSamples = 4000;

struct ResolvedParams {
  double bulb_scale;
  double transom_width_scale;
  double aft_fullness;
  double fwd_fullness;
};

ResolvedParams resolve(const ShapeParams& params) {
  const auto& ranges = documented_ranges();
  for (const auto& [name, value] : params) {
    const auto it = ranges.find(name);
    if (it == ranges.end()) {
      throw RangeError("unknown shape parameter '" + name + "'");
    }
    if (!(value >= it->second.lo && value <= it->second.hi)) {
      std::ostringstream msg;
      msg << "shape parameter " << name << " = " << value << " outside [" << it->second.lo
          << ", " << it->second.hi << "]";
      throw RangeError(msg.str());
    }
  }
  auto get = [&](const char* name) {
    const auto it = params.find(name);
    return it != params.end() ? it->second : ranges.at(name).mid();
  };
  return ResolvedParams{get("bulb_scale"), get("transom_width_scale"), get("aft_fullness"),
                        get("fwd_fullness")};
}

// Profile point at curve parameter s in [0, 1].
Point profile(const SectionDesign& d, double breadth, double bulb, double q, double s) {
  const double z = d.z_lo + (d.z_hi - d.z_lo) * s;
  // The power law reaches full breadth at the foot of the flat-of-side wall.
  const double s_wall = 1.0 - d.wall / (d.z_hi - d.z_lo);
  const double t = std::min(1.0, s / s_wall);
  if (d.lobe) {
    const double y = breadth * std::pow(s, q) + bulb * std::pow(std::sin(std::numbers::pi * s), 0.7);
    return Point{std::clamp(y, 0.0, hullgeom::kMaxHalfBreadth), z};
  }
  double y = breadth * (1.0 - std::pow(1.0 - t, q));
  if (bulb != 0.0) {
    const double r = (z - d.bulb_z) / kBulbWidth;
    y += bulb * std::exp(-r * r);
  }
  return Point{std::clamp(y, 0.0, hullgeom::kMaxHalfBreadth), z};
}

SectionOffsets build_section(int index, const ResolvedParams& p) {
  const SectionDesign& d = kDesign[index];
  double breadth = d.breadth;
  double bulb = d.bulb;
  double q = d.fullness;
  switch (d.group) {
    case Group::kTransom:
      breadth *= p.transom_width_scale;
      break;
    case Group::kAft:
      bulb *= p.bulb_scale;
      q *= p.aft_fullness;
      break;
    case Group::kForward:
      q *= p.fwd_fullness;
      break;
    case Group::kMidship:
      break;
  }

  // Dense polyline, then resample at equal arc length.
  std::vector<Point> dense(kDenseSamples + 1);
  std::vector<double> arc(kDenseSamples + 1, 0.0);
  for (int i = 0; i <= kDenseSamples; ++i) {
    dense[i] = profile(d, breadth, bulb, q, static_cast<double>(i) / kDenseSamples);
    if (i > 0) {
      arc[i] = arc[i - 1] + std::hypot(dense[i].y - dense[i - 1].y, dense[i].z - dense[i - 1].z);
    }
  }
  SectionOffsets out{index, {}};
  out.points.reserve(kPointsPerSection);
  const double total = arc.back();
  std::size_t seg = 0;
  for (int i = 0; i < kPointsPerSection; ++i) {
    if (i == kPointsPerSection - 1) {
      out.points.push_back(dense.back());
      break;
    }
    const double target = total * i / (kPointsPerSection - 1);
    while (seg + 1 < arc.size() - 1 && arc[seg + 1] < target) ++seg;
    const double len = arc[seg + 1] - arc[seg];
    const double w = len > 0.0 ? (target - arc[seg]) / len : 0.0;
    out.points.push_back(Point{dense[seg].y + w * (dense[seg + 1].y - dense[seg].y),
                               dense[seg].z + w * (dense[seg + 1].z - dense[seg].z)});
  }
  return out;
}

}  // namespace

const ParamRanges& documented_ranges() {
  static const ParamRanges ranges = {
      {"bulb_scale", {0.85, 1.15}},
      {"transom_width_scale", {0.97, 1.03}},
      {"aft_fullness", {0.95, 1.05}},
      {"fwd_fullness", {0.95, 1.05}},
  };
  return ranges;
}

ShapeParams baseline_params() {
  ShapeParams p;
  for (const auto& [name, range] : documented_ranges()) p[name] = range.mid();
  return p;
}

HullVariant make_variant(const ShapeParams& params, int variant_id, std::uint64_t seed) {
  const ResolvedParams resolved = resolve(params);
  HullVariant v;
  v.variant_id = variant_id;
  v.seed = seed;
  v.params = {{"bulb_scale", resolved.bulb_scale},
              {"transom_width_scale", resolved.transom_width_scale},
              {"aft_fullness", resolved.aft_fullness},
              {"fwd_fullness", resolved.fwd_fullness}};
  v.sections.reserve(kSections);
  for (int k = 0; k < kSections; ++k) {
    v.sections.push_back(build_section(k, resolved));
  }
  return v;
}

HullVariant generate_variant(std::uint64_t seed, const ShapeParams& baseline,
                             const ParamRanges& ranges, int variant_id) {
  if (ranges.empty()) {
    throw RangeError("no parameter ranges given");
  }
  const auto& limits = documented_ranges();
  ShapeParams params = baseline;
  Rng rng(derive_seed(seed, "variant"));
  // std::map iteration order is by name, so the draw order is fixed.
  for (const auto& [name, range] : ranges) {
    const auto it = limits.find(name);
    if (it == limits.end()) {
      throw RangeError("unknown shape parameter '" + name + "'");
    }
    if (!(std::isfinite(range.lo) && std::isfinite(range.hi)) || range.lo > range.hi ||
        range.lo < it->second.lo || range.hi > it->second.hi) {
      throw RangeError("range for " + name + " must be bounded and inside the documented limits");
    }
    params[name] = rng.uniform(range.lo, range.hi);
  }
  return make_variant(params, variant_id, seed);
}

double section_area(const SectionOffsets& s) {
  double area = 0.0;
  for (std::size_t i = 1; i < s.points.size(); ++i) {
    const Point& a = s.points[i - 1];
    const Point& b = s.points[i];
    area += 0.5 * (a.y + b.y) * (b.z - a.z);
  }
  return area;
}

double section_centroid_z(const SectionOffsets& s) {
  double moment = 0.0;
  for (std::size_t i = 1; i < s.points.size(); ++i) {
    const Point& a = s.points[i - 1];
    const Point& b = s.points[i];
    moment += 0.5 * (a.y * a.z + b.y * b.z) * (b.z - a.z);
  }
  const double area = section_area(s);
  if (area == 0.0) {
    return 0.5 * (s.points.front().z + s.points.back().z);
  }
  return moment / area;
}

PressureField synth_pressure_field(const HullVariant& variant, int height, int width) {
  if (height < 16 || width < 16) {
    throw std::invalid_argument("pressure field needs at least 16x16 pixels");
  }
  if (variant.sections.size() != kSections) {
    throw std::invalid_argument("variant must have 14 sections");
  }
  constexpr double kXMin = -10.0;   // m
  constexpr double kXMax = 165.0;   // m
  constexpr double kSigmaZ = 0.2 * hullgeom::kMaxDepth;
  const double area_ref = hullgeom::kMaxHalfBreadth * hullgeom::kMaxDepth;

  struct Source {
    double amplitude, x, z, sigma_x;
  };
  std::vector<Source> sources;
  double prev_area = section_area(variant.sections[0]);
  for (int k = 1; k < kSections; ++k) {
    const double area = section_area(variant.sections[k]);
    const double x0 = kStationX[k - 1];
    const double x1 = kStationX[k];
    sources.push_back(Source{(area - prev_area) / area_ref, 0.5 * (x0 + x1),
                             section_centroid_z(variant.sections[k]),
                             std::max(6.0, 0.6 * (x1 - x0))});
    prev_area = area;
  }

  PressureField f{height, width, std::vector<double>(static_cast<std::size_t>(height) * width)};
  for (int r = 0; r < height; ++r) {
    const double z = hullgeom::kMaxDepth * (1.0 - (r + 0.5) / height);
    for (int c = 0; c < width; ++c) {
      const double x = kXMin + (kXMax - kXMin) * (c + 0.5) / width;
      double v = 0.0;
      for (const Source& s : sources) {
        const double dx = (x - s.x) / s.sigma_x;
        const double dz = (z - s.z) / kSigmaZ;
        v += s.amplitude * std::exp(-0.5 * (dx * dx + dz * dz));
      }
      f.values[static_cast<std::size_t>(r) * width + c] = v;
    }
  }
  return f;
}

int level_count(ImageCase c) {
  return (c == ImageCase::kCase1 || c == ImageCase::kCase1_1) ? 35 : 25;
}

bool with_lines(ImageCase c) { return c == ImageCase::kCase1_1 || c == ImageCase::kCase2_1; }

std::string case_tag(ImageCase c) {
  switch (c) {
    case ImageCase::kCase1: return "Case1";
    case ImageCase::kCase1_1: return "Case1-1";
    case ImageCase::kCase2: return "Case2";
    case ImageCase::kCase2_1: return "Case2-1";
  }
  return "Case2";
}

std::string case_flag(ImageCase c) {
  std::string tag = case_tag(c);
  tag[0] = 'c';
  return tag;
}

ImageCase parse_case(const std::string& text) {
  for (const ImageCase c :
       {ImageCase::kCase1, ImageCase::kCase1_1, ImageCase::kCase2, ImageCase::kCase2_1}) {
    if (text == case_tag(c) || text == case_flag(c)) return c;
  }
  throw std::invalid_argument("unknown image case '" + text +
                              "' (expected case1|case1-1|case2|case2-1)");
}

std::vector<int> contour_bins(const PressureField& field, int levels) {
  if (levels < 2) {
    throw std::invalid_argument("level_count must be >= 2");
  }
  const auto [lo_it, hi_it] = std::minmax_element(field.values.begin(), field.values.end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  std::vector<int> bins(field.values.size(), 0);
  if (!(span > 0.0)) return bins;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const int b = static_cast<int>(std::floor((field.values[i] - lo) / span * levels));
    bins[i] = std::clamp(b, 0, levels - 1);
  }
  return bins;
}

ContourImage render_contours(const PressureField& field, int levels, bool lines) {
  const auto bins = contour_bins(field, levels);
  ContourImage img;
  img.height = field.height;
  img.width = field.width;
  img.level_count = levels;
  img.with_lines = lines;
  img.case_tag = levels == 35 ? (lines ? ImageCase::kCase1_1 : ImageCase::kCase1)
                              : (lines ? ImageCase::kCase2_1 : ImageCase::kCase2);
  img.pixels.resize(bins.size());
  for (std::size_t i = 0; i < bins.size(); ++i) {
    img.pixels[i] = static_cast<double>(bins[i]) / (levels - 1);
  }
  if (lines) {
    const int h = field.height;
    const int w = field.width;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const int b = bins[static_cast<std::size_t>(r) * w + c];
        const bool boundary = (r > 0 && bins[(r - 1) * w + c] > b) ||
                              (r + 1 < h && bins[(r + 1) * w + c] > b) ||
                              (c > 0 && bins[r * w + c - 1] > b) ||
                              (c + 1 < w && bins[r * w + c + 1] > b);
        if (boundary) img.pixels[static_cast<std::size_t>(r) * w + c] = 0.0;
      }
    }
  }
  return img;
}

ContourImage render_case(const PressureField& field, ImageCase c) {
  ContourImage img = render_contours(field, level_count(c), with_lines(c));
  img.case_tag = c;
  return img;
}

LabelVector make_labels(const HullVariant& variant, int n, double tol) {
  std::vector<ControlPolygon> polygons;
  polygons.reserve(variant.sections.size());
  for (const auto& section : variant.sections) {
    const auto trimmed = hullgeom::remove_straight_segments(section, tol);
    polygons.push_back(hullgeom::fit_control_points(trimmed, n));
  }
  return labels_from_polygons(polygons);
}

}  // namespace hullinv::synth

namespace hullinv {

LabelVector labels_from_polygons(const std::vector<hullgeom::ControlPolygon>& polygons) {
  LabelVector label;
  label.sections = static_cast<int>(polygons.size());
  label.controls = polygons.empty() ? 0 : static_cast<int>(polygons.front().controls.size());
  label.values.reserve(label_length(label.sections, label.controls));
  for (const auto& q : polygons) {
    if (static_cast<int>(q.controls.size()) != label.controls) {
      throw std::invalid_argument("all sections must have the same control count");
    }
    for (const auto& p : q.controls) {
      label.values.push_back(p.y);
      label.values.push_back(p.z);
    }
  }
  return label;
}

std::vector<hullgeom::ControlPolygon> polygons_from_labels(const LabelVector& label) {
  if (label.values.size() != label_length(label.sections, label.controls)) {
    throw std::invalid_argument("label length does not match sections x controls");
  }
  std::vector<hullgeom::ControlPolygon> out(static_cast<std::size_t>(label.sections));
  for (int k = 0; k < label.sections; ++k) {
    out[k].section_index = k;
    const auto slice = label.task(k);
    out[k].controls.reserve(static_cast<std::size_t>(label.controls));
    for (int j = 0; j < label.controls; ++j) {
      out[k].controls.push_back(hullgeom::Point{slice[2 * j], slice[2 * j + 1]});
    }
  }
  return out;
}

}  // namespace hullinv
