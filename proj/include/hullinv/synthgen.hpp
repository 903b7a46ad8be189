#pragma once

// Synthetic stern family and surrogate pressure images.
//
// A variant is fourteen stern sections built from a few named shape
// parameters. Each section is a power-law profile from keel (or transom
// bottom) to deck with an optional Gaussian bulb bump; the 8 m station
// contributes two sections (index 2 the transom part, index 3 the stern-bulb
// part). The pressure surrogate superposes Gaussian sources between adjacent
// stations whose amplitude is the change in section area, and images are the
// field quantised into contour levels.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hullinv/hullgeom.hpp"
#include "hullinv/labels.hpp"

namespace hullinv::synth {

inline constexpr int kSections = 14;
inline constexpr int kPointsPerSection = 50;

// Longitudinal station of each section, metres from the aft perpendicular.
inline constexpr std::array<double, kSections> kStationX = {
    -5.5, 0.0, 8.0, 8.0, 16.0, 24.0, 32.0, 40.0, 48.0, 64.0, 80.0, 96.0, 112.0, 160.0};

using ShapeParams = std::map<std::string, double>;

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
  double mid() const { return 0.5 * (lo + hi); }
};

using ParamRanges = std::map<std::string, ParamRange>;

// bulb_scale, transom_width_scale, aft_fullness, fwd_fullness.
const ParamRanges& documented_ranges();
ShapeParams baseline_params();

class RangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HullVariant {
  int variant_id = 0;
  std::uint64_t seed = 0;
  ShapeParams params;
  std::vector<hullgeom::SectionOffsets> sections;
};

// Deterministic sections for explicit parameters. Throws RangeError for an
// unknown name or a value outside documented_ranges().
HullVariant make_variant(const ShapeParams& params, int variant_id = 0, std::uint64_t seed = 0);

// Parameters named in `ranges` are drawn uniformly from them; the rest come
// from `baseline`. Ranges must be bounded and inside the documented limits.
HullVariant generate_variant(std::uint64_t seed, const ShapeParams& baseline,
                             const ParamRanges& ranges, int variant_id = 0);

// Half-section area (mm^2) and its z centroid (mm), by the trapezoid rule.
double section_area(const hullgeom::SectionOffsets& s);
double section_centroid_z(const hullgeom::SectionOffsets& s);

struct PressureField {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // row-major; row 0 is the deck, column 0 is aft
};

PressureField synth_pressure_field(const HullVariant& variant, int height, int width);

enum class ImageCase { kCase1, kCase1_1, kCase2, kCase2_1 };

int level_count(ImageCase c);
bool with_lines(ImageCase c);
std::string case_tag(ImageCase c);     // "Case1", "Case1-1", ...
std::string case_flag(ImageCase c);    // "case1", "case1-1", ...
ImageCase parse_case(const std::string& text);  // accepts either form

struct ContourImage {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // in [0, 1]
  int level_count = 0;
  bool with_lines = false;
  ImageCase case_tag = ImageCase::kCase2;
};

// Quantisation bin of every pixel, in [0, level_count).
std::vector<int> contour_bins(const PressureField& field, int level_count);

// Pixels take bin / (level_count - 1). With lines, a pixel that has a 4-neighbour
// in a higher bin is drawn black (0.0), giving one-pixel boundaries.
ContourImage render_contours(const PressureField& field, int level_count, bool with_lines);
ContourImage render_case(const PressureField& field, ImageCase c);

LabelVector make_labels(const HullVariant& variant, int n = hullgeom::kDefaultControls - 1,
                        double tol = hullgeom::kDefaultStraightTol);

}  // namespace hullinv::synth
