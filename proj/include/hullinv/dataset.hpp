#pragma once

// On-disk corpus of (contour image, control-point label, truth offsets).
//
// Layout of a dataset directory:
//   dataset.cfg          generator settings, key=value
//   manifest.txt         one sample per line: id seed split image_path label_path
//   normalization.txt    label and pixel statistics, train split only
//   images/sample_NNNNN.pgm   8-bit contour image
//   images/sample_NNNNN.meta  sidecar: case_tag, level_count, with_lines
//   labels/sample_NNNNN.ctl   control polygons, mm
//   offsets/sample_NNNNN.off  truth section offsets, mm

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hullinv/hullgeom.hpp"
#include "hullinv/labels.hpp"
#include "hullinv/synthgen.hpp"

namespace hullinv::data {

enum class Split { kTrain, kVal, kTest };
std::string split_name(Split s);
Split parse_split(const std::string& text);

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct DatasetConfig {
  int count = 10;
  std::uint64_t seed = 0;
  SplitFractions split;
  int height = 64;
  int width = 64;
  synth::ImageCase image_case = synth::ImageCase::kCase2;
  int controls = hullgeom::kDefaultControls;
  double straight_tol = hullgeom::kDefaultStraightTol;
};

// Fitted on the training split. Labels: per-entry mean, one scale for all y
// entries and one for all z entries. Images: per-pixel mean and one pooled
// scale, so the network sees how an image departs from the typical one.
struct Normalization {
  std::vector<double> mean;
  double scale_y = 1.0;
  double scale_z = 1.0;
  std::vector<double> pixel_mean;
  double pixel_scale = 1.0;

  std::vector<double> normalize(std::span<const double> mm) const;
  std::vector<double> denormalize(std::span<const double> standardized) const;
  // Identity when no pixel statistics are present.
  std::vector<double> standardize_image(std::span<const double> pixels) const;
};

void write_normalization(const std::filesystem::path& path, const Normalization& norm);
Normalization read_normalization(const std::filesystem::path& path);

struct Sample {
  int id = 0;
  std::uint64_t seed = 0;
  Split split = Split::kTrain;
  synth::ContourImage image;
  LabelVector label;  // mm
  std::vector<hullgeom::SectionOffsets> offsets;
};

struct Dataset {
  DatasetConfig config;
  std::vector<Sample> samples;
  Normalization norm;

  std::vector<const Sample*> split(Split s) const;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t sample_seed(std::uint64_t dataset_seed, int id);

// Split sizes: every split with a positive fraction gets at least one sample,
// validation and test are rounded, training takes the remainder.
std::vector<Split> assign_splits(int count, const SplitFractions& fractions, std::uint64_t seed);

Sample make_sample(const DatasetConfig& config, int id, Split split);
Normalization fit_normalization(std::span<const Sample* const> train);

// Generates every sample in memory, in id order.
Dataset generate_dataset(const DatasetConfig& config, int workers = 1);

// Writes a dataset directory. Refuses an existing non-empty directory unless
// `overwrite` is set. Output bytes do not depend on `workers`.
Dataset build_dataset(const DatasetConfig& config, const std::filesystem::path& dir,
                      bool overwrite = false, int workers = 1);

Dataset load_dataset(const std::filesystem::path& dir);

synth::ContourImage read_contour_image(const std::filesystem::path& pgm_path);
void write_contour_image(const std::filesystem::path& pgm_path, const synth::ContourImage& image);

}  // namespace hullinv::data
