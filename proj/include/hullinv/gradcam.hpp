#pragma once

// Per-task Grad-CAM for the multi-task regressors.
//
// The target scalar for task k is the sum of its outputs. The activation map is
// the ReLU output of the last shared conv layer (before that block's pooling).

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "hullinv/model.hpp"
#include "hullinv/pgm.hpp"
#include "hullinv/synthgen.hpp"

namespace hullinv::gradcam {

class GradCamError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Heatmap {
  int task_index = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;  // in [0, 1]; max is 1 unless all zero
};

struct GradCamDetail {
  Heatmap heatmap;
  std::vector<double> channel_weights;
  std::vector<double> raw;  // ReLU(sum_c w_c A_c) before normalization
};

// `target_scale` multiplies the target scalar; the normalized map does not
// depend on it. The backward pass also accumulates into the parameters'
// gradient buffers.
GradCamDetail gradcam_detail(const model::ModelParams& params, const tensor::Tensor& image,
                             int task_index, double target_scale = 1.0);
Heatmap gradcam(const model::ModelParams& params, const tensor::Tensor& image, int task_index);

// Nearest-neighbour resize to the image resolution.
std::vector<double> upsample(const Heatmap& heatmap, int height, int width);

// out = image + 0.6 * heat * (1 - image), 8-bit.
pgm::Image overlay(const Heatmap& heatmap, const synth::ContourImage& image);
void write_overlay(const std::filesystem::path& path, const Heatmap& heatmap,
                   const synth::ContourImage& image);

}  // namespace hullinv::gradcam
