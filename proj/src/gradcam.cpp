#include "hullinv/gradcam.hpp"

#include <algorithm>

namespace hullinv::gradcam {

namespace {
constexpr double kOverlayAlpha = 0.6;
}

GradCamDetail gradcam_detail(const model::ModelParams& params, const tensor::Tensor& image,
                             int task_index, double target_scale) {
  if (!model::is_multi_task(params.spec.variant)) {
    throw GradCamError("Grad-CAM is unsupported for the single-task model (no task branches)");
  }
  if (task_index < 0 || task_index >= params.spec.sections) {
    throw GradCamError("task index " + std::to_string(task_index) + " out of range [0, " +
                       std::to_string(params.spec.sections) + ")");
  }
  tensor::Tape tape;
  const auto fwd = model::forward(&tape, params, image);
  tensor::Tensor target =
      tensor::scale(&tape, tensor::sum(&tape, fwd.task_outputs[task_index]), target_scale);
  const tensor::Tensor& act = fwd.shared_features;
  act.mutable_grad();  // ensure a (zero) gradient exists even if nothing flows back
  tape.backward(target);

  const std::size_t channels = act.dim(0);
  const std::size_t h = act.dim(1);
  const std::size_t w = act.dim(2);
  const std::size_t plane = h * w;
  const auto a = act.values();
  const auto g = act.grad();

  GradCamDetail out;
  out.channel_weights.assign(channels, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += g[c * plane + i];
    out.channel_weights[c] = s / static_cast<double>(plane);
  }
  out.raw.assign(plane, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) out.raw[i] += out.channel_weights[c] * a[c * plane + i];
  }
  for (double& v : out.raw) v = std::max(v, 0.0);

  Heatmap& hm = out.heatmap;
  hm.task_index = task_index;
  hm.height = static_cast<int>(h);
  hm.width = static_cast<int>(w);
  hm.values = out.raw;
  const double peak = *std::max_element(hm.values.begin(), hm.values.end());
  if (peak > 0.0) {
    for (double& v : hm.values) v /= peak;
  }
  return out;
}

Heatmap gradcam(const model::ModelParams& params, const tensor::Tensor& image, int task_index) {
  return gradcam_detail(params, image, task_index).heatmap;
}

std::vector<double> upsample(const Heatmap& heatmap, int height, int width) {
  if (heatmap.height <= 0 || heatmap.width <= 0) throw GradCamError("empty heatmap");
  std::vector<double> out(static_cast<std::size_t>(height) * width);
  for (int r = 0; r < height; ++r) {
    const int sr = r * heatmap.height / height;
    for (int c = 0; c < width; ++c) {
      const int sc = c * heatmap.width / width;
      out[static_cast<std::size_t>(r) * width + c] = heatmap.values[sr * heatmap.width + sc];
    }
  }
  return out;
}

pgm::Image overlay(const Heatmap& heatmap, const synth::ContourImage& image) {
  if (image.height < heatmap.height || image.width < heatmap.width) {
    throw GradCamError("image is smaller than the heatmap");
  }
  if (image.pixels.size() != static_cast<std::size_t>(image.height) * image.width) {
    throw GradCamError("image pixel count does not match its dimensions");
  }
  const auto heat = upsample(heatmap, image.height, image.width);
  std::vector<double> blended(heat.size());
  for (std::size_t i = 0; i < heat.size(); ++i) {
    const double p = image.pixels[i];
    blended[i] = p + kOverlayAlpha * heat[i] * (1.0 - p);
  }
  return pgm::from_unit(image.height, image.width, blended);
}

void write_overlay(const std::filesystem::path& path, const Heatmap& heatmap,
                   const synth::ContourImage& image) {
  pgm::write(path, overlay(heatmap, image));
}

}  // namespace hullinv::gradcam
