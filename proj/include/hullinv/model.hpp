#pragma once

// VGG-style regressors from contour image to control points.
//
// The trunk is five conv blocks (2, 2, 3, 3, 3 layers of 3x3 conv + ReLU, each
// block ending in 2x2 max pooling) with 64/128/256/512/512 channels at
// width_factor 1. The single-task model ends in FC 4096 -> 1000 -> A. The
// multi-task models share the trunk and give each of the S sections its own
// FC 512 -> 512 -> 2(n+1) head; conv4fc3 additionally moves block 5 into every
// task and conv8fc3 moves blocks 4 and 5.

#include <cstdint>
#include <string>
#include <vector>

#include "hullinv/labels.hpp"
#include "hullinv/tensor.hpp"

namespace hullinv::model {

enum class Variant { kSingle, kMtConv0Fc3, kMtConv4Fc3, kMtConv8Fc3 };

std::string variant_name(Variant v);  // single, mt-conv0fc3, mt-conv4fc3, mt-conv8fc3
Variant parse_variant(const std::string& text);
bool is_multi_task(Variant v);

struct ArchitectureSpec {
  Variant variant = Variant::kMtConv0Fc3;
  int input_h = 64;
  int input_w = 64;
  double width_factor = 0.125;
  int sections = 14;
  int controls = 23;  // n + 1

  int output_size() const { return 2 * controls * sections; }
  int task_output_size() const { return 2 * controls; }

  // One line, e.g. "variant=mt-conv0fc3 input=64x64 width=0.125 sections=14 controls=23".
  std::string to_text() const;
  static ArchitectureSpec from_text(const std::string& text);

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

class ArchitectureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kSharedOwner = -1;

struct ParamDef {
  std::string name;
  int owner = kSharedOwner;  // kSharedOwner or a task index
  tensor::Shape shape;
  std::size_t fan_in = 0;  // 0 for biases
};

struct FeatureShape {
  int channels = 0;
  int height = 0;
  int width = 0;
  friend bool operator==(const FeatureShape&, const FeatureShape&) = default;
};

// The scaled width of a Table-style channel or node count; throws
// ArchitectureError when it rounds below 1.
int scaled_width(int full_width, double width_factor);

// Every parameter of the architecture, in construction order. Validates the
// spec without allocating weights.
std::vector<ParamDef> layer_plan(const ArchitectureSpec& spec);
std::size_t parameter_count(const ArchitectureSpec& spec);

// Feature map after the input and after each of the five conv blocks.
std::vector<FeatureShape> trunk_shapes(const ArchitectureSpec& spec);

// Index (1-based) of the last conv block that all tasks share.
int last_shared_block(Variant v);

class ModelParams {
 public:
  struct Entry {
    std::string name;
    int owner = kSharedOwner;
    tensor::Tensor tensor;
  };

  ArchitectureSpec spec;
  std::vector<Entry> entries;

  const tensor::Tensor& get(const std::string& name) const;
  tensor::Tensor& get(const std::string& name);
  bool contains(const std::string& name) const;
  std::size_t total_count() const;
  std::vector<std::string> names_for_owner(int owner) const;
  void zero_grad();
};

// He-normal weights from a per-parameter substream of `seed`; zero biases.
ModelParams build(const ArchitectureSpec& spec, std::uint64_t seed);

struct ForwardOptions {
  bool training = false;
  double dropout_rate = 0.5;  // applied after FC1 and FC2 only
  std::uint64_t dropout_seed = 0;
};

struct ForwardResult {
  // One tensor of 2(n+1) values per task for multi-task models, one tensor of
  // A values for the single-task model.
  std::vector<tensor::Tensor> task_outputs;
  // All outputs in label order, length A.
  tensor::Tensor prediction;
  // ReLU activation of the last shared conv layer, before its pooling.
  tensor::Tensor shared_features;
};

// image is [1, H, W].
ForwardResult forward(tensor::Tape* tape, const ModelParams& params, const tensor::Tensor& image,
                      const ForwardOptions& options = {});

// Mean squared error over all A outputs (per-sample single-task loss).
tensor::Tensor loss_single(tensor::Tape* tape, const tensor::Tensor& y,
                           const tensor::Tensor& y_hat);
// Mean over S equal task blocks of each block's mean squared error.
tensor::Tensor loss_multi(tensor::Tape* tape, const tensor::Tensor& y, const tensor::Tensor& y_hat,
                          int sections);

// Per-task MSE values, without recording.
std::vector<double> per_task_losses(std::span<const double> y, std::span<const double> y_hat,
                                    int sections);

}  // namespace hullinv::model
