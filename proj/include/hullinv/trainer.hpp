#pragma once

// Adam, the step learning-rate schedule, and the batch-size-1 training loop.
//
// One Adam step at timestep t (after incrementing t):
//   lr_t = base_lr * sqrt(1 - beta2^t) / (1 - beta1^t)
//   m    = beta1 * m + (1 - beta1) * g
//   v    = beta2 * v + (1 - beta2) * g^2
//   w    = w - lr_t * m / (sqrt(v) + eps)

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hullinv/dataset.hpp"
#include "hullinv/model.hpp"

namespace hullinv::train {

class TrainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  // Zero moments sized like `sizes`.
  static AdamState zeros(std::span<const std::size_t> sizes);
  static AdamState for_model(const model::ModelParams& params);
};

// Bias-corrected step size for the timestep t (t >= 1).
double adam_lr(const AdamState& state, double base_lr);

// Updates every parameter block in place. Throws TrainError on a non-finite
// gradient before anything is modified.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state, double base_lr);

// Same, over a model's parameters and their accumulated gradients. Parameters
// with no gradient yet are treated as having a zero gradient.
void adam_step(model::ModelParams& params, AdamState& state, double base_lr);

struct LrSchedule {
  double initial = 1e-4;
  int decay_every = 100;
  double decay_factor = 0.1;

  double at(int epoch) const;
};

// Default schedule: 1e-4 * 10^-(epoch / 100).
double lr_schedule(int epoch);

enum class LossKind { kAuto, kSingle, kMulti };
std::string loss_kind_name(LossKind k);
LossKind parse_loss_kind(const std::string& text);

struct TrainConfig {
  int epochs = 500;
  int patience = 20;  // stop once validation has not improved for more than this many epochs
  double dropout = 0.5;
  std::uint64_t seed = 0;  // init, dropout and shuffle substreams derive from it
  LossKind loss = LossKind::kAuto;  // auto: multi for multi-task variants
  LrSchedule schedule;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double base_lr = 0.0;
};

// Everything needed to continue training bit-for-bit.
struct Checkpoint {
  model::ModelParams params;
  AdamState adam;
  int epoch = 0;            // epochs completed
  double best_val = 0.0;    // best validation loss so far
  int best_epoch = -1;
  int since_best = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws TrainError on a bad magic/version, truncated data or a spec mismatch
// when `expected` is given.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const model::ArchitectureSpec* expected = nullptr);

struct TrainOptions {
  // When set, `best.ckpt` and `last.ckpt` are written here.
  std::filesystem::path checkpoint_dir;
  // Continue from this state instead of a fresh build.
  const Checkpoint* resume = nullptr;
  // The best snapshot of the interrupted run, kept as best until beaten.
  const Checkpoint* resume_best = nullptr;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Checkpoint best;
  Checkpoint last;
  std::vector<EpochRecord> history;
  bool stopped_early = false;
};

struct Example {
  tensor::Tensor image;        // [1, H, W], standardized
  std::vector<double> target;  // standardized label
};

std::vector<Example> make_examples(std::span<const data::Sample* const> samples,
                                   const data::Normalization& norm);
tensor::Tensor image_tensor(const synth::ContourImage& image);
// The network input for `image`: pixels standardized with `norm`.
tensor::Tensor input_tensor(const synth::ContourImage& image, const data::Normalization& norm);

// Loss for one example under `kind` (kAuto resolved against the variant).
double example_loss(const model::ModelParams& params, const Example& ex, LossKind kind);

TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set,
                  const model::ArchitectureSpec& spec, const TrainConfig& config,
                  const TrainOptions& options = {});

// Convenience over a dataset's train and val splits.
TrainResult train(const data::Dataset& dataset, const model::ArchitectureSpec& spec,
                  const TrainConfig& config, const TrainOptions& options = {});

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history);
std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path);

}  // namespace hullinv::train
