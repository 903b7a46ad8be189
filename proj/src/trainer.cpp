#include "hullinv/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "hullinv/rng.hpp"
#include "hullinv/simd.hpp"

namespace hullinv::train {

using model::ModelParams;
using tensor::Tape;
using tensor::Tensor;

AdamState AdamState::zeros(std::span<const std::size_t> sizes) {
  AdamState s;
  for (std::size_t n : sizes) {
    s.m.emplace_back(n, 0.0);
    s.v.emplace_back(n, 0.0);
  }
  return s;
}

AdamState AdamState::for_model(const ModelParams& params) {
  std::vector<std::size_t> sizes;
  for (const auto& e : params.entries) sizes.push_back(e.tensor.size());
  return zeros(sizes);
}

double adam_lr(const AdamState& state, double base_lr) {
  const double t = static_cast<double>(state.t);
  return base_lr * std::sqrt(1.0 - std::pow(state.beta2, t)) / (1.0 - std::pow(state.beta1, t));
}

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, AdamState& state, double base_lr) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw TrainError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() || params[b].size() != state.m[b].size() ||
        params[b].size() != state.v[b].size()) {
      throw TrainError("adam_step: size mismatch in block " + std::to_string(b));
    }
    for (std::size_t i = 0; i < grads[b].size(); ++i) {
      if (!std::isfinite(grads[b][i])) {
        throw TrainError("adam_step: non-finite gradient in block " + std::to_string(b) +
                         " at element " + std::to_string(i));
      }
    }
  }
  ++state.t;
  const double lr = adam_lr(state, base_lr);
  const auto& k = simd::kernels();
  for (std::size_t b = 0; b < params.size(); ++b) {
    k.adam_update(params[b].size(), params[b].data(), state.m[b].data(), state.v[b].data(),
                  grads[b].data(), state.beta1, state.beta2, lr, state.eps);
  }
}

void adam_step(ModelParams& params, AdamState& state, double base_lr) {
  std::vector<std::span<double>> w;
  std::vector<std::span<const double>> g;
  std::vector<std::vector<double>> zero_grads;
  zero_grads.reserve(params.entries.size());
  for (auto& e : params.entries) {
    w.push_back(e.tensor.mutable_values());
    if (e.tensor.has_grad()) {
      g.push_back(e.tensor.grad());
    } else {
      zero_grads.emplace_back(e.tensor.size(), 0.0);
      g.push_back(zero_grads.back());
    }
  }
  adam_step(w, g, state, base_lr);
}

double LrSchedule::at(int epoch) const {
  if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
  if (decay_every <= 0) return initial;
  return initial * std::pow(decay_factor, epoch / decay_every);
}

double lr_schedule(int epoch) {
  if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
  // 10^-k computed as a division keeps the documented values exact.
  return 1e-4 / std::pow(10.0, epoch / 100);
}

std::string loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::kAuto: return "auto";
    case LossKind::kSingle: return "single";
    case LossKind::kMulti: return "multi";
  }
  return "auto";
}

LossKind parse_loss_kind(const std::string& text) {
  if (text == "auto") return LossKind::kAuto;
  if (text == "single") return LossKind::kSingle;
  if (text == "multi") return LossKind::kMulti;
  throw std::invalid_argument("unknown loss '" + text + "' (expected auto, single or multi)");
}

tensor::Tensor image_tensor(const synth::ContourImage& image) {
  return Tensor({1, static_cast<std::size_t>(image.height), static_cast<std::size_t>(image.width)},
                image.pixels);
}

tensor::Tensor input_tensor(const synth::ContourImage& image, const data::Normalization& norm) {
  return Tensor({1, static_cast<std::size_t>(image.height), static_cast<std::size_t>(image.width)},
                norm.standardize_image(image.pixels));
}

std::vector<Example> make_examples(std::span<const data::Sample* const> samples,
                                   const data::Normalization& norm) {
  std::vector<Example> out;
  out.reserve(samples.size());
  for (const data::Sample* s : samples) {
    out.push_back({input_tensor(s->image, norm), norm.normalize(s->label.values)});
  }
  return out;
}

namespace {

LossKind resolve(LossKind kind, const model::ArchitectureSpec& spec) {
  if (kind != LossKind::kAuto) return kind;
  return model::is_multi_task(spec.variant) ? LossKind::kMulti : LossKind::kSingle;
}

Tensor loss_of(Tape* tape, const model::ArchitectureSpec& spec, LossKind kind, const Tensor& y,
               const Tensor& y_hat) {
  if (resolve(kind, spec) == LossKind::kMulti) {
    return model::loss_multi(tape, y, y_hat, spec.sections);
  }
  return model::loss_single(tape, y, y_hat);
}

Tensor target_tensor(const Example& ex) { return Tensor({ex.target.size()}, ex.target); }

double mean_loss(const ModelParams& params, std::span<const Example> set, LossKind kind) {
  double total = 0.0;
  for (const auto& ex : set) total += example_loss(params, ex, kind);
  return total / static_cast<double>(set.size());
}

ModelParams clone(const ModelParams& p) {
  ModelParams out;
  out.spec = p.spec;
  for (const auto& e : p.entries) {
    const auto v = e.tensor.values();
    out.entries.push_back(
        {e.name, e.owner, Tensor(e.tensor.shape(), std::vector<double>(v.begin(), v.end()), true)});
  }
  return out;
}

Checkpoint snapshot(const ModelParams& params, const AdamState& adam, int epoch, double best_val,
                    int best_epoch, int since_best) {
  return Checkpoint{clone(params), adam, epoch, best_val, best_epoch, since_best};
}

}  // namespace

double example_loss(const ModelParams& params, const Example& ex, LossKind kind) {
  const auto fwd = model::forward(nullptr, params, ex.image);
  return loss_of(nullptr, params.spec, kind, target_tensor(ex), fwd.prediction).item();
}

TrainResult train(std::span<const Example> train_set, std::span<const Example> val_set,
                  const model::ArchitectureSpec& spec, const TrainConfig& config,
                  const TrainOptions& options) {
  if (train_set.empty()) throw TrainError("training split is empty");
  if (val_set.empty()) throw TrainError("validation split is empty");
  if (config.epochs < 1) throw TrainError("epochs must be positive");
  if (config.patience < 0) throw TrainError("patience must be >= 0");
  if (config.dropout < 0.0 || config.dropout >= 1.0) throw TrainError("dropout must be in [0, 1)");
  const std::size_t label_len = static_cast<std::size_t>(spec.output_size());
  for (const auto& ex : train_set) {
    if (ex.target.size() != label_len) {
      throw TrainError("label length " + std::to_string(ex.target.size()) +
                       " does not match the architecture's " + std::to_string(label_len));
    }
  }

  ModelParams params;
  AdamState adam;
  int start_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int since_best = 0;
  if (options.resume) {
    if (!(options.resume->params.spec == spec)) {
      throw TrainError("resume checkpoint architecture differs: " +
                       options.resume->params.spec.to_text() + " vs " + spec.to_text());
    }
    params = clone(options.resume->params);
    adam = options.resume->adam;
    start_epoch = options.resume->epoch;
    best_val = options.resume->best_val;
    best_epoch = options.resume->best_epoch;
    since_best = options.resume->since_best;
  } else {
    params = model::build(spec, derive_seed(config.seed, "init"));
    adam = AdamState::for_model(params);
  }

  TrainResult result;
  if (options.resume && options.resume_best) {
    if (!(options.resume_best->params.spec == spec)) {
      throw TrainError("resume best checkpoint architecture differs: " +
                       options.resume_best->params.spec.to_text() + " vs " + spec.to_text());
    }
    result.best = *options.resume_best;
  }
  const bool write_ckpt = !options.checkpoint_dir.empty();
  if (write_ckpt) std::filesystem::create_directories(options.checkpoint_dir);

  std::vector<std::size_t> order(train_set.size());
  for (int epoch = start_epoch; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.below(i)]);
    }

    const double base_lr = config.schedule.at(epoch);
    const std::uint64_t epoch_dropout =
        derive_seed(config.seed, "dropout", static_cast<std::uint64_t>(epoch));
    double train_total = 0.0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const Example& ex = train_set[order[step]];
      Tape tape;
      model::ForwardOptions fo;
      fo.training = true;
      fo.dropout_rate = config.dropout;
      fo.dropout_seed = derive_seed(epoch_dropout, "step", step);
      const auto fwd = model::forward(&tape, params, ex.image, fo);
      Tensor loss = loss_of(&tape, spec, config.loss, target_tensor(ex), fwd.prediction);
      const double lv = loss.item();
      if (!std::isfinite(lv)) {
        throw TrainError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      train_total += lv;
      params.zero_grad();
      tape.backward(loss);
      adam_step(params, adam, base_lr);
    }
    params.zero_grad();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_total / static_cast<double>(order.size());
    rec.val_loss = mean_loss(params, val_set, config.loss);
    rec.base_lr = base_lr;
    if (!std::isfinite(rec.val_loss)) {
      throw TrainError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);

    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      best_epoch = epoch;
      since_best = 0;
      result.best = snapshot(params, adam, epoch + 1, best_val, best_epoch, since_best);
      if (write_ckpt) save_checkpoint(options.checkpoint_dir / "best.ckpt", result.best);
    } else {
      ++since_best;
    }
    if (since_best > config.patience) {
      result.stopped_early = true;
      result.last = snapshot(params, adam, epoch + 1, best_val, best_epoch, since_best);
      break;
    }
    if (epoch + 1 == config.epochs) {
      result.last = snapshot(params, adam, epoch + 1, best_val, best_epoch, since_best);
    }
  }
  if (result.last.params.entries.empty()) {
    // Resumed at or past the final epoch.
    result.last = snapshot(params, adam, start_epoch, best_val, best_epoch, since_best);
  }
  if (result.best.params.entries.empty()) result.best = result.last;
  if (write_ckpt) save_checkpoint(options.checkpoint_dir / "last.ckpt", result.last);
  return result;
}

TrainResult train(const data::Dataset& dataset, const model::ArchitectureSpec& spec,
                  const TrainConfig& config, const TrainOptions& options) {
  const auto tr = dataset.split(data::Split::kTrain);
  const auto va = dataset.split(data::Split::kVal);
  if (tr.empty()) throw TrainError("dataset has no training samples");
  if (va.empty()) throw TrainError("dataset has no validation samples");
  const auto train_set = make_examples(tr, dataset.norm);
  const auto val_set = make_examples(va, dataset.norm);
  return train(train_set, val_set, spec, config, options);
}

void write_history_csv(const std::filesystem::path& path, std::span<const EpochRecord> history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TrainError("cannot write " + path.string());
  out << "epoch,train_loss,val_loss,base_lr\n";
  char buf[128];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_loss,
                  r.base_lr);
    out << buf;
  }
}

std::vector<EpochRecord> read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw TrainError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train_loss,val_loss,base_lr") {
    throw TrainError(path.string() + ": not a loss history file");
  }
  std::vector<EpochRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    EpochRecord r;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf", &r.epoch, &r.train_loss, &r.val_loss,
                    &r.base_lr) != 4) {
      throw TrainError(path.string() + ":" + std::to_string(lineno) + ": malformed record");
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace hullinv::train
