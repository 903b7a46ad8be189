#include "hullinv/model.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hullinv/rng.hpp"

namespace hullinv::model {

using tensor::Shape;
using tensor::Tape;
using tensor::Tensor;

namespace {

constexpr int kBlocks = 5;
constexpr std::array<int, kBlocks> kConvsPerBlock = {2, 2, 3, 3, 3};
constexpr std::array<int, kBlocks> kBlockChannels = {64, 128, 256, 512, 512};
constexpr int kSingleFc1 = 4096;
constexpr int kSingleFc2 = 1000;
constexpr int kTaskFc = 512;

std::string task_prefix(int k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "task%02d.", k);
  return buf;
}

std::string conv_name(int block, int layer) {
  return "conv" + std::to_string(block) + "_" + std::to_string(layer);
}

// Blocks in [first, last] that run per task.
std::pair<int, int> task_block_range(Variant v) {
  switch (v) {
    case Variant::kMtConv4Fc3: return {5, 5};
    case Variant::kMtConv8Fc3: return {4, 5};
    default: return {0, -1};
  }
}

void check_spec(const ArchitectureSpec& spec) {
  if (spec.sections < 1 || spec.controls < 1) {
    throw ArchitectureError("sections and controls must be positive");
  }
  if (!(spec.width_factor > 0.0) || !std::isfinite(spec.width_factor)) {
    throw ArchitectureError("width_factor must be positive");
  }
  if (spec.input_h < 1 || spec.input_w < 1) {
    throw ArchitectureError("input dimensions must be positive");
  }
}

void append_conv_block(std::vector<ParamDef>& out, const std::string& prefix, int owner, int block,
                       int in_channels, double wf) {
  const int channels = scaled_width(kBlockChannels[block - 1], wf);
  int cin = in_channels;
  for (int layer = 1; layer <= kConvsPerBlock[block - 1]; ++layer) {
    const std::string base = prefix + conv_name(block, layer);
    const std::size_t fan_in = static_cast<std::size_t>(cin) * 9;
    out.push_back({base + ".weight", owner,
                   {static_cast<std::size_t>(channels), static_cast<std::size_t>(cin), 3, 3},
                   fan_in});
    out.push_back({base + ".bias", owner, {static_cast<std::size_t>(channels)}, 0});
    cin = channels;
  }
}

void append_dense(std::vector<ParamDef>& out, const std::string& name, int owner, int din,
                  int dout) {
  out.push_back({name + ".weight", owner,
                 {static_cast<std::size_t>(dout), static_cast<std::size_t>(din)},
                 static_cast<std::size_t>(din)});
  out.push_back({name + ".bias", owner, {static_cast<std::size_t>(dout)}, 0});
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kSingle: return "single";
    case Variant::kMtConv0Fc3: return "mt-conv0fc3";
    case Variant::kMtConv4Fc3: return "mt-conv4fc3";
    case Variant::kMtConv8Fc3: return "mt-conv8fc3";
  }
  return "single";
}

Variant parse_variant(const std::string& text) {
  for (const Variant v : {Variant::kSingle, Variant::kMtConv0Fc3, Variant::kMtConv4Fc3,
                          Variant::kMtConv8Fc3}) {
    if (text == variant_name(v)) return v;
  }
  if (text == "conv0" || text == "conv0fc3") return Variant::kMtConv0Fc3;
  if (text == "conv4" || text == "conv4fc3") return Variant::kMtConv4Fc3;
  if (text == "conv8" || text == "conv8fc3") return Variant::kMtConv8Fc3;
  throw ArchitectureError("unknown architecture variant '" + text +
                          "' (expected single|mt-conv0fc3|mt-conv4fc3|mt-conv8fc3)");
}

bool is_multi_task(Variant v) { return v != Variant::kSingle; }

std::string ArchitectureSpec::to_text() const {
  std::ostringstream s;
  s.precision(17);
  s << "variant=" << variant_name(variant) << " input=" << input_h << 'x' << input_w
    << " width=" << width_factor << " sections=" << sections << " controls=" << controls;
  return s.str();
}

ArchitectureSpec ArchitectureSpec::from_text(const std::string& text) {
  ArchitectureSpec spec;
  std::istringstream in(text);
  std::string tok;
  int seen = 0;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ArchitectureError("bad architecture token '" + tok + "'");
    const std::string key = tok.substr(0, eq);
    const std::string value = tok.substr(eq + 1);
    try {
      if (key == "variant") {
        spec.variant = parse_variant(value);
      } else if (key == "input") {
        const auto x = value.find('x');
        if (x == std::string::npos) throw ArchitectureError("input must be HxW");
        spec.input_h = std::stoi(value.substr(0, x));
        spec.input_w = std::stoi(value.substr(x + 1));
      } else if (key == "width") {
        spec.width_factor = std::stod(value);
      } else if (key == "sections") {
        spec.sections = std::stoi(value);
      } else if (key == "controls") {
        spec.controls = std::stoi(value);
      } else {
        throw ArchitectureError("unknown architecture key '" + key + "'");
      }
    } catch (const std::logic_error& e) {
      if (dynamic_cast<const ArchitectureError*>(&e)) throw;
      throw ArchitectureError("bad value for '" + key + "': " + value);
    }
    ++seen;
  }
  if (seen != 5) throw ArchitectureError("architecture text needs all five keys: " + text);
  return spec;
}

int scaled_width(int full_width, double width_factor) {
  const long w = std::lround(full_width * width_factor);
  if (w < 1) {
    throw ArchitectureError("width_factor " + std::to_string(width_factor) + " scales " +
                            std::to_string(full_width) + " below 1");
  }
  return static_cast<int>(w);
}

std::vector<FeatureShape> trunk_shapes(const ArchitectureSpec& spec) {
  check_spec(spec);
  std::vector<FeatureShape> shapes{{1, spec.input_h, spec.input_w}};
  for (int b = 0; b < kBlocks; ++b) {
    const FeatureShape& prev = shapes.back();
    if (prev.height < 2 || prev.width < 2) {
      throw ArchitectureError("input " + std::to_string(spec.input_h) + "x" +
                              std::to_string(spec.input_w) +
                              " is too small for five pooling stages (need >= 32x32)");
    }
    shapes.push_back(
        {scaled_width(kBlockChannels[b], spec.width_factor), prev.height / 2, prev.width / 2});
  }
  return shapes;
}

int last_shared_block(Variant v) {
  const auto [first, last] = task_block_range(v);
  return last < first ? kBlocks : first - 1;
}

std::vector<ParamDef> layer_plan(const ArchitectureSpec& spec) {
  const auto shapes = trunk_shapes(spec);
  const double wf = spec.width_factor;
  const int shared_last = last_shared_block(spec.variant);
  std::vector<ParamDef> plan;
  for (int b = 1; b <= shared_last; ++b) {
    append_conv_block(plan, "shared.", kSharedOwner, b, shapes[b - 1].channels, wf);
  }
  const FeatureShape& top = shapes.back();
  const int flat = top.channels * top.height * top.width;
  if (spec.variant == Variant::kSingle) {
    const int fc1 = scaled_width(kSingleFc1, wf);
    const int fc2 = scaled_width(kSingleFc2, wf);
    append_dense(plan, "head.fc1", kSharedOwner, flat, fc1);
    append_dense(plan, "head.fc2", kSharedOwner, fc1, fc2);
    append_dense(plan, "head.fc3", kSharedOwner, fc2, spec.output_size());
    return plan;
  }
  const int fc = scaled_width(kTaskFc, wf);
  for (int k = 0; k < spec.sections; ++k) {
    const std::string prefix = task_prefix(k);
    for (int b = shared_last + 1; b <= kBlocks; ++b) {
      append_conv_block(plan, prefix, k, b, shapes[b - 1].channels, wf);
    }
    append_dense(plan, prefix + "fc1", k, flat, fc);
    append_dense(plan, prefix + "fc2", k, fc, fc);
    append_dense(plan, prefix + "fc3", k, fc, spec.task_output_size());
  }
  return plan;
}

std::size_t parameter_count(const ArchitectureSpec& spec) {
  std::size_t n = 0;
  for (const auto& def : layer_plan(spec)) n += tensor::element_count(def.shape);
  return n;
}

const Tensor& ModelParams::get(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e.tensor;
  }
  throw std::out_of_range("no parameter named " + name);
}

Tensor& ModelParams::get(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).get(name));
}

bool ModelParams::contains(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return true;
  }
  return false;
}

std::size_t ModelParams::total_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.tensor.size();
  return n;
}

std::vector<std::string> ModelParams::names_for_owner(int owner) const {
  std::vector<std::string> names;
  for (const auto& e : entries) {
    if (e.owner == owner) names.push_back(e.name);
  }
  return names;
}

void ModelParams::zero_grad() {
  for (auto& e : entries) e.tensor.zero_grad();
}

ModelParams build(const ArchitectureSpec& spec, std::uint64_t seed) {
  ModelParams params;
  params.spec = spec;
  for (const auto& def : layer_plan(spec)) {
    std::vector<double> values(tensor::element_count(def.shape), 0.0);
    if (def.fan_in > 0) {
      Rng rng(derive_seed(seed, def.name));
      const double stddev = std::sqrt(2.0 / static_cast<double>(def.fan_in));
      for (auto& v : values) v = stddev * rng.normal();
    }
    params.entries.push_back({def.name, def.owner, Tensor(def.shape, std::move(values), true)});
  }
  return params;
}

namespace {

struct BlockOutput {
  Tensor pooled;
  Tensor last_activation;
};

BlockOutput run_block(Tape* tape, const ModelParams& params, const std::string& prefix, int block,
                      Tensor x) {
  Tensor act;
  for (int layer = 1; layer <= kConvsPerBlock[block - 1]; ++layer) {
    const std::string base = prefix + conv_name(block, layer);
    act = tensor::relu(
        tape, tensor::conv2d(tape, x, params.get(base + ".weight"), params.get(base + ".bias")));
    x = act;
  }
  return {tensor::maxpool2(tape, act), act};
}

Tensor run_head(Tape* tape, const ModelParams& params, const std::string& prefix, const Tensor& x,
                const ForwardOptions& options) {
  auto fc = [&](const Tensor& in, const std::string& name) {
    return tensor::dense(tape, in, params.get(prefix + name + ".weight"),
                         params.get(prefix + name + ".bias"));
  };
  auto drop = [&](const Tensor& in, const std::string& name) {
    return tensor::dropout(tape, in, options.dropout_rate, options.training,
                           derive_seed(options.dropout_seed, prefix + name));
  };
  Tensor h = drop(tensor::relu(tape, fc(x, "fc1")), "fc1");
  h = drop(tensor::relu(tape, fc(h, "fc2")), "fc2");
  return fc(h, "fc3");
}

}  // namespace

ForwardResult forward(Tape* tape, const ModelParams& params, const Tensor& image,
                      const ForwardOptions& options) {
  const ArchitectureSpec& spec = params.spec;
  if (image.shape() != Shape{1, static_cast<std::size_t>(spec.input_h),
                             static_cast<std::size_t>(spec.input_w)}) {
    throw tensor::ShapeError("image shape " + tensor::shape_string(image.shape()) +
                             " does not match the architecture input " +
                             std::to_string(spec.input_h) + "x" + std::to_string(spec.input_w));
  }
  ForwardResult result;
  const int shared_last = last_shared_block(spec.variant);
  Tensor x = image;
  for (int b = 1; b <= shared_last; ++b) {
    BlockOutput out = run_block(tape, params, "shared.", b, x);
    x = out.pooled;
    if (b == shared_last) result.shared_features = out.last_activation;
  }

  if (spec.variant == Variant::kSingle) {
    result.prediction = run_head(tape, params, "head.", x, options);
    result.task_outputs.push_back(result.prediction);
    return result;
  }

  result.task_outputs.reserve(static_cast<std::size_t>(spec.sections));
  for (int k = 0; k < spec.sections; ++k) {
    const std::string prefix = task_prefix(k);
    Tensor t = x;
    for (int b = shared_last + 1; b <= kBlocks; ++b) {
      t = run_block(tape, params, prefix, b, t).pooled;
    }
    result.task_outputs.push_back(run_head(tape, params, prefix, t, options));
  }
  result.prediction = tensor::concat(tape, result.task_outputs);
  return result;
}

Tensor loss_single(Tape* tape, const Tensor& y, const Tensor& y_hat) {
  return tensor::mse(tape, y, y_hat);
}

Tensor loss_multi(Tape* tape, const Tensor& y, const Tensor& y_hat, int sections) {
  if (sections < 1 || y.size() != y_hat.size() || y.size() % sections != 0) {
    throw tensor::ShapeError("loss_multi needs equal lengths divisible by the section count");
  }
  const std::size_t block = y.size() / sections;
  Tensor total;
  for (int k = 0; k < sections; ++k) {
    Tensor term = tensor::mse(tape, tensor::slice(tape, y, k * block, block),
                              tensor::slice(tape, y_hat, k * block, block));
    total = k == 0 ? term : tensor::add(tape, total, term);
  }
  return tensor::scale(tape, total, 1.0 / sections);
}

std::vector<double> per_task_losses(std::span<const double> y, std::span<const double> y_hat,
                                    int sections) {
  if (sections < 1 || y.size() != y_hat.size() || y.size() % sections != 0) {
    throw tensor::ShapeError("per_task_losses needs equal lengths divisible by the section count");
  }
  const std::size_t block = y.size() / sections;
  std::vector<double> out(static_cast<std::size_t>(sections), 0.0);
  for (int k = 0; k < sections; ++k) {
    double s = 0.0;
    for (std::size_t i = k * block; i < (k + 1) * block; ++i) {
      const double d = y[i] - y_hat[i];
      s += d * d;
    }
    out[k] = s / static_cast<double>(block);
  }
  return out;
}

}  // namespace hullinv::model
