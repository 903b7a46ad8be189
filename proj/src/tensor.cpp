#include "hullinv/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "hullinv/rng.hpp"
#include "hullinv/simd.hpp"

namespace hullinv::tensor {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream s;
  s << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s << 'x';
    s << shape[i];
  }
  s << ']';
  return s.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<Node>()) {
  for (const auto extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive: " + shape_string(shape));
  }
  if (element_count(shape) != values.size()) {
    throw ShapeError("shape " + shape_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  node_->shape = std::move(shape);
  node_->values = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = element_count(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor({1}, {v}, requires_grad); }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on a tensor of shape " + shape_string(shape()));
  return node_->values[0];
}

std::span<double> Tensor::mutable_grad() const {
  if (node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tape::backward(Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw std::logic_error("backward() needs a scalar loss");
  }
  if (!loss.requires_grad()) {
    throw std::logic_error("backward() on a loss that does not depend on tracked tensors");
  }
  loss.mutable_grad()[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
    (*it)();
  }
}

namespace {

bool tracking(const Tape* tape, std::initializer_list<const Tensor*> inputs) {
  if (tape == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

// Gradient of `out`, or an empty span when backward never reached it.
std::span<const double> out_grad(const Tensor& out) {
  return out.has_grad() ? out.grad() : std::span<const double>{};
}

}  // namespace

namespace {

// Row p of the result holds the 3x3 zero-padded neighbourhood of pixel p for
// every input channel, ordered (ci, ky, kx).
std::vector<double> im2col(const double* in, std::size_t cin, std::size_t h, std::size_t w) {
  const std::size_t r = cin * 9;
  std::vector<double> col(h * w * r, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double* row = col.data() + (y * w + x) * r;
      for (std::size_t ci = 0; ci < cin; ++ci) {
        const double* iplane = in + ci * h * w;
        for (std::size_t ky = 0; ky < 3; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            row[ci * 9 + ky * 3 + kx] = iplane[iy * static_cast<std::ptrdiff_t>(w) + ix];
          }
        }
      }
    }
  }
  return col;
}

}  // namespace

Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& filters, const Tensor& bias) {
  if (input.shape().size() != 3 || filters.shape().size() != 4 || bias.shape().size() != 1) {
    throw ShapeError("conv2d expects input [C,H,W], filters [O,C,3,3], bias [O]");
  }
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = filters.dim(0);
  if (filters.dim(1) != cin || filters.dim(2) != 3 || filters.dim(3) != 3 || bias.dim(0) != cout) {
    throw ShapeError("conv2d channel mismatch: input " + shape_string(input.shape()) +
                     ", filters " + shape_string(filters.shape()) + ", bias " +
                     shape_string(bias.shape()));
  }
  const bool track = tracking(tape, {&input, &filters, &bias});
  Tensor out = Tensor::zeros({cout, h, w}, track);
  const auto& k = simd::kernels();
  const double* wt = filters.values().data();
  double* o = out.mutable_values().data();
  const std::size_t plane = h * w;
  const std::size_t r = cin * 9;

  const auto col = im2col(input.values().data(), cin, h, w);
  for (std::size_t co = 0; co < cout; ++co) {
    const double* wrow = wt + co * r;
    for (std::size_t p = 0; p < plane; ++p) {
      o[co * plane + p] = bias[co] + k.dot(r, wrow, col.data() + p * r);
    }
  }

  if (track) {
    tape->record([input, filters, bias, out, cin, cout, h, w, plane, r]() {
      const auto g = out_grad(out);
      if (g.empty()) return;
      const auto& k = simd::kernels();
      const double* wt = filters.values().data();
      if (bias.requires_grad()) {
        auto gb = bias.mutable_grad();
        for (std::size_t co = 0; co < cout; ++co) {
          double s = 0.0;
          for (std::size_t i = 0; i < plane; ++i) s += g[co * plane + i];
          gb[co] += s;
        }
      }
      if (filters.requires_grad()) {
        const auto col = im2col(input.values().data(), cin, h, w);
        double* gw = filters.mutable_grad().data();
        for (std::size_t co = 0; co < cout; ++co) {
          for (std::size_t p = 0; p < plane; ++p) {
            const double gv = g[co * plane + p];
            if (gv != 0.0) k.axpy(r, gv, col.data() + p * r, gw + co * r);
          }
        }
      }
      if (input.requires_grad()) {
        std::vector<double> gcol(plane * r, 0.0);
        for (std::size_t p = 0; p < plane; ++p) {
          for (std::size_t co = 0; co < cout; ++co) {
            const double gv = g[co * plane + p];
            if (gv != 0.0) k.axpy(r, gv, wt + co * r, gcol.data() + p * r);
          }
        }
        double* gin = input.mutable_grad().data();
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const double* row = gcol.data() + (y * w + x) * r;
            for (std::size_t ci = 0; ci < cin; ++ci) {
              for (std::size_t ky = 0; ky < 3; ++ky) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t kx = 0; kx < 3; ++kx) {
                  const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(x + kx) - 1;
                  if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
                  gin[ci * plane + iy * w + ix] += row[ci * 9 + ky * 3 + kx];
                }
              }
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor maxpool2(Tape* tape, const Tensor& input) {
  if (input.shape().size() != 3 || input.dim(1) < 2 || input.dim(2) < 2) {
    throw ShapeError("maxpool2 expects [C,H,W] with H,W >= 2, got " + shape_string(input.shape()));
  }
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = h / 2, ow = w / 2;
  const bool track = tracking(tape, {&input});
  Tensor out = Tensor::zeros({c, oh, ow}, track);
  std::vector<std::size_t> argmax(c * oh * ow);
  const auto in = input.values();
  auto o = out.mutable_values();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const std::size_t base = ch * h * w + 2 * y * w + 2 * x;
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (int i = 1; i < 4; ++i) {
          if (in[cand[i]] > in[best]) best = cand[i];
        }
        const std::size_t oi = (ch * oh + y) * ow + x;
        o[oi] = in[best];
        argmax[oi] = best;
      }
    }
  }
  if (track) {
    tape->record([input, out, argmax = std::move(argmax)]() mutable {
      const auto g = out_grad(out);
      if (g.empty()) return;
      auto gin = input.mutable_grad();
      for (std::size_t i = 0; i < argmax.size(); ++i) gin[argmax[i]] += g[i];
    });
  }
  return out;
}

Tensor dense(Tape* tape, const Tensor& input, const Tensor& weights, const Tensor& bias) {
  if (weights.shape().size() != 2 || bias.shape().size() != 1) {
    throw ShapeError("dense expects weights [out,in] and bias [out]");
  }
  const std::size_t dout = weights.dim(0), din = weights.dim(1);
  if (input.size() != din || bias.dim(0) != dout) {
    throw ShapeError("dense shape mismatch: input " + shape_string(input.shape()) + ", weights " +
                     shape_string(weights.shape()) + ", bias " + shape_string(bias.shape()));
  }
  const bool track = tracking(tape, {&input, &weights, &bias});
  Tensor out = Tensor::zeros({dout}, track);
  const auto& k = simd::kernels();
  const double* x = input.values().data();
  const double* wt = weights.values().data();
  auto o = out.mutable_values();
  for (std::size_t r = 0; r < dout; ++r) {
    o[r] = bias[r] + k.dot(din, wt + r * din, x);
  }
  if (track) {
    tape->record([input, weights, bias, out, din, dout]() mutable {
      const auto g = out_grad(out);
      if (g.empty()) return;
      const auto& k = simd::kernels();
      if (input.requires_grad()) {
        double* gx = input.mutable_grad().data();
        const double* wt = weights.values().data();
        for (std::size_t r = 0; r < dout; ++r) k.axpy(din, g[r], wt + r * din, gx);
      }
      if (weights.requires_grad()) {
        double* gw = weights.mutable_grad().data();
        const double* x = input.values().data();
        for (std::size_t r = 0; r < dout; ++r) k.axpy(din, g[r], x, gw + r * din);
      }
      if (bias.requires_grad()) {
        auto gb = bias.mutable_grad();
        for (std::size_t r = 0; r < dout; ++r) gb[r] += g[r];
      }
    });
  }
  return out;
}

Tensor relu(Tape* tape, const Tensor& input) {
  const bool track = tracking(tape, {&input});
  Tensor out = Tensor::zeros(input.shape(), track);
  const auto in = input.values();
  auto o = out.mutable_values();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = in[i] > 0.0 ? in[i] : 0.0;
  if (track) {
    tape->record([input, out]() mutable {
      const auto g = out_grad(out);
      if (g.empty()) return;
      const auto in = input.values();
      auto gin = input.mutable_grad();
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (in[i] > 0.0) gin[i] += g[i];
      }
    });
  }
  return out;
}

Tensor dropout(Tape* tape, const Tensor& input, double rate, bool training, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
  if (!training || rate == 0.0) {
    return input;
  }
  const bool track = tracking(tape, {&input});
  Tensor out = Tensor::zeros(input.shape(), track);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(input.size());
  Rng rng(seed);
  for (auto& m : mask) m = rng.uniform() >= rate ? keep_scale : 0.0;
  const auto in = input.values();
  auto o = out.mutable_values();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = in[i] * mask[i];
  if (track) {
    tape->record([input, out, mask = std::move(mask)]() mutable {
      const auto g = out_grad(out);
      if (g.empty()) return;
      auto gin = input.mutable_grad();
      for (std::size_t i = 0; i < mask.size(); ++i) gin[i] += g[i] * mask[i];
    });
  }
  return out;
}

Tensor mse(Tape* tape, const Tensor& y, const Tensor& y_hat) {
  if (y.size() != y_hat.size()) {
    throw ShapeError("mse size mismatch: " + shape_string(y.shape()) + " vs " +
                     shape_string(y_hat.shape()));
  }
  const std::size_t a = y.size();
  double s = 0.0;
  for (std::size_t i = 0; i < a; ++i) {
    const double d = y[i] - y_hat[i];
    s += d * d;
  }
  const bool track = tracking(tape, {&y, &y_hat});
  Tensor out = Tensor::scalar(s / static_cast<double>(a), track);
  if (track) {
    tape->record([y, y_hat, out, a]() mutable {
      const auto g = out_grad(out);
      if (g.empty()) return;
      const double f = g[0] * 2.0 / static_cast<double>(a);
      if (y_hat.requires_grad()) {
        auto gh = y_hat.mutable_grad();
        for (std::size_t i = 0; i < a; ++i) gh[i] += f * (y_hat[i] - y[i]);
      }
      if (y.requires_grad()) {
        auto gy = y.mutable_grad();
        for (std::size_t i = 0; i < a; ++i) gy[i] += f * (y[i] - y_hat[i]);
      }
    });
  }
  return out;
}

Tensor reshape(Tape* tape, const Tensor& input, Shape shape) {
  if (element_count(shape) != input.size()) {
    throw ShapeError("cannot reshape " + shape_string(input.shape()) + " to " +
                     shape_string(shape));
  }
  const bool track = tracking(tape, {&input});
  const auto in = input.values();
  Tensor out(std::move(shape), std::vector<double>(in.begin(), in.end()), track);
  if (track) {
    tape->record([input, out]() mutable {
      const auto g = out_grad(out);
      if (g.empty()) return;
      auto gin = input.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gin[i] += g[i];
    });
  }
  return out;
}

Tensor concat(Tape* tape, std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat of no tensors");
  std::vector<double> values;
  bool track = false;
  for (const auto& p : parts) {
    values.insert(values.end(), p.values().begin(), p.values().end());
    track = track || (tape != nullptr && p.requires_grad());
  }
  const std::size_t n = values.size();
  Tensor out({n}, std::move(values), track);
  if (track) {
    tape->record([inputs = std::vector<Tensor>(parts.begin(), parts.end()), out]() mutable {
      const auto g = out_grad(out);
      if (g.empty()) return;
      std::size_t offset = 0;
      for (auto& p : inputs) {
        if (p.requires_grad()) {
          auto gp = p.mutable_grad();
          for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
        }
        offset += p.size();
      }
    });
  }
  return out;
}

Tensor slice(Tape* tape, const Tensor& input, std::size_t offset, std::size_t length) {
  if (length == 0 || offset + length > input.size()) {
    throw ShapeError("slice out of range");
  }
  const bool track = tracking(tape, {&input});
  const auto in = input.values().subspan(offset, length);
  Tensor out({length}, std::vector<double>(in.begin(), in.end()), track);
  if (track) {
    tape->record([input, out, offset]() mutable {
      const auto g = out_grad(out);
      if (g.empty()) return;
      auto gin = input.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gin[offset + i] += g[i];
    });
  }
  return out;
}

Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) throw ShapeError("add size mismatch");
  const bool track = tracking(tape, {&a, &b});
  Tensor out = Tensor::zeros(a.shape(), track);
  auto o = out.mutable_values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] + b[i];
  if (track) {
    tape->record([a, b, out]() mutable {
      const auto g = out_grad(out);
      if (g.empty()) return;
      for (const Tensor* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto gt = t->mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
      }
    });
  }
  return out;
}

Tensor scale(Tape* tape, const Tensor& a, double factor) {
  const bool track = tracking(tape, {&a});
  Tensor out = Tensor::zeros(a.shape(), track);
  auto o = out.mutable_values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a[i] * factor;
  if (track) {
    tape->record([a, out, factor]() mutable {
      const auto g = out_grad(out);
      if (g.empty()) return;
      auto ga = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
  }
  return out;
}

Tensor sum(Tape* tape, const Tensor& a) {
  const bool track = tracking(tape, {&a});
  double s = 0.0;
  for (const double v : a.values()) s += v;
  Tensor out = Tensor::scalar(s, track);
  if (track) {
    tape->record([a, out]() mutable {
      const auto g = out_grad(out);
      if (g.empty()) return;
      auto ga = a.mutable_grad();
      for (auto& v : ga) v += g[0];
    });
  }
  return out;
}

}  // namespace hullinv::tensor
