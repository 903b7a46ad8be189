#pragma once

// Minimal reverse-mode automatic differentiation over dense double arrays.
//
// A Tensor is a shared handle to a value buffer and, when it takes part in
// differentiation, a gradient buffer of the same shape. Operations take an
// optional Tape; when a tape is given and any input requires a gradient, the
// operation appends one backward record to it. Tape::backward() walks the
// records in reverse and accumulates into every tracked tensor's gradient.
//
// Gradients accumulate (+=) across backward calls until zero_grad().

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hullinv::tensor {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->values.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }

  std::span<const double> values() const { return node_->values; }
  std::span<double> mutable_values() { return node_->values; }
  double item() const;
  double operator[](std::size_t i) const { return node_->values[i]; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  // Empty until a backward pass reaches this tensor.
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() const;  // allocates zeros on first use
  void zero_grad();

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Node> node_;
};

class Tape {
 public:
  void record(std::function<void()> backward) { records_.push_back(std::move(backward)); }
  std::size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

  // Seeds d(loss)/d(loss) = 1 and runs every record once, newest first.
  // Throws std::logic_error if the loss is not a single element.
  void backward(Tensor& loss);

 private:
  std::vector<std::function<void()>> records_;
};

// 3x3 cross-correlation, stride 1, zero padding 1.
// input [C_in, H, W], filters [C_out, C_in, 3, 3], bias [C_out] -> [C_out, H, W].
Tensor conv2d(Tape* tape, const Tensor& input, const Tensor& filters, const Tensor& bias);

// 2x2 max pooling, stride 2, floor on odd extents. Ties go to the first
// element in row-major window order.
Tensor maxpool2(Tape* tape, const Tensor& input);

// weights [d_out, d_in], bias [d_out], input with d_in elements (any shape).
Tensor dense(Tape* tape, const Tensor& input, const Tensor& weights, const Tensor& bias);

Tensor relu(Tape* tape, const Tensor& input);

// Inverted dropout. In training each element is zeroed with probability
// `rate` and survivors are scaled by 1/(1-rate); otherwise the identity.
Tensor dropout(Tape* tape, const Tensor& input, double rate, bool training, std::uint64_t seed);

// (1/A) sum (y - y_hat)^2 as a scalar tensor.
Tensor mse(Tape* tape, const Tensor& y, const Tensor& y_hat);

Tensor reshape(Tape* tape, const Tensor& input, Shape shape);
Tensor concat(Tape* tape, std::span<const Tensor> parts);
Tensor slice(Tape* tape, const Tensor& input, std::size_t offset, std::size_t length);
Tensor add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape* tape, const Tensor& a, double factor);
Tensor sum(Tape* tape, const Tensor& a);

}  // namespace hullinv::tensor
