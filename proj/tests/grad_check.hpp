#pragma once

// Central-difference gradient checks shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "hullinv/tensor.hpp"
#include "test_util.hpp"

namespace gradcheck {

using hullinv::tensor::Shape;
using hullinv::tensor::Tape;
using hullinv::tensor::Tensor;

inline Tensor random_tensor(Shape shape, std::uint64_t seed, bool grad = true, double lo = -1.0,
                     double hi = 1.0) {
  const std::size_t n = hullinv::tensor::element_count(shape);
  return Tensor(std::move(shape), testutil::random_vector(n, seed, lo, hi), grad);
}

// Values bounded away from zero so ReLU and pooling stay off their kinks.
inline Tensor kink_free(Shape shape, std::uint64_t seed) {
  auto t = random_tensor(std::move(shape), seed);
  for (auto& v : t.mutable_values()) v = (v < 0 ? -0.1 : 0.1) + 0.9 * v;
  return t;
}

// Scalar probe sum_i w_i out_i with fixed random weights.
struct Probe {
  Tensor w, b;
  explicit Probe(std::size_t n, std::uint64_t seed)
      : w(random_tensor({1, n}, seed, false)), b(Tensor::zeros({1})) {}
  Tensor operator()(Tape* tape, const Tensor& out) const { return hullinv::tensor::dense(tape, out, w, b); }
};

// Largest relative difference between x's analytic gradient and central
// differences of `loss` (which must read x's current values).
inline double fd_error(Tensor& x, const std::function<double()>& loss, double h = 1e-5,
                double floor = 1e-6) {
  double worst = 0.0;
  auto values = x.mutable_values();
  const auto grad = x.grad();
  if (grad.size() != values.size()) throw std::logic_error("input has no gradient");
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double keep = values[i];
    values[i] = keep + h;
    const double up = loss();
    values[i] = keep - h;
    const double down = loss();
    values[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, testutil::rel_err(grad[i], numeric, floor));
  }
  return worst;
}

// Runs forward with a tape, backward, then returns the FD error over `inputs`.
inline double check_op(std::vector<Tensor*> inputs, const std::function<Tensor(Tape*)>& forward) {
  Tape tape;
  Tensor loss = forward(&tape);
  for (auto* t : inputs) t->zero_grad();
  tape.backward(loss);
  double worst = 0.0;
  for (auto* t : inputs) {
    worst = std::max(worst, fd_error(*t, [&] { return forward(nullptr).item(); }));
  }
  return worst;
}

}  // namespace gradcheck
