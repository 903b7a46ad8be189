#include <doctest.h>

#include <cmath>
#include <functional>

#include "hullinv/simd.hpp"
#include "hullinv/tensor.hpp"
#include "grad_check.hpp"
#include "test_util.hpp"

using namespace hullinv;
using namespace hullinv::tensor;
using namespace gradcheck;

namespace {

std::vector<double> naive_conv(const Tensor& in, const Tensor& f, const Tensor& b) {
  const std::size_t ci = in.dim(0), h = in.dim(1), w = in.dim(2), co = f.dim(0);
  std::vector<double> out(co * h * w, 0.0);
  for (std::size_t o = 0; o < co; ++o) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double s = b[o];
        for (std::size_t c = 0; c < ci; ++c) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const long yy = static_cast<long>(y) + ky - 1, xx = static_cast<long>(x) + kx - 1;
              if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
              s += f[((o * ci + c) * 3 + ky) * 3 + kx] * in[(c * h + yy) * w + xx];
            }
          }
        }
        out[(o * h + y) * w + x] = s;
      }
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("simd") {

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  const auto* avx = simd::avx2_kernels();
  if (!avx || !simd::cpu_has_avx2()) {
    MESSAGE("AVX2 not available; equivalence not exercised");
    return;
  }
  const auto& sc = simd::scalar_kernels();
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 33u, 1000u, 1027u}) {
    const auto x = testutil::random_vector(n, 10 + n);
    const auto y0 = testutil::random_vector(n, 20 + n);
    auto ya = y0, yb = y0;
    sc.axpy(n, 0.37, x.data(), ya.data());
    avx->axpy(n, 0.37, x.data(), yb.data());
    CHECK(ya == yb);

    double ref = 0.0, mag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ref += x[i] * y0[i];
      mag += std::abs(x[i] * y0[i]);
    }
    CHECK(std::abs(sc.dot(n, x.data(), y0.data()) - ref) <= 1e-13 * (mag + 1));
    CHECK(std::abs(avx->dot(n, x.data(), y0.data()) - ref) <= 1e-13 * (mag + 1));
    CHECK(avx->dot(n, x.data(), y0.data()) == avx->dot(n, x.data(), y0.data()));

    auto w1 = testutil::random_vector(n, 30 + n), w2 = w1;
    auto m1 = testutil::random_vector(n, 40 + n, -0.1, 0.1), m2 = m1;
    auto v1 = testutil::random_vector(n, 50 + n, 0.0, 0.1), v2 = v1;
    const auto g = testutil::random_vector(n, 60 + n);
    sc.adam_update(n, w1.data(), m1.data(), v1.data(), g.data(), 0.9, 0.999, 1e-3, 1e-8);
    avx->adam_update(n, w2.data(), m2.data(), v2.data(), g.data(), 0.9, 0.999, 1e-3, 1e-8);
    CHECK(w1 == w2);
    CHECK(m1 == m2);
    CHECK(v1 == v2);
  }
}

TEST_CASE("ISA selection") {
  const auto before = simd::active_isa();
  simd::set_isa(simd::Isa::Scalar);
  CHECK(simd::active_isa() == simd::Isa::Scalar);
  CHECK(&simd::kernels() == &simd::scalar_kernels());
  CHECK(simd::parse_isa("avx2") == simd::Isa::Avx2);
  CHECK_THROWS_AS(simd::parse_isa("neon"), std::invalid_argument);
  simd::set_isa(before);
}

}  // TEST_SUITE

TEST_SUITE("tensor") {

TEST_CASE("conv2d fixed cases") {
  auto in = random_tensor({2, 5, 4}, 1, false);
  // Identity filter per channel pair (o == c), zero bias.
  Tensor f = Tensor::zeros({2, 2, 3, 3});
  f.mutable_values()[((0 * 2 + 0) * 3 + 1) * 3 + 1] = 1.0;
  f.mutable_values()[((1 * 2 + 1) * 3 + 1) * 3 + 1] = 1.0;
  const auto out = conv2d(nullptr, in, f, Tensor::zeros({2}));
  for (std::size_t i = 0; i < in.size(); ++i) CHECK(out[i] == in[i]);

  Tensor bias({3}, {0.5, -2.0, 7.0});
  const auto c = conv2d(nullptr, in, Tensor::zeros({3, 2, 3, 3}), bias);
  for (std::size_t o = 0; o < 3; ++o) {
    for (std::size_t p = 0; p < 20; ++p) CHECK(c[o * 20 + p] == bias[o]);
  }

  const auto x = random_tensor({1, 4, 4}, 2, false);
  const auto w = random_tensor({1, 1, 3, 3}, 3, false);
  const auto b = random_tensor({1}, 4, false);
  const auto got = conv2d(nullptr, x, w, b);
  const auto want = naive_conv(x, w, b);
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-15);

  const auto xl = random_tensor({5, 9, 7}, 5, false);
  const auto wl = random_tensor({6, 5, 3, 3}, 6, false);
  const auto bl = random_tensor({6}, 7, false);
  const auto gl = conv2d(nullptr, xl, wl, bl);
  const auto nl = naive_conv(xl, wl, bl);
  for (std::size_t i = 0; i < nl.size(); ++i) CHECK(std::abs(gl[i] - nl[i]) <= 1e-13);

  CHECK_THROWS_AS(conv2d(nullptr, xl, random_tensor({6, 4, 3, 3}, 8, false), bl), ShapeError);
}

TEST_CASE("maxpool2 fixed cases") {
  Tensor c({1, 4, 4}, std::vector<double>(16, 2.0), true);
  Tape tape;
  auto out = maxpool2(&tape, c);
  for (double v : out.values()) CHECK(v == 2.0);
  Tensor loss = sum(&tape, out);
  tape.backward(loss);
  // Ties go to the first element of each window.
  const std::vector<double> expect{1, 0, 1, 0, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0};
  CHECK(std::vector<double>(c.grad().begin(), c.grad().end()) == expect);

  CHECK(maxpool2(nullptr, Tensor::zeros({1, 227, 256})).shape() == Shape{1, 113, 128});

  const auto r = random_tensor({2, 6, 6}, 9, false);
  const auto p = maxpool2(nullptr, r);
  for (std::size_t ch = 0; ch < 2; ++ch) {
    for (std::size_t y = 0; y < 3; ++y) {
      for (std::size_t x = 0; x < 3; ++x) {
        double m = -INFINITY;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) m = std::max(m, r[(ch * 6 + 2 * y + dy) * 6 + 2 * x + dx]);
        }
        CHECK(p[(ch * 3 + y) * 3 + x] == m);
      }
    }
  }
}

TEST_CASE("dense fixed cases") {
  const auto x = random_tensor({3}, 10, false);
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const auto id = dense(nullptr, x, eye, Tensor::zeros({3}));
  for (int i = 0; i < 3; ++i) CHECK(id[i] == x[i]);
  Tensor b({2}, {4.0, -1.5});
  const auto zb = dense(nullptr, x, Tensor::zeros({2, 3}), b);
  CHECK(zb[0] == 4.0);
  CHECK(zb[1] == -1.5);
  Tensor w({2, 3}, {1, 2, 3, -1, 0.5, 2});
  Tensor v({3}, {0.5, -1, 2});
  const auto y = dense(nullptr, v, w, b);
  CHECK(y[0] == doctest::Approx(4.0 + 0.5 - 2 + 6));
  CHECK(y[1] == doctest::Approx(-1.5 - 0.5 - 0.5 + 4));
}

TEST_CASE("relu, dropout and mse fixed cases") {
  Tensor x({3}, {-1, 0, 2});
  const auto r = relu(nullptr, x);
  CHECK(std::vector<double>(r.values().begin(), r.values().end()) == std::vector<double>{0, 0, 2});

  const auto z = random_tensor({100}, 11, false);
  for (bool training : {true, false}) {
    const auto d = dropout(nullptr, z, 0.0, training, 5);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(d[i] == z[i]);
  }
  const auto ones = Tensor(Shape{10000}, std::vector<double>(10000, 1.0));
  const auto d1 = dropout(nullptr, ones, 0.5, true, 123);
  const auto d2 = dropout(nullptr, ones, 0.5, true, 123);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < ones.size(); ++i) {
    CHECK(d1[i] == d2[i]);
    CHECK((d1[i] == 0.0 || d1[i] == 2.0));
    kept += d1[i] != 0.0;
  }
  CHECK(std::abs(kept / 10000.0 - 0.5) <= 0.02);
  const auto inf = dropout(nullptr, ones, 0.5, false, 123);
  for (double v : inf.values()) CHECK(v == 1.0);
  CHECK_THROWS_AS(dropout(nullptr, ones, 1.0, true, 1), std::invalid_argument);

  Tensor y({2}, {0, 0});
  Tensor yh({2}, {3, 4}, true);
  CHECK(mse(nullptr, y, y).item() == 0.0);
  Tape tape;
  auto l = mse(&tape, y, yh);
  CHECK(l.item() == 12.5);
  tape.backward(l);
  CHECK(yh.grad()[0] == 3.0);
  CHECK(yh.grad()[1] == 4.0);
  CHECK_FALSE(y.has_grad());
}

TEST_CASE("backward contracts") {
  Tensor a({2}, {1, 2}, true);
  Tape tape;
  auto v = scale(&tape, a, 2.0);
  CHECK_THROWS_AS(tape.backward(v), std::logic_error);

  Tensor detached({3}, {1, 2, 3});
  Tensor w({1, 3}, {1, 1, 1}, true);
  Tape t2;
  auto out = dense(&t2, detached, w, Tensor::zeros({1}));
  t2.backward(out);
  CHECK_FALSE(detached.has_grad());
  CHECK(w.has_grad());
  // Gradients accumulate until cleared.
  Tape t3;
  auto out2 = dense(&t3, detached, w, Tensor::zeros({1}));
  t3.backward(out2);
  CHECK(w.grad()[2] == 6.0);
  w.zero_grad();
  CHECK((!w.has_grad() || w.grad()[2] == 0.0));
}

TEST_CASE("op-level gradients match central differences") {
  constexpr double kTol = 1e-6;

  SUBCASE("conv2d") {
    auto x = random_tensor({2, 5, 4}, 20);
    auto f = random_tensor({3, 2, 3, 3}, 21);
    auto b = random_tensor({3}, 22);
    Probe probe(60, 23);
    CHECK(check_op({&x, &f, &b}, [&](Tape* t) { return probe(t, conv2d(t, x, f, b)); }) < kTol);
  }
  SUBCASE("maxpool2") {
    auto x = random_tensor({2, 5, 6}, 24);
    Probe probe(2 * 2 * 3, 25);
    CHECK(check_op({&x}, [&](Tape* t) { return probe(t, maxpool2(t, x)); }) < kTol);
  }
  SUBCASE("dense") {
    auto x = random_tensor({7}, 26);
    auto w = random_tensor({4, 7}, 27);
    auto b = random_tensor({4}, 28);
    Probe probe(4, 29);
    CHECK(check_op({&x, &w, &b}, [&](Tape* t) { return probe(t, dense(t, x, w, b)); }) < kTol);
  }
  SUBCASE("relu") {
    auto x = kink_free({12}, 30);
    Probe probe(12, 31);
    CHECK(check_op({&x}, [&](Tape* t) { return probe(t, relu(t, x)); }) < kTol);
  }
  SUBCASE("dropout in training") {
    auto x = random_tensor({40}, 32);
    Probe probe(40, 33);
    CHECK(check_op({&x}, [&](Tape* t) { return probe(t, dropout(t, x, 0.3, true, 9)); }) < kTol);
  }
  SUBCASE("mse") {
    auto y = random_tensor({9}, 34);
    auto yh = random_tensor({9}, 35);
    CHECK(check_op({&y, &yh}, [&](Tape* t) { return mse(t, y, yh); }) < kTol);
  }
  SUBCASE("reshape, slice, concat, add, scale, sum") {
    auto a = random_tensor({2, 3}, 36);
    auto b = random_tensor({4}, 37);
    Probe probe(5, 38);
    const double err = check_op({&a, &b}, [&](Tape* t) {
      auto flat = reshape(t, a, {6});
      std::vector<Tensor> parts{slice(t, flat, 1, 4), scale(t, b, -1.7)};
      auto joined = concat(t, parts);
      auto s = add(t, slice(t, joined, 0, 5), slice(t, joined, 3, 5));
      return add(t, probe(t, s), sum(t, b));
    });
    CHECK(err < kTol);
  }
}

TEST_CASE("composite conv-relu-pool-dense-mse gradients match central differences") {
  auto x = random_tensor({1, 6, 6}, 40);
  auto f = random_tensor({3, 1, 3, 3}, 41);
  auto b = random_tensor({3}, 42, true, 0.2, 0.4);
  auto w = random_tensor({2, 27}, 43);
  auto bw = random_tensor({2}, 44);
  const auto target = random_tensor({2}, 45, false);

  auto forward = [&](Tape* t) {
    auto pre = conv2d(t, x, f, b);
    auto h = maxpool2(t, relu(t, pre));
    return mse(t, target, dense(t, h, w, bw));
  };
  // Make sure no pre-activation sits within reach of the FD step.
  {
    const auto pre = conv2d(nullptr, x, f, b);
    double closest = INFINITY;
    for (double v : pre.values()) closest = std::min(closest, std::abs(v));
    REQUIRE(closest > 1e-3);
  }
  CHECK(check_op({&x, &f, &b, &w, &bw}, forward) < 1e-5);
}

TEST_CASE("scalar and AVX2 engines agree on a composite forward and backward") {
  if (!simd::avx2_kernels() || !simd::cpu_has_avx2()) return;
  auto run = [](simd::Isa isa) {
    simd::set_isa(isa);
    auto x = random_tensor({2, 8, 8}, 50);
    auto f = random_tensor({4, 2, 3, 3}, 51);
    auto b = random_tensor({4}, 52);
    Tape t;
    auto loss = sum(&t, maxpool2(&t, relu(&t, conv2d(&t, x, f, b))));
    t.backward(loss);
    return std::pair{loss.item(), std::vector<double>(f.grad().begin(), f.grad().end())};
  };
  const auto before = simd::active_isa();
  const auto a = run(simd::Isa::Scalar);
  const auto v = run(simd::Isa::Avx2);
  simd::set_isa(before);
  CHECK(a.first == doctest::Approx(v.first).epsilon(1e-13));
  for (std::size_t i = 0; i < a.second.size(); ++i) {
    CHECK(a.second[i] == doctest::Approx(v.second[i]).epsilon(1e-12).scale(1.0));
  }
}

}  // TEST_SUITE
