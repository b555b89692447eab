#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "segvit/errors.hpp"
#include "segvit/grad_check.hpp"
#include "segvit/ops.hpp"

using namespace segvit;
using T = Tensor<double>;

namespace {

T random_tensor(Shape shape, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = u(rng);
  return T::from_data(std::move(shape), std::move(v));
}

T param(Shape shape, uint64_t seed) { return random_tensor(std::move(shape), seed).set_requires_grad(true); }

double check(const std::function<T()>& f, std::vector<Parameter<double>> ps, double step = 1e-5) {
  GradCheckOptions o;
  o.step = step;
  return grad_check(f, ps, o).max_rel_error;
}

}  // namespace

TEST_CASE("matmul") {
  const T a = T::from_data({2, 2}, {1, 2, 3, 4});
  const T eye = T::from_data({2, 2}, {1, 0, 0, 1});
  CHECK(oracle::vec(matmul(eye, a)) == oracle::vec(a));
  CHECK(oracle::vec(matmul(a, T::from_data({2, 1}, {1, 1}))) == std::vector<double>{3, 7});

  const T x = random_tensor({5, 4}, 1), y = random_tensor({4, 3}, 2);
  const auto ref = oracle::matmul(oracle::from_tensor(x), oracle::from_tensor(y));
  CHECK(oracle::max_abs_diff(oracle::vec(matmul(x, y)), ref.v) < 1e-12);

  for (int64_t n = 1; n <= 8; ++n) {
    const T p = random_tensor({n, 8}, 10 + n), q = random_tensor({8, 9 - n}, 20 + n);
    const auto r = oracle::matmul(oracle::from_tensor(p), oracle::from_tensor(q));
    CHECK(oracle::max_abs_diff(oracle::vec(matmul(p, q)), r.v) < 1e-12);
  }

  SUBCASE("batched with a shared right operand") {
    const T b = random_tensor({3, 2, 4}, 3), w = random_tensor({4, 5}, 4);
    const auto out = oracle::vec(matmul(b, w));
    const auto wm = oracle::from_tensor(w);
    for (int64_t i = 0; i < 3; ++i) {
      oracle::Mat slice(2, 4);
      for (int64_t k = 0; k < 8; ++k) slice.v[k] = b.data()[i * 8 + k];
      const auto r = oracle::matmul(slice, wm);
      for (int64_t k = 0; k < 10; ++k) CHECK(std::abs(out[i * 10 + k] - r.v[k]) < 1e-12);
    }
  }

  SUBCASE("shape mismatch names both shapes") {
    try {
      matmul(random_tensor({2, 3}, 5), random_tensor({4, 2}, 6));
      FAIL("expected a dimension error");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2, 3]") != std::string::npos);
      CHECK(msg.find("[4, 2]") != std::string::npos);
    }
  }

  SUBCASE("gradient") {
    const T p = param({3, 4}, 7), q = param({4, 2}, 8);
    CHECK(check([&] { return sum(mul(matmul(p, q), matmul(p, q))); }, {{"p", p}, {"q", q}}) < 1e-8);
  }
}

TEST_CASE("softmax") {
  const auto z = oracle::vec(softmax(T::zeros({4}), 0));
  for (double v : z) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

  const auto big = oracle::vec(softmax(T::from_data({2}, {3.0, 1003.0}), 0));
  CHECK(big[0] < 1e-300);
  CHECK(big[1] == doctest::Approx(1.0));

  const T x = random_tensor({3, 7}, 11, -5, 5);
  const auto out = oracle::vec(softmax(x, 1));
  for (int64_t r = 0; r < 3; ++r) {
    double denom = 0, slice = 0;
    for (int64_t j = 0; j < 7; ++j) denom += std::exp(x.data()[r * 7 + j]);
    for (int64_t j = 0; j < 7; ++j) {
      CHECK(std::abs(out[r * 7 + j] - std::exp(x.data()[r * 7 + j]) / denom) < 1e-12);
      slice += out[r * 7 + j];
    }
    CHECK(std::abs(slice - 1.0) < 1e-6);
  }

  SUBCASE("middle axis and float slices") {
    const auto f = Tensor<float>::from_data({2, 3, 2}, {1, 50, -3, 7, 88, -60, 0, 0, 2, 1, 4, 9});
    const auto sm = softmax(f, 1);
    const auto s = sm.data();
    for (int64_t o = 0; o < 2; ++o)
      for (int64_t i = 0; i < 2; ++i) {
        float total = 0;
        for (int64_t j = 0; j < 3; ++j) total += s[(o * 3 + j) * 2 + i];
        CHECK(std::abs(total - 1.0f) < 1e-6f);
      }
  }

  const T p = param({2, 5}, 12);
  const T w = random_tensor({2, 5}, 13);
  CHECK(check([&] { return sum(mul(softmax(p, -1), w)); }, {{"p", p}}) < 1e-8);
  CHECK(check([&] { return sum(mul(softmax(p, 0), w)); }, {{"p", p}}) < 1e-8);
}

TEST_CASE("sigmoid") {
  CHECK(sigmoid(T::scalar(0.0)).item() == 0.5);
  const auto s = oracle::vec(sigmoid(T::from_data({2}, {1.7, -1.7})));
  CHECK(s[0] + s[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sigmoid(T::scalar(-800.0)).item() >= 0.0);

  const T x = T::scalar(0.0).set_requires_grad(true);
  sigmoid(x).backward();
  CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(check([&] { return sigmoid(x); }, {{"x", x}}) < 1e-8);
}

TEST_CASE("layer_norm") {
  const T gamma1 = T::full({4}, 1.0), beta0 = T::zeros({4});
  for (double v : oracle::vec(layer_norm(T::full({1, 4}, 3.5), gamma1, beta0))) CHECK(v == 0.0);

  const T beta = T::from_data({4}, {0.1, -0.2, 0.3, 0.4});
  CHECK(oracle::vec(layer_norm(random_tensor({1, 4}, 21), T::zeros({4}), beta)) == oracle::vec(beta));

  const T x = random_tensor({3, 6}, 22, -3, 3), g = random_tensor({6}, 23), b = random_tensor({6}, 24);
  const auto ref = oracle::layer_norm(oracle::from_tensor(x), oracle::vec(g), oracle::vec(b));
  CHECK(oracle::max_abs_diff(oracle::vec(layer_norm(x, g, b)), ref.v) < 1e-10);

  const T px = param({3, 6}, 25), pg = param({6}, 26), pb = param({6}, 27);
  const T w = random_tensor({3, 6}, 28);
  CHECK(check([&] { return sum(mul(layer_norm(px, pg, pb), w)); }, {{"x", px}, {"g", pg}, {"b", pb}}) <
        1e-7);
}

TEST_CASE("gelu") {
  CHECK(gelu(T::scalar(0.0)).item() == 0.0);
  CHECK(gelu(T::scalar(12.0)).item() == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(std::abs(gelu(T::scalar(-12.0)).item()) < 1e-12);
  for (double x0 : {-2.0, -0.5, 0.5, 2.0}) {
    CHECK(gelu(T::scalar(x0)).item() == doctest::Approx(oracle::gelu(x0)).epsilon(1e-14));
    const T x = T::scalar(x0).set_requires_grad(true);
    CHECK(check([&] { return gelu(x); }, {{"x", x}}) < 1e-6);
  }
}

TEST_CASE("grad_check") {
  const T x = param({4, 3}, 31);
  CHECK(check([&] { return sum(mul(x, x)); }, {{"x", x}}) < 1e-8);

  SUBCASE("constant function has exactly zero gradient") {
    const auto r = [&] {
      std::vector<Parameter<double>> ps{{"x", x}};
      return grad_check([&] { return scale(sum(x), 0.0); }, ps);
    }();
    CHECK(r.max_rel_error == 0.0);
    for (double g : x.grad()) CHECK(g == 0.0);
  }

  SUBCASE("non-finite loss is reported") {
    std::vector<Parameter<double>> ps{{"x", x}};
    CHECK_THROWS_AS(grad_check([&] { return scale(sum(x), 1e308 * 10); }, ps), NumericError);
  }

  SUBCASE("parameters restored bitwise") {
    const auto before = oracle::vec(x);
    check([&] { return sum(gelu(x)); }, {{"x", x}});
    CHECK(oracle::vec(x) == before);
  }
}

TEST_CASE("structural ops have consistent gradients") {
  const T x = param({2, 3, 4}, 41);
  const T m = param({6, 4}, 42);
  const T w3 = random_tensor({2, 4, 3}, 43);
  const T w6 = random_tensor({6, 4}, 44);
  CHECK(check([&] { return sum(mul(transpose(x), w3)); }, {{"x", x}}) < 1e-8);
  CHECK(check([&] { return sum(mul(sum_axis(x, 1), random_tensor({2, 4}, 45))); }, {{"x", x}}) < 1e-8);
  CHECK(check([&] { return sum(mul(reshape(x, {6, 4}), w6)); }, {{"x", x}}) < 1e-8);
  CHECK(check([&] { return sum(mul(merge_heads(split_heads(m, 2)), w6)); }, {{"m", m}}) < 1e-8);
  CHECK(check([&] { return sum(mul(gather_rows(m, {0, 2, 2, 5}), gather_rows(w6, {1, 1, 3, 4}))); },
              {{"m", m}}) < 1e-8);
  CHECK(check([&] { return sum(mul(resize_bilinear(x, 5, 7), random_tensor({2, 5, 7}, 46))); },
              {{"x", x}}) < 1e-6);
  const T lw = param({4, 3}, 47), lb = param({3}, 48);
  CHECK(check([&] { return sum(mul(linear(m, lw, lb), linear(m, lw, lb))); },
              {{"m", m}, {"w", lw}, {"b", lb}}) < 1e-8);
  const T bias = param({4}, 49);
  CHECK(check([&] { return mean(mul(add(x, bias), add(x, bias))); }, {{"x", x}, {"b", bias}}) < 1e-8);
}

TEST_CASE("split_heads layout") {
  const T x = T::from_data({2, 4}, {0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(oracle::vec(split_heads(x, 2)) == std::vector<double>{0, 1, 4, 5, 2, 3, 6, 7});
  CHECK(oracle::vec(merge_heads(split_heads(x, 2))) == oracle::vec(x));
}

TEST_CASE("resize_bilinear matches the half-pixel oracle") {
  const T x = random_tensor({2, 3, 4}, 51);
  const auto out = oracle::vec(resize_bilinear(x, 7, 5));
  for (int64_t c = 0; c < 2; ++c) {
    std::vector<double> plane(x.data().begin() + c * 12, x.data().begin() + (c + 1) * 12);
    const auto ref = oracle::resize_plane(plane, 3, 4, 7, 5);
    for (int64_t i = 0; i < 35; ++i) CHECK(std::abs(out[c * 35 + i] - ref[i]) < 1e-12);
  }
  CHECK(oracle::vec(resize_bilinear(x, 3, 4)) == oracle::vec(x));
}

TEST_CASE("ops are pure") {
  const T a = random_tensor({3, 3}, 61), b = random_tensor({3, 3}, 62);
  const auto a0 = oracle::vec(a), b0 = oracle::vec(b);
  matmul(a, b);
  softmax(a, 0);
  layer_norm(a, T::full({3}, 1.0), T::zeros({3}));
  add(a, b);
  gelu(a);
  CHECK(oracle::vec(a) == a0);
  CHECK(oracle::vec(b) == b0);
}

TEST_CASE("non-finite values are errors") {
  CHECK_THROWS_AS(T::from_data({2}, {1.0, NAN}), NumericError);
  CHECK_THROWS_AS(scale(T::scalar(1e300), 1e300), NumericError);
  CHECK_THROWS_AS(T::from_data({3}, {1.0, 2.0}), DimensionError);
  auto f = Tensor<float>::from_data({2}, {1e30f, 1.0f});
  CHECK_THROWS_AS(mul(f, f), NumericError);
}

TEST_CASE("tape") {
  SUBCASE("gradients accumulate into leaves across backward calls") {
    T x = param({3}, 71);
    sum(x).backward();
    sum(x).backward();
    for (double g : x.grad()) CHECK(g == 2.0);
    x.zero_grad();
    CHECK(x.grad().empty());
  }
  SUBCASE("no graph under NoGradGuard") {
    const T x = param({3}, 72);
    NoGradGuard guard;
    const T y = sum(x);
    CHECK_FALSE(y.requires_grad());
  }
  SUBCASE("diamond graph") {
    const T x = param({2}, 73);
    const T y = mul(x, x);
    sum(add(y, y)).backward();
    for (int i = 0; i < 2; ++i) CHECK(x.grad()[i] == doctest::Approx(4 * x.data()[i]));
  }
}
