#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "soynet/adam.hpp"
#include "soynet/gradcheck.hpp"
#include "soynet/ops.hpp"
#include "test_util.hpp"

using namespace soynet;
using soynet::testing::project;
using soynet::testing::random_tensor;

namespace {

Tensor<double> naive_matmul(const Tensor<double>& a, const Tensor<double>& b) {
  Tensor<double> c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = 0;
      for (std::size_t p = 0; p < a.dim(1); ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

// Direct six-loop cross-correlation.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w, const std::vector<double>& b,
                          std::size_t stride, std::size_t pad) {
  const std::size_t ci = x.dim(0), h = x.dim(1), wd = x.dim(2), co = w.dim(0), k = w.dim(2);
  const std::size_t ho = (h + 2 * pad - k) / stride + 1, wo = (wd + 2 * pad - k) / stride + 1;
  Tensor<double> y({co, ho, wo});
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t r = 0; r < ho; ++r)
      for (std::size_t c = 0; c < wo; ++c) {
        double s = b.empty() ? 0.0 : b[o];
        for (std::size_t i = 0; i < ci; ++i)
          for (std::size_t dy = 0; dy < k; ++dy)
            for (std::size_t dx = 0; dx < k; ++dx) {
              const auto yy = static_cast<std::ptrdiff_t>(r * stride + dy) - static_cast<std::ptrdiff_t>(pad);
              const auto xx = static_cast<std::ptrdiff_t>(c * stride + dx) - static_cast<std::ptrdiff_t>(pad);
              if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(h) || xx >= static_cast<std::ptrdiff_t>(wd)) continue;
              s += x[(i * h + yy) * wd + xx] * w[((o * ci + i) * k + dy) * k + dx];
            }
        y[(o * ho + r) * wo + c] = s;
      }
  return y;
}

}  // namespace

TEST(Tensor, RejectsZeroExtentAndSizeMismatch) {
  EXPECT_THROW(Tensor<double>({2, 0}), ShapeError);
  EXPECT_THROW(Tensor<double>({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  Tensor<double> t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rank(), 2u);
}

TEST(Tensor, RequireFiniteRejectsNanAndInf) {
  Tensor<double> t({3});
  EXPECT_NO_THROW(require_finite(t, "t"));
  t[1] = std::nan("");
  EXPECT_THROW(require_finite(t, "t"), NumericError);
  t[1] = INFINITY;
  EXPECT_THROW(require_finite(t, "t"), NumericError);
}

TEST(Matmul, IdentityZeroAndHandExample) {
  const auto b = Tensor<double>::matrix({{3, 4}, {5, 6}});
  EXPECT_EQ(matmul(Tensor<double>::matrix({{1, 0}, {0, 1}}), b), b);
  EXPECT_EQ(matmul(Tensor<double>({2, 2}), b), Tensor<double>({2, 2}));
  EXPECT_EQ(matmul(Tensor<double>::matrix({{1, 2}, {3, 4}}), Tensor<double>::matrix({{5, 6}, {7, 8}})),
            Tensor<double>::matrix({{19, 22}, {43, 50}}));
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Tensor<double>({2, 3}), Tensor<double>({2, 3})), ShapeError);
}

TEST(Matmul, MatchesNaiveOnRandomShapes) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.below(9), k = 1 + rng.below(17), n = 1 + rng.below(11);
    const auto a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
    EXPECT_LT(max_abs_diff(matmul(a, b), naive_matmul(a, b)), 1e-12);
  }
}

TEST(Gemm, TransposedKernelsMatchNaive) {
  Rng rng(4);
  const std::size_t m = 5, n = 7, k = 13;
  const auto a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng);
  const auto expect = naive_matmul(a, b);
  const auto at = transpose2d(a), bt = transpose2d(b);
  Tensor<double> c1({m, n}), c2({m, n});
  detail::gemm_tn(m, n, k, at.data(), m, b.data(), n, c1.data(), n, false);
  detail::gemm_nt(m, n, k, a.data(), k, bt.data(), k, c2.data(), n, false);
  EXPECT_LT(max_abs_diff(c1, expect), 1e-12);
  EXPECT_LT(max_abs_diff(c2, expect), 1e-12);
}

TEST(Softmax, Examples) {
  const auto y = softmax(Tensor<double>({2}, std::vector<double>{0, 0}), 0);
  EXPECT_DOUBLE_EQ(y[0], 0.5);
  EXPECT_DOUBLE_EQ(y[1], 0.5);
  const double c = 1.7;
  const auto z = softmax(Tensor<double>({2}, std::vector<double>{c, c + std::log(3.0)}), 0);
  EXPECT_NEAR(z[0], 0.25, 1e-15);
  EXPECT_NEAR(z[1], 0.75, 1e-15);
}

TEST(Softmax, SumsToOneAndShiftInvariantOnAnyAxis) {
  Rng rng(5);
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const auto x = random_tensor({3, 4, 5}, rng, -30, 30);
    const auto y = softmax(x, axis);
    Tensor<double> shifted = x;
    for (double& v : shifted.values()) v += 123.25;
    EXPECT_LT(max_abs_diff(softmax(shifted, axis), y), 1e-12);
    const std::size_t stride = axis == 0 ? 20 : axis == 1 ? 5 : 1;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::size_t pos = (i / stride) % x.dim(axis);
      if (pos != 0) continue;
      double s = 0;
      for (std::size_t j = 0; j < x.dim(axis); ++j) s += y[i + j * stride];
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Softmax, LargeInputsStayFinite) {
  const auto y = softmax(Tensor<double>({3}, std::vector<double>{1000, 1001, -1000}), 0);
  EXPECT_TRUE(y.all_finite());
}

TEST(Softmax, GradientCheck) {
  Rng rng(6);
  auto x = random_tensor({4, 3}, rng, -2, 2);
  const auto w = random_tensor({4, 3}, rng);
  const auto dx = softmax_backward(softmax(x, 1), w, 1);
  const auto rep = gradient_check([&] { return project(softmax(x, 1), w); }, x.values(),
                                  std::span<const double>(dx.values()), 1e-6);
  EXPECT_TRUE(rep.passed(1e-5)) << rep.max_rel_error;
}

TEST(LayerNorm, Examples) {
  const std::vector<double> one(2, 1.0), zero(2, 0.0);
  const auto c = layer_norm(Tensor<double>({2}, std::vector<double>{4, 4}), std::span<const double>(one),
                            std::span<const double>(zero), 1e-5);
  EXPECT_EQ(c[0], 0.0);
  EXPECT_EQ(c[1], 0.0);
  const auto y = layer_norm(Tensor<double>({2}, std::vector<double>{1, 3}), std::span<const double>(one),
                            std::span<const double>(zero), 1e-14);
  EXPECT_NEAR(y[0], -1.0, 1e-9);
  EXPECT_NEAR(y[1], 1.0, 1e-9);
  const std::vector<double> beta{0.25, -2.0};
  const auto z = layer_norm(Tensor<double>({2}, std::vector<double>{7, -3}), std::span<const double>(zero),
                            std::span<const double>(beta), 1e-5);
  EXPECT_EQ(z[0], 0.25);
  EXPECT_EQ(z[1], -2.0);
}

TEST(LayerNorm, GradientCheckInputAndAffine) {
  Rng rng(7);
  auto x = random_tensor({3, 6}, rng);
  auto gamma = random_tensor({6}, rng), beta = random_tensor({6}, rng);
  const auto w = random_tensor({3, 6}, rng);
  const auto f = [&] {
    return project(layer_norm(x, std::span<const double>(gamma.values()), std::span<const double>(beta.values()), 1e-5), w);
  };
  LayerNormCache<double> cache;
  layer_norm(x, std::span<const double>(gamma.values()), std::span<const double>(beta.values()), 1e-5, &cache);
  Tensor<double> dg({6}), db({6});
  const auto dx = layer_norm_backward(w, cache, std::span<const double>(gamma.values()), dg.values(), db.values());
  EXPECT_TRUE(gradient_check(f, x.values(), std::span<const double>(dx.values()), 1e-6).passed(1e-5));
  EXPECT_TRUE(gradient_check(f, gamma.values(), std::span<const double>(dg.values()), 1e-6).passed(1e-5));
  EXPECT_TRUE(gradient_check(f, beta.values(), std::span<const double>(db.values()), 1e-6).passed(1e-5));
}

TEST(Activations, GeluAndReluGradients) {
  Rng rng(8);
  auto x = random_tensor({10}, rng, -3, 3);
  const auto w = random_tensor({10}, rng);
  const auto dg = gelu_backward(x, w);
  EXPECT_TRUE(gradient_check([&] { return project(gelu(x), w); }, x.values(), std::span<const double>(dg.values()), 1e-6)
                  .passed(1e-5));
  EXPECT_NEAR(gelu(0.0), 0.0, 0.0);
  EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-12);  // x * Phi(x)
  for (double& v : x.values())
    if (std::abs(v) < 1e-3) v = 0.5;  // keep clear of the kink
  const auto y = relu(x);
  const auto dr = relu_backward(y, w);
  EXPECT_TRUE(gradient_check([&] { return project(relu(x), w); }, x.values(), std::span<const double>(dr.values()), 1e-6)
                  .passed(1e-5));
}

TEST(Conv2d, Examples) {
  auto x = Tensor<double>({1, 3, 3}, 1.0);
  const auto ones = conv2d(x, Tensor<double>({1, 1, 3, 3}, 1.0), std::span<const double>(), 1, 1);
  EXPECT_EQ(ones[4], 9.0);
  EXPECT_EQ(ones[0], 4.0);
  EXPECT_EQ(ones[8], 4.0);
  EXPECT_EQ(ones[1], 6.0);
  Rng rng(9);
  const auto r = random_tensor({1, 4, 5}, rng);
  EXPECT_EQ(conv2d(r, Tensor<double>({1, 1, 1, 1}, 1.0), std::span<const double>(), 1, 0), r);
}

TEST(Conv2d, ShapeArithmetic) {
  const auto g = conv2d_geometry({3, 224, 224}, {64, 3, 3, 3}, 1, 1);
  EXPECT_EQ(g.h_out, 224u);
  EXPECT_EQ(g.w_out, 224u);
  EXPECT_EQ(g.c_out, 64u);
  EXPECT_THROW(conv2d_geometry({3, 8, 8}, {4, 2, 3, 3}, 1, 1), ShapeError);
  EXPECT_THROW(conv2d_geometry({3, 8, 8}, {4, 3, 2, 2}, 1, 1), ShapeError);
}

TEST(Conv2d, MatchesDirectLoopsAndPreservesExtent) {
  Rng rng(10);
  for (std::size_t stride : {1u, 2u}) {
    const auto x = random_tensor({3, 7, 6}, rng), w = random_tensor({4, 3, 3, 3}, rng);
    const std::vector<double> b{0.1, -0.2, 0.3, 0.0};
    const auto y = conv2d(x, w, std::span<const double>(b), stride, 1);
    EXPECT_LT(max_abs_diff(y, naive_conv(x, w, b, stride, 1)), 1e-12);
    if (stride == 1) {
      EXPECT_EQ(y.dim(1), 7u);
      EXPECT_EQ(y.dim(2), 6u);
    }
  }
}

TEST(Conv2d, GradientCheck) {
  Rng rng(11);
  auto x = random_tensor({2, 5, 4}, rng), w = random_tensor({3, 2, 3, 3}, rng);
  auto b = random_tensor({3}, rng);
  const auto proj = random_tensor({3, 5, 4}, rng);
  const auto f = [&] { return project(conv2d(x, w, std::span<const double>(b.values()), 1, 1), proj); };
  const auto g = conv2d_backward(x, w, proj, 1, 1);
  EXPECT_TRUE(gradient_check(f, x.values(), std::span<const double>(g.dx.values()), 1e-6).passed(1e-5));
  EXPECT_TRUE(gradient_check(f, w.values(), std::span<const double>(g.dweight.values()), 1e-6).passed(1e-5));
  EXPECT_TRUE(gradient_check(f, b.values(), std::span<const double>(g.dbias), 1e-6).passed(1e-5));
}

TEST(Upsample, ExamplesAndSum) {
  const auto y = nearest_upsample2x(Tensor<double>({1, 2, 2}, std::vector<double>{1, 2, 3, 4}));
  const std::vector<double> expect{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
  EXPECT_EQ(y, Tensor<double>({1, 4, 4}, expect));
  Rng rng(12);
  const auto x = random_tensor({3, 3, 5}, rng);
  EXPECT_NEAR(sum(nearest_upsample2x(x)), 4.0 * sum(x), 1e-12);
  const auto c = nearest_upsample2x(Tensor<double>({2, 3, 3}, 2.5));
  for (double v : c.values()) EXPECT_EQ(v, 2.5);
}

TEST(Upsample, BackwardIsAdjoint) {
  Rng rng(13);
  auto x = random_tensor({2, 3, 4}, rng);
  const auto w = random_tensor({2, 6, 8}, rng);
  const auto dx = nearest_upsample2x_backward(w);
  EXPECT_TRUE(gradient_check([&] { return project(nearest_upsample2x(x), w); }, x.values(),
                             std::span<const double>(dx.values()), 1e-6)
                  .passed(1e-5));
  auto xh = random_tensor({3, 4, 2}, rng);
  const auto wh = random_tensor({6, 8, 2}, rng);
  const auto dxh = nearest_upsample2x_hwc_backward(wh);
  EXPECT_TRUE(gradient_check([&] { return project(nearest_upsample2x_hwc(xh), wh); }, xh.values(),
                             std::span<const double>(dxh.values()), 1e-6)
                  .passed(1e-5));
  EXPECT_EQ(chw_to_hwc(nearest_upsample2x(hwc_to_chw(xh))), nearest_upsample2x_hwc(xh));
}

TEST(Windows, SingleWindowIsUnchanged) {
  Rng rng(14);
  const auto x = random_tensor({7, 7, 3}, rng);
  const auto w = window_partition(x, 7);
  EXPECT_EQ(w.shape(), (Shape{1, 49, 3}));
  EXPECT_EQ(std::vector<double>(w.values().begin(), w.values().end()),
            std::vector<double>(x.values().begin(), x.values().end()));
}

TEST(Windows, RoundTripIsIdentity) {
  Rng rng(15);
  const auto x = random_tensor({14, 14, 3}, rng);
  EXPECT_EQ(window_reverse(window_partition(x, 7), 7, 14, 14), x);
  const auto y = random_tensor({12, 8, 2}, rng);
  EXPECT_EQ(window_reverse(window_partition(y, 4), 4, 12, 8), y);
}

TEST(Windows, FirstWindowIsTopLeftBlock) {
  Tensor<double> x({8, 8, 1});
  for (std::size_t i = 0; i < 64; ++i) x[i] = static_cast<double>(i);
  const auto w = window_partition(x, 4);
  ASSERT_EQ(w.dim(0), 4u);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(w[r * 4 + c], static_cast<double>(r * 8 + c));
  // second window is the top-right block
  EXPECT_EQ(w[16], 4.0);
}

TEST(Windows, NonDivisibleThrowsAndPadCropRoundTrips) {
  Rng rng(16);
  const auto x = random_tensor({10, 9, 2}, rng);
  EXPECT_THROW(window_partition(x, 7), ShapeError);
  const auto p = pad_to_multiple(x, 7);
  EXPECT_EQ(p.shape(), (Shape{14, 14, 2}));
  EXPECT_EQ(p[(13 * 14 + 13) * 2], 0.0);
  EXPECT_EQ(crop_hw(window_reverse(window_partition(p, 7), 7, 14, 14), 10, 9), x);
}

TEST(Windows, RollIsInvertible) {
  Rng rng(17);
  const auto x = random_tensor({6, 5, 2}, rng);
  EXPECT_EQ(roll_hw(roll_hw(x, -3, -2), 3, 2), x);
  const auto r = roll_hw(x, -1, 0);
  EXPECT_EQ(r[0], x[5 * 2]);  // row 1 moved to row 0
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  Param<double> p("p", {4}, 0.7);
  ParamList<double> ps{&p};
  AdamState<double> st(ps, {2e-4, 0.9, 0.999, 1e-8, 0.0});
  adam_step(ps, st);
  for (double v : p.value.values()) EXPECT_EQ(v, 0.7);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, FirstStepMovesByLr) {
  Param<double> p("p", {3});
  p.grad = Tensor<double>({3}, std::vector<double>{0.3, -5.0, 1e-3});
  ParamList<double> ps{&p};
  AdamState<double> st(ps, {2e-4, 0.9, 0.999, 1e-12, 0.0});
  adam_step(ps, st);
  EXPECT_NEAR(p.value[0], -2e-4, 1e-12);
  EXPECT_NEAR(p.value[1], 2e-4, 1e-12);
  EXPECT_NEAR(p.value[2], -2e-4, 1e-10);
}

TEST(Adam, DecreasesQuadraticAndIsDeterministic) {
  const auto run = [] {
    Param<double> p("x", {1}, 1.0);
    ParamList<double> ps{&p};
    AdamState<double> st(ps, {0.1, 0.9, 0.999, 1e-8, 1e-7});
    std::vector<double> xs;
    for (int i = 0; i < 2; ++i) {
      p.grad[0] = p.value[0];  // d/dx x^2/2
      adam_step(ps, st);
      xs.push_back(p.value[0]);
    }
    return xs;
  };
  const auto a = run();
  EXPECT_LT(std::abs(a[0]), 1.0);
  EXPECT_LT(std::abs(a[1]), std::abs(a[0]));
  EXPECT_EQ(a, run());
}

TEST(Adam, DecoupledWeightDecay) {
  Param<double> p("p", {1}, 2.0);
  ParamList<double> ps{&p};
  AdamState<double> st(ps, {0.5, 0.9, 0.999, 1e-8, 0.1});
  adam_step(ps, st);
  EXPECT_NEAR(p.value[0], 2.0 - 0.5 * 0.1 * 2.0, 1e-12);
}

TEST(GradCheck, QuadraticAndLinear) {
  std::vector<double> x{1, 2};
  const std::vector<double> g{2, 4};
  const auto rep = gradient_check([&] { return x[0] * x[0] + x[1] * x[1]; }, std::span<double>(x),
                                  std::span<const double>(g), 1e-5);
  EXPECT_LT(rep.max_rel_error, 1e-6);
  EXPECT_EQ(rep.probes, 2u);
  EXPECT_EQ(x, (std::vector<double>{1, 2}));
  std::vector<double> y{0.3, -0.7, 5};
  const std::vector<double> gl{3, -2, 0.5};
  const auto lin = gradient_check([&] { return 3 * y[0] - 2 * y[1] + 0.5 * y[2]; }, std::span<double>(y),
                                  std::span<const double>(gl), 1e-5);
  EXPECT_LT(lin.max_rel_error, 1e-9);
}

TEST(GradCheck, WrongGradientAndNonFiniteFail) {
  std::vector<double> x{1, 2};
  const std::vector<double> bad{2, 5};
  EXPECT_FALSE(gradient_check([&] { return x[0] * x[0] + x[1] * x[1]; }, std::span<double>(x),
                              std::span<const double>(bad), 1e-5)
                   .passed(1e-5));
  const std::vector<double> g{0, 0};
  const auto rep = gradient_check([&] { return std::log(x[0] - 1.0); }, std::span<double>(x),
                                  std::span<const double>(g), 1e-5);
  EXPECT_FALSE(rep.finite);
  EXPECT_FALSE(rep.passed(1.0));
}

TEST(Rng, DeterministicAndInRange) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    const double u = a.uniform();
    EXPECT_EQ(u, b.uniform());
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    const auto k = a.below(7);
    EXPECT_EQ(k, b.below(7));
    EXPECT_LT(k, 7u);
    const double t = a.truncated_normal(0.02);
    EXPECT_EQ(t, b.truncated_normal(0.02));
    EXPECT_LE(std::abs(t), 0.04);
  }
  EXPECT_NE(mix_seed(1, 2), mix_seed(1, 3));
  EXPECT_EQ(hash_string("abc"), hash_string("abc"));
}
