#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pfgnet/errors.hpp"
#include "pfgnet/ops.hpp"
#include "support.hpp"

using namespace pfgnet;
using testing::random_tensor;

namespace {

std::vector<std::vector<std::vector<double>>> kernels_of(const Tensor& k3) {
  std::vector<std::vector<std::vector<double>>> out(k3.dim(0));
  const std::size_t k = k3.dim(1);
  for (std::size_t c = 0; c < k3.dim(0); ++c) {
    out[c].assign(k, std::vector<double>(k));
    for (std::size_t u = 0; u < k; ++u)
      for (std::size_t v = 0; v < k; ++v) out[c][u][v] = k3[(c * k + u) * k + v];
  }
  return out;
}

}  // namespace

TEST_CASE("tensor construction enforces extents and rank") {
  CHECK_THROWS_AS(Tensor(Shape{}), ConfigError);
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), ConfigError);
  CHECK_THROWS_AS(Tensor(Shape{1, 1, 1, 1, 1, 1}), ConfigError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>(3)), ConfigError);
  Tensor t({2, 3});
  CHECK(t.numel() == 6);
  auto f = Tensor::full({2}, 0.1, DType::float32);
  CHECK(f[0] == static_cast<double>(0.1f));
}

TEST_CASE("dwconv_1d_h") {
  SUBCASE("zero padding at the borders") {
    Tensor x = Tensor::full({1, 1, 3}, 1.0);
    Tensor h({1, 3}, {1, 1, 1});
    auto y = ops::dwconv_1d_h(x, h);
    CHECK(y[0] == 2.0);
    CHECK(y[1] == 3.0);
    CHECK(y[2] == 2.0);
  }
  SUBCASE("identity kernel") {
    Tensor x = random_tensor({2, 4, 5}, 1);
    Tensor h({2, 3}, {0, 1, 0, 0, 1, 0});
    CHECK(ops::dwconv_1d_h(x, h).identical(x));
  }
  SUBCASE("matches dense oracle with the row embedded in a zero matrix") {
    Tensor x = random_tensor({2, 5, 5}, 2);
    Tensor h = random_tensor({2, 5}, 3);
    std::vector<std::vector<std::vector<double>>> k(2, std::vector<std::vector<double>>(5, std::vector<double>(5, 0.0)));
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t t = 0; t < 5; ++t) k[c][2][t] = h[c * 5 + t];
    CHECK(testing::max_rel_diff(ops::dwconv_1d_h(x, h), testing::dense_oracle(x, k)) < 1e-14);
  }
  SUBCASE("errors") {
    Tensor x = random_tensor({2, 4, 4}, 4);
    CHECK_THROWS_AS(ops::dwconv_1d_h(x, Tensor({2, 4})), ConfigError);
    CHECK_THROWS_AS(ops::dwconv_1d_h(x, Tensor({3, 3})), ConfigError);
  }
}

TEST_CASE("dwconv_1d_v") {
  Tensor x = Tensor::full({1, 3, 1}, 1.0);
  auto y = ops::dwconv_1d_v(x, Tensor({1, 3}, {1, 1, 1}));
  CHECK(y[0] == 2.0);
  CHECK(y[1] == 3.0);
  CHECK(y[2] == 2.0);

  Tensor r = random_tensor({3, 6, 4}, 5);
  CHECK(ops::dwconv_1d_v(r, Tensor({3, 3}, {0, 1, 0, 0, 1, 0, 0, 1, 0})).identical(r));

  Tensor v = random_tensor({3, 7}, 6);
  std::vector<std::vector<std::vector<double>>> k(3, std::vector<std::vector<double>>(7, std::vector<double>(7, 0.0)));
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 7; ++t) k[c][t][3] = v[c * 7 + t];
  CHECK(testing::max_rel_diff(ops::dwconv_1d_v(r, v), testing::dense_oracle(r, k)) < 1e-14);
}

TEST_CASE("sep_conv") {
  SUBCASE("all-ones 3x3 rank-1 kernel on all-ones input") {
    Tensor x = Tensor::full({1, 3, 3}, 1.0);
    SepKernel sk{Tensor({1, 3}, {1, 1, 1}), Tensor({1, 3}, {1, 1, 1})};
    auto y = ops::sep_conv(x, sk);
    CHECK(y.at(0, 1, 1) == 9.0);
    CHECK(y.at(0, 0, 1) == 6.0);
    CHECK(y.at(0, 0, 0) == 4.0);
  }
  SUBCASE("identity") {
    Tensor x = random_tensor({2, 5, 6}, 7);
    SepKernel sk{Tensor({2, 3}, {0, 1, 0, 0, 1, 0}), Tensor({2, 3}, {0, 1, 0, 0, 1, 0})};
    CHECK(ops::sep_conv(x, sk).identical(x));
  }
  SUBCASE("equals dense dwconv_2d with v outer h") {
    for (std::size_t k : {3u, 5u, 9u}) {
      Tensor x = random_tensor({3, 8, 7}, 10 + k);
      SepKernel sk{random_tensor({3, k}, 20 + k), random_tensor({3, k}, 30 + k)};
      auto sep = ops::sep_conv(x, sk);
      auto dense = ops::dwconv_2d(x, sk.dense());
      CHECK(testing::max_rel_diff(sep, dense) < 1e-12);
      CHECK(testing::max_rel_diff(sep, testing::dense_oracle(x, kernels_of(sk.dense()))) < 1e-12);
    }
  }
  SUBCASE("float32 agreement") {
    Tensor x = random_tensor({2, 9, 9}, 40, -1, 1, DType::float32);
    SepKernel sk{random_tensor({2, 9}, 41, -1, 1, DType::float32),
                 random_tensor({2, 9}, 42, -1, 1, DType::float32)};
    auto sep = ops::sep_conv(x, sk);
    CHECK(sep.dtype() == DType::float32);
    CHECK(testing::max_rel_diff(sep, ops::dwconv_2d(x, sk.dense())) < 1e-5);
  }
  SUBCASE("mismatched row and column kernels") {
    SepKernel sk{Tensor({1, 3}), Tensor({1, 5})};
    CHECK_THROWS_AS(ops::sep_conv(Tensor({1, 4, 4}), sk), ConfigError);
  }
}

TEST_CASE("dwconv_2d") {
  Tensor delta({1, 3, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0});
  Tensor x = random_tensor({1, 5, 5}, 50);
  CHECK(ops::dwconv_2d(x, delta).identical(x));

  auto ones = ops::dwconv_2d(Tensor::full({1, 3, 3}, 1.0), Tensor::full({1, 3, 3}, 1.0));
  CHECK(ones.at(0, 1, 1) == 9.0);
  CHECK(ones.at(0, 0, 0) == 4.0);

  Tensor r = random_tensor({1, 6, 6}, 51);
  Tensor k = random_tensor({1, 3, 3}, 52);
  CHECK(testing::max_rel_diff(ops::dwconv_2d(r, k), testing::dense_oracle(r, kernels_of(k))) < 1e-14);

  CHECK_THROWS_AS(ops::dwconv_2d(r, Tensor({1, 4, 4})), ConfigError);
}

TEST_CASE("same padding preserves shape for every odd kernel up to 2*min(H,W)+1") {
  const std::size_t H = 4, W = 6;
  Tensor x = random_tensor({1, H, W}, 53);
  for (std::size_t k = 1; k <= 2 * std::min(H, W) + 1; k += 2) {
    CHECK(ops::dwconv_2d(x, Tensor({1, k, k})).dims() == x.dims());
    CHECK(ops::sep_conv(x, SepKernel{Tensor({1, k}), Tensor({1, k})}).dims() == x.dims());
  }
}

TEST_CASE("conv2d against a naive oracle, with stride") {
  Tensor x = random_tensor({2, 6, 6}, 60);
  Tensor w = random_tensor({3, 2, 3, 3}, 61);
  Tensor b = random_tensor({3}, 62);
  for (std::size_t stride : {1u, 2u}) {
    auto y = ops::conv2d(x, w, b, stride);
    REQUIRE(y.dims() == Shape{3, 6 / stride, 6 / stride});
    auto p = testing::padded(x, 1);
    for (std::size_t o = 0; o < 3; ++o)
      for (std::size_t i = 0; i < y.dim(1); ++i)
        for (std::size_t j = 0; j < y.dim(2); ++j) {
          double s = b[o];
          for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t u = 0; u < 3; ++u)
              for (std::size_t v = 0; v < 3; ++v)
                s += w[((o * 2 + c) * 3 + u) * 3 + v] * p[c][i * stride + u][j * stride + v];
          CHECK(y.at(o, i, j) == doctest::Approx(s).epsilon(1e-13));
        }
  }
}

TEST_CASE("pwconv") {
  Tensor x = random_tensor({2, 3, 3}, 70);
  Tensor eye({2, 2}, {1, 0, 0, 1});
  CHECK(ops::pwconv(x, eye, Tensor({2})).identical(x));

  auto sum = ops::pwconv(x, Tensor({1, 2}, {1, 1}), Tensor({1}));
  for (std::size_t p = 0; p < 9; ++p) CHECK(sum[p] == x[p] + x[9 + p]);

  Tensor w = random_tensor({4, 2}, 71), b = random_tensor({4}, 72);
  auto y = ops::pwconv(x, w, b);
  for (std::size_t p = 0; p < 9; ++p)
    for (std::size_t o = 0; o < 4; ++o) {
      const double mv = w[o * 2] * x[p] + w[o * 2 + 1] * x[9 + p] + b[o];
      CHECK(y[o * 9 + p] == doctest::Approx(mv).epsilon(1e-14));
    }
  CHECK_THROWS_AS(ops::pwconv(x, Tensor({4, 3}), b), ConfigError);
}

TEST_CASE("avg_pool3 uses a fixed divisor of nine") {
  const double v = 2.5;
  auto y = ops::avg_pool3(Tensor::full({1, 4, 4}, v));
  CHECK(y.at(0, 1, 1) == doctest::Approx(v));
  CHECK(y.at(0, 0, 1) == doctest::Approx(6 * v / 9));
  CHECK(y.at(0, 0, 0) == doctest::Approx(4 * v / 9));

  Tensor impulse({1, 3, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0});
  const auto spread = ops::avg_pool3(impulse);
  for (auto e : spread.data()) CHECK(e == doctest::Approx(1.0 / 9));

  Tensor r = random_tensor({2, 5, 4}, 80);
  std::vector<std::vector<std::vector<double>>> box(2, std::vector<std::vector<double>>(3, std::vector<double>(3, 1.0 / 9)));
  CHECK(testing::max_abs_diff(ops::avg_pool3(r), testing::dense_oracle(r, box)) < 1e-15);
}

TEST_CASE("softmax_over_channels") {
  auto u = ops::softmax_over_channels(Tensor({3, 1, 1}, {0, 0, 0}));
  for (auto e : u.data()) CHECK(e == doctest::Approx(1.0 / 3));

  auto two = ops::softmax_over_channels(Tensor({2, 1, 1}, {std::log(2.0), 0.0}));
  CHECK(two[0] == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(two[1] == doctest::Approx(1.0 / 3).epsilon(1e-15));

  Tensor logits = random_tensor({4, 5, 5}, 90, -5, 5);
  auto a = ops::softmax_over_channels(logits);
  auto b = ops::softmax_over_channels(ops::add(logits, Tensor::full({1, 5, 5}, 123.0)));
  CHECK(testing::max_abs_diff(a, b) < 1e-12);
  for (std::size_t p = 0; p < 25; ++p) {
    double s = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(a[k * 25 + p] >= 0.0);
      CHECK(a[k * 25 + p] <= 1.0);
      s += a[k * 25 + p];
    }
    CHECK(std::fabs(s - 1.0) < 1e-6);
  }
  // Large logits must not overflow.
  auto big = ops::softmax_over_channels(Tensor({2, 1, 1}, {1000.0, 999.0}));
  CHECK(big.all_finite());
}

TEST_CASE("elementwise vocabulary") {
  CHECK(ops::tanh(Tensor::from({0.0}))[0] == 0.0);
  CHECK(ops::sigmoid(Tensor::from({0.0}))[0] == 0.5);
  Tensor x = random_tensor({2, 3, 3}, 100, -4, 4);
  CHECK(ops::mul(x, Tensor::full(x.dims(), 1.0)).identical(x));
  const auto t = ops::tanh(x), s = ops::sigmoid(x);
  for (auto e : t.data()) CHECK((e >= -1 && e <= 1));
  for (auto e : s.data()) CHECK((e > 0 && e < 1));
  auto lr = ops::leaky_relu(Tensor::from({-2.0, 3.0}), 0.2);
  CHECK(lr[0] == doctest::Approx(-0.4));
  CHECK(lr[1] == 3.0);

  auto pc = ops::mul(x, Tensor::from({2.0, -1.0}));
  CHECK(pc.at(0, 1, 2) == 2.0 * x.at(0, 1, 2));
  CHECK(pc.at(1, 2, 0) == -x.at(1, 2, 0));
  Tensor pix = random_tensor({1, 3, 3}, 101);
  auto pp = ops::add(x, pix);
  CHECK(pp.at(1, 2, 1) == x.at(1, 2, 1) + pix.at(0, 2, 1));
  CHECK_THROWS_AS(ops::add(x, Tensor({3})), ConfigError);
  CHECK_THROWS_AS(ops::sub(x, Tensor({2, 3, 2})), ConfigError);
}

TEST_CASE("grn") {
  Tensor x = random_tensor({3, 4, 4}, 110);
  SUBCASE("zero affine leaves only the residual") {
    CHECK(ops::grn(x, Tensor({3}), Tensor({3})).identical(x));
  }
  SUBCASE("identical channels normalise to g/(g+eps)") {
    Tensor same({2, 2, 2}, {1, 2, 3, 4, 1, 2, 3, 4});
    const double g = std::sqrt(30.0), n = g / (g + 1e-6);
    auto y = ops::grn(same, Tensor::from({1, 1}), Tensor({2}));
    for (std::size_t i = 0; i < 8; ++i) CHECK(y[i] == doctest::Approx(same[i] * n + same[i]));
  }
  SUBCASE("ratio is scale invariant") {
    Tensor gamma = Tensor::from({1, 1, 1});
    auto base = ops::sub(ops::grn(x, gamma, Tensor({3})), x);  // x * n
    const double s = 3.7;
    auto scaled = ops::sub(ops::grn(ops::scale(x, s), gamma, Tensor({3})), ops::scale(x, s));
    // With eps << mean norm the normalised gain is unchanged, so the
    // gated term scales linearly.
    CHECK(testing::max_rel_diff(scaled, ops::scale(base, s)) < 1e-6);
  }
}

TEST_CASE("group_norm normalises each group") {
  Tensor x = random_tensor({4, 3, 3}, 120, 0, 5);
  auto y = ops::group_norm(x, 2, Tensor::full({4}, 1.0), Tensor({4}), 0.0);
  for (std::size_t g = 0; g < 2; ++g) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 18; ++i) m += y[g * 18 + i];
    m /= 18;
    for (std::size_t i = 0; i < 18; ++i) v += (y[g * 18 + i] - m) * (y[g * 18 + i] - m);
    CHECK(std::fabs(m) < 1e-12);
    CHECK(v / 18 == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(ops::group_norm(Tensor({3, 2, 2}), 2, Tensor({3}), Tensor({3})), ConfigError);
}

TEST_CASE("concat/split and pack/unpack are exact inverses") {
  std::vector<Tensor> parts{random_tensor({1, 3, 4}, 130), random_tensor({2, 3, 4}, 131),
                            random_tensor({3, 3, 4}, 132)};
  CHECK(ops::concat_channels(std::span(parts.data(), 1)).identical(parts[0]));
  auto joined = ops::concat_channels(parts);
  std::vector<std::size_t> sizes{1, 2, 3};
  auto back = ops::split_channels(joined, sizes);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back[i].identical(parts[i]));

  Tensor even = random_tensor({8, 2, 2}, 133);
  std::vector<std::size_t> halves{4, 4};
  auto uv = ops::split_channels(even, halves);
  CHECK(uv[0][0] == even[0]);
  CHECK(uv[1][0] == even[4 * 4]);

  CHECK_THROWS_AS(ops::concat_channels(std::vector<Tensor>{Tensor({1, 2, 2}), Tensor({1, 3, 2})}),
                  ConfigError);

  std::vector<Tensor> frames{random_tensor({1, 2, 2}, 134), random_tensor({1, 2, 2}, 135)};
  auto z = ops::pack_time(frames);
  CHECK(z.dim(0) == 2);
  CHECK(z.at(0, 1, 1) == frames[0].at(0, 1, 1));
  CHECK(z.at(1, 0, 1) == frames[1].at(0, 0, 1));
  auto un = ops::unpack_time(z, 2);
  CHECK(un[0].identical(frames[0]));
  CHECK(un[1].identical(frames[1]));
  CHECK(ops::pack_time(std::span(frames.data(), 1)).identical(frames[0]));
  CHECK_THROWS_AS(ops::unpack_time(Tensor({3, 2, 2}), 2), ConfigError);
}

TEST_CASE("separable cost is 2k versus k squared") {
  // Per-channel multiply count of one output pixel.
  const std::size_t k = 31;
  CHECK(k * k == 961);
  CHECK(2 * k == 62);
  CHECK(2 * 961 == 31 * 62);  // 961/62 == 15.5 exactly
}
