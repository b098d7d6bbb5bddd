#include <cmath>

#include "doctest.h"
#include "pfgnet/autodiff.hpp"
#include "pfgnet/freq_descriptor.hpp"
#include "pfgnet/ops.hpp"
#include "support.hpp"

using namespace pfgnet;
using testing::random_tensor;

namespace {

Tensor ramp(std::size_t C, std::size_t H, std::size_t W) {
  Tensor t({C, H, W});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) t.at(c, i, j) = static_cast<double>(j);
  return t;
}

template <class Fn>
void for_interior(const Tensor& t, Fn fn) {
  for (std::size_t i = 1; i + 1 < t.dim(1); ++i)
    for (std::size_t j = 1; j + 1 < t.dim(2); ++j) fn(i, j, t.at(0, i, j));
}

}  // namespace

TEST_CASE("filter constants") {
  auto gx = freq::sobel_x(), gy = freq::sobel_y(), l = freq::laplacian();
  double sx = 0, sl = 0;
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t v = 0; v < 3; ++v) {
      CHECK(gy[u * 3 + v] == gx[v * 3 + u]);
      sx += gx[u * 3 + v];
      sl += l[u * 3 + v];
    }
  CHECK(sx == 0.0);
  CHECK(sl == 0.0);
}

TEST_CASE("sobel_magnitude") {
  auto flat = freq::sobel_magnitude(Tensor::full({1, 6, 6}, 3.0));
  for_interior(flat, [](auto, auto, double v) { CHECK(v == doctest::Approx(std::sqrt(1e-12))); });

  auto r = freq::sobel_magnitude(ramp(1, 6, 7));
  CHECK(r.dims() == Shape{1, 6, 7});
  for_interior(r, [](auto, auto, double v) { CHECK(std::fabs(v - 8.0) < 1e-12); });

  Tensor one = random_tensor({1, 5, 5}, 1);
  Tensor two = ops::concat_channels(std::vector<Tensor>{one, one});
  CHECK(testing::max_abs_diff(freq::sobel_magnitude(two), freq::sobel_magnitude(one)) < 1e-15);
}

TEST_CASE("laplacian_abs") {
  Tensor affine({1, 6, 6});
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) affine.at(0, i, j) = 0.7 * j - 1.3 * i + 2.0;
  for_interior(freq::laplacian_abs(affine), [](auto, auto, double v) { CHECK(std::fabs(v) < 1e-12); });

  Tensor impulse = Tensor::zeros({1, 5, 5});
  impulse.at(0, 2, 2) = 1.0;
  auto y = freq::laplacian_abs(impulse);
  CHECK(y.at(0, 2, 2) == 4.0);
  CHECK(y.at(0, 1, 2) == 1.0);
  CHECK(y.at(0, 3, 2) == 1.0);
  CHECK(y.at(0, 2, 1) == 1.0);
  CHECK(y.at(0, 2, 3) == 1.0);
  CHECK(y.at(0, 1, 1) == 0.0);

  for_interior(freq::laplacian_abs(Tensor::full({1, 5, 5}, 2.0)),
               [](auto, auto, double v) { CHECK(v == 0.0); });
}

TEST_CASE("local_variance") {
  for_interior(freq::local_variance(Tensor::full({1, 5, 5}, 0.4)),
               [](auto, auto, double v) { CHECK(std::fabs(v) < 1e-15); });
  for_interior(freq::local_variance(ramp(1, 5, 6)),
               [](auto, auto, double v) { CHECK(v == doctest::Approx(2.0 / 3).epsilon(1e-12)); });

  Tensor board({1, 6, 6});
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) board.at(0, i, j) = (i + j) % 2;
  auto v = freq::local_variance(board);
  for_interior(v, [&](std::size_t i, std::size_t j, double got) {
    // Brute-force window moments.
    double s = 0, s2 = 0;
    for (int u = -1; u <= 1; ++u)
      for (int w = -1; w <= 1; ++w) {
        const double x = board.at(0, i + u, j + w);
        s += x;
        s2 += x * x;
      }
    const double oracle = s2 / 9 - (s / 9) * (s / 9);
    CHECK(oracle == doctest::Approx(20.0 / 81));
    CHECK(got == doctest::Approx(oracle).epsilon(1e-12));
  });
}

TEST_CASE("descriptor") {
  CHECK(freq::descriptor(random_tensor({8, 16, 16}, 2)).dims() == Shape{3, 16, 16});

  auto flat = freq::descriptor(Tensor::full({2, 5, 5}, 1.5));
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 1; i < 4; ++i)
      for (std::size_t j = 1; j < 4; ++j) CHECK(flat.at(c, i, j) <= 1e-6 + 1e-18);

  auto r = freq::descriptor(ramp(2, 6, 6));
  for (std::size_t i = 1; i < 5; ++i)
    for (std::size_t j = 1; j < 5; ++j) {
      CHECK(r.at(0, i, j) == doctest::Approx(8.0));
      CHECK(r.at(1, i, j) == 0.0);
      CHECK(r.at(2, i, j) == doctest::Approx(2.0 / 3));
    }

  SUBCASE("masked cues are zero channels") {
    CueMask only_variance{false, false, true};
    auto m = freq::descriptor(ramp(1, 5, 5), only_variance);
    CHECK(m.dims() == Shape{3, 5, 5});
    for (std::size_t p = 0; p < 25; ++p) {
      CHECK(m[p] == 0.0);
      CHECK(m[25 + p] == 0.0);
    }
    CHECK(m.at(2, 2, 2) == doctest::Approx(2.0 / 3));
  }
}

TEST_CASE("cue properties on random inputs") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Tensor x = random_tensor({3, 7, 7}, 10 + seed);
    auto d = freq::descriptor(x);
    for (auto v : d.data()) CHECK(v >= 0.0);

    // DC rejection on interior pixels.
    auto shifted = freq::descriptor(ops::add(x, Tensor::full({3}, 5.0)));
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 1; i < 6; ++i)
        for (std::size_t j = 1; j < 6; ++j)
          CHECK(shifted.at(c, i, j) == doctest::Approx(d.at(c, i, j)).epsilon(1e-9).scale(1e-6));

    // Homogeneity: f1, f2 linear, f3 quadratic.
    const double s = 2.5;
    auto scaled = freq::descriptor(ops::scale(x, s));
    for (std::size_t i = 1; i < 6; ++i)
      for (std::size_t j = 1; j < 6; ++j) {
        CHECK(scaled.at(0, i, j) == doctest::Approx(s * d.at(0, i, j)).epsilon(1e-9));
        CHECK(scaled.at(1, i, j) == doctest::Approx(s * d.at(1, i, j)).epsilon(1e-12));
        CHECK(scaled.at(2, i, j) == doctest::Approx(s * s * d.at(2, i, j)).epsilon(1e-9));
      }
  }
}

TEST_CASE("descriptor gradients reach the input only") {
  ParamStore none;
  std::vector<Tensor> in{random_tensor({2, 6, 6}, 20)};
  auto f = [](TracedOps& ops, std::span<const Var> x) { return freq::descriptor(ops, x[0]); };
  auto trace = forward_traced(f, in, none);
  auto g = backward(trace, Tensor::full({3, 6, 6}, 1.0));
  CHECK(g.params.empty());
  CHECK(g.inputs[0].all_finite());
  CHECK(grad_check(f, in, none, 1e-6) < 1e-6);
}
