#pragma once

// Test-only helpers: random tensors and brute-force oracles that share no
// code with the library kernels they check.

#include <algorithm>
#include <cmath>
#include <vector>

#include "pfgnet/rng.hpp"
#include "pfgnet/tensor.hpp"

namespace testing {

inline pfgnet::Tensor random_tensor(pfgnet::Shape dims, std::uint64_t seed,
                                    double lo = -1.0, double hi = 1.0,
                                    pfgnet::DType dtype = pfgnet::DType::float64) {
  pfgnet::CounterRng rng(seed);
  pfgnet::Tensor t(std::move(dims), dtype);
  for (auto& x : t.data()) x = rng.uniform(lo, hi);
  t.settle();
  return t;
}

/// Explicitly zero-padded copy of a [C,H,W] map.
inline std::vector<std::vector<std::vector<double>>> padded(const pfgnet::Tensor& x,
                                                            std::size_t pad) {
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  std::vector<std::vector<std::vector<double>>> p(
      C, std::vector<std::vector<double>>(H + 2 * pad, std::vector<double>(W + 2 * pad, 0.0)));
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) p[c][i + pad][j + pad] = x.at(c, i, j);
  return p;
}

/// Depthwise cross-correlation of x with per-channel kh x kw windows,
/// computed by sliding an explicit window over a padded copy.
inline pfgnet::Tensor dense_oracle(const pfgnet::Tensor& x,
                                   const std::vector<std::vector<std::vector<double>>>& kernels) {
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t kh = kernels[0].size(), kw = kernels[0][0].size();
  const std::size_t pad = std::max(kh, kw) / 2;
  auto p = padded(x, pad);
  pfgnet::Tensor out({C, H, W});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j) {
        double s = 0.0;
        for (std::size_t u = 0; u < kh; ++u)
          for (std::size_t v = 0; v < kw; ++v)
            s += kernels[c][u][v] * p[c][i + pad - kh / 2 + u][j + pad - kw / 2 + v];
        out.at(c, i, j) = s;
      }
  return out;
}

inline double max_abs_diff(const pfgnet::Tensor& a, const pfgnet::Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

/// max |a - b| / max(|b|, tiny) over elements, measured against the
/// oracle's own scale.
inline double max_rel_diff(const pfgnet::Tensor& a, const pfgnet::Tensor& oracle) {
  double scale = 0.0;
  for (auto v : oracle.data()) scale = std::max(scale, std::fabs(v));
  return max_abs_diff(a, oracle) / std::max(scale, 1e-300);
}

}  // namespace testing

#include "pfgnet/params.hpp"

namespace testing {

/// Overwrites every parameter with U(lo, hi) noise so no branch sits at an
/// initialisation symmetry (zero gates, zero GRN affine, ...).
inline void randomize(pfgnet::ParamStore& store, std::uint64_t seed, double lo = -0.5,
                      double hi = 0.5) {
  std::uint64_t n = 0;
  for (auto& [name, value] : store.values_mut()) {
    pfgnet::CounterRng rng(pfgnet::derive_key(seed, {n++}));
    for (auto& x : value.data()) x = rng.uniform(lo, hi);
    value.settle();
  }
}

}  // namespace testing
