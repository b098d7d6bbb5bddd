#pragma once

// Spectral test helpers shared by the unit tests and the acceptance run.

#include <cmath>
#include <numbers>
#include <vector>

#include "pfgnet/rng.hpp"
#include "pfgnet/spectral.hpp"

namespace testing {

using pfgnet::CounterRng;
using pfgnet::spectral::QuadCoeffs;
using pfgnet::spectral::SpectralModel;

struct Band {
  bool present = false;
  double r1 = 0, r2 = 0;
};

// Widest positive run with non-positive samples on both sides, on a fine grid.
inline Band scan_oracle(const SpectralModel& hl, const SpectralModel& hs, double beta, std::size_t n) {
  Band best;
  std::size_t i = 1;
  auto f = [&](std::size_t j) {
    const double r = std::numbers::pi * j / (n - 1);
    return hl(r) - beta * hs(r);
  };
  while (i + 1 < n) {
    if (!(f(i) > 0) || f(i - 1) > 0) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end + 1 < n && f(end + 1) > 0) ++end;
    if (end + 1 == n) break;
    const double r1 = std::numbers::pi * i / (n - 1), r2 = std::numbers::pi * end / (n - 1);
    if (!best.present || r2 - r1 > best.r2 - best.r1) best = {true, r1, r2};
    i = end + 1;
  }
  return best;
}

inline SpectralModel random_model(CounterRng& rng) {
  if (rng.uniform() < 0.5) return SpectralModel::exp_decay(rng.uniform(0.1, 3.0));
  return SpectralModel::gaussian(rng.uniform(0.2, 4.0), rng.uniform(0.3, 3.0));
}

struct RingCase {
  SpectralModel hl, hs;
  double beta;
};

// Half plain random pairs, half a Gaussian surround against a slower
// exponential center with beta above the DC gain, which often rings.
inline RingCase random_ring_case(CounterRng& rng) {
  if (rng.uniform() < 0.5) {
    auto hl = random_model(rng);
    auto hs = random_model(rng);
    return {hl, hs, rng.uniform(-1.0, 1.0)};
  }
  const double gain = rng.uniform(0.8, 1.2);
  auto hl = SpectralModel::gaussian(rng.uniform(0.3, 2.0), gain);
  auto hs = SpectralModel::exp_decay(rng.uniform(0.1, 1.0));
  return {hl, hs, rng.uniform(1.0, 1.5)};
}

inline QuadCoeffs random_coeffs(CounterRng& rng) {
  // Gram-consistent coefficients from random vectors so N and D are positive definite.
  std::vector<double> l(6), s(6), w(6);
  for (std::size_t i = 0; i < 6; ++i) {
    l[i] = rng.uniform(-1, 1);
    s[i] = rng.uniform(-1, 1);
    w[i] = rng.uniform(0.05, 1);
  }
  QuadCoeffs q;
  for (std::size_t i = 0; i < 6; ++i) {
    q.A += l[i] * l[i] * w[i];
    q.B += l[i] * s[i] * w[i];
    q.C += s[i] * s[i] * w[i];
    q.At += l[i] * l[i];
    q.Bt += l[i] * s[i];
    q.Ct += s[i] * s[i];
  }
  q.sigma2 = rng.uniform(0.5, 2.0);
  return q;
}

}  // namespace testing
