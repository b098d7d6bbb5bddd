#include "pfgnet/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>

#include "pfgnet/errors.hpp"

namespace pfgnet::spectral {

namespace {

constexpr double kPi = std::numbers::pi;
// Angles used for the radial average of a 2D response.
constexpr std::size_t kAngles = 360;

void check_same_grid(const FreqResponse& a, const FreqResponse& b, const char* what) {
  if (a.r != b.r) throw ConfigError(std::string(what) + ": responses are sampled on different grids");
}

double trapezoid(const std::vector<double>& r, const std::vector<double>& f) {
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) sum += 0.5 * (f[i] + f[i + 1]) * (r[i + 1] - r[i]);
  return sum;
}

// 1D DTFT of a kernel centred on its middle tap.
std::complex<double> dtft(std::span<const double> taps, double w) {
  const double c = static_cast<double>(taps.size() / 2);
  std::complex<double> sum = 0.0;
  for (std::size_t j = 0; j < taps.size(); ++j) sum += taps[j] * std::polar(1.0, -w * (j - c));
  return sum;
}

// Root of g between lo (g <= 0) and hi (g > 0).
double bisect(const std::function<double(double)>& g, double lo, double hi) {
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (g(mid) > 0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

double evaluate_poly(const std::vector<double>& c, double x) {
  double y = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) y = y * x + c[i];
  return y;
}

double poly_slope(const std::vector<double>& c, double x) {
  double y = 0.0;
  for (std::size_t i = c.size(); i-- > 1;) y = y * x + static_cast<double>(i) * c[i];
  return y;
}

std::vector<double> cubic_roots(const std::vector<double>& c) {
  // Monic x^3 + a x^2 + b x + d, depressed with x = t - a/3.
  const double a = c[2] / c[3], b = c[1] / c[3], d = c[0] / c[3];
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + d;
  const double shift = -a / 3.0;
  const double disc = q * q / 4.0 + p * p * p / 27.0;
  if (disc > 0) {
    const double s = std::sqrt(disc);
    return {std::cbrt(-q / 2.0 + s) + std::cbrt(-q / 2.0 - s) + shift};
  }
  if (p == 0) return {shift, shift, shift};
  const double m = 2.0 * std::sqrt(-p / 3.0);
  const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
  const double theta = std::acos(arg) / 3.0;
  std::vector<double> out;
  for (int k = 0; k < 3; ++k) out.push_back(m * std::cos(theta - 2.0 * kPi * k / 3.0) + shift);
  return out;
}

}  // namespace

void FreqResponse::validate() const {
  if (r.size() < kMinSamples) throw ConfigError("a frequency response needs at least 64 samples");
  if (values.size() != r.size()) throw ConfigError("frequency response has mismatched grid and values");
  if (r.front() != 0.0 || r.back() != kPi) throw ConfigError("frequency grid must span [0, pi]");
  for (std::size_t i = 1; i < r.size(); ++i) {
    if (!(r[i] > r[i - 1])) throw ConfigError("frequency grid must be strictly increasing");
  }
}

std::vector<double> radial_grid(std::size_t n) {
  if (n < kMinSamples) throw ConfigError("a frequency response needs at least 64 samples");
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = kPi * static_cast<double>(i) / static_cast<double>(n - 1);
  r.back() = kPi;
  return r;
}

SpectralModel SpectralModel::exp_decay(double rate) {
  return SpectralModel([rate](double r) { return std::exp(-rate * r); }, true);
}

SpectralModel SpectralModel::gaussian(double variance, double dc_gain) {
  if (!(variance > 0)) throw ConfigError("gaussian variance must be positive");
  return SpectralModel([variance, dc_gain](double r) { return dc_gain * std::exp(-r * r / (2 * variance)); },
                       true);
}

SpectralModel SpectralModel::empirical(const SepKernel& kernel) {
  kernel.validate();
  if (kernel.channels() != 1) throw ConfigError("spectral analysis takes a single-channel kernel");
  return SpectralModel([kernel](double r) { return kernel_response(kernel, r); }, false);
}

SpectralModel SpectralModel::custom(std::function<double(double)> fn) {
  return SpectralModel(std::move(fn), true);
}

FreqResponse SpectralModel::sample(std::size_t n) const {
  FreqResponse out;
  out.r = radial_grid(n);
  out.values.reserve(n);
  for (double r : out.r) out.values.push_back(fn_(r));
  if (continuous_) out.exact = fn_;
  return out;
}

double kernel_response(const SepKernel& kernel, double r) {
  const auto h = kernel.h.data().subspan(0, kernel.size());
  const auto v = kernel.v.data().subspan(0, kernel.size());
  double sum = 0.0;
  for (std::size_t a = 0; a < kAngles; ++a) {
    const double theta = 2.0 * kPi * (static_cast<double>(a) + 0.5) / kAngles;
    sum += (dtft(h, r * std::cos(theta)) * dtft(v, r * std::sin(theta))).real();
  }
  return sum / kAngles;
}

FreqResponse response_from_kernel(const SepKernel& kernel, std::size_t n) {
  FreqResponse out = SpectralModel::empirical(kernel).sample(n);
  out.exact = nullptr;
  return out;
}

FreqResponse composite(const FreqResponse& hl, const FreqResponse& hs, double beta) {
  check_same_grid(hl, hs, "composite");
  FreqResponse out;
  out.r = hl.r;
  out.values.resize(hl.size());
  for (std::size_t i = 0; i < hl.size(); ++i) out.values[i] = hl.values[i] - beta * hs.values[i];
  if (hl.exact && hs.exact) {
    out.exact = [a = hl.exact, b = hs.exact, beta](double r) { return a(r) - beta * b(r); };
  }
  return out;
}

std::optional<Ring> find_ring(const FreqResponse& h) {
  const auto& v = h.values;
  const std::size_t n = v.size();
  // Rising edge: H <= 0 at sample `below`, H > 0 at below + 1.
  auto rising = [&](std::size_t below) {
    if (h.exact) return bisect(h.exact, h.r[below], h.r[below + 1]);
    return h.r[below] - (h.r[below + 1] - h.r[below]) * v[below] / (v[below + 1] - v[below]);
  };
  // Falling edge: H > 0 at sample `above`, H <= 0 at above + 1.
  auto falling = [&](std::size_t above) {
    if (h.exact) {
      return bisect([&](double r) { return h.exact(r) > 0 ? -1.0 : 1.0; }, h.r[above], h.r[above + 1]);
    }
    return h.r[above] + (h.r[above + 1] - h.r[above]) * v[above] / (v[above] - v[above + 1]);
  };
  std::optional<Ring> best;
  std::size_t bands = 0;
  for (std::size_t i = 1; i + 1 < n;) {
    if (!(v[i] > 0) || v[i - 1] > 0) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end + 1 < n && v[end + 1] > 0) ++end;
    if (end + 1 == n) break;  // still positive at pi: no closing edge
    const double r1 = rising(i - 1);
    const double r2 = falling(end);
    ++bands;
    if (!best || r2 - r1 > best->r2 - best->r1) best = Ring{r1, r2, false};
    i = end + 1;
  }
  if (best) best->multiple = bands > 1;
  return best;
}

QuadCoeffs quad_coeffs(const FreqResponse& hl, const FreqResponse& hs, const FreqResponse& ps,
                       double sigma2) {
  check_same_grid(hl, hs, "quad_coeffs");
  check_same_grid(hl, ps, "quad_coeffs");
  if (!(sigma2 > 0)) throw InputError("noise power must be positive");
  for (double p : ps.values) {
    if (p < 0) throw InputError("signal power spectrum has a negative sample");
  }
  const std::size_t n = hl.size();
  std::vector<double> f(n);
  auto integrate = [&](auto term) {
    for (std::size_t i = 0; i < n; ++i) f[i] = term(i);
    return trapezoid(hl.r, f);
  };
  const auto& L = hl.values;
  const auto& S = hs.values;
  const auto& P = ps.values;
  QuadCoeffs q;
  q.A = integrate([&](std::size_t i) { return L[i] * L[i] * P[i]; });
  q.B = integrate([&](std::size_t i) { return L[i] * S[i] * P[i]; });
  q.C = integrate([&](std::size_t i) { return S[i] * S[i] * P[i]; });
  q.At = integrate([&](std::size_t i) { return L[i] * L[i]; });
  q.Bt = integrate([&](std::size_t i) { return L[i] * S[i]; });
  q.Ct = integrate([&](std::size_t i) { return S[i] * S[i]; });
  q.sigma2 = sigma2;
  return q;
}

double snr(double beta, const QuadCoeffs& q) {
  const double d = q.noise(beta);
  if (!(d > 0)) {
    throw DegeneracyError("noise energy is not positive at beta = " + std::to_string(beta) +
                          "; the responses are linearly dependent");
  }
  return q.signal(beta) / d;
}

double snr_slope(double beta, const QuadCoeffs& q, double h) {
  // Richardson-extrapolated central difference; cancels the h^2 term, which
  // dominates when the two responses are close to collinear.
  const double step = h * std::max(1.0, std::abs(beta));
  auto central = [&](double s) { return (snr(beta + s, q) - snr(beta - s, q)) / (2 * s); };
  return (4 * central(step / 2) - central(step)) / 3;
}

std::vector<double> stationary_polynomial(const QuadCoeffs& q) {
  // (-B + bC)(At - 2bBt + b^2 Ct) - (-Bt + bCt)(A - 2bB + b^2 C)
  return {
      q.A * q.Bt - q.B * q.At,
      q.C * q.At - q.A * q.Ct,
      -q.B * q.Ct - 2 * q.C * q.Bt + q.Bt * q.C + 2 * q.B * q.Ct,
      q.C * q.Ct - q.Ct * q.C,
  };
}

std::vector<double> real_roots(std::vector<double> c) {
  double scale = 0.0;
  for (double x : c) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return {};
  while (!c.empty() && std::abs(c.back()) <= 1e-14 * scale) c.pop_back();
  std::vector<double> roots;
  switch (c.size()) {
    case 0:
    case 1:
      return {};
    case 2:
      return {-c[0] / c[1]};
    case 3: {
      const double disc = c[1] * c[1] - 4 * c[2] * c[0];
      if (disc < 0) return {};
      const double s = c[1] >= 0 ? 1.0 : -1.0;
      const double t = -0.5 * (c[1] + s * std::sqrt(disc));
      roots.push_back(t / c[2]);
      roots.push_back(t != 0 ? c[0] / t : 0.0);
      break;
    }
    default:
      roots = cubic_roots(c);
  }
  for (auto& x : roots) {
    for (int it = 0; it < 3; ++it) {
      const double d = poly_slope(c, x);
      if (d == 0) break;
      const double next = x - evaluate_poly(c, x) / d;
      if (std::abs(evaluate_poly(c, next)) >= std::abs(evaluate_poly(c, x))) break;
      x = next;
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

std::vector<double> stationary_betas(const QuadCoeffs& q) {
  const auto poly = stationary_polynomial(q);
  const double scale = std::max({std::abs(q.A), std::abs(q.B), std::abs(q.C)}) *
                       std::max({std::abs(q.At), std::abs(q.Bt), std::abs(q.Ct)});
  bool vanishes = true;
  for (double c : poly) vanishes &= std::abs(c) <= 1e-12 * scale;
  if (vanishes) throw DegeneracyError("SNR does not depend on beta; every beta is stationary");
  auto roots = real_roots(poly);
  for (double b : roots) {
    const double slope = snr_slope(b, q);
    if (!(std::abs(slope) < 1e-8 * std::max(1.0, std::abs(snr(b, q))))) {
      throw NumericError("stationary root " + std::to_string(b) + " leaves SNR slope " +
                         std::to_string(slope));
    }
  }
  return roots;
}

namespace {

Optimum best_of(const QuadCoeffs& q, const std::vector<double>& candidates, double lo, double hi) {
  Optimum out{candidates.front(), snr(candidates.front(), q), 0.0, false};
  for (double b : candidates) {
    const double s = snr(b, q);
    if (s > out.snr) out = {b, s, 0.0, false};
  }
  out.grid_max = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kGridSamples; ++i) {
    const double b = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(kGridSamples - 1);
    out.grid_max = std::max(out.grid_max, snr(b, q));
  }
  out.grid_agrees = out.snr >= out.grid_max - 1e-9;
  return out;
}

}  // namespace

Optimum optimal_beta(const QuadCoeffs& q, const Domain& domain) {
  const double lo = domain.lo + domain.margin;
  const double hi = domain.hi - domain.margin;
  if (!(lo < hi)) throw ConfigError("empty beta domain");
  std::vector<double> candidates{lo, hi};
  for (double b : stationary_betas(q)) {
    if (b > lo && b < hi) candidates.push_back(b);
  }
  return best_of(q, candidates, lo, hi);
}

Optimum optimal_beta_unbounded(const QuadCoeffs& q) {
  const auto roots = stationary_betas(q);
  if (roots.empty()) throw DegeneracyError("SNR has no finite stationary point");
  return best_of(q, roots, roots.front() - 1.0, roots.back() + 1.0);
}

double normalized_gram(const QuadCoeffs& q) {
  const double norms = q.At * q.Ct;
  if (!(norms > 0)) return 0.0;
  return (norms - q.Bt * q.Bt) / norms;
}

std::optional<double> snr_advantage(const QuadCoeffs& q) {
  if (!(normalized_gram(q) > kIndependenceFloor)) return std::nullopt;
  // SNR(b) > SNR(0) exactly when Delta(b) = -2 b p + b^2 s > 0.
  const double p = q.B * q.At - q.A * q.Bt;
  const double s = q.C * q.At - q.A * q.Ct;
  const double p_tol = 1e-12 * (std::abs(q.B * q.At) + std::abs(q.A * q.Bt));
  const double s_tol = 1e-12 * (std::abs(q.C * q.At) + std::abs(q.A * q.Ct));
  if (std::abs(p) > p_tol) {
    if (s < -s_tol) return p / s;  // vertex of Delta, where it peaks at -p^2/s
    return p > 0 ? -1.0 : 1.0;
  }
  if (s > s_tol) return 1.0;
  return std::nullopt;
}

void write_response_csv(std::ostream& out, const FreqResponse& hl, const FreqResponse& hs,
                        const FreqResponse& hbeta, const std::optional<Ring>& ring) {
  check_same_grid(hl, hs, "write_response_csv");
  check_same_grid(hl, hbeta, "write_response_csv");
  const auto old = out.precision(17);
  out << "r,H_L,H_S,H_beta,ring_flag\n";
  for (std::size_t i = 0; i < hl.size(); ++i) {
    const double r = hl.r[i];
    const bool in_ring = ring && r >= ring->r1 && r <= ring->r2;
    out << r << ',' << hl.values[i] << ',' << hs.values[i] << ',' << hbeta.values[i] << ','
        << (in_ring ? 1 : 0) << '\n';
  }
  out.precision(old);
}

void write_snr_csv(std::ostream& out, const QuadCoeffs& q, std::size_t n, const Domain& domain) {
  if (n < 2) throw ConfigError("an SNR sweep needs at least two points");
  const double lo = domain.lo + domain.margin;
  const double hi = domain.hi - domain.margin;
  const auto old = out.precision(17);
  out << "beta,snr\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double b = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    out << b << ',' << snr(b, q) << '\n';
  }
  out.precision(old);
}

}  // namespace pfgnet::spectral
