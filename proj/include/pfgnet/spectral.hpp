#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "pfgnet/tensor.hpp"

/// Radial frequency responses of center-suppressed filters: ring detection
/// for H_L - beta*H_S and the signal-to-noise analysis of beta.
namespace pfgnet::spectral {

constexpr std::size_t kMinSamples = 64;
constexpr std::size_t kDefaultSamples = 1024;

/// Samples on a uniform grid over [0, pi]. Values keep their sign. `exact`,
/// when set, evaluates the underlying continuous response and is used to
/// refine sign changes.
struct FreqResponse {
  std::vector<double> r;
  std::vector<double> values;
  std::function<double(double)> exact;

  std::size_t size() const { return r.size(); }
  /// Throws ConfigError unless n >= 64 and the grid is [0, pi], increasing.
  void validate() const;
};

std::vector<double> radial_grid(std::size_t n);

/// A radial response evaluable at any r.
class SpectralModel {
 public:
  /// exp(-rate * r)
  static SpectralModel exp_decay(double rate);
  /// gain * exp(-r^2 / (2 * variance))
  static SpectralModel gaussian(double variance, double dc_gain = 1.0);
  /// Radially averaged real DTFT of the single-channel kernel v ⊗ h.
  static SpectralModel empirical(const SepKernel& kernel);
  static SpectralModel custom(std::function<double(double)> fn);

  double operator()(double r) const { return fn_(r); }
  bool continuous() const { return continuous_; }

  /// Parametric models carry their evaluator for crossing refinement;
  /// empirical ones are refined by linear interpolation.
  FreqResponse sample(std::size_t n = kDefaultSamples) const;

 private:
  SpectralModel(std::function<double(double)> fn, bool continuous)
      : fn_(std::move(fn)), continuous_(continuous) {}
  std::function<double(double)> fn_;
  bool continuous_;
};

/// Radial average of Re DTFT(v ⊗ h) at radius r, kernel centred on its middle tap.
double kernel_response(const SepKernel& kernel, double r);

FreqResponse response_from_kernel(const SepKernel& kernel, std::size_t n = kDefaultSamples);

/// H_L - beta * H_S. Throws ConfigError when the grids differ.
FreqResponse composite(const FreqResponse& hl, const FreqResponse& hs, double beta);

struct Ring {
  double r1;
  double r2;
  bool multiple;  // more than one positive band; the widest is returned
};

/// Finds a band r1 < r < r2 where H > 0 that has H <= 0 on both sides.
std::optional<Ring> find_ring(const FreqResponse& h);

/// Quadratic-form coefficients of the filtered signal and noise energies:
///   N(beta) = A - 2 beta B + beta^2 C          (weighted by P_S)
///   D(beta) = sigma2 (At - 2 beta Bt + beta^2 Ct)  (white noise)
struct QuadCoeffs {
  double A = 0, B = 0, C = 0;
  double At = 0, Bt = 0, Ct = 0;
  double sigma2 = 1;

  double signal(double beta) const { return A - 2 * beta * B + beta * beta * C; }
  double noise(double beta) const { return sigma2 * (At - 2 * beta * Bt + beta * beta * Ct); }
};

/// Trapezoidal integrals on the shared grid. Throws InputError on negative
/// P_S samples or sigma2 <= 0, ConfigError on grid mismatch.
QuadCoeffs quad_coeffs(const FreqResponse& hl, const FreqResponse& hs, const FreqResponse& ps,
                       double sigma2);

/// Throws DegeneracyError when the noise energy is not positive at beta.
double snr(double beta, const QuadCoeffs& q);

/// Numerical dSNR/dbeta from central differences at steps h and h/2.
double snr_slope(double beta, const QuadCoeffs& q, double h = 1e-4);

/// Coefficients c0 + c1 b + c2 b^2 + c3 b^3 of N'D - ND' (up to a factor 2).
std::vector<double> stationary_polynomial(const QuadCoeffs& q);

/// Real roots of a polynomial of degree <= 3 given lowest order first,
/// sorted ascending. Negligible leading coefficients are deflated.
std::vector<double> real_roots(std::vector<double> coeffs);

/// All real beta with dSNR/dbeta = 0, ascending. Throws DegeneracyError when
/// the stationary equation vanishes identically (SNR independent of beta).
std::vector<double> stationary_betas(const QuadCoeffs& q);

struct Domain {
  double lo = -1.0;
  double hi = 1.0;
  /// Open endpoints are evaluated at lo + margin and hi - margin.
  double margin = 1e-9;
};

struct Optimum {
  double beta;
  double snr;
  double grid_max;   // best value on the dense grid
  bool grid_agrees;  // snr >= grid_max - 1e-9
};

constexpr std::size_t kGridSamples = 100000;

/// Maximises SNR over the domain from stationary roots and endpoints, then
/// cross-checks against a dense grid.
Optimum optimal_beta(const QuadCoeffs& q, const Domain& domain = {});

/// Best stationary root over the real line; grid check spans the roots +-1.
Optimum optimal_beta_unbounded(const QuadCoeffs& q);

/// A beta with SNR(beta) > SNR(0), or nothing when no beta beats beta = 0
/// (proportional spectra, or H_L and H_S linearly dependent).
std::optional<double> snr_advantage(const QuadCoeffs& q);

/// (At Ct - Bt^2) / (At Ct); zero for linearly dependent responses.
double normalized_gram(const QuadCoeffs& q);
constexpr double kIndependenceFloor = 1e-12;

/// CSV with columns r,H_L,H_S,H_beta,ring_flag.
void write_response_csv(std::ostream& out, const FreqResponse& hl, const FreqResponse& hs,
                        const FreqResponse& hbeta, const std::optional<Ring>& ring);

/// CSV with columns beta,snr over n evenly spaced points of the open domain.
void write_snr_csv(std::ostream& out, const QuadCoeffs& q, std::size_t n, const Domain& domain = {});

}  // namespace pfgnet::spectral
