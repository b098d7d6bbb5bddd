#pragma once

#include <cstdint>
#include <span>

#include "pfgnet/tensor.hpp"

/// Frame-quality metrics over [N, T, C, H, W] batches with values in [0, 1].
/// Every function throws InputError when the shapes differ, the rank is not 5,
/// or a value is not finite.
namespace pfgnet::metrics {

constexpr double kPsnrCap = 100.0;
constexpr std::size_t kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

/// Order-fixed pairwise summation.
double pairwise_sum(std::span<const double> values);

/// normalized: mean over frames of the per-frame mean squared error.
/// Otherwise the squared error summed over C, H, W and averaged over N, T,
/// which is exactly C*H*W times the normalized value up to rounding.
double mse(const Tensor& pred, const Tensor& gt, bool normalized);

/// Absolute error summed over C, H, W and averaged over N, T.
double mae(const Tensor& pred, const Tensor& gt);

/// round-half-away(255 a) clamped to [0, 255].
std::uint8_t to_uint8(double a);

/// Mean per-frame PSNR on 8-bit quantised frames; identical frames count as
/// kPsnrCap.
double psnr(const Tensor& pred, const Tensor& gt);

/// Mean SSIM with a Gaussian window over valid positions only; channels are
/// scored separately and averaged per frame. Throws InputError when a frame is
/// smaller than the window.
double ssim(const Tensor& pred, const Tensor& gt, std::size_t window = kSsimWindow,
            double sigma = kSsimSigma);

/// Largest odd window <= kSsimWindow that fits an h x w frame.
std::size_t fitting_window(std::size_t h, std::size_t w);

}  // namespace pfgnet::metrics
