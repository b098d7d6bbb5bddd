#include "pfgnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "pfgnet/errors.hpp"

namespace pfgnet::metrics {

namespace {

constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

struct Layout {
  std::size_t frames;  // N * T
  std::size_t channels, height, width;
  std::size_t frame_size() const { return channels * height * width; }
};

Layout check(const Tensor& pred, const Tensor& gt) {
  if (pred.rank() != 5) throw InputError("metrics expect [N,T,C,H,W], got " + shape_string(pred.dims()));
  if (pred.dims() != gt.dims()) {
    throw InputError("prediction " + shape_string(pred.dims()) + " and target " +
                     shape_string(gt.dims()) + " differ in shape");
  }
  if (!pred.all_finite() || !gt.all_finite()) throw InputError("metrics received non-finite values");
  return {pred.dim(0) * pred.dim(1), pred.dim(2), pred.dim(3), pred.dim(4)};
}

// Per-frame sums of f(pred, gt).
template <class F>
std::vector<double> frame_sums(const Tensor& pred, const Tensor& gt, const Layout& l, F f) {
  const std::size_t S = l.frame_size();
  std::vector<double> sums(l.frames), terms(S);
  for (std::size_t n = 0; n < l.frames; ++n) {
    for (std::size_t i = 0; i < S; ++i) terms[i] = f(pred[n * S + i], gt[n * S + i]);
    sums[n] = pairwise_sum(terms);
  }
  return sums;
}

double mean(std::span<const double> v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

std::vector<double> gaussian_window(std::size_t size, double sigma) {
  std::vector<double> g(size);
  const double c = static_cast<double>(size / 2);
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2 * sigma * sigma));
  }
  const double total = pairwise_sum(g);
  for (auto& v : g) v /= total;
  return g;
}

// Mean SSIM of one single-channel plane over valid window positions.
double plane_ssim(const double* x, const double* y, std::size_t h, std::size_t w,
                  const std::vector<double>& g) {
  const std::size_t k = g.size();
  const std::size_t oh = h - k + 1, ow = w - k + 1;
  std::vector<double> scores;
  scores.reserve(oh * ow);
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
          const double wt = g[a] * g[b];
          const double xv = x[(i + a) * w + j + b], yv = y[(i + a) * w + j + b];
          mx += wt * xv;
          my += wt * yv;
          sxx += wt * (xv * xv);
          syy += wt * (yv * yv);
          sxy += wt * (xv * yv);
        }
      }
      const double vx = sxx - mx * mx, vy = syy - my * my, cxy = sxy - mx * my;
      scores.push_back(((2 * (mx * my) + kSsimC1) * (2 * cxy + kSsimC2)) /
                       (((mx * mx) + (my * my) + kSsimC1) * (vx + vy + kSsimC2)));
    }
  }
  return mean(scores);
}

}  // namespace

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

double mse(const Tensor& pred, const Tensor& gt, bool normalized) {
  const auto l = check(pred, gt);
  auto sums = frame_sums(pred, gt, l, [](double p, double q) { return (p - q) * (p - q); });
  if (normalized) {
    for (auto& s : sums) s /= static_cast<double>(l.frame_size());
  }
  return mean(sums);
}

double mae(const Tensor& pred, const Tensor& gt) {
  const auto l = check(pred, gt);
  return mean(frame_sums(pred, gt, l, [](double p, double q) { return std::abs(p - q); }));
}

std::uint8_t to_uint8(double a) {
  return static_cast<std::uint8_t>(std::clamp(std::round(255.0 * a), 0.0, 255.0));
}

double psnr(const Tensor& pred, const Tensor& gt) {
  const auto l = check(pred, gt);
  auto sums = frame_sums(pred, gt, l, [](double p, double q) {
    const double d = static_cast<double>(to_uint8(p)) - static_cast<double>(to_uint8(q));
    return d * d;
  });
  for (auto& s : sums) {
    const double frame_mse = s / static_cast<double>(l.frame_size());
    s = frame_mse == 0 ? kPsnrCap : 10.0 * std::log10(255.0 * 255.0 / frame_mse);
  }
  return mean(sums);
}

double ssim(const Tensor& pred, const Tensor& gt, std::size_t window, double sigma) {
  const auto l = check(pred, gt);
  if (window % 2 == 0 || window == 0) throw ConfigError("SSIM window must be odd");
  if (l.height < window || l.width < window) {
    throw InputError("frame " + std::to_string(l.height) + "x" + std::to_string(l.width) +
                     " is smaller than the " + std::to_string(window) + "x" +
                     std::to_string(window) + " SSIM window");
  }
  const auto g = gaussian_window(window, sigma);
  const std::size_t plane = l.height * l.width;
  std::vector<double> frames(l.frames), channels(l.channels);
  for (std::size_t n = 0; n < l.frames; ++n) {
    for (std::size_t c = 0; c < l.channels; ++c) {
      const std::size_t off = (n * l.channels + c) * plane;
      channels[c] = plane_ssim(pred.data().data() + off, gt.data().data() + off, l.height, l.width, g);
    }
    frames[n] = mean(channels);
  }
  return mean(frames);
}

std::size_t fitting_window(std::size_t h, std::size_t w) {
  std::size_t k = std::min({kSsimWindow, h, w});
  if (k % 2 == 0) --k;
  if (k == 0) throw InputError("frame too small for any SSIM window");
  return k;
}

}  // namespace pfgnet::metrics
