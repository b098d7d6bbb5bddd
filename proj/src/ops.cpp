#include "pfgnet/ops.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>

#include "pfgnet/errors.hpp"

namespace pfgnet::ops {

namespace {

void require_chw(const Tensor& x, const char* op) {
  if (x.rank() != 3) {
    throw ConfigError(std::string(op) + ": expected [C,H,W], got " +
                      shape_string(x.dims()));
  }
}

void require_odd(std::size_t k, const char* op) {
  if (k % 2 == 0) {
    throw ConfigError(std::string(op) + ": kernel size must be odd, got " +
                      std::to_string(k));
  }
}

// Output dtype follows the operands; float32 results are rounded once here.
Tensor finish(Tensor out, [[maybe_unused]] std::initializer_list<const Tensor*> inputs) {
  out.settle();
#ifndef NDEBUG
  bool finite_in = true;
  for (const Tensor* t : inputs) finite_in = finite_in && t->all_finite();
  assert(!finite_in || out.all_finite());
#endif
  return out;
}

template <class F>
Tensor map_unary(const Tensor& x, F f) {
  Tensor out(x.dims(), x.dtype());
  auto in = x.data();
  auto o = out.data();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  return finish(std::move(out), {&x});
}

Tensor conv_1d(const Tensor& x, const Tensor& kernel, bool horizontal,
               const char* op) {
  require_chw(x, op);
  if (kernel.rank() != 2 || kernel.dim(0) != x.dim(0)) {
    throw ConfigError(std::string(op) + ": kernel " + shape_string(kernel.dims()) +
                      " does not match " + std::to_string(x.dim(0)) + " channels");
  }
  const std::size_t k = kernel.dim(1);
  require_odd(k, op);
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  Tensor out({C, H, W}, promote(x.dtype(), kernel.dtype()));
  const double* xs = x.data().data();
  const double* ks = kernel.data().data();
  double* os = out.data().data();
  for (std::size_t c = 0; c < C; ++c) {
    const double* kc = ks + c * k;
    const double* xc = xs + c * H * W;
    double* oc = os + c * H * W;
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        double acc = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
          const std::ptrdiff_t ii = horizontal ? static_cast<std::ptrdiff_t>(i)
                                               : static_cast<std::ptrdiff_t>(i + t) - pad;
          const std::ptrdiff_t jj = horizontal ? static_cast<std::ptrdiff_t>(j + t) - pad
                                               : static_cast<std::ptrdiff_t>(j);
          if (ii < 0 || jj < 0 || ii >= static_cast<std::ptrdiff_t>(H) ||
              jj >= static_cast<std::ptrdiff_t>(W)) {
            continue;
          }
          acc += kc[t] * xc[ii * W + jj];
        }
        oc[i * W + j] = acc;
      }
    }
  }
  return finish(std::move(out), {&x, &kernel});
}

}  // namespace

Tensor dwconv_1d_h(const Tensor& x, const Tensor& h) {
  return conv_1d(x, h, true, "dwconv_1d_h");
}

Tensor dwconv_1d_v(const Tensor& x, const Tensor& v) {
  return conv_1d(x, v, false, "dwconv_1d_v");
}

Tensor sep_conv(const Tensor& x, const SepKernel& kernel) {
  kernel.validate();
  return dwconv_1d_v(dwconv_1d_h(x, kernel.h), kernel.v);
}

Tensor dwconv_2d(const Tensor& x, const Tensor& kernel) {
  require_chw(x, "dwconv_2d");
  if (kernel.rank() != 3 || kernel.dim(0) != x.dim(0) || kernel.dim(1) != kernel.dim(2)) {
    throw ConfigError("dwconv_2d: kernel " + shape_string(kernel.dims()) +
                      " incompatible with input " + shape_string(x.dims()));
  }
  const std::size_t k = kernel.dim(1);
  require_odd(k, "dwconv_2d");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto sH = static_cast<std::ptrdiff_t>(H), sW = static_cast<std::ptrdiff_t>(W);
  Tensor out({C, H, W}, promote(x.dtype(), kernel.dtype()));
  const double* xs = x.data().data();
  const double* ks = kernel.data().data();
  double* os = out.data().data();
  for (std::size_t c = 0; c < C; ++c) {
    const double* kc = ks + c * k * k;
    const double* xc = xs + c * H * W;
    for (std::ptrdiff_t i = 0; i < sH; ++i) {
      for (std::ptrdiff_t j = 0; j < sW; ++j) {
        double acc = 0.0;
        for (std::ptrdiff_t u = 0; u < static_cast<std::ptrdiff_t>(k); ++u) {
          const std::ptrdiff_t ii = i + u - pad;
          if (ii < 0 || ii >= sH) continue;
          for (std::ptrdiff_t v = 0; v < static_cast<std::ptrdiff_t>(k); ++v) {
            const std::ptrdiff_t jj = j + v - pad;
            if (jj < 0 || jj >= sW) continue;
            acc += kc[u * static_cast<std::ptrdiff_t>(k) + v] * xc[ii * sW + jj];
          }
        }
        os[(c * H + i) * W + j] = acc;
      }
    }
  }
  return finish(std::move(out), {&x, &kernel});
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              std::size_t stride) {
  require_chw(x, "conv2d");
  if (weight.rank() != 4 || weight.dim(1) != x.dim(0) || weight.dim(2) != weight.dim(3)) {
    throw ConfigError("conv2d: weight " + shape_string(weight.dims()) +
                      " incompatible with input " + shape_string(x.dims()));
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw ConfigError("conv2d: bias must be [Cout]");
  }
  if (stride == 0) throw ConfigError("conv2d: stride must be >= 1");
  const std::size_t k = weight.dim(2);
  require_odd(k, "conv2d");
  const std::size_t Co = weight.dim(0), Ci = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t Ho = (H - 1) / stride + 1, Wo = (W - 1) / stride + 1;
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto sH = static_cast<std::ptrdiff_t>(H), sW = static_cast<std::ptrdiff_t>(W);
  const auto sk = static_cast<std::ptrdiff_t>(k);
  Tensor out({Co, Ho, Wo}, promote(promote(x.dtype(), weight.dtype()), bias.dtype()));
  const double* xs = x.data().data();
  const double* ws = weight.data().data();
  double* os = out.data().data();
  for (std::size_t o = 0; o < Co; ++o) {
    for (std::size_t i = 0; i < Ho; ++i) {
      for (std::size_t j = 0; j < Wo; ++j) {
        const auto ci0 = static_cast<std::ptrdiff_t>(i * stride) - pad;
        const auto cj0 = static_cast<std::ptrdiff_t>(j * stride) - pad;
        double acc = 0.0;
        for (std::size_t c = 0; c < Ci; ++c) {
          const double* wk = ws + (o * Ci + c) * k * k;
          const double* xc = xs + c * H * W;
          for (std::ptrdiff_t u = 0; u < sk; ++u) {
            const std::ptrdiff_t ii = ci0 + u;
            if (ii < 0 || ii >= sH) continue;
            for (std::ptrdiff_t v = 0; v < sk; ++v) {
              const std::ptrdiff_t jj = cj0 + v;
              if (jj < 0 || jj >= sW) continue;
              acc += wk[u * sk + v] * xc[ii * sW + jj];
            }
          }
        }
        os[(o * Ho + i) * Wo + j] = acc + bias[o];
      }
    }
  }
  return finish(std::move(out), {&x, &weight, &bias});
}

Tensor pwconv(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_chw(x, "pwconv");
  if (weight.rank() != 2 || weight.dim(1) != x.dim(0)) {
    throw ConfigError("pwconv: weight " + shape_string(weight.dims()) +
                      " incompatible with input " + shape_string(x.dims()));
  }
  if (bias.rank() != 1 || bias.dim(0) != weight.dim(0)) {
    throw ConfigError("pwconv: bias must be [Cout]");
  }
  const std::size_t Co = weight.dim(0), Ci = x.dim(0), P = x.dim(1) * x.dim(2);
  Tensor out({Co, x.dim(1), x.dim(2)},
             promote(promote(x.dtype(), weight.dtype()), bias.dtype()));
  const double* xs = x.data().data();
  const double* ws = weight.data().data();
  double* os = out.data().data();
  // Accumulate channel by channel into the output plane; per pixel this is
  // still the ascending-c sum.
  for (std::size_t o = 0; o < Co; ++o) {
    double* oo = os + o * P;
    for (std::size_t c = 0; c < Ci; ++c) {
      const double w = ws[o * Ci + c];
      const double* xc = xs + c * P;
      for (std::size_t p = 0; p < P; ++p) oo[p] += w * xc[p];
    }
    for (std::size_t p = 0; p < P; ++p) oo[p] += bias[o];
  }
  return finish(std::move(out), {&x, &weight, &bias});
}

Tensor avg_pool3(const Tensor& x) {
  require_chw(x, "avg_pool3");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const auto sH = static_cast<std::ptrdiff_t>(H), sW = static_cast<std::ptrdiff_t>(W);
  Tensor out(x.dims(), x.dtype());
  const double* xs = x.data().data();
  double* os = out.data().data();
  for (std::size_t c = 0; c < C; ++c) {
    const double* xc = xs + c * H * W;
    for (std::ptrdiff_t i = 0; i < sH; ++i) {
      for (std::ptrdiff_t j = 0; j < sW; ++j) {
        double acc = 0.0;
        for (std::ptrdiff_t ii = i - 1; ii <= i + 1; ++ii) {
          if (ii < 0 || ii >= sH) continue;
          for (std::ptrdiff_t jj = j - 1; jj <= j + 1; ++jj) {
            if (jj < 0 || jj >= sW) continue;
            acc += xc[ii * sW + jj];
          }
        }
        os[(c * H + i) * W + j] = acc / 9.0;
      }
    }
  }
  return finish(std::move(out), {&x});
}

Tensor softmax_over_channels(const Tensor& x) {
  require_chw(x, "softmax_over_channels");
  const std::size_t K = x.dim(0), P = x.dim(1) * x.dim(2);
  Tensor out(x.dims(), x.dtype());
  const double* xs = x.data().data();
  double* os = out.data().data();
  for (std::size_t p = 0; p < P; ++p) {
    double mx = xs[p];
    for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, xs[k * P + p]);
    double total = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double e = std::exp(xs[k * P + p] - mx);
      os[k * P + p] = e;
      total += e;
    }
    for (std::size_t k = 0; k < K; ++k) os[k * P + p] /= total;
  }
  return finish(std::move(out), {&x});
}

Tensor tanh(const Tensor& x) {
  return map_unary(x, [](double v) { return std::tanh(v); });
}

Tensor sigmoid(const Tensor& x) {
  return map_unary(x, [](double v) {
    // Split by sign so exp never overflows.
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
  return map_unary(x, [negative_slope](double v) { return v > 0 ? v : negative_slope * v; });
}

Tensor scale(const Tensor& x, double s) {
  return map_unary(x, [s](double v) { return s * v; });
}

Tensor square(const Tensor& x) {
  return map_unary(x, [](double v) { return v * v; });
}

Tensor abs(const Tensor& x) {
  return map_unary(x, [](double v) { return std::fabs(v); });
}

Tensor sqrt_eps(const Tensor& x, double eps) {
  return map_unary(x, [eps](double v) { return std::sqrt(v + eps); });
}

Tensor clamp_min(const Tensor& x, double lo) {
  return map_unary(x, [lo](double v) { return v > lo ? v : lo; });
}

Broadcast broadcast_kind(const Tensor& a, const Tensor& b) {
  if (a.dims() == b.dims()) return Broadcast::none;
  if (a.rank() == 3) {
    if (b.rank() == 1 && b.dim(0) == a.dim(0)) return Broadcast::per_channel;
    if (b.rank() == 3 && b.dim(0) == 1 && b.dim(1) == a.dim(1) && b.dim(2) == a.dim(2)) {
      return Broadcast::per_pixel;
    }
  }
  throw ConfigError("no legal broadcast between " + shape_string(a.dims()) +
                    " and " + shape_string(b.dims()));
}

namespace {

template <class F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  const Broadcast kind = broadcast_kind(a, b);
  Tensor out(a.dims(), promote(a.dtype(), b.dtype()));
  auto as = a.data();
  auto bs = b.data();
  auto os = out.data();
  switch (kind) {
    case Broadcast::none:
      for (std::size_t i = 0; i < as.size(); ++i) os[i] = f(as[i], bs[i]);
      break;
    case Broadcast::per_channel: {
      const std::size_t P = a.dim(1) * a.dim(2);
      for (std::size_t c = 0; c < a.dim(0); ++c) {
        for (std::size_t p = 0; p < P; ++p) os[c * P + p] = f(as[c * P + p], bs[c]);
      }
      break;
    }
    case Broadcast::per_pixel: {
      const std::size_t P = a.dim(1) * a.dim(2);
      for (std::size_t c = 0; c < a.dim(0); ++c) {
        for (std::size_t p = 0; p < P; ++p) os[c * P + p] = f(as[c * P + p], bs[p]);
      }
      break;
    }
  }
  return finish(std::move(out), {&a, &b});
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, [](double x, double y) { return x * y; });
}

Tensor channel_mean(const Tensor& x) {
  require_chw(x, "channel_mean");
  const std::size_t C = x.dim(0), P = x.dim(1) * x.dim(2);
  Tensor out({1, x.dim(1), x.dim(2)}, x.dtype());
  const double* xs = x.data().data();
  double* os = out.data().data();
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t p = 0; p < P; ++p) os[p] += xs[c * P + p];
  }
  for (std::size_t p = 0; p < P; ++p) os[p] /= static_cast<double>(C);
  return finish(std::move(out), {&x});
}

Tensor grn(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_chw(x, "grn");
  const std::size_t C = x.dim(0), P = x.dim(1) * x.dim(2);
  if (gamma.numel() != C || beta.numel() != C) {
    throw ConfigError("grn: gamma/beta must have one entry per channel");
  }
  if (!(eps > 0)) throw ConfigError("grn: eps must be positive");
  const double* xs = x.data().data();
  std::vector<double> norms(C, 0.0);
  double mean_norm = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    double ss = 0.0;
    for (std::size_t p = 0; p < P; ++p) ss += xs[c * P + p] * xs[c * P + p];
    norms[c] = std::sqrt(ss);
    mean_norm += norms[c];
  }
  mean_norm /= static_cast<double>(C);
  Tensor out(x.dims(), promote(promote(x.dtype(), gamma.dtype()), beta.dtype()));
  double* os = out.data().data();
  for (std::size_t c = 0; c < C; ++c) {
    const double n = norms[c] / (mean_norm + eps);
    for (std::size_t p = 0; p < P; ++p) {
      const double v = xs[c * P + p];
      os[c * P + p] = gamma[c] * (v * n) + beta[c] + v;
    }
  }
  return finish(std::move(out), {&x, &gamma, &beta});
}

Tensor group_norm(const Tensor& x, std::size_t groups, const Tensor& gamma,
                  const Tensor& beta, double eps) {
  require_chw(x, "group_norm");
  const std::size_t C = x.dim(0), P = x.dim(1) * x.dim(2);
  if (groups == 0 || C % groups != 0) {
    throw ConfigError("group_norm: " + std::to_string(C) +
                      " channels not divisible into " + std::to_string(groups) + " groups");
  }
  if (gamma.numel() != C || beta.numel() != C) {
    throw ConfigError("group_norm: gamma/beta must have one entry per channel");
  }
  const std::size_t per = C / groups, n = per * P;
  const double* xs = x.data().data();
  Tensor out(x.dims(), promote(promote(x.dtype(), gamma.dtype()), beta.dtype()));
  double* os = out.data().data();
  for (std::size_t g = 0; g < groups; ++g) {
    const double* xg = xs + g * n;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += xg[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (xg[i] - mean) * (xg[i] - mean);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t cl = 0; cl < per; ++cl) {
      const std::size_t c = g * per + cl;
      for (std::size_t p = 0; p < P; ++p) {
        os[c * P + p] = gamma[c] * ((xs[c * P + p] - mean) * inv) + beta[c];
      }
    }
  }
  return finish(std::move(out), {&x, &gamma, &beta});
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ConfigError("concat_channels: nothing to concatenate");
  std::size_t C = 0;
  DType dtype = parts.front().dtype();
  for (const auto& p : parts) {
    require_chw(p, "concat_channels");
    if (p.dim(1) != parts.front().dim(1) || p.dim(2) != parts.front().dim(2)) {
      throw ConfigError("concat_channels: spatial mismatch " + shape_string(p.dims()) +
                        " vs " + shape_string(parts.front().dims()));
    }
    C += p.dim(0);
    dtype = promote(dtype, p.dtype());
  }
  Tensor out({C, parts.front().dim(1), parts.front().dim(2)}, dtype);
  auto os = out.data();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), os.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.numel();
  }
  out.settle();
  return out;
}

std::vector<Tensor> split_channels(const Tensor& x, std::span<const std::size_t> sizes) {
  require_chw(x, "split_channels");
  std::size_t total = 0;
  for (auto s : sizes) {
    if (s == 0) throw ConfigError("split_channels: zero-width part");
    total += s;
  }
  if (total != x.dim(0)) {
    throw ConfigError("split_channels: sizes sum to " + std::to_string(total) +
                      " but input has " + std::to_string(x.dim(0)) + " channels");
  }
  const std::size_t P = x.dim(1) * x.dim(2);
  std::vector<Tensor> parts;
  parts.reserve(sizes.size());
  std::size_t c0 = 0;
  for (auto s : sizes) {
    Tensor part({s, x.dim(1), x.dim(2)}, x.dtype());
    auto src = x.data().subspan(c0 * P, s * P);
    std::copy(src.begin(), src.end(), part.data().begin());
    parts.push_back(std::move(part));
    c0 += s;
  }
  return parts;
}

Tensor pack_time(std::span<const Tensor> frames) {
  if (frames.empty()) throw ConfigError("pack_time: no frames");
  for (const auto& f : frames) {
    if (f.dims() != frames.front().dims()) {
      throw ConfigError("pack_time: frames differ in shape");
    }
  }
  return concat_channels(frames);
}

std::vector<Tensor> unpack_time(const Tensor& packed, std::size_t frames) {
  require_chw(packed, "unpack_time");
  if (frames == 0 || packed.dim(0) % frames != 0) {
    throw ConfigError("unpack_time: " + std::to_string(packed.dim(0)) +
                      " channels not divisible by " + std::to_string(frames) + " frames");
  }
  std::vector<std::size_t> sizes(frames, packed.dim(0) / frames);
  return split_channels(packed, sizes);
}

Tensor upsample_nearest2x(const Tensor& x) {
  require_chw(x, "upsample_nearest2x");
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  Tensor out({C, 2 * H, 2 * W}, x.dtype());
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < 2 * H; ++i) {
      for (std::size_t j = 0; j < 2 * W; ++j) out.at(c, i, j) = x.at(c, i / 2, j / 2);
    }
  }
  return out;
}

Tensor mse_normalized(const Tensor& pred, const Tensor& target) {
  if (pred.dims() != target.dims()) {
    throw ConfigError("mse: shape mismatch " + shape_string(pred.dims()) + " vs " +
                      shape_string(target.dims()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  Tensor out({1}, promote(pred.dtype(), target.dtype()));
  out[0] = acc / static_cast<double>(pred.numel());
  out.settle();
  return out;
}

Tensor sum_all(const Tensor& x) {
  double acc = 0.0;
  for (auto v : x.data()) acc += v;
  Tensor out({1}, x.dtype());
  out[0] = acc;
  out.settle();
  return out;
}

}  // namespace pfgnet::ops
