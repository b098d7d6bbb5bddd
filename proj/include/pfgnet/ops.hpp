#pragma once

#include <span>
#include <vector>

#include "pfgnet/tensor.hpp"

/// Forward operation vocabulary over [C,H,W] feature maps.
///
/// Every convolution is a zero-padded "same" cross-correlation unless a
/// stride is given. Reductions run in ascending kernel index so results are
/// reproducible bit for bit. Shape violations throw ConfigError.
namespace pfgnet::ops {

/// out[c,i,j] = sum_t h[c,t] * x[c, i, j + t - (k-1)/2]; h is [C, k].
Tensor dwconv_1d_h(const Tensor& x, const Tensor& h);

/// Column analogue of dwconv_1d_h; v is [C, k].
Tensor dwconv_1d_v(const Tensor& x, const Tensor& v);

/// Row pass followed by column pass.
Tensor sep_conv(const Tensor& x, const SepKernel& kernel);

/// Depthwise k x k cross-correlation; kernel is [C, k, k].
Tensor dwconv_2d(const Tensor& x, const Tensor& kernel);

/// Full convolution, weight [Cout, Cin, k, k], bias [Cout], padding (k-1)/2.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              std::size_t stride = 1);

/// 1x1 convolution, weight [Cout, Cin], bias [Cout].
Tensor pwconv(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// 3x3 mean with zero padding; the divisor is always 9.
Tensor avg_pool3(const Tensor& x);

/// Per-pixel softmax across the channel axis (max-subtracted).
Tensor softmax_over_channels(const Tensor& x);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double negative_slope);
Tensor scale(const Tensor& x, double s);
Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);
/// sqrt(x + eps), elementwise.
Tensor sqrt_eps(const Tensor& x, double eps);
/// max(x, lo), elementwise.
Tensor clamp_min(const Tensor& x, double lo);

/// How the second operand of a binary op lines up with a [C,H,W] first one.
enum class Broadcast {
  none,         // identical shapes
  per_channel,  // b is [C]: one value per channel, spread over H, W
  per_pixel,    // b is [1,H,W]: one value per pixel, spread over C
};

/// Throws ConfigError when no legal broadcast exists.
Broadcast broadcast_kind(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// [C,H,W] -> [1,H,W] mean over channels.
Tensor channel_mean(const Tensor& x);

/// Global response normalization with per-channel affine and residual:
/// g_c = ||x_c||_2, n_c = g_c / (mean(g) + eps), out = gamma*(x*n) + beta + x.
Tensor grn(const Tensor& x, const Tensor& gamma, const Tensor& beta,
           double eps = 1e-6);

/// Group normalization over (channels in group, H, W) with per-channel affine.
Tensor group_norm(const Tensor& x, std::size_t groups, const Tensor& gamma,
                  const Tensor& beta, double eps = 1e-5);

Tensor concat_channels(std::span<const Tensor> parts);
std::vector<Tensor> split_channels(const Tensor& x,
                                   std::span<const std::size_t> sizes);

/// T frames of [C,H,W] -> [T*C,H,W], frame t in channels [t*C, (t+1)*C).
Tensor pack_time(std::span<const Tensor> frames);
std::vector<Tensor> unpack_time(const Tensor& packed, std::size_t frames);

/// Nearest-neighbour 2x upsampling of [C,H,W].
Tensor upsample_nearest2x(const Tensor& x);

/// Mean squared difference over all elements, returned as a [1] tensor.
Tensor mse_normalized(const Tensor& pred, const Tensor& target);

/// Sum of all elements as a [1] tensor.
Tensor sum_all(const Tensor& x);

}  // namespace pfgnet::ops
