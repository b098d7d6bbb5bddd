#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "pfgnet/ops.hpp"
#include "pfgnet/params.hpp"

namespace pfgnet {

/// Untraced execution policy: every call forwards straight to pfgnet::ops.
///
/// Model code is written once against the member set shared by EagerOps and
/// TracedOps (see autodiff.hpp). EagerOps additionally tallies convolution
/// multiply-accumulates so FLOP estimates can be checked against a real run.
class EagerOps {
 public:
  using Value = Tensor;

  explicit EagerOps(const ParamStore& params) : params_(params) {}

  const Tensor& param(std::string_view name) const { return params_.get(name); }
  Tensor constant(Tensor value) const { return value; }
  Tensor input(Tensor value) const { return value; }
  const Tensor& value(const Tensor& v) const { return v; }

  std::uint64_t conv_macs() const { return macs_; }

  Tensor dwconv_1d_h(const Tensor& x, const Tensor& h);
  Tensor dwconv_1d_v(const Tensor& x, const Tensor& v);
  Tensor sep_conv(const Tensor& x, const Tensor& h, const Tensor& v);
  Tensor dwconv_2d(const Tensor& x, const Tensor& kernel);
  Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                std::size_t stride);
  Tensor pwconv(const Tensor& x, const Tensor& weight, const Tensor& bias);

  Tensor avg_pool3(const Tensor& x) { return ops::avg_pool3(x); }
  Tensor softmax_over_channels(const Tensor& x) { return ops::softmax_over_channels(x); }
  Tensor tanh(const Tensor& x) { return ops::tanh(x); }
  Tensor sigmoid(const Tensor& x) { return ops::sigmoid(x); }
  Tensor leaky_relu(const Tensor& x, double slope) { return ops::leaky_relu(x, slope); }
  Tensor scale(const Tensor& x, double s) { return ops::scale(x, s); }
  Tensor square(const Tensor& x) { return ops::square(x); }
  Tensor abs(const Tensor& x) { return ops::abs(x); }
  Tensor sqrt_eps(const Tensor& x, double eps) { return ops::sqrt_eps(x, eps); }
  Tensor clamp_min(const Tensor& x, double lo) { return ops::clamp_min(x, lo); }
  Tensor add(const Tensor& a, const Tensor& b) { return ops::add(a, b); }
  Tensor sub(const Tensor& a, const Tensor& b) { return ops::sub(a, b); }
  Tensor mul(const Tensor& a, const Tensor& b) { return ops::mul(a, b); }
  Tensor channel_mean(const Tensor& x) { return ops::channel_mean(x); }
  Tensor grn(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    return ops::grn(x, gamma, beta, eps);
  }
  Tensor group_norm(const Tensor& x, std::size_t groups, const Tensor& gamma,
                    const Tensor& beta, double eps) {
    return ops::group_norm(x, groups, gamma, beta, eps);
  }
  Tensor concat_channels(std::span<const Tensor> parts) { return ops::concat_channels(parts); }
  std::vector<Tensor> split_channels(const Tensor& x, std::span<const std::size_t> sizes) {
    return ops::split_channels(x, sizes);
  }
  Tensor upsample_nearest2x(const Tensor& x) { return ops::upsample_nearest2x(x); }
  Tensor mse_normalized(const Tensor& p, const Tensor& t) { return ops::mse_normalized(p, t); }
  Tensor sum_all(const Tensor& x) { return ops::sum_all(x); }

 private:
  const ParamStore& params_;
  std::uint64_t macs_ = 0;
};

}  // namespace pfgnet
