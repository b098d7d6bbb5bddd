#include "pfgnet/eager.hpp"

namespace pfgnet {

Tensor EagerOps::dwconv_1d_h(const Tensor& x, const Tensor& h) {
  auto out = ops::dwconv_1d_h(x, h);
  macs_ += out.numel() * h.dim(1);
  return out;
}

Tensor EagerOps::dwconv_1d_v(const Tensor& x, const Tensor& v) {
  auto out = ops::dwconv_1d_v(x, v);
  macs_ += out.numel() * v.dim(1);
  return out;
}

Tensor EagerOps::sep_conv(const Tensor& x, const Tensor& h, const Tensor& v) {
  return dwconv_1d_v(dwconv_1d_h(x, h), v);
}

Tensor EagerOps::dwconv_2d(const Tensor& x, const Tensor& kernel) {
  auto out = ops::dwconv_2d(x, kernel);
  macs_ += out.numel() * kernel.dim(1) * kernel.dim(2);
  return out;
}

Tensor EagerOps::conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        std::size_t stride) {
  auto out = ops::conv2d(x, weight, bias, stride);
  macs_ += out.numel() * weight.dim(1) * weight.dim(2) * weight.dim(3);
  return out;
}

Tensor EagerOps::pwconv(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  auto out = ops::pwconv(x, weight, bias);
  macs_ += out.numel() * weight.dim(1);
  return out;
}

}  // namespace pfgnet
