#include "pfgnet/freq_descriptor.hpp"

#include <vector>

#include "pfgnet/autodiff.hpp"
#include "pfgnet/eager.hpp"

namespace pfgnet::freq {

Tensor sobel_x() { return Tensor({3, 3}, {-1, 0, 1, -2, 0, 2, -1, 0, 1}); }
Tensor sobel_y() { return Tensor({3, 3}, {-1, -2, -1, 0, 0, 0, 1, 2, 1}); }
Tensor laplacian() { return Tensor({3, 3}, {0, 1, 0, 1, -4, 1, 0, 1, 0}); }

Tensor replicate(const Tensor& f, std::size_t channels, DType dtype) {
  Tensor out({channels, 3, 3}, dtype);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < 9; ++i) out[c * 9 + i] = f[i];
  return out;
}

namespace {

template <class Ops>
typename Ops::Value fixed_filter(Ops& ops, const typename Ops::Value& x, const Tensor& f) {
  const std::size_t channels = ops.value(x).dim(0);
  const DType dtype = ops.value(x).dtype();
  return ops.dwconv_2d(x, ops.constant(replicate(f, channels, dtype)));
}

}  // namespace

template <class Ops>
typename Ops::Value sobel_magnitude(Ops& ops, const typename Ops::Value& x) {
  auto gx = fixed_filter(ops, x, sobel_x());
  auto gy = fixed_filter(ops, x, sobel_y());
  auto mag = ops.sqrt_eps(ops.add(ops.square(gx), ops.square(gy)), kMagnitudeEps);
  return ops.channel_mean(mag);
}

template <class Ops>
typename Ops::Value laplacian_abs(Ops& ops, const typename Ops::Value& x) {
  return ops.channel_mean(ops.abs(fixed_filter(ops, x, laplacian())));
}

template <class Ops>
typename Ops::Value local_variance(Ops& ops, const typename Ops::Value& x) {
  auto second = ops.avg_pool3(ops.square(x));
  auto first = ops.avg_pool3(x);
  return ops.channel_mean(ops.clamp_min(ops.sub(second, ops.square(first)), 0.0));
}

template <class Ops>
typename Ops::Value descriptor(Ops& ops, const typename Ops::Value& x, const CueMask& cues) {
  const Shape plane{1, ops.value(x).dim(1), ops.value(x).dim(2)};
  const DType dtype = ops.value(x).dtype();
  auto blank = [&] { return ops.constant(Tensor::zeros(plane, dtype)); };
  std::vector<typename Ops::Value> parts;
  parts.push_back(cues.gradient ? sobel_magnitude(ops, x) : blank());
  parts.push_back(cues.curvature ? laplacian_abs(ops, x) : blank());
  parts.push_back(cues.variance ? local_variance(ops, x) : blank());
  return ops.concat_channels(parts);
}

#define PFGNET_INSTANTIATE(OPS)                                                              \
  template OPS::Value sobel_magnitude<OPS>(OPS&, const OPS::Value&);                         \
  template OPS::Value laplacian_abs<OPS>(OPS&, const OPS::Value&);                           \
  template OPS::Value local_variance<OPS>(OPS&, const OPS::Value&);                          \
  template OPS::Value descriptor<OPS>(OPS&, const OPS::Value&, const CueMask&);

PFGNET_INSTANTIATE(EagerOps)
PFGNET_INSTANTIATE(TracedOps)
#undef PFGNET_INSTANTIATE

namespace {
const ParamStore& no_params() {
  static const ParamStore empty;
  return empty;
}
}  // namespace

Tensor sobel_magnitude(const Tensor& x) {
  EagerOps ops(no_params());
  return sobel_magnitude(ops, x);
}
Tensor laplacian_abs(const Tensor& x) {
  EagerOps ops(no_params());
  return laplacian_abs(ops, x);
}
Tensor local_variance(const Tensor& x) {
  EagerOps ops(no_params());
  return local_variance(ops, x);
}
Tensor descriptor(const Tensor& x, const CueMask& cues) {
  EagerOps ops(no_params());
  return descriptor(ops, x, cues);
}

}  // namespace pfgnet::freq
