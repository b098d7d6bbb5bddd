#pragma once

#include "pfgnet/config.hpp"
#include "pfgnet/tensor.hpp"

/// Pixel-wise spectral cues computed with fixed 3x3 filters. The filters are
/// constants: gradients reach the input but no filter gradient exists.
///
/// Each template runs under EagerOps (plain tensors) or TracedOps (tape).
namespace pfgnet::freq {

/// Horizontal Sobel [[-1,0,1],[-2,0,2],[-1,0,1]] as a [3,3] tensor.
Tensor sobel_x();
/// Transpose of sobel_x().
Tensor sobel_y();
/// 4-neighbour Laplacian [[0,1,0],[1,-4,1],[0,1,0]].
Tensor laplacian();

/// The filter replicated over `channels`, shaped [C,3,3] for dwconv_2d.
Tensor replicate(const Tensor& filter3x3, std::size_t channels, DType dtype);

/// sqrt inside the gradient magnitude is taken of (gx^2 + gy^2 + this).
inline constexpr double kMagnitudeEps = 1e-12;

/// Channel mean of sqrt((Gx*x)^2 + (Gy*x)^2 + eps) -> [1,H,W].
template <class Ops>
typename Ops::Value sobel_magnitude(Ops& ops, const typename Ops::Value& x);

/// Channel mean of |L*x| -> [1,H,W].
template <class Ops>
typename Ops::Value laplacian_abs(Ops& ops, const typename Ops::Value& x);

/// Channel mean of max(avg3(x^2) - avg3(x)^2, 0) -> [1,H,W].
template <class Ops>
typename Ops::Value local_variance(Ops& ops, const typename Ops::Value& x);

/// [f1, f2, f3] stacked to [3,H,W]. Masked-out cues are zero channels, so
/// the gate projection keeps its three inputs under every mask.
template <class Ops>
typename Ops::Value descriptor(Ops& ops, const typename Ops::Value& x,
                               const CueMask& cues = {});

// Plain-tensor conveniences.
Tensor sobel_magnitude(const Tensor& x);
Tensor laplacian_abs(const Tensor& x);
Tensor local_variance(const Tensor& x);
Tensor descriptor(const Tensor& x, const CueMask& cues = {});

}  // namespace pfgnet::freq
