#pragma once

#include <span>
#include <vector>

#include "pfgnet/init.hpp"
#include "pfgnet/params.hpp"

/// Multi-scale initialisation stage. Branch m applies
/// sep_conv(k_m) + dwconv_2d(3x3) + identity to the packed features, then a
/// 1x1 projection to C'/M channels; branch outputs are concatenated in order.
///
/// Parameters per branch m: msinit/branch/<m>/{h,v} [C',k_m],
/// msinit/branch/<m>/d [C',3,3], msinit/branch/<m>/proj/{w,b} [C'/M,C'], [C'/M].
namespace pfgnet::msinit {

std::string branch_prefix(std::size_t m);

void add_params(ParamStore& store, std::size_t width, std::span<const std::size_t> kernels,
                const Initializer& init);

std::size_t param_count(std::size_t width, std::span<const std::size_t> kernels);

/// Separable + 3x3 depthwise + identity for one branch, before projection.
template <class Ops>
typename Ops::Value branch(Ops& ops, const typename Ops::Value& z, std::size_t m);

template <class Ops>
typename Ops::Value forward(Ops& ops, const typename Ops::Value& z, std::size_t branches);

}  // namespace pfgnet::msinit
