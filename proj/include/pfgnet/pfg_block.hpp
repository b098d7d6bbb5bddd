#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "pfgnet/config.hpp"
#include "pfgnet/init.hpp"
#include "pfgnet/params.hpp"
#include "pfgnet/tensor.hpp"

/// Frequency-gated multi-scale block operating on packed [C',H,W] features.
///
/// Parameter layout under a prefix such as "block/0":
///   scale/<j>/h, scale/<j>/v   [C',k_j] row and column taps of scale j
///   scale/<j>/beta_raw         [C'] suppression logits (learnable mode only)
///   center                     [C',s,s] shared center kernel
///   gate/w [K,3], gate/b [K]   descriptor-to-logit projection (softmax fusion only)
///   glu/expand/{w,b}           [2E,C'], [2E]
///   glu/dw                     [E,3,3]
///   glu/grn/{gamma,beta}       [E]
///   glu/project/{w,b}          [C',E], [C']
///   layerscale                 [C']
namespace pfgnet::pfg {

/// Per-sample execution context. `key` seeds the drop-path draws of this
/// sample; each block derives its own stream from it.
struct PassContext {
  bool training = false;
  std::uint64_t key = 0;
};

/// Optional capture of intermediate values during a forward pass.
struct BlockProbe {
  Tensor alpha;  // [K,H,W] fusion weights actually used
};

void add_params(ParamStore& store, std::string_view prefix, std::size_t width,
                const BlockConfig& config, const Initializer& init);

/// Learnable scalars add_params creates.
std::size_t param_count(std::size_t width, const BlockConfig& config);

/// softmax(pwconv(F, w, b)) with F the [3,H,W] descriptor and w [K,3].
template <class Ops>
typename Ops::Value gate_weights(Ops& ops, const typename Ops::Value& descriptor,
                                 const typename Ops::Value& w, const typename Ops::Value& b);

/// peripheral - coeff * center_response, coeff per channel ([C']).
template <class Ops>
typename Ops::Value center_suppress(Ops& ops, const typename Ops::Value& peripheral,
                                    const typename Ops::Value& center_response,
                                    const typename Ops::Value& coeff);

/// sum_k alpha[k] * responses[k], alpha spread over channels. A single
/// response is returned as is.
template <class Ops>
typename Ops::Value fuse(Ops& ops, const typename Ops::Value& alpha,
                         std::span<const typename Ops::Value> responses);

/// Expand, sigmoid-gated depthwise mixing, GRN, project back to C'.
template <class Ops>
typename Ops::Value channel_mix(Ops& ops, const typename Ops::Value& s, const std::string& prefix,
                                std::size_t expansion);

/// Stochastic depth: in training, zero the branch with probability `rate`
/// and otherwise scale it by 1/(1-rate). One draw per (sample key, stream).
template <class Ops>
typename Ops::Value drop_path(Ops& ops, const typename Ops::Value& x, double rate,
                              const PassContext& ctx, std::uint64_t stream);

/// True when the branch is dropped for this (key, stream).
bool drop_decision(double rate, std::uint64_t key, std::uint64_t stream);

template <class Ops>
typename Ops::Value forward(Ops& ops, const typename Ops::Value& x, const std::string& prefix,
                            const BlockConfig& config, const PassContext& ctx,
                            BlockProbe* probe = nullptr);

// Plain-tensor conveniences.
Tensor drop_path(const Tensor& x, double rate, const PassContext& ctx, std::uint64_t stream);
Tensor fuse(const Tensor& alpha, std::span<const Tensor> responses);

}  // namespace pfgnet::pfg
