#include "pfgnet/pfg_block.hpp"

#include <vector>

#include "pfgnet/autodiff.hpp"
#include "pfgnet/eager.hpp"
#include "pfgnet/errors.hpp"
#include "pfgnet/freq_descriptor.hpp"
#include "pfgnet/rng.hpp"

namespace pfgnet::pfg {

namespace {

std::string join(std::string_view prefix, std::string_view leaf) {
  std::string out(prefix);
  out += '/';
  out += leaf;
  return out;
}

std::string scale_name(std::string_view prefix, std::size_t j, std::string_view leaf) {
  return join(prefix, "scale/" + std::to_string(j) + "/" + std::string(leaf));
}

}  // namespace

void add_params(ParamStore& store, std::string_view prefix, std::size_t width,
                const BlockConfig& config, const Initializer& init) {
  config.validate();
  const std::size_t E = config.expansion * width;
  const std::size_t K = config.kernels.size();
  for (std::size_t j = 0; j < K; ++j) {
    const std::size_t k = config.kernels[j];
    for (const char* leaf : {"h", "v"}) {
      const auto name = scale_name(prefix, j, leaf);
      store.set(name, init.identity_taps(name, {width, k}, 0.02));
    }
    if (config.beta_learnable) store.set(scale_name(prefix, j, "beta_raw"), init.zeros({width}));
  }
  const auto center = join(prefix, "center");
  store.set(center, init.identity_taps(center, {width, config.center_size, config.center_size}, 0.02));
  if (config.fusion == Fusion::softmax) {
    store.set(join(prefix, "gate/w"), init.zeros({K, 3}));
    store.set(join(prefix, "gate/b"), init.zeros({K}));
  }
  const auto expand = join(prefix, "glu/expand/w");
  store.set(expand, init.uniform_fan_in(expand, {2 * E, width}, width));
  store.set(join(prefix, "glu/expand/b"), init.zeros({2 * E}));
  const auto dw = join(prefix, "glu/dw");
  store.set(dw, init.uniform_fan_in(dw, {E, 3, 3}, 9));
  store.set(join(prefix, "glu/grn/gamma"), init.zeros({E}));
  store.set(join(prefix, "glu/grn/beta"), init.zeros({E}));
  const auto project = join(prefix, "glu/project/w");
  store.set(project, init.uniform_fan_in(project, {width, E}, E));
  store.set(join(prefix, "glu/project/b"), init.zeros({width}));
  store.set(join(prefix, "layerscale"), init.full({width}, 1e-2));
}

std::size_t param_count(std::size_t width, const BlockConfig& c) {
  const std::size_t E = c.expansion * width;
  const std::size_t K = c.kernels.size();
  std::size_t n = 0;
  for (auto k : c.kernels) n += 2 * k * width;
  if (c.beta_learnable) n += K * width;
  n += c.center_size * c.center_size * width;
  if (c.fusion == Fusion::softmax) n += 3 * K + K;
  n += 2 * E * width + 2 * E;  // expand
  n += 9 * E;                  // depthwise
  n += 2 * E;                  // grn
  n += width * E + width;      // project
  n += width;                  // layerscale
  return n;
}

template <class Ops>
typename Ops::Value gate_weights(Ops& ops, const typename Ops::Value& descriptor,
                                 const typename Ops::Value& w, const typename Ops::Value& b) {
  if (ops.value(descriptor).dim(0) != 3 || ops.value(w).rank() != 2 || ops.value(w).dim(1) != 3) {
    throw ConfigError("gate_weights: expects a 3-channel descriptor and a [K,3] projection");
  }
  return ops.softmax_over_channels(ops.pwconv(descriptor, w, b));
}

template <class Ops>
typename Ops::Value center_suppress(Ops& ops, const typename Ops::Value& peripheral,
                                    const typename Ops::Value& center_response,
                                    const typename Ops::Value& coeff) {
  return ops.sub(peripheral, ops.mul(center_response, coeff));
}

template <class Ops>
typename Ops::Value fuse(Ops& ops, const typename Ops::Value& alpha,
                         std::span<const typename Ops::Value> responses) {
  const std::size_t K = ops.value(alpha).dim(0);
  if (responses.empty() || K != responses.size()) {
    throw ConfigError("fuse: " + std::to_string(K) + " weight maps for " +
                      std::to_string(responses.size()) + " responses");
  }
  if (K == 1) return responses[0];
  std::vector<std::size_t> ones(K, 1);
  auto weights = ops.split_channels(alpha, ones);
  auto out = ops.mul(responses[0], weights[0]);
  for (std::size_t k = 1; k < K; ++k) out = ops.add(out, ops.mul(responses[k], weights[k]));
  return out;
}

template <class Ops>
typename Ops::Value channel_mix(Ops& ops, const typename Ops::Value& s, const std::string& prefix,
                                std::size_t expansion) {
  auto hidden = ops.pwconv(s, ops.param(join(prefix, "glu/expand/w")),
                           ops.param(join(prefix, "glu/expand/b")));
  const std::size_t two_e = ops.value(hidden).dim(0);
  if (two_e % 2 != 0) throw ConfigError("channel_mix: odd expanded width");
  if (two_e != 2 * expansion * ops.value(s).dim(0)) {
    throw ConfigError("channel_mix: expanded width does not match the expansion ratio");
  }
  std::vector<std::size_t> halves{two_e / 2, two_e / 2};
  auto uv = ops.split_channels(hidden, halves);
  auto gated = ops.mul(ops.sigmoid(uv[0]), ops.dwconv_2d(uv[1], ops.param(join(prefix, "glu/dw"))));
  auto normed = ops.grn(gated, ops.param(join(prefix, "glu/grn/gamma")),
                        ops.param(join(prefix, "glu/grn/beta")), 1e-6);
  return ops.pwconv(normed, ops.param(join(prefix, "glu/project/w")),
                    ops.param(join(prefix, "glu/project/b")));
}

bool drop_decision(double rate, std::uint64_t key, std::uint64_t stream) {
  CounterRng rng(derive_key(key, {stream}));
  return rng.uniform() < rate;
}

template <class Ops>
typename Ops::Value drop_path(Ops& ops, const typename Ops::Value& x, double rate,
                              const PassContext& ctx, std::uint64_t stream) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("drop_path: rate must lie in [0, 1)");
  if (!ctx.training || rate == 0.0) return x;
  if (drop_decision(rate, ctx.key, stream)) return ops.scale(x, 0.0);
  return ops.scale(x, 1.0 / (1.0 - rate));
}

template <class Ops>
typename Ops::Value forward(Ops& ops, const typename Ops::Value& x, const std::string& prefix,
                            const BlockConfig& config, const PassContext& ctx, BlockProbe* probe) {
  using V = typename Ops::Value;
  const std::size_t K = config.kernels.size();
  const std::size_t C = ops.value(x).dim(0);
  const std::size_t H = ops.value(x).dim(1), W = ops.value(x).dim(2);
  const DType dtype = ops.value(x).dtype();

  V alpha;
  if (config.fusion == Fusion::softmax) {
    auto desc = freq::descriptor(ops, x, config.cues);
    alpha = gate_weights(ops, desc, ops.param(join(prefix, "gate/w")),
                         ops.param(join(prefix, "gate/b")));
  } else {
    alpha = ops.constant(Tensor::full({K, H, W}, 1.0 / static_cast<double>(K), dtype));
  }
  if (probe) probe->alpha = ops.value(alpha);

  auto center = ops.dwconv_2d(x, ops.param(join(prefix, "center")));
  std::vector<V> responses;
  responses.reserve(K);
  for (std::size_t j = 0; j < K; ++j) {
    auto peripheral = ops.sep_conv(x, ops.param(scale_name(prefix, j, "h")),
                                   ops.param(scale_name(prefix, j, "v")));
    V coeff;
    if (config.beta_learnable) {
      auto raw = ops.param(scale_name(prefix, j, "beta_raw"));
      coeff = config.gate_act == GateAct::tanh ? ops.tanh(raw) : ops.sigmoid(raw);
    } else {
      coeff = ops.constant(Tensor::full({C}, config.beta_fixed, dtype));
    }
    responses.push_back(center_suppress(ops, peripheral, center, coeff));
  }
  auto fused = fuse(ops, alpha, std::span<const V>(responses));
  auto mixed = channel_mix(ops, fused, prefix, config.expansion);
  auto branch = ops.mul(mixed, ops.param(join(prefix, "layerscale")));
  branch = drop_path(ops, branch, config.drop_path, ctx, hash_name(prefix));
  return ops.add(x, branch);
}

#define PFGNET_INSTANTIATE(OPS)                                                               \
  template OPS::Value gate_weights<OPS>(OPS&, const OPS::Value&, const OPS::Value&,           \
                                        const OPS::Value&);                                   \
  template OPS::Value center_suppress<OPS>(OPS&, const OPS::Value&, const OPS::Value&,        \
                                           const OPS::Value&);                                \
  template OPS::Value fuse<OPS>(OPS&, const OPS::Value&, std::span<const OPS::Value>);        \
  template OPS::Value channel_mix<OPS>(OPS&, const OPS::Value&, const std::string&,           \
                                       std::size_t);                                          \
  template OPS::Value drop_path<OPS>(OPS&, const OPS::Value&, double, const PassContext&,     \
                                     std::uint64_t);                                          \
  template OPS::Value forward<OPS>(OPS&, const OPS::Value&, const std::string&,               \
                                   const BlockConfig&, const PassContext&, BlockProbe*);

PFGNET_INSTANTIATE(EagerOps)
PFGNET_INSTANTIATE(TracedOps)
#undef PFGNET_INSTANTIATE

namespace {
const ParamStore& no_params() {
  static const ParamStore empty;
  return empty;
}
}  // namespace

Tensor drop_path(const Tensor& x, double rate, const PassContext& ctx, std::uint64_t stream) {
  EagerOps ops(no_params());
  return drop_path(ops, x, rate, ctx, stream);
}

Tensor fuse(const Tensor& alpha, std::span<const Tensor> responses) {
  EagerOps ops(no_params());
  return fuse(ops, alpha, responses);
}

}  // namespace pfgnet::pfg
