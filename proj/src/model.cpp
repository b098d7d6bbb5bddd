#include "pfgnet/model.hpp"

#include <string>

#include "pfgnet/autodiff.hpp"
#include "pfgnet/eager.hpp"
#include "pfgnet/errors.hpp"
#include "pfgnet/init.hpp"
#include "pfgnet/msinit.hpp"

namespace pfgnet::model {

namespace {

constexpr double kLeakySlope = 0.2;
constexpr std::size_t kGroups = 2;
constexpr double kNormEps = 1e-5;

std::string enc(std::size_t i) { return "enc/" + std::to_string(i); }
std::string dec(std::size_t j) { return "dec/" + std::to_string(j); }

void add_conv_block(ParamStore& store, const std::string& p, std::size_t in, std::size_t out,
                    const Initializer& init) {
  // No conv bias: the group normalisation that follows removes it.
  store.set(p + "/conv/w", init.uniform_fan_in(p + "/conv/w", {out, in, 3, 3}, in * 9));
  store.set(p + "/norm/gamma", init.full({out}, 1.0));
  store.set(p + "/norm/beta", init.zeros({out}));
}

template <class Ops>
typename Ops::Value conv_block(Ops& ops, const std::string& p, const typename Ops::Value& x,
                               std::size_t stride) {
  const std::size_t out = ops.value(ops.param(p + "/conv/w")).dim(0);
  auto bias = ops.constant(Tensor::zeros({out}, ops.value(x).dtype()));
  auto y = ops.conv2d(x, ops.param(p + "/conv/w"), bias, stride);
  y = ops.group_norm(y, kGroups, ops.param(p + "/norm/gamma"), ops.param(p + "/norm/beta"), kNormEps);
  return ops.leaky_relu(y, kLeakySlope);
}

// Input channels of decoder block j.
std::size_t decoder_in(const ModelConfig& c, std::size_t j) {
  return j + 1 == c.n_s ? 2 * c.latent_c : c.latent_c;
}

}  // namespace

std::string block_prefix(std::size_t i) { return "block/" + std::to_string(i); }

ParamStore init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ParamStore store;
  const Initializer init(seed, config.dtype);
  const std::size_t C = config.latent_c;
  for (std::size_t i = 0; i < config.n_s; ++i) add_conv_block(store, enc(i), i == 0 ? config.c_in : C, C, init);
  msinit::add_params(store, config.packed_width(), config.msinit_kernels, init);
  for (std::size_t i = 0; i < config.n_t; ++i) {
    pfg::add_params(store, block_prefix(i), config.packed_width(), config.block, init);
  }
  for (std::size_t j = 0; j < config.n_s; ++j) add_conv_block(store, dec(j), decoder_in(config, j), C, init);
  store.set("readout/w", init.uniform_fan_in("readout/w", {config.c_out, C}, C));
  store.set("readout/b", init.zeros({config.c_out}));
  return store;
}

template <class Ops>
Encoded<Ops> encode(Ops& ops, const ModelConfig& config, const typename Ops::Value& frame) {
  Encoded<Ops> out;
  auto x = frame;
  for (std::size_t i = 0; i < config.n_s; ++i) {
    x = conv_block(ops, enc(i), x, config.encoder_strided(i) ? 2 : 1);
    if (i == 0) out.skip = x;
  }
  out.features = x;
  return out;
}

template <class Ops>
typename Ops::Value translate(Ops& ops, const ModelConfig& config, const typename Ops::Value& z,
                              const pfg::PassContext& ctx, std::vector<pfg::BlockProbe>* probes) {
  auto x = msinit::forward(ops, z, config.msinit_kernels.size());
  if (probes) probes->assign(config.n_t, {});
  for (std::size_t i = 0; i < config.n_t; ++i) {
    x = pfg::forward(ops, x, block_prefix(i), config.block, ctx, probes ? &(*probes)[i] : nullptr);
  }
  return x;
}

template <class Ops>
typename Ops::Value decode(Ops& ops, const ModelConfig& config, const typename Ops::Value& f,
                           const typename Ops::Value& skip) {
  const auto& fv = ops.value(f);
  if (fv.rank() != 3 || fv.dim(0) != config.latent_c || fv.dim(1) != config.latent_h() ||
      fv.dim(2) != config.latent_w()) {
    throw ConfigError("decode: features " + shape_string(fv.dims()) + " do not match the latent shape");
  }
  const auto& sv = ops.value(skip);
  if (sv.rank() != 3 || sv.dim(0) != config.latent_c || sv.dim(1) != config.height ||
      sv.dim(2) != config.width) {
    throw ConfigError("decode: skip " + shape_string(sv.dims()) + " does not match [C,H,W]");
  }
  auto x = f;
  for (std::size_t j = 0; j < config.n_s; ++j) {
    const std::size_t mirrored = config.n_s - 1 - j;
    if (config.encoder_strided(mirrored)) x = ops.upsample_nearest2x(x);
    if (mirrored == 0) {
      std::vector<typename Ops::Value> both{x, skip};
      x = ops.concat_channels(both);
    }
    x = conv_block(ops, dec(j), x, 1);
  }
  return ops.pwconv(x, ops.param("readout/w"), ops.param("readout/b"));
}

template <class Ops>
std::vector<typename Ops::Value> forward_pass(Ops& ops, const ModelConfig& config,
                                              std::span<const typename Ops::Value> frames,
                                              const pfg::PassContext& ctx,
                                              std::vector<pfg::BlockProbe>* probes) {
  using V = typename Ops::Value;
  if (frames.size() != config.t_in) {
    throw InputError("expected " + std::to_string(config.t_in) + " input frames, got " +
                     std::to_string(frames.size()));
  }
  std::vector<V> features, skips;
  for (const auto& frame : frames) {
    auto e = encode(ops, config, frame);
    features.push_back(e.features);
    skips.push_back(e.skip);
  }
  // Temporal packing: frame t occupies channels [t*C, (t+1)*C).
  auto z = ops.concat_channels(std::span<const V>(features));
  auto y = translate(ops, config, z, ctx, probes);
  std::vector<std::size_t> sizes(config.t_in, config.latent_c);
  auto unpacked = ops.split_channels(y, sizes);
  std::vector<V> out;
  for (std::size_t t = 0; t < config.t_in; ++t) out.push_back(decode(ops, config, unpacked[t], skips[t]));
  return out;
}

template <class Ops>
std::vector<typename Ops::Value> predict(Ops& ops, const ModelConfig& config,
                                         std::span<const typename Ops::Value> frames,
                                         const pfg::PassContext& ctx) {
  using V = typename Ops::Value;
  std::vector<V> out;
  std::vector<V> current(frames.begin(), frames.end());
  for (std::uint64_t pass = 0; out.size() < config.t_out; ++pass) {
    pfg::PassContext pass_ctx{ctx.training, derive_key(ctx.key, {pass})};
    auto produced = forward_pass(ops, config, std::span<const V>(current), pass_ctx);
    out.insert(out.end(), produced.begin(), produced.end());
    current = std::move(produced);
  }
  out.resize(config.t_out);
  return out;
}

#define PFGNET_INSTANTIATE(OPS)                                                                \
  template Encoded<OPS> encode<OPS>(OPS&, const ModelConfig&, const OPS::Value&);              \
  template OPS::Value translate<OPS>(OPS&, const ModelConfig&, const OPS::Value&,              \
                                     const pfg::PassContext&, std::vector<pfg::BlockProbe>*);  \
  template OPS::Value decode<OPS>(OPS&, const ModelConfig&, const OPS::Value&,                 \
                                  const OPS::Value&);                                          \
  template std::vector<OPS::Value> forward_pass<OPS>(OPS&, const ModelConfig&,                 \
                                                     std::span<const OPS::Value>,              \
                                                     const pfg::PassContext&,                  \
                                                     std::vector<pfg::BlockProbe>*);           \
  template std::vector<OPS::Value> predict<OPS>(OPS&, const ModelConfig&,                      \
                                                std::span<const OPS::Value>,                   \
                                                const pfg::PassContext&);

PFGNET_INSTANTIATE(EagerOps)
PFGNET_INSTANTIATE(TracedOps)
#undef PFGNET_INSTANTIATE

void check_frames(const ModelConfig& config, std::span<const Tensor> frames) {
  if (frames.size() != config.t_in) {
    throw InputError("expected " + std::to_string(config.t_in) + " input frames, got " +
                     std::to_string(frames.size()));
  }
  const Shape want{config.c_in, config.height, config.width};
  for (const auto& f : frames) {
    if (f.dims() != want) {
      throw InputError("frame shape " + shape_string(f.dims()) + " does not match " + shape_string(want));
    }
  }
}

std::vector<Tensor> predict(const ModelConfig& config, const ParamStore& params,
                            std::span<const Tensor> frames, const pfg::PassContext& ctx,
                            std::uint64_t* macs) {
  check_frames(config, frames);
  std::vector<Tensor> cast;
  for (const auto& f : frames) cast.push_back(f.cast(config.dtype));
  EagerOps ops(params);
  auto out = predict(ops, config, std::span<const Tensor>(cast), ctx);
  if (macs) *macs = ops.conv_macs();
  return out;
}

ScaleCost scale_cost(std::size_t k) { return {k, 2 * k, k * k}; }

ParamBreakdown param_breakdown(const ModelConfig& c) {
  ParamBreakdown b;
  const std::uint64_t C = c.latent_c;
  auto conv_block = [](std::uint64_t in, std::uint64_t out) { return out * in * 9 + 2 * out; };
  for (std::size_t i = 0; i < c.n_s; ++i) b.encoder += conv_block(i == 0 ? c.c_in : C, C);
  b.msinit = msinit::param_count(c.packed_width(), c.msinit_kernels);
  b.blocks = c.n_t * pfg::param_count(c.packed_width(), c.block);
  for (std::size_t j = 0; j < c.n_s; ++j) b.decoder += conv_block(decoder_in(c, j), C);
  b.decoder += c.c_out * C + c.c_out;
  return b;
}

std::uint64_t count_params(const ModelConfig& config) { return param_breakdown(config).total(); }

std::uint64_t count_macs(const ModelConfig& c) {
  const std::uint64_t C = c.latent_c;
  // Encoder, per frame.
  std::uint64_t encoder = 0;
  std::uint64_t h = c.height, w = c.width;
  for (std::size_t i = 0; i < c.n_s; ++i) {
    if (c.encoder_strided(i)) {
      h = (h - 1) / 2 + 1;
      w = (w - 1) / 2 + 1;
    }
    encoder += h * w * C * (i == 0 ? c.c_in : C) * 9;
  }
  // Translator, one pass.
  const std::uint64_t P = c.latent_h() * c.latent_w();
  const std::uint64_t Cp = c.packed_width();
  const std::uint64_t M = c.msinit_kernels.size();
  std::uint64_t translator = 0;
  for (auto k : c.msinit_kernels) translator += P * Cp * (2 * k + 9 + Cp / M);
  const auto& b = c.block;
  const std::uint64_t E = b.expansion * Cp;
  const std::uint64_t K = b.kernels.size();
  std::uint64_t block = 0;
  if (b.fusion == Fusion::softmax) {
    if (b.cues.gradient) block += P * Cp * 18;
    if (b.cues.curvature) block += P * Cp * 9;
    block += P * K * 3;
  }
  block += P * Cp * b.center_size * b.center_size;
  for (auto k : b.kernels) block += P * Cp * 2 * k;
  block += P * (2 * E * Cp + 9 * E + Cp * E);
  translator += c.n_t * block;
  // Decoder, per frame.
  std::uint64_t decoder = 0;
  for (std::size_t j = 0; j < c.n_s; ++j) {
    const std::size_t mirrored = c.n_s - 1 - j;
    if (c.encoder_strided(mirrored)) {
      h *= 2;
      w *= 2;
    }
    decoder += h * w * C * decoder_in(c, j) * 9;
  }
  decoder += h * w * c.c_out * C;
  return c.t_in * encoder + translator + c.t_out * decoder;
}

std::uint64_t count_flops(const ModelConfig& config) { return 2 * count_macs(config); }

}  // namespace pfgnet::model
