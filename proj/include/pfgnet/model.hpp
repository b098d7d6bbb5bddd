#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pfgnet/config.hpp"
#include "pfgnet/params.hpp"
#include "pfgnet/pfg_block.hpp"
#include "pfgnet/tensor.hpp"

/// Encoder / translator / decoder assembly.
///
/// Encoder block i: 3x3 conv (stride 2 when i is odd) + GroupNorm(2) +
/// LeakyReLU(0.2), parameters enc/<i>/conv/w, enc/<i>/norm/{gamma,beta}; the conv has
/// no bias since the normalisation would cancel it.
/// Decoder block j mirrors encoder block N_s-1-j: nearest 2x upsample where
/// that encoder block strided, then the same conv recipe; the last decoder
/// block reads concat(features, skip) where skip is encoder block 0's output.
/// A 1x1 readout (readout/{w,b}) maps to C_out.
namespace pfgnet::model {

/// Creates every parameter of the model, keyed by (seed, path).
ParamStore init_params(const ModelConfig& config, std::uint64_t seed);

std::string block_prefix(std::size_t i);

template <class Ops>
struct Encoded {
  typename Ops::Value features;  // [C, H', W']
  typename Ops::Value skip;      // [C, H, W], encoder block 0 output
};

template <class Ops>
Encoded<Ops> encode(Ops& ops, const ModelConfig& config, const typename Ops::Value& frame);

/// MSInit followed by N_t gated blocks on the packed [C', H', W'] tensor.
template <class Ops>
typename Ops::Value translate(Ops& ops, const ModelConfig& config, const typename Ops::Value& z,
                              const pfg::PassContext& ctx,
                              std::vector<pfg::BlockProbe>* probes = nullptr);

template <class Ops>
typename Ops::Value decode(Ops& ops, const ModelConfig& config, const typename Ops::Value& f,
                           const typename Ops::Value& skip);

/// One pass: T_in frames in, T_in decoded frames out.
template <class Ops>
std::vector<typename Ops::Value> forward_pass(Ops& ops, const ModelConfig& config,
                                              std::span<const typename Ops::Value> frames,
                                              const pfg::PassContext& ctx,
                                              std::vector<pfg::BlockProbe>* probes = nullptr);

/// T_in frames in, T_out frames out: slices when T_out <= T_in, otherwise
/// feeds the last T_in predictions back until enough frames exist. Each
/// rollout pass derives its own drop-path key from ctx.key.
template <class Ops>
std::vector<typename Ops::Value> predict(Ops& ops, const ModelConfig& config,
                                         std::span<const typename Ops::Value> frames,
                                         const pfg::PassContext& ctx);

/// Plain-tensor prediction. Frames are cast to the model dtype. When `macs`
/// is given it receives the convolution multiply-accumulates performed.
std::vector<Tensor> predict(const ModelConfig& config, const ParamStore& params,
                            std::span<const Tensor> frames, const pfg::PassContext& ctx = {},
                            std::uint64_t* macs = nullptr);

/// Checks frame count and shapes; throws InputError.
void check_frames(const ModelConfig& config, std::span<const Tensor> frames);

/// Per-channel spatial cost of one kernel scale: a separable k pair against
/// the dense k x k kernel it replaces.
struct ScaleCost {
  std::size_t kernel;
  std::size_t separable;  // 2k
  std::size_t dense;      // k^2
};
ScaleCost scale_cost(std::size_t k);

struct ParamBreakdown {
  std::uint64_t encoder = 0;
  std::uint64_t msinit = 0;
  std::uint64_t blocks = 0;
  std::uint64_t decoder = 0;
  std::uint64_t total() const { return encoder + msinit + blocks + decoder; }
};

ParamBreakdown param_breakdown(const ModelConfig& config);
std::uint64_t count_params(const ModelConfig& config);

/// Convolution multiply-accumulates of one forward: T_in frames through the
/// encoder, one translator pass, T_out frames through the decoder.
std::uint64_t count_macs(const ModelConfig& config);
/// 2 * count_macs.
std::uint64_t count_flops(const ModelConfig& config);

}  // namespace pfgnet::model
