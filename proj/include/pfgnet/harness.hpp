#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pfgnet/config.hpp"
#include "pfgnet/container.hpp"
#include "pfgnet/params.hpp"
#include "pfgnet/tensor.hpp"

/// Training, evaluation, prediction and gate introspection over
/// [N, T, C, H, W] sequence tensors.
namespace pfgnet::harness {

/// Adam with a fixed learning rate.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Adam(const ParamStore& params, double lr);
  /// Updates every parameter from `grads` (same keys) and rounds the result
  /// to the parameter's storage dtype.
  void step(ParamStore& params, const ParamStore::Map& grads);

 private:
  double lr_;
  std::uint64_t t_ = 0;
  ParamStore::Map m_, v_;
};

/// Throws InputError unless data is [N, T, C, H, W] with T >= frames and
/// C, H, W matching the model's input.
void check_data(const ModelConfig& config, const Tensor& data, std::size_t frames);

struct TrainResult {
  ParamStore params;
  std::vector<double> history;  // mean train loss per epoch
};

/// Trains from init_params(config.model, config.seed). Sequences supply
/// t_in observed frames followed by t_out targets; the loss is the mean
/// per-frame spatially normalised MSE. Throws NumericError naming the first
/// non-finite parameter (or gradient) when the loss stops being finite.
TrainResult train(const TrainConfig& config, const Tensor& data,
                  const std::function<void(std::size_t epoch, double loss)>& on_epoch = {});

void write_history_csv(std::ostream& out, const std::vector<double>& history);

/// Predictions for every sequence from its first t_in frames, in eval mode:
/// [N, t_out, c_out, H, W].
Tensor predict_dataset(const ModelConfig& config, const ParamStore& params, const Tensor& data);

using Report = std::vector<std::pair<std::string, double>>;

/// The seven reported values: mse, mse_normalized, mae, psnr, ssim, params,
/// flops. SSIM uses the largest odd window up to 11 that fits the frame.
Report score(const ModelConfig& config, const Tensor& pred, const Tensor& gt);

/// Scores the checkpoint's predictions against frames t_in .. t_in+t_out-1.
Report evaluate(const io::Checkpoint& ckpt, const Tensor& data);

void write_report_csv(std::ostream& out, const Report& report);

struct GateDump {
  Tensor alpha;                    // [K, H', W']
  std::vector<std::uint8_t> gray;  // per-pixel argmax scale as a gray level
};

/// Fusion weights of block `block` on the first t_in frames of `sequence`
/// ([T, C, H, W] or the first sequence of [N, T, C, H, W]). Argmax ties go
/// to the smallest scale index. Throws InputError on a bad block index.
GateDump dump_gates(const io::Checkpoint& ckpt, const Tensor& sequence, std::size_t block);

/// Binary PGM (P5, maxval 255).
void write_pgm(std::ostream& out, std::span<const std::uint8_t> gray, std::size_t h, std::size_t w);
/// Rows y,x,alpha_0..alpha_{K-1}.
void write_alpha_csv(std::ostream& out, const Tensor& alpha);
/// Rows block,scale,channel,value with the suppression coefficient
/// act(beta_raw) of every channel.
void write_betas_csv(std::ostream& out, const ModelConfig& config, const ParamStore& params);

}  // namespace pfgnet::harness
