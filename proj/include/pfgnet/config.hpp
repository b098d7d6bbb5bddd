#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pfgnet/tensor.hpp"

namespace pfgnet {

enum class Fusion { softmax, mean };
enum class GateAct { tanh, sigmoid };

/// Which spectral cues feed the gate: gradient magnitude, absolute
/// curvature, local variance. Disabled cues contribute a zero channel.
struct CueMask {
  bool gradient = true;
  bool curvature = true;
  bool variance = true;

  bool any() const { return gradient || curvature || variance; }
  bool operator==(const CueMask&) const = default;
};

/// Hyperparameters of one frequency-gated block.
struct BlockConfig {
  std::vector<std::size_t> kernels{9, 15, 31};
  std::size_t center_size = 3;
  std::size_t expansion = 4;
  Fusion fusion = Fusion::softmax;
  bool beta_learnable = true;
  double beta_fixed = 0.0;  // suppression coefficient when not learnable
  GateAct gate_act = GateAct::tanh;
  CueMask cues;
  double drop_path = 0.0;

  void validate() const;
};

struct ModelConfig {
  std::size_t t_in = 10;
  std::size_t t_out = 10;
  std::size_t c_in = 1;
  std::size_t c_out = 1;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t latent_c = 0;  // 0 selects a width automatically in resolve()
  std::size_t n_s = 4;
  std::size_t n_t = 8;
  std::vector<std::size_t> msinit_kernels{3, 5, 7};
  BlockConfig block;
  DType dtype = DType::float32;

  /// Fills in latent_c when unset: the smallest even width of at least 16
  /// (frames up to 32x32) or 32 (larger) whose packed width t_in*C splits
  /// evenly across the multi-scale init branches.
  void resolve();
  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  std::size_t downsample() const { return std::size_t{1} << (n_s / 2); }
  std::size_t latent_h() const { return height / downsample(); }
  std::size_t latent_w() const { return width / downsample(); }
  std::size_t packed_width() const { return t_in * latent_c; }
  bool encoder_strided(std::size_t block) const { return block % 2 == 1; }
};

struct TrainConfig {
  ModelConfig model;
  std::size_t epochs = 10;
  double lr = 1e-3;
  std::size_t batch = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Parses key=value text. '#' starts a comment, blank lines are ignored,
/// unknown or repeated keys are errors. Messages carry "line N:". The result
/// is resolved and validated.
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::string& path);

/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const TrainConfig& config);

}  // namespace pfgnet
