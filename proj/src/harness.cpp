#include "pfgnet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <span>

#include "pfgnet/autodiff.hpp"
#include "pfgnet/eager.hpp"
#include "pfgnet/errors.hpp"
#include "pfgnet/metrics.hpp"
#include "pfgnet/model.hpp"
#include "pfgnet/rng.hpp"

namespace pfgnet::harness {

namespace {

// Frame t of sequence n as a [C, H, W] tensor in the requested dtype.
Tensor frame_of(const Tensor& data, std::size_t n, std::size_t t, DType dtype) {
  const std::size_t C = data.dim(2), H = data.dim(3), W = data.dim(4);
  const std::size_t plane = C * H * W;
  const auto begin = data.data().begin() + (n * data.dim(1) + t) * plane;
  return Tensor({C, H, W}, std::vector<double>(begin, begin + plane), dtype);
}

std::vector<Tensor> frames_of(const Tensor& data, std::size_t n, std::size_t first, std::size_t count,
                              DType dtype) {
  std::vector<Tensor> out;
  for (std::size_t t = 0; t < count; ++t) out.push_back(frame_of(data, n, first + t, dtype));
  return out;
}

// Copies [C, H, W] frames into slot n of an [N, T, C, H, W] tensor.
void place(Tensor& dst, std::size_t n, std::span<const Tensor> frames) {
  const std::size_t plane = frames.front().numel();
  for (std::size_t t = 0; t < frames.size(); ++t) {
    std::copy(frames[t].data().begin(), frames[t].data().end(),
              dst.data().begin() + (n * dst.dim(1) + t) * plane);
  }
}

std::string non_finite_culprit(const ParamStore& params, const ParamStore::Map& grads) {
  if (auto name = params.first_non_finite(); !name.empty()) return "parameter " + name;
  for (const auto& [name, g] : grads) {
    if (!g.all_finite()) return "gradient of " + name;
  }
  return "no parameter or gradient (check the data)";
}

}  // namespace

Adam::Adam(const ParamStore& params, double lr) : lr_(lr) {
  for (const auto& [name, value] : params.values()) {
    m_.emplace(name, Tensor::zeros(value.dims()));
    v_.emplace(name, Tensor::zeros(value.dims()));
  }
}

void Adam::step(ParamStore& params, const ParamStore::Map& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (auto& [name, value] : params.values_mut()) {
    const auto g = grads.find(name);
    if (g == grads.end()) throw ConfigError("Adam: no gradient for " + name);
    auto& m = m_.at(name);
    auto& v = v_.at(name);
    for (std::size_t i = 0; i < value.numel(); ++i) {
      const double gi = g->second[i];
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
      value[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
    value.settle();
  }
}

void check_data(const ModelConfig& config, const Tensor& data, std::size_t frames) {
  const Shape& d = data.dims();
  if (d.size() != 5 || d[0] == 0 || d[1] < frames || d[2] != config.c_in || d[3] != config.height ||
      d[4] != config.width) {
    throw InputError("data " + shape_string(d) + " does not fit the config: need [N, >=" +
                     std::to_string(frames) + ", " + std::to_string(config.c_in) + ", " +
                     std::to_string(config.height) + ", " + std::to_string(config.width) + "]");
  }
}

TrainResult train(const TrainConfig& config, const Tensor& data,
                  const std::function<void(std::size_t, double)>& on_epoch) {
  config.validate();
  const ModelConfig& mc = config.model;
  if (mc.c_out != mc.c_in) throw InputError("training compares predictions with input frames; c_out must equal c_in");
  check_data(mc, data, mc.t_in + mc.t_out);
  const std::size_t N = data.dim(0);

  TrainResult result{model::init_params(mc, config.seed), {}};
  ParamStore& params = result.params;
  Adam adam(params, config.lr);

  std::vector<std::size_t> order(N);
  for (std::uint64_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = 0; i < N; ++i) order[i] = i;
    CounterRng shuffle(derive_key(config.seed, {hash_name("shuffle"), epoch}));
    for (std::size_t i = N; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double epoch_sum = 0.0;
    for (std::size_t start = 0, step = 0; start < N; start += config.batch, ++step) {
      const std::size_t count = std::min<std::size_t>(config.batch, N - start);
      auto graph = [&](TracedOps& ops, std::span<const Var>) {
        Var total{};
        bool first = true;
        for (std::size_t b = 0; b < count; ++b) {
          const std::size_t n = order[start + b];
          std::vector<Var> inputs;
          for (auto& f : frames_of(data, n, 0, mc.t_in, mc.dtype)) inputs.push_back(ops.constant(std::move(f)));
          const pfg::PassContext ctx{true, derive_key(config.seed, {hash_name("drop-path"), epoch, step, b})};
          auto pred = model::predict(ops, mc, std::span<const Var>(inputs), ctx);
          for (std::size_t t = 0; t < mc.t_out; ++t) {
            auto target = ops.constant(frame_of(data, n, mc.t_in + t, mc.dtype));
            auto loss = ops.mse_normalized(pred[t], target);
            total = first ? loss : ops.add(total, loss);
            first = false;
          }
        }
        return ops.scale(total, 1.0 / static_cast<double>(count * mc.t_out));
      };
      Trace trace = forward_traced(graph, std::span<const Tensor>(), params);
      const double loss = trace.output()[0];
      auto grads = backward(trace, Tensor::full({1}, 1.0, trace.output().dtype()));
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                           std::to_string(step) + ": first non-finite is " +
                           non_finite_culprit(params, grads.params));
      }
      adam.step(params, grads.params);
      if (auto bad = params.first_non_finite(); !bad.empty()) {
        throw NumericError("parameter " + bad + " became non-finite at epoch " + std::to_string(epoch + 1));
      }
      epoch_sum += loss * static_cast<double>(count);
    }
    result.history.push_back(epoch_sum / static_cast<double>(N));
    if (on_epoch) on_epoch(epoch + 1, result.history.back());
  }
  return result;
}

void write_history_csv(std::ostream& out, const std::vector<double>& history) {
  const auto old = out.precision(17);
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < history.size(); ++e) out << e + 1 << ',' << history[e] << '\n';
  out.precision(old);
}

Tensor predict_dataset(const ModelConfig& config, const ParamStore& params, const Tensor& data) {
  check_data(config, data, config.t_in);
  const std::size_t N = data.dim(0);
  Tensor out({N, config.t_out, config.c_out, config.height, config.width}, config.dtype);
  for (std::size_t n = 0; n < N; ++n) {
    auto in = frames_of(data, n, 0, config.t_in, config.dtype);
    auto pred = model::predict(config, params, in);
    place(out, n, pred);
  }
  return out;
}

Report score(const ModelConfig& config, const Tensor& pred, const Tensor& gt) {
  const std::size_t window = metrics::fitting_window(pred.dim(3), pred.dim(4));
  return {
      {"mse", metrics::mse(pred, gt, false)},
      {"mse_normalized", metrics::mse(pred, gt, true)},
      {"mae", metrics::mae(pred, gt)},
      {"psnr", metrics::psnr(pred, gt)},
      {"ssim", metrics::ssim(pred, gt, window)},
      {"params", static_cast<double>(model::count_params(config))},
      {"flops", static_cast<double>(model::count_flops(config))},
  };
}

Report evaluate(const io::Checkpoint& ckpt, const Tensor& data) {
  const ModelConfig& mc = ckpt.config.model;
  if (mc.c_out != mc.c_in) throw InputError("evaluation needs c_out == c_in");
  check_data(mc, data, mc.t_in + mc.t_out);
  const std::size_t N = data.dim(0);
  Tensor gt({N, mc.t_out, mc.c_out, mc.height, mc.width});
  for (std::size_t n = 0; n < N; ++n) place(gt, n, frames_of(data, n, mc.t_in, mc.t_out, DType::float64));
  return score(mc, predict_dataset(mc, ckpt.params, data), gt);
}

void write_report_csv(std::ostream& out, const Report& report) {
  const auto old = out.precision(17);
  out << "metric,value\n";
  for (const auto& [name, value] : report) out << name << ',' << value << '\n';
  out.precision(old);
}

GateDump dump_gates(const io::Checkpoint& ckpt, const Tensor& sequence, std::size_t block) {
  const ModelConfig& mc = ckpt.config.model;
  if (block >= mc.n_t) {
    throw InputError("block index " + std::to_string(block) + " out of range; the model has " +
                     std::to_string(mc.n_t) + " blocks");
  }
  Tensor batch = sequence.rank() == 4 ? sequence.reshaped({1, sequence.dim(0), sequence.dim(1),
                                                           sequence.dim(2), sequence.dim(3)})
                                      : sequence;
  check_data(mc, batch, mc.t_in);
  auto in = frames_of(batch, 0, 0, mc.t_in, mc.dtype);
  EagerOps ops(ckpt.params);
  std::vector<pfg::BlockProbe> probes;
  model::forward_pass(ops, mc, std::span<const Tensor>(in), pfg::PassContext{}, &probes);

  GateDump dump{probes.at(block).alpha, {}};
  const std::size_t K = dump.alpha.dim(0), P = dump.alpha.dim(1) * dump.alpha.dim(2);
  dump.gray.resize(P);
  for (std::size_t p = 0; p < P; ++p) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < K; ++k) {
      if (dump.alpha[k * P + p] > dump.alpha[best * P + p]) best = k;
    }
    dump.gray[p] = K == 1 ? 0 : static_cast<std::uint8_t>(std::lround(255.0 * best / (K - 1)));
  }
  return dump;
}

void write_pgm(std::ostream& out, std::span<const std::uint8_t> gray, std::size_t h, std::size_t w) {
  if (gray.size() != h * w) throw ConfigError("PGM: pixel count does not match dimensions");
  out << "P5\n" << w << ' ' << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(gray.data()), static_cast<std::streamsize>(gray.size()));
}

void write_alpha_csv(std::ostream& out, const Tensor& alpha) {
  const std::size_t K = alpha.dim(0), H = alpha.dim(1), W = alpha.dim(2);
  const auto old = out.precision(17);
  out << "y,x";
  for (std::size_t k = 0; k < K; ++k) out << ",alpha_" << k;
  out << '\n';
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      out << y << ',' << x;
      for (std::size_t k = 0; k < K; ++k) out << ',' << alpha[(k * H + y) * W + x];
      out << '\n';
    }
  }
  out.precision(old);
}

void write_betas_csv(std::ostream& out, const ModelConfig& config, const ParamStore& params) {
  const auto& bc = config.block;
  const auto old = out.precision(17);
  out << "block,scale,channel,value\n";
  for (std::size_t i = 0; i < config.n_t; ++i) {
    for (std::size_t j = 0; j < bc.kernels.size(); ++j) {
      for (std::size_t c = 0; c < config.packed_width(); ++c) {
        double coeff = bc.beta_fixed;
        if (bc.beta_learnable) {
          const double raw =
              params.get(model::block_prefix(i) + "/scale/" + std::to_string(j) + "/beta_raw")[c];
          coeff = bc.gate_act == GateAct::tanh ? std::tanh(raw) : 1.0 / (1.0 + std::exp(-raw));
        }
        out << i << ',' << j << ',' << c << ',' << coeff << '\n';
      }
    }
  }
  out.precision(old);
}

}  // namespace pfgnet::harness
