// pfgnet: data generation, training, evaluation, prediction, spectral
// analysis and introspection from one binary.
//
// Exit codes: 0 success, 2 usage or input error, 1 internal error.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "pfgnet/bouncing.hpp"
#include "pfgnet/config.hpp"
#include "pfgnet/container.hpp"
#include "pfgnet/errors.hpp"
#include "pfgnet/harness.hpp"
#include "pfgnet/model.hpp"
#include "pfgnet/spectral.hpp"

using namespace pfgnet;

namespace {

constexpr int kInputError = 2;
constexpr int kInternalError = 1;

std::ofstream open_text(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

double parse_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw ConfigError("bad number \"" + text + "\" in " + what);
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, sep)) parts.push_back(part);
  return parts;
}

// exp:RATE | gauss:VAR[,gain=G] | kernel:FILE
spectral::SpectralModel parse_response(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ConfigError("response \"" + spec + "\" lacks a kind: prefix");
  const std::string kind = spec.substr(0, colon), rest = spec.substr(colon + 1);
  if (kind == "exp") return spectral::SpectralModel::exp_decay(parse_number(rest, spec));
  if (kind == "gauss") {
    const auto parts = split(rest, ',');
    if (parts.empty() || parts.size() > 2) throw ConfigError("expected gauss:VAR[,gain=G], got " + spec);
    double gain = 1.0;
    if (parts.size() == 2) {
      if (!parts[1].starts_with("gain=")) throw ConfigError("expected gain=G in " + spec);
      gain = parse_number(parts[1].substr(5), spec);
    }
    return spectral::SpectralModel::gaussian(parse_number(parts[0], spec), gain);
  }
  if (kind == "kernel") {
    // [k] or [1, k] is used for both directions; [2, k] holds h then v.
    const Tensor t = io::load_tensor(rest);
    std::size_t k = 0;
    Tensor h, v;
    if (t.rank() == 1 || (t.rank() == 2 && t.dim(0) == 1)) {
      k = t.dim(t.rank() - 1);
      h = v = t.reshaped({1, k});
    } else if (t.rank() == 2 && t.dim(0) == 2) {
      k = t.dim(1);
      h = Tensor({1, k}, std::vector<double>(t.data().begin(), t.data().begin() + k));
      v = Tensor({1, k}, std::vector<double>(t.data().begin() + k, t.data().end()));
    } else {
      throw ConfigError("kernel file must hold [k], [1, k] or [2, k], got " + shape_string(t.dims()));
    }
    return spectral::SpectralModel::empirical(SepKernel{h.cast(DType::float64), v.cast(DType::float64)});
  }
  throw ConfigError("unknown response kind \"" + kind + "\" (exp, gauss, kernel)");
}

// flat | band:LO,HI
spectral::FreqResponse parse_signal(const std::string& spec, std::size_t n) {
  if (spec == "flat") return spectral::SpectralModel::custom([](double) { return 1.0; }).sample(n);
  if (spec.starts_with("band:")) {
    const auto parts = split(spec.substr(5), ',');
    if (parts.size() != 2) throw ConfigError("expected band:LO,HI, got " + spec);
    const double lo = parse_number(parts[0], spec), hi = parse_number(parts[1], spec);
    if (!(lo < hi)) throw ConfigError("band needs LO < HI, got " + spec);
    return spectral::SpectralModel::custom([lo, hi](double r) { return r >= lo && r <= hi ? 1.0 : 0.0; })
        .sample(n);
  }
  throw ConfigError("unknown signal spectrum \"" + spec + "\" (flat, band:LO,HI)");
}

spectral::QuadCoeffs parse_coeffs(const std::string& spec) {
  const auto parts = split(spec, ',');
  if (parts.size() != 6 && parts.size() != 7) throw ConfigError("expected A,B,C,At,Bt,Ct[,sigma2]");
  std::vector<double> v;
  for (const auto& p : parts) v.push_back(parse_number(p, "--coeffs"));
  spectral::QuadCoeffs q{v[0], v[1], v[2], v[3], v[4], v[5], parts.size() == 7 ? v[6] : 1.0};
  if (!(q.sigma2 > 0)) throw ConfigError("sigma2 must be positive");
  return q;
}

struct AnalyzeArgs {
  std::string hl, hs, ps = "flat", out_csv, coeffs;
  double beta = 0.75, sigma2 = 1.0;
  std::size_t samples = spectral::kDefaultSamples, points = 201;
};

spectral::QuadCoeffs coeffs_from(const AnalyzeArgs& a) {
  if (!a.coeffs.empty()) return parse_coeffs(a.coeffs);
  if (a.hl.empty() || a.hs.empty()) throw ConfigError("need --hl and --hs, or --coeffs");
  return spectral::quad_coeffs(parse_response(a.hl).sample(a.samples), parse_response(a.hs).sample(a.samples),
                               parse_signal(a.ps, a.samples), a.sigma2);
}

int run_ring(const AnalyzeArgs& a) {
  if (a.hl.empty() || a.hs.empty()) throw ConfigError("ring needs --hl and --hs");
  auto hl = parse_response(a.hl).sample(a.samples), hs = parse_response(a.hs).sample(a.samples);
  auto h = spectral::composite(hl, hs, a.beta);
  const auto ring = spectral::find_ring(h);
  if (ring) {
    std::printf("ring %.10f %.10f%s\n", ring->r1, ring->r2, ring->multiple ? " multiple" : "");
  } else {
    std::printf("none\n");
  }
  if (!a.out_csv.empty()) {
    auto out = open_text(a.out_csv);
    spectral::write_response_csv(out, hl, hs, h, ring);
  }
  return 0;
}

int run_sweep(const AnalyzeArgs& a) {
  const auto q = coeffs_from(a);
  if (a.out_csv.empty()) {
    spectral::write_snr_csv(std::cout, q, a.points);
  } else {
    auto out = open_text(a.out_csv);
    spectral::write_snr_csv(out, q, a.points);
  }
  return 0;
}

int run_beta_star(const AnalyzeArgs& a) {
  const auto q = coeffs_from(a);
  const auto best = spectral::optimal_beta(q);
  std::printf("beta_star %.10f\nsnr_star %.12g\nsnr_zero %.12g\ngrid_agrees %d\n", best.beta, best.snr,
              spectral::snr(0.0, q), best.grid_agrees ? 1 : 0);
  if (auto adv = spectral::snr_advantage(q)) {
    std::printf("advantage_beta %.10f\n", *adv);
  } else {
    std::printf("advantage_beta none\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pfgnet: peripheral frequency gating for spatiotemporal prediction"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "write bouncing-square sequences as a PFGT tensor");
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  std::size_t gen_num = 64, gen_frames = 4, gen_size = 8, gen_objects = 1;
  gen->add_option("--out", gen_out, "output PFGT path")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--num", gen_num, "number of sequences");
  gen->add_option("--frames", gen_frames, "frames per sequence");
  gen->add_option("--size", gen_size, "frame height and width");
  gen->add_option("--objects", gen_objects, "squares per sequence");

  auto* train = app.add_subcommand("train", "train from a config file");
  std::string train_config, train_data, train_out, train_history;
  train->add_option("--config", train_config, "key=value config file")->required();
  train->add_option("--data", train_data, "PFGT sequences [N,T,C,H,W]")->required();
  train->add_option("--out", train_out, "checkpoint path")->required();
  train->add_option("--history", train_history, "history CSV path (default: <out>.history.csv)");

  auto* eval = app.add_subcommand("eval", "score a checkpoint on a dataset");
  std::string eval_ckpt, eval_data, eval_csv;
  eval->add_option("--ckpt", eval_ckpt)->required();
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--out-csv", eval_csv, "metrics CSV path");

  auto* predict = app.add_subcommand("predict", "predict t_out frames per input sequence");
  std::string pred_ckpt, pred_in, pred_out;
  predict->add_option("--ckpt", pred_ckpt)->required();
  predict->add_option("--input", pred_in, "PFGT sequences with at least t_in frames")->required();
  predict->add_option("--output", pred_out, "PFGT [N,t_out,c_out,H,W]")->required();

  auto* analyze = app.add_subcommand("analyze", "frequency-domain analysis of center suppression");
  analyze->require_subcommand(1);
  AnalyzeArgs aa;
  auto spectral_options = [&](CLI::App* sub) {
    sub->add_option("--hl", aa.hl, "peripheral response: exp:RATE | gauss:VAR[,gain=G] | kernel:FILE");
    sub->add_option("--hs", aa.hs, "center response, same grammar");
    sub->add_option("--samples", aa.samples, "radial grid samples (>= 64)");
    sub->add_option("--out-csv", aa.out_csv, "CSV output path");
  };
  auto* ring = analyze->add_subcommand("ring", "find the ring pass band of H_L - beta H_S");
  spectral_options(ring);
  ring->add_option("--beta", aa.beta, "suppression coefficient");
  auto* sweep = analyze->add_subcommand("snr-sweep", "SNR(beta) over (-1, 1)");
  auto* star = analyze->add_subcommand("beta-star", "SNR-optimal beta in (-1, 1)");
  for (auto* sub : {sweep, star}) {
    spectral_options(sub);
    sub->add_option("--ps", aa.ps, "signal power spectrum: flat | band:LO,HI");
    sub->add_option("--sigma2", aa.sigma2, "white noise power");
    sub->add_option("--coeffs", aa.coeffs, "A,B,C,At,Bt,Ct[,sigma2] instead of responses");
  }
  sweep->add_option("--points", aa.points, "sweep points");

  auto* inspect = app.add_subcommand("inspect", "look inside a model");
  inspect->require_subcommand(1);
  auto* gates = inspect->add_subcommand("gates", "dump fusion weights of one block");
  std::string gates_ckpt, gates_input, gates_prefix;
  std::size_t gates_block = 0;
  gates->add_option("--ckpt", gates_ckpt)->required();
  gates->add_option("--input", gates_input, "PFGT sequence [T,C,H,W] or [N,T,C,H,W]")->required();
  gates->add_option("--block", gates_block, "block index");
  gates->add_option("--out-prefix", gates_prefix, "writes <prefix>.pgm and <prefix>_alpha.csv")->required();
  auto* betas = inspect->add_subcommand("betas", "dump suppression coefficients");
  std::string betas_ckpt, betas_csv;
  betas->add_option("--ckpt", betas_ckpt)->required();
  betas->add_option("--out-csv", betas_csv)->required();
  auto* params = inspect->add_subcommand("params", "parameter and FLOP counts of a config");
  std::string params_config;
  params->add_option("--config", params_config)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (gen->parsed()) {
      auto data = bouncing::generate(gen_seed, gen_num, gen_frames, gen_size, gen_size, gen_objects);
      io::save_tensor(gen_out, data);
      std::printf("wrote %s %s\n", gen_out.c_str(), shape_string(data.dims()).c_str());
    } else if (train->parsed()) {
      const auto cfg = load_config(train_config);
      if (cfg.lr == 0) std::fprintf(stderr, "warning: lr=0, the checkpoint will equal the initialisation\n");
      const auto data = io::load_tensor(train_data);
      auto result = harness::train(cfg, data, [](std::size_t epoch, double loss) {
        std::printf("epoch %zu loss %.9g\n", epoch, loss);
        std::fflush(stdout);
      });
      io::save_checkpoint(train_out, {cfg, result.params});
      auto history = open_text(train_history.empty() ? train_out + ".history.csv" : train_history);
      harness::write_history_csv(history, result.history);
      std::printf("final loss %.9g\n", result.history.back());
    } else if (eval->parsed()) {
      const auto report = harness::evaluate(io::load_checkpoint(eval_ckpt), io::load_tensor(eval_data));
      harness::write_report_csv(std::cout, report);
      if (!eval_csv.empty()) {
        auto out = open_text(eval_csv);
        harness::write_report_csv(out, report);
      }
    } else if (predict->parsed()) {
      const auto ckpt = io::load_checkpoint(pred_ckpt);
      const auto pred = harness::predict_dataset(ckpt.config.model, ckpt.params, io::load_tensor(pred_in));
      io::save_tensor(pred_out, pred);
      std::printf("wrote %s %s\n", pred_out.c_str(), shape_string(pred.dims()).c_str());
    } else if (analyze->parsed()) {
      if (ring->parsed()) return run_ring(aa);
      if (sweep->parsed()) return run_sweep(aa);
      return run_beta_star(aa);
    } else if (gates->parsed()) {
      const auto ckpt = io::load_checkpoint(gates_ckpt);
      const auto dump = harness::dump_gates(ckpt, io::load_tensor(gates_input), gates_block);
      std::ofstream pgm(gates_prefix + ".pgm", std::ios::binary | std::ios::trunc);
      if (!pgm) throw IoError("cannot open " + gates_prefix + ".pgm for writing");
      harness::write_pgm(pgm, dump.gray, dump.alpha.dim(1), dump.alpha.dim(2));
      auto csv = open_text(gates_prefix + "_alpha.csv");
      harness::write_alpha_csv(csv, dump.alpha);
      std::printf("wrote %s.pgm %zux%zu\n", gates_prefix.c_str(), dump.alpha.dim(2), dump.alpha.dim(1));
    } else if (betas->parsed()) {
      const auto ckpt = io::load_checkpoint(betas_ckpt);
      auto out = open_text(betas_csv);
      harness::write_betas_csv(out, ckpt.config.model, ckpt.params);
    } else if (params->parsed()) {
      const auto cfg = load_config(params_config);
      std::printf("params %llu\nflops %llu\n", static_cast<unsigned long long>(model::count_params(cfg.model)),
                  static_cast<unsigned long long>(model::count_flops(cfg.model)));
      for (auto k : cfg.model.block.kernels) {
        const auto c = model::scale_cost(k);
        std::printf("kernel %zu separable %zu dense %zu ratio %.4g\n", c.kernel, c.separable, c.dense,
                    static_cast<double>(c.dense) / static_cast<double>(c.separable));
      }
    }
    return 0;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kInputError;
  } catch (const InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInputError;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kInputError;
  } catch (const DegeneracyError& e) {
    std::fprintf(stderr, "degenerate input: %s\n", e.what());
    return kInputError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInternalError;
  }
}
