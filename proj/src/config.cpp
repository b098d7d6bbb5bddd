#include "pfgnet/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "pfgnet/errors.hpp"

namespace pfgnet {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_commas(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

std::size_t parse_size(std::string_view v) {
  std::size_t out = 0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size() || v.empty()) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

double parse_double(std::string_view v) {
  double out = 0.0;
  auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || end != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError("expected a finite number, got '" + std::string(v) + "'");
  }
  return out;
}

std::vector<std::size_t> parse_size_list(std::string_view v) {
  std::vector<std::size_t> out;
  for (auto item : split_commas(v)) out.push_back(parse_size(item));
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

std::string join(const std::vector<std::size_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(xs[i]);
  }
  return out;
}

using Setter = std::function<void(TrainConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table{
      {"t_in", [](TrainConfig& c, std::string_view v) { c.model.t_in = parse_size(v); }},
      {"t_out", [](TrainConfig& c, std::string_view v) { c.model.t_out = parse_size(v); }},
      {"c_in", [](TrainConfig& c, std::string_view v) { c.model.c_in = parse_size(v); }},
      {"c_out", [](TrainConfig& c, std::string_view v) { c.model.c_out = parse_size(v); }},
      {"height", [](TrainConfig& c, std::string_view v) { c.model.height = parse_size(v); }},
      {"width", [](TrainConfig& c, std::string_view v) { c.model.width = parse_size(v); }},
      {"latent_c", [](TrainConfig& c, std::string_view v) { c.model.latent_c = parse_size(v); }},
      {"n_s", [](TrainConfig& c, std::string_view v) { c.model.n_s = parse_size(v); }},
      {"n_t", [](TrainConfig& c, std::string_view v) { c.model.n_t = parse_size(v); }},
      {"kernels", [](TrainConfig& c, std::string_view v) { c.model.block.kernels = parse_size_list(v); }},
      {"msinit_kernels",
       [](TrainConfig& c, std::string_view v) { c.model.msinit_kernels = parse_size_list(v); }},
      {"expansion", [](TrainConfig& c, std::string_view v) { c.model.block.expansion = parse_size(v); }},
      {"center_size",
       [](TrainConfig& c, std::string_view v) { c.model.block.center_size = parse_size(v); }},
      {"fusion",
       [](TrainConfig& c, std::string_view v) {
         if (v == "softmax") c.model.block.fusion = Fusion::softmax;
         else if (v == "mean") c.model.block.fusion = Fusion::mean;
         else throw ConfigError("fusion must be softmax or mean");
       }},
      {"beta_mode",
       [](TrainConfig& c, std::string_view v) {
         if (v == "learnable") {
           c.model.block.beta_learnable = true;
           c.model.block.beta_fixed = 0.0;
         } else if (v.starts_with("fixed:")) {
           c.model.block.beta_learnable = false;
           c.model.block.beta_fixed = parse_double(v.substr(6));
         } else {
           throw ConfigError("beta_mode must be learnable or fixed:VALUE");
         }
       }},
      {"gate_act",
       [](TrainConfig& c, std::string_view v) {
         if (v == "tanh") c.model.block.gate_act = GateAct::tanh;
         else if (v == "sigmoid") c.model.block.gate_act = GateAct::sigmoid;
         else throw ConfigError("gate_act must be tanh or sigmoid");
       }},
      {"cues",
       [](TrainConfig& c, std::string_view v) {
         CueMask m{false, false, false};
         for (auto item : split_commas(v)) {
           if (item == "f1") m.gradient = true;
           else if (item == "f2") m.curvature = true;
           else if (item == "f3") m.variance = true;
           else throw ConfigError("cues must be a comma list of f1, f2, f3");
         }
         c.model.block.cues = m;
       }},
      {"drop_path", [](TrainConfig& c, std::string_view v) { c.model.block.drop_path = parse_double(v); }},
      {"dtype",
       [](TrainConfig& c, std::string_view v) {
         if (v == "float32") c.model.dtype = DType::float32;
         else if (v == "float64") c.model.dtype = DType::float64;
         else throw ConfigError("dtype must be float32 or float64");
       }},
      {"epochs", [](TrainConfig& c, std::string_view v) { c.epochs = parse_size(v); }},
      {"lr", [](TrainConfig& c, std::string_view v) { c.lr = parse_double(v); }},
      {"batch", [](TrainConfig& c, std::string_view v) { c.batch = parse_size(v); }},
      {"seed", [](TrainConfig& c, std::string_view v) { c.seed = parse_size(v); }},
  };
  return table;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void BlockConfig::validate() const {
  require(!kernels.empty(), "kernels: at least one scale is required");
  std::set<std::size_t> seen;
  for (auto k : kernels) {
    require(k % 2 == 1, "kernels: sizes must be odd, got " + std::to_string(k));
    require(seen.insert(k).second, "kernels: duplicate size " + std::to_string(k));
  }
  require(center_size == 3 || center_size == 5, "center_size must be 3 or 5");
  require(expansion >= 1, "expansion must be at least 1");
  require(cues.any(), "cues: at least one cue is required");
  require(drop_path >= 0.0 && drop_path < 1.0, "drop_path must lie in [0, 1)");
}

void ModelConfig::resolve() {
  if (latent_c != 0 || msinit_kernels.empty() || t_in == 0) return;
  const std::size_t m = msinit_kernels.size();
  std::size_t c = (height <= 32 && width <= 32) ? 16 : 32;
  while (c % 2 != 0 || (t_in * c) % m != 0) ++c;
  latent_c = c;
}

void ModelConfig::validate() const {
  require(t_in >= 1 && t_out >= 1, "t_in and t_out must be at least 1");
  require(c_in >= 1 && c_out >= 1, "c_in and c_out must be at least 1");
  require(n_s >= 1, "n_s must be at least 1");
  require(n_s <= 16, "n_s is unreasonably large");
  require(height >= 1 && width >= 1, "height and width must be positive");
  require(height % downsample() == 0 && width % downsample() == 0,
          "height and width must be divisible by the encoder downsample factor " +
              std::to_string(downsample()));
  require(latent_c >= 2 && latent_c % 2 == 0,
          "latent_c must be a positive even number (two normalization groups)");
  require(!msinit_kernels.empty(), "msinit_kernels: at least one branch is required");
  for (std::size_t i = 0; i < msinit_kernels.size(); ++i) {
    require(msinit_kernels[i] % 2 == 1, "msinit_kernels: sizes must be odd");
    require(i == 0 || msinit_kernels[i] > msinit_kernels[i - 1],
            "msinit_kernels: sizes must be strictly increasing");
  }
  require(packed_width() % msinit_kernels.size() == 0,
          "packed width t_in*latent_c = " + std::to_string(packed_width()) +
              " is not divisible by the " + std::to_string(msinit_kernels.size()) +
              " multi-scale init branches");
  block.validate();
}

void TrainConfig::validate() const {
  model.validate();
  require(epochs >= 1, "epochs must be at least 1");
  require(batch >= 1, "batch must be at least 1");
  require(lr >= 0.0, "lr must be non-negative");
}

TrainConfig parse_config(std::string_view text) {
  TrainConfig config;
  std::set<std::string, std::less<>> given;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + "unknown key '" + std::string(key) + "'");
    if (!given.insert(std::string(key)).second) {
      throw ConfigError(where + "repeated key '" + std::string(key) + "'");
    }
    try {
      it->second(config, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + std::string(key) + ": " + e.what());
    }
  }
  config.model.resolve();
  config.validate();
  return config;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const TrainConfig& c) {
  const auto& m = c.model;
  const auto& b = m.block;
  std::ostringstream out;
  out << "t_in=" << m.t_in << '\n'
      << "t_out=" << m.t_out << '\n'
      << "c_in=" << m.c_in << '\n'
      << "c_out=" << m.c_out << '\n'
      << "height=" << m.height << '\n'
      << "width=" << m.width << '\n'
      << "latent_c=" << m.latent_c << '\n'
      << "n_s=" << m.n_s << '\n'
      << "n_t=" << m.n_t << '\n'
      << "kernels=" << join(b.kernels) << '\n'
      << "msinit_kernels=" << join(m.msinit_kernels) << '\n'
      << "expansion=" << b.expansion << '\n'
      << "center_size=" << b.center_size << '\n'
      << "fusion=" << (b.fusion == Fusion::softmax ? "softmax" : "mean") << '\n'
      << "beta_mode="
      << (b.beta_learnable ? std::string("learnable") : "fixed:" + format_double(b.beta_fixed))
      << '\n'
      << "gate_act=" << (b.gate_act == GateAct::tanh ? "tanh" : "sigmoid") << '\n';
  std::vector<std::string> cues;
  if (b.cues.gradient) cues.push_back("f1");
  if (b.cues.curvature) cues.push_back("f2");
  if (b.cues.variance) cues.push_back("f3");
  out << "cues=";
  for (std::size_t i = 0; i < cues.size(); ++i) out << (i ? "," : "") << cues[i];
  out << '\n'
      << "drop_path=" << format_double(b.drop_path) << '\n'
      << "dtype=" << dtype_name(m.dtype) << '\n'
      << "epochs=" << c.epochs << '\n'
      << "lr=" << format_double(c.lr) << '\n'
      << "batch=" << c.batch << '\n'
      << "seed=" << c.seed << '\n';
  return out.str();
}

}  // namespace pfgnet
