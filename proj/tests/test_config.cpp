#include <string>

#include "doctest.h"
#include "pfgnet/config.hpp"
#include "pfgnet/errors.hpp"

using namespace pfgnet;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("parse a full file") {
  auto c = parse_config(
      "# micro run\n"
      "t_in=2\nt_out = 2\nheight=8\nwidth=8\nn_s=2\nn_t=1\n"
      "kernels=3,5   # two scales\n"
      "msinit_kernels=3,5\nlatent_c=2\nexpansion=4\ncenter_size=5\n"
      "fusion=mean\nbeta_mode=fixed:0.25\ngate_act=sigmoid\ncues=f1,f3\n"
      "drop_path=0.1\ndtype=float64\nepochs=3\nlr=0.002\nbatch=4\nseed=9\n");
  CHECK(c.model.t_in == 2);
  CHECK(c.model.block.kernels == std::vector<std::size_t>{3, 5});
  CHECK(c.model.block.center_size == 5);
  CHECK(c.model.block.fusion == Fusion::mean);
  CHECK_FALSE(c.model.block.beta_learnable);
  CHECK(c.model.block.beta_fixed == 0.25);
  CHECK(c.model.block.gate_act == GateAct::sigmoid);
  CHECK(c.model.block.cues == CueMask{true, false, true});
  CHECK(c.model.dtype == DType::float64);
  CHECK(c.lr == 0.002);
  CHECK(c.seed == 9);

  auto again = parse_config(to_text(c));
  CHECK(to_text(again) == to_text(c));
}

TEST_CASE("errors carry line numbers") {
  CHECK(error_of("t_in=2\nbogus=1\n").starts_with("line 2:"));
  CHECK(error_of("\n\nt_in\n").starts_with("line 3:"));
  CHECK(error_of("t_in=2\nt_in=3\n").starts_with("line 2:"));
  CHECK(error_of("kernels=3,4\n").find("odd") != std::string::npos);
  CHECK(error_of("fusion=max\n").starts_with("line 1:"));
  CHECK(error_of("lr=abc\n").starts_with("line 1:"));
  CHECK_FALSE(error_of("center_size=7\n").empty());
  CHECK_FALSE(error_of("drop_path=1\n").empty());
  CHECK_FALSE(error_of("height=30\nwidth=32\nn_s=4\n").empty());
  CHECK_FALSE(error_of("latent_c=3\n").empty());
  CHECK_FALSE(error_of("t_in=2\nlatent_c=4\n").empty());  // 8 channels over 3 branches
  CHECK_FALSE(error_of("cues=\n").empty());
}

TEST_CASE("automatic latent width") {
  auto small = parse_config("t_in=2\nheight=8\nwidth=8\nn_s=2\n");
  CHECK(small.model.latent_c == 18);
  auto big = parse_config("t_in=10\n");
  CHECK(big.model.latent_c == 36);
  auto four = parse_config("t_in=4\nheight=32\nwidth=32\nn_s=2\nc_in=2\nc_out=2\n");
  CHECK(four.model.latent_c == 18);
  CHECK(four.model.packed_width() % 3 == 0);
}

TEST_CASE("defaults follow the large-kernel set") {
  TrainConfig c;
  CHECK(c.model.block.kernels == std::vector<std::size_t>{9, 15, 31});
  CHECK(c.model.msinit_kernels == std::vector<std::size_t>{3, 5, 7});
  CHECK(c.model.block.expansion == 4);
}
