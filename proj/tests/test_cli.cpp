// Runs the pfgnet binary end to end through the shell.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "pfgnet/container.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Workdir {
 public:
  Workdir() : dir_(fs::temp_directory_path() / ("pfgnet_cli_" + std::to_string(::getpid()))) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workdir() { fs::remove_all(dir_); }
  fs::path operator/(const std::string& name) const { return dir_ / name; }

  Run run(const std::string& args) const {
    const auto out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = "cd '" + dir_.string() + "' && '" PFGNET_CLI_PATH "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
  }

 private:
  fs::path dir_;
};

const char* kMicroConfig =
    "t_in=2\nt_out=2\nheight=8\nwidth=8\nn_s=2\nn_t=1\nkernels=3,5\nmsinit_kernels=3,5\n"
    "epochs=2\nbatch=8\nseed=5\n";

}  // namespace

TEST_CASE("gen-data, train, eval, predict and inspect chain together") {
  Workdir w;
  w.write("c.txt", kMicroConfig);
  REQUIRE(w.run("gen-data --out d.pfgt --seed 3 --num 16 --frames 4 --size 8").code == 0);
  const auto data = pfgnet::io::load_tensor((w / "d.pfgt").string());
  CHECK(data.dims() == pfgnet::Shape{16, 4, 1, 8, 8});

  auto train = w.run("train --config c.txt --data d.pfgt --out m.ckpt");
  REQUIRE(train.code == 0);
  CHECK(train.out.find("epoch 2 loss") != std::string::npos);
  CHECK(train.out.find("final loss") != std::string::npos);
  CHECK(slurp(w / "m.ckpt.history.csv").starts_with("epoch,loss\n1,"));

  // Same seed, same bytes.
  REQUIRE(w.run("train --config c.txt --data d.pfgt --out m2.ckpt --history h2.csv").code == 0);
  CHECK(slurp(w / "m.ckpt") == slurp(w / "m2.ckpt"));

  auto eval = w.run("eval --ckpt m.ckpt --data d.pfgt --out-csv r.csv");
  REQUIRE(eval.code == 0);
  const auto report = slurp(w / "r.csv");
  CHECK(report == eval.out);
  for (const char* key : {"mse,", "mse_normalized,", "mae,", "psnr,", "ssim,", "params,", "flops,"}) {
    CHECK(report.find(std::string("\n") + key) != std::string::npos);
  }

  REQUIRE(w.run("predict --ckpt m.ckpt --input d.pfgt --output p.pfgt").code == 0);
  CHECK(pfgnet::io::load_tensor((w / "p.pfgt").string()).dims() == pfgnet::Shape{16, 2, 1, 8, 8});

  REQUIRE(w.run("inspect gates --ckpt m.ckpt --input d.pfgt --block 0 --out-prefix g").code == 0);
  CHECK(slurp(w / "g.pgm").starts_with("P5\n4 4\n255\n"));
  CHECK(slurp(w / "g_alpha.csv").starts_with("y,x,alpha_0,alpha_1\n"));
  CHECK(w.run("inspect gates --ckpt m.ckpt --input d.pfgt --block 9 --out-prefix g").code == 2);

  REQUIRE(w.run("inspect betas --ckpt m.ckpt --out-csv b.csv").code == 0);
  CHECK(slurp(w / "b.csv").starts_with("block,scale,channel,value\n"));
}

TEST_CASE("inspect params reports counts and the separable saving") {
  Workdir w;
  w.write("c.txt", kMicroConfig);
  auto r = w.run("inspect params --config c.txt");
  REQUIRE(r.code == 0);
  CHECK(r.out.starts_with("params "));
  CHECK(r.out.find("kernel 5 separable 10 dense 25 ratio 2.5") != std::string::npos);
}

TEST_CASE("lr=0 warns on stderr") {
  Workdir w;
  w.write("c.txt", std::string(kMicroConfig) + "lr=0\n");
  REQUIRE(w.run("gen-data --out d.pfgt --num 8 --frames 4 --size 8").code == 0);
  auto r = w.run("train --config c.txt --data d.pfgt --out m.ckpt");
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
}

TEST_CASE("analyze subcommands") {
  Workdir w;
  SUBCASE("ring found and written") {
    auto r = w.run("analyze ring --hl gauss:1 --hs exp:0.5 --beta 1.1 --out-csv ring.csv");
    REQUIRE(r.code == 0);
    double r1 = 0, r2 = 0;
    std::string tag;
    std::istringstream(r.out) >> tag >> r1 >> r2;
    CHECK(tag == "ring");
    // Crossings of exp(-r^2/2) = 1.1 exp(-r/2), from an external root finder.
    CHECK(r1 == doctest::Approx(0.25632061968367076).epsilon(1e-8));
    CHECK(r2 == doctest::Approx(0.7436793803162838).epsilon(1e-8));
    CHECK(slurp(w / "ring.csv").starts_with("r,H_L,H_S,H_beta,ring_flag\n"));
  }
  SUBCASE("no ring") {
    auto r = w.run("analyze ring --hl exp:0.6 --hs gauss:2.5,gain=1.6 --beta 0.75");
    CHECK(r.code == 0);
    CHECK(r.out == "none\n");
  }
  SUBCASE("beta-star on explicit coefficients") {
    auto r = w.run("analyze beta-star --coeffs 2,1,1,1,0,1");
    REQUIRE(r.code == 0);
    CHECK(r.out.find("beta_star -0.6180339887") != std::string::npos);
    CHECK(r.out.find("grid_agrees 1") != std::string::npos);
  }
  SUBCASE("snr-sweep") {
    auto r = w.run("analyze snr-sweep --coeffs 2,1,1,1,0,1 --points 5");
    REQUIRE(r.code == 0);
    CHECK(r.out.starts_with("beta,snr\n"));
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 6);
  }
  SUBCASE("flat signal spectrum with proportional noise is degenerate") {
    CHECK(w.run("analyze beta-star --hl exp:0.6 --hs gauss:2.5").code == 2);
  }
  SUBCASE("bad response grammar") {
    auto r = w.run("analyze ring --hl cosine:1 --hs exp:1");
    CHECK(r.code == 2);
    CHECK(r.err.find("unknown response kind") != std::string::npos);
  }
}

TEST_CASE("usage and input errors exit 2") {
  Workdir w;
  CHECK(w.run("").code == 2);
  CHECK(w.run("no-such-command").code == 2);
  CHECK(w.run("train --config missing.txt --data x --out y").code == 2);
  w.write("bad.txt", "epochs=1\nbogus=3\n");
  auto r = w.run("inspect params --config bad.txt");
  CHECK(r.code == 2);
  CHECK(r.err.find("line 2") != std::string::npos);
  w.write("c.txt", kMicroConfig);
  REQUIRE(w.run("gen-data --out d.pfgt --num 4 --frames 3 --size 8").code == 0);
  CHECK(w.run("train --config c.txt --data d.pfgt --out m.ckpt").code == 2);  // too few frames
}
