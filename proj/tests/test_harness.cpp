#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pfgnet/bouncing.hpp"
#include "pfgnet/container.hpp"
#include "pfgnet/errors.hpp"
#include "pfgnet/harness.hpp"
#include "pfgnet/metrics.hpp"
#include "pfgnet/model.hpp"
#include "support.hpp"

using namespace pfgnet;
using testing::random_tensor;

namespace {

TrainConfig micro_train() {
  TrainConfig c;
  auto& m = c.model;
  m.t_in = m.t_out = 2;
  m.height = m.width = 8;
  m.latent_c = 2;
  m.n_s = 2;
  m.n_t = 1;
  m.msinit_kernels = {3, 5};
  m.block.kernels = {3, 5};
  c.epochs = 2;
  c.batch = 4;
  c.lr = 1e-2;
  c.seed = 3;
  return c;
}

std::string bytes_of(const Tensor& t) {
  std::ostringstream out;
  io::write_tensor(out, t);
  return out.str();
}

std::string bytes_of(const io::Checkpoint& c) {
  std::ostringstream out;
  io::write_checkpoint(out, c);
  return out.str();
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("pfgnet_test_" + name);
}

}  // namespace

TEST_CASE("tensor container layout") {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6.5}, DType::float32);
  const auto b = bytes_of(t);
  REQUIRE(b.size() == 4 + 1 + 1 + 2 + 4 + 2 * 8 + 6 * 4);
  CHECK(b.substr(0, 4) == "PFGT");
  CHECK(b[4] == 1);
  CHECK(b[5] == 0);
  CHECK(b[6] == 0);
  CHECK(b[7] == 0);
  CHECK(static_cast<unsigned char>(b[8]) == 2);  // ndim, little-endian
  CHECK(b[9] == 0);
  CHECK(static_cast<unsigned char>(b[12]) == 2);  // dims[0]
  CHECK(static_cast<unsigned char>(b[20]) == 3);  // dims[1]
  // 1.0f = 0x3f800000, stored least significant byte first.
  CHECK(static_cast<unsigned char>(b[28]) == 0x00);
  CHECK(static_cast<unsigned char>(b[31]) == 0x3f);
  CHECK(bytes_of(t.cast(DType::float64))[5] == 1);
}

TEST_CASE("tensor container round trip") {
  for (auto dtype : {DType::float32, DType::float64}) {
    for (std::size_t rank = 1; rank <= 5; ++rank) {
      Shape dims(rank, 2);
      dims[0] = 3;
      auto t = random_tensor(dims, 10 + rank, -5, 5, dtype);
      t[0] = -0.0;
      t[1] = 1e-310;  // subnormal in float64, flushes when settled to float32
      t.settle();
      std::istringstream in(bytes_of(t));
      auto back = io::read_tensor(in);
      CHECK(back.identical(t));
      CHECK(back.dtype() == dtype);
      CHECK(bytes_of(back) == bytes_of(t));
      CHECK(std::signbit(back[0]));
    }
  }
  const auto path = temp_path("t.pfgt");
  auto t = random_tensor({2, 2, 1, 3, 3}, 4, 0, 1, DType::float32);
  io::save_tensor(path, t);
  CHECK(io::load_tensor(path).identical(t));
  std::filesystem::remove(path);
}

TEST_CASE("tensor container rejects malformed input") {
  const auto good = bytes_of(Tensor({4}, {1, 2, 3, 4}));
  auto reject = [](std::string bytes) {
    std::istringstream in(bytes);
    CHECK_THROWS_AS(io::read_tensor(in), IoError);
  };
  auto bad = good;
  bad[0] = 'X';
  reject(bad);
  bad = good;
  bad[4] = 2;  // version
  reject(bad);
  bad = good;
  bad[5] = 7;  // dtype code
  reject(bad);
  bad = good;
  bad[6] = 1;  // reserved
  reject(bad);
  bad = good;
  bad[8] = 17;  // rank too large
  reject(bad);
  reject(good.substr(0, good.size() - 1));  // payload truncated
  reject(good.substr(0, 10));
  bad = good;
  for (int i = 12; i < 20; ++i) bad[i] = static_cast<char>(0xff);  // absurd dims, no allocation
  reject(bad);
  std::istringstream text_in([] {
    std::ostringstream o;
    io::write_bytes(o, "abc");
    return o.str();
  }());
  CHECK_THROWS_AS(io::read_tensor(text_in), IoError);
  CHECK_THROWS_AS(io::load_tensor("/nonexistent/dir/x.pfgt"), IoError);
}

TEST_CASE("checkpoint round trip and validation") {
  auto cfg = micro_train();
  io::Checkpoint ckpt{cfg, model::init_params(cfg.model, 5)};
  const auto bytes = bytes_of(ckpt);
  CHECK(bytes.substr(0, 4) == "PFGC");
  CHECK(bytes[4] == 1);
  CHECK(bytes.substr(9, 2) == std::string("\x06\x00", 2));
  CHECK(bytes.substr(11, 6) == "config");

  std::istringstream in(bytes);
  auto back = io::read_checkpoint(in);
  CHECK(back.params.identical(ckpt.params));
  CHECK(to_text(back.config) == to_text(cfg));
  CHECK(bytes_of(back) == bytes);

  auto reject = [](std::string b) {
    std::istringstream s(b);
    CHECK_THROWS_AS(io::read_checkpoint(s), IoError);
  };
  auto bad = bytes;
  bad[3] = 'T';
  reject(bad);
  bad = bytes;
  bad[4] = 9;
  reject(bad);
  bad = bytes;
  bad[8] = 0x7f;  // entry count far beyond the data
  reject(bad);
  reject(bytes.substr(0, bytes.size() / 2));

  io::Checkpoint wrong{cfg, ckpt.params};
  wrong.params.set("extra", Tensor({1}));
  reject(bytes_of(wrong));
  io::Checkpoint shifted{cfg, ckpt.params};
  shifted.config.model.n_t = 2;
  reject(bytes_of(shifted));
}

TEST_CASE("bouncing squares") {
  SUBCASE("free motion") {
    bouncing::Square s{10, 10, 1, 0};
    bouncing::step(s, 56, 56);
    CHECK(s.x == 11);
    CHECK(s.y == 10);
    CHECK(s.vx == 1);
  }
  SUBCASE("reflection at a wall") {
    bouncing::Square s{0, 5, -1, 0};
    bouncing::step(s, 56, 56);
    CHECK(s.x == 1);
    CHECK(s.vx == 1);
    bouncing::Square t{55, 5, 2, -2};
    bouncing::step(t, 56, 56);
    CHECK(t.x == 55);
    CHECK(t.vx == -2);
    bouncing::Square u{1, 1, -2, -2};
    bouncing::step(u, 56, 56);
    CHECK(u.x == 1);
    CHECK(u.vy == 2);
  }
  SUBCASE("generated sequences") {
    auto a = bouncing::generate(7, 5, 6, 16, 16, 2);
    CHECK(a.dims() == Shape{5, 6, 1, 16, 16});
    CHECK(bytes_of(a) == bytes_of(bouncing::generate(7, 5, 6, 16, 16, 2)));
    CHECK(bytes_of(a) != bytes_of(bouncing::generate(8, 5, 6, 16, 16, 2)));
    for (double v : a.data()) CHECK((v == 0.0 || v == 1.0));
    // Frames follow the spawned squares and the step rule.
    auto s = bouncing::spawn(7, 3, 0, 16, 16), s2 = bouncing::spawn(7, 3, 1, 16, 16);
    for (long v : {s.vx, s.vy, s2.vx, s2.vy}) CHECK((v == -2 || v == -1 || v == 1 || v == 2));
    for (std::size_t t = 0; t < 6; ++t) {
      if (t) {
        bouncing::step(s, 14, 14);
        bouncing::step(s2, 14, 14);
      }
      Tensor frame({16, 16});
      std::vector<bouncing::Square> both{s, s2};
      bouncing::render(both, 2, frame);
      for (std::size_t i = 0; i < 256; ++i) CHECK(a[(3 * 6 + t) * 256 + i] == frame[i]);
    }
  }
  SUBCASE("overlap clamps at one") {
    Tensor frame({8, 8});
    std::vector<bouncing::Square> same{{2, 2, 1, 1}, {2, 2, 1, 1}};
    bouncing::render(same, 1, frame);
    CHECK(frame[2 * 8 + 2] == 1.0);
  }
  SUBCASE("degenerate geometry") {
    CHECK_THROWS_AS(bouncing::generate(0, 1, 2, 4, 4, 1), ConfigError);
    CHECK_THROWS_AS(bouncing::generate(0, 0, 2, 16, 16, 1), ConfigError);
    CHECK_THROWS_AS(bouncing::generate(0, 1, 2, 16, 1, 1), ConfigError);
  }
}

TEST_CASE("training") {
  auto cfg = micro_train();
  auto data = bouncing::generate(1, 8, 4, 8, 8, 1);

  SUBCASE("deterministic and finite") {
    auto a = harness::train(cfg, data);
    auto b = harness::train(cfg, data);
    REQUIRE(a.history.size() == 2);
    CHECK(a.history == b.history);
    CHECK(a.params.identical(b.params));
    for (double l : a.history) CHECK(std::isfinite(l));
    CHECK(bytes_of(io::Checkpoint{cfg, a.params}) == bytes_of(io::Checkpoint{cfg, b.params}));
    CHECK_FALSE(a.params.identical(model::init_params(cfg.model, cfg.seed)));
  }
  SUBCASE("zero learning rate leaves parameters unchanged") {
    cfg.lr = 0;
    cfg.epochs = 1;
    auto r = harness::train(cfg, data);
    CHECK(r.params.identical(model::init_params(cfg.model, cfg.seed)));
  }
  SUBCASE("epoch callback and history csv") {
    std::vector<std::size_t> seen;
    auto r = harness::train(cfg, data, [&](std::size_t e, double) { seen.push_back(e); });
    CHECK(seen == std::vector<std::size_t>{1, 2});
    std::ostringstream csv;
    harness::write_history_csv(csv, r.history);
    CHECK(csv.str().starts_with("epoch,loss\n1,"));
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(harness::train(cfg, bouncing::generate(1, 4, 3, 8, 8, 1)), InputError);
    CHECK_THROWS_AS(harness::train(cfg, bouncing::generate(1, 4, 4, 16, 16, 1)), InputError);
  }
  SUBCASE("non-finite data names the culprit") {
    auto poisoned = data;
    poisoned[5] = std::nan("");
    try {
      harness::train(cfg, poisoned);
      FAIL("expected a numeric error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
    }
  }
}

TEST_CASE("evaluation") {
  auto cfg = micro_train();
  auto data = bouncing::generate(2, 3, 4, 8, 8, 1);
  io::Checkpoint ckpt{cfg, model::init_params(cfg.model, 1)};

  SUBCASE("identity predictions") {
    auto gt = random_tensor({3, 2, 1, 8, 8}, 9, 0, 1);
    auto report = harness::score(cfg.model, gt, gt);
    REQUIRE(report.size() == 7);
    CHECK(report[0].first == "mse");
    CHECK(report[0].second == 0.0);
    CHECK(report[1].second == 0.0);
    CHECK(report[2].second == 0.0);
    CHECK(report[3].second == metrics::kPsnrCap);
    CHECK(report[4].second == 1.0);
    CHECK(report[5].second == static_cast<double>(model::count_params(cfg.model)));
    CHECK(report[6].second == static_cast<double>(model::count_flops(cfg.model)));
  }
  SUBCASE("agrees with direct metric calls") {
    auto report = harness::evaluate(ckpt, data);
    auto pred = harness::predict_dataset(cfg.model, ckpt.params, data);
    CHECK(pred.dims() == Shape{3, 2, 1, 8, 8});
    Tensor gt({3, 2, 1, 8, 8});
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t t = 0; t < 2; ++t)
        for (std::size_t i = 0; i < 64; ++i) gt[(n * 2 + t) * 64 + i] = data[(n * 4 + 2 + t) * 64 + i];
    CHECK(report[0].second == metrics::mse(pred, gt, false));
    CHECK(report[1].second == metrics::mse(pred, gt, true));
    CHECK(report[2].second == metrics::mae(pred, gt));
    CHECK(report[3].second == metrics::psnr(pred, gt));
    CHECK(report[4].second == metrics::ssim(pred, gt, 7));
    std::ostringstream csv;
    harness::write_report_csv(csv, report);
    const auto text = csv.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 8);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(harness::evaluate(ckpt, bouncing::generate(2, 3, 4, 16, 16, 1)), InputError);
  }
}

TEST_CASE("gate and beta dumps") {
  auto cfg = micro_train();
  io::Checkpoint ckpt{cfg, model::init_params(cfg.model, 1)};
  auto seq = bouncing::generate(4, 1, 2, 8, 8, 1);

  SUBCASE("zero gate gives a uniform map with ties on scale 0") {
    auto dump = harness::dump_gates(ckpt, seq, 0);
    CHECK(dump.alpha.dims() == Shape{2, 4, 4});
    for (double a : dump.alpha.data()) CHECK(a == 0.5);
    for (auto g : dump.gray) CHECK(g == 0);
  }
  SUBCASE("trained gates stay on the simplex") {
    testing::randomize(ckpt.params, 3);
    auto dump = harness::dump_gates(ckpt, seq.reshaped({2, 1, 8, 8}), 0);
    std::ostringstream csv;
    harness::write_alpha_csv(csv, dump.alpha);
    std::istringstream rows(csv.str());
    std::string line;
    std::getline(rows, line);
    CHECK(line == "y,x,alpha_0,alpha_1");
    int count = 0;
    while (std::getline(rows, line)) {
      std::istringstream cells(line);
      std::string cell;
      std::vector<double> v;
      while (std::getline(cells, cell, ',')) v.push_back(std::stod(cell));
      CHECK(std::abs(v[2] + v[3] - 1.0) < 1e-6);
      CHECK(dump.gray[count] == (v[3] > v[2] ? 255 : 0));
      ++count;
    }
    CHECK(count == 16);
    std::ostringstream pgm;
    harness::write_pgm(pgm, dump.gray, 4, 4);
    CHECK(pgm.str().starts_with("P5\n4 4\n255\n"));
    CHECK(pgm.str().size() == 11 + 16);
  }
  SUBCASE("bad block index") { CHECK_THROWS_AS(harness::dump_gates(ckpt, seq, 1), InputError); }
  SUBCASE("betas") {
    testing::randomize(ckpt.params, 4, -4, 4);
    std::ostringstream csv;
    harness::write_betas_csv(csv, cfg.model, ckpt.params);
    std::istringstream rows(csv.str());
    std::string line;
    std::getline(rows, line);
    CHECK(line == "block,scale,channel,value");
    int count = 0;
    while (std::getline(rows, line)) {
      const double v = std::stod(line.substr(line.rfind(',') + 1));
      CHECK(v > -1.0);
      CHECK(v < 1.0);
      ++count;
    }
    CHECK(count == 2 * 4);
  }
}
