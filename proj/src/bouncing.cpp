#include "pfgnet/bouncing.hpp"

#include <algorithm>

#include "pfgnet/errors.hpp"
#include "pfgnet/rng.hpp"

namespace pfgnet::bouncing {

namespace {

void fold(long& p, long& v, long max) {
  p += v;
  while (p < 0 || p > max) {
    p = p < 0 ? -p : 2 * max - p;
    v = -v;
  }
}

long velocity(CounterRng& rng) {
  constexpr long kChoices[4] = {-2, -1, 1, 2};
  return kChoices[rng.below(4)];
}

}  // namespace

void step(Square& s, long max_x, long max_y) {
  fold(s.x, s.vx, max_x);
  fold(s.y, s.vy, max_y);
}

std::size_t side(std::size_t h) { return h / 8; }

Square spawn(std::uint64_t seed, std::size_t n, std::size_t j, std::size_t h, std::size_t w) {
  CounterRng rng(derive_key(seed, {n, j}));
  const std::size_t s = side(h);
  Square sq;
  sq.x = static_cast<long>(rng.below(w - s + 1));
  sq.y = static_cast<long>(rng.below(h - s + 1));
  sq.vx = velocity(rng);
  sq.vy = velocity(rng);
  return sq;
}

void render(std::span<const Square> squares, std::size_t s, Tensor& frame) {
  const std::size_t w = frame.dim(frame.rank() - 1);
  for (const auto& sq : squares) {
    for (std::size_t y = 0; y < s; ++y) {
      for (std::size_t x = 0; x < s; ++x) {
        auto& px = frame[(static_cast<std::size_t>(sq.y) + y) * w + static_cast<std::size_t>(sq.x) + x];
        px = std::min(1.0, px + 1.0);
      }
    }
  }
}

Tensor generate(std::uint64_t seed, std::size_t num, std::size_t frames, std::size_t h, std::size_t w,
                std::size_t objects) {
  if (num == 0 || frames == 0 || objects == 0) throw ConfigError("bouncing: counts must be positive");
  const std::size_t s = side(h);
  if (s == 0 || s >= h || s >= w) {
    throw ConfigError("bouncing: square side " + std::to_string(s) + " does not fit a " + std::to_string(h) +
                      "x" + std::to_string(w) + " frame");
  }
  const long max_x = static_cast<long>(w - s), max_y = static_cast<long>(h - s);
  Tensor out({num, frames, 1, h, w}, DType::float32);
  const std::size_t plane = h * w;
  for (std::size_t n = 0; n < num; ++n) {
    std::vector<Square> squares;
    for (std::size_t j = 0; j < objects; ++j) squares.push_back(spawn(seed, n, j, h, w));
    for (std::size_t t = 0; t < frames; ++t) {
      if (t > 0) {
        for (auto& sq : squares) step(sq, max_x, max_y);
      }
      Tensor frame({h, w});
      render(squares, s, frame);
      std::copy(frame.data().begin(), frame.data().end(), out.data().begin() + (n * frames + t) * plane);
    }
  }
  return out;
}

}  // namespace pfgnet::bouncing
