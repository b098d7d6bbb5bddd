#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pfgnet/tensor.hpp"

/// Synthetic moving-square sequences, a small stand-in for Moving MNIST.
namespace pfgnet::bouncing {

struct Square {
  long x, y;    // top-left corner
  long vx, vy;  // pixels per frame, each in {-2, -1, 1, 2}
};

/// Advances one frame. A step past a wall is folded back inside and the
/// velocity component flips, so a square at x = 0 moving left lands at x = 1.
void step(Square& s, long max_x, long max_y);

/// Square side for an h x w frame: h / 8.
std::size_t side(std::size_t h);

/// Initial square j of sequence n, drawn from the stream keyed by (seed, n, j).
Square spawn(std::uint64_t seed, std::size_t n, std::size_t j, std::size_t h, std::size_t w);

/// Adds each square as 1.0 on a 0.0 background, clamping overlaps at 1.
void render(std::span<const Square> squares, std::size_t side, Tensor& frame);

/// [num, frames, 1, h, w] float32 sequences. Throws ConfigError on
/// degenerate geometry (square side 0 or not smaller than the frame) or
/// zero counts.
Tensor generate(std::uint64_t seed, std::size_t num, std::size_t frames, std::size_t h,
                std::size_t w, std::size_t objects);

}  // namespace pfgnet::bouncing
