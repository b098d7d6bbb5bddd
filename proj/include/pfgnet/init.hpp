#pragma once

#include <cstdint>
#include <string_view>

#include "pfgnet/rng.hpp"
#include "pfgnet/tensor.hpp"

namespace pfgnet {

/// Parameter initialisation keyed by (seed, parameter path). Each tensor
/// draws from its own counter stream, so a parameter's initial value does
/// not depend on which other parameters exist or on creation order.
class Initializer {
 public:
  Initializer(std::uint64_t seed, DType dtype) : seed_(seed), dtype_(dtype) {}

  CounterRng stream(std::string_view name) const {
    return CounterRng(derive_key(seed_, {hash_name(name)}));
  }

  Tensor zeros(Shape dims) const { return Tensor::zeros(std::move(dims), dtype_); }
  Tensor full(Shape dims, double v) const { return Tensor::full(std::move(dims), v, dtype_); }

  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Tensor uniform_fan_in(std::string_view name, Shape dims, std::size_t fan_in) const;

  /// N(0, sigma^2) elementwise.
  Tensor normal(std::string_view name, Shape dims, double sigma) const;

  /// Per-channel kernels ([C,k] or [C,k,k]) equal to a centred unit tap plus
  /// N(0, sigma^2) noise.
  Tensor identity_taps(std::string_view name, Shape dims, double sigma) const;

  DType dtype() const { return dtype_; }

 private:
  std::uint64_t seed_;
  DType dtype_;
};

}  // namespace pfgnet
