#include "pfgnet/init.hpp"

#include <cmath>

#include "pfgnet/errors.hpp"

namespace pfgnet {

Tensor Initializer::uniform_fan_in(std::string_view name, Shape dims, std::size_t fan_in) const {
  if (fan_in == 0) throw ConfigError("uniform_fan_in: zero fan-in");
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  auto rng = stream(name);
  Tensor t(std::move(dims), dtype_);
  for (auto& x : t.data()) x = rng.uniform(-bound, bound);
  t.settle();
  return t;
}

Tensor Initializer::normal(std::string_view name, Shape dims, double sigma) const {
  auto rng = stream(name);
  Tensor t(std::move(dims), dtype_);
  for (auto& x : t.data()) x = sigma * rng.normal();
  t.settle();
  return t;
}

Tensor Initializer::identity_taps(std::string_view name, Shape dims, double sigma) const {
  Tensor t = normal(name, dims, sigma);
  const std::size_t C = dims[0];
  const std::size_t per = t.numel() / C;
  for (std::size_t c = 0; c < C; ++c) t[c * per + per / 2] += 1.0;
  t.settle();
  return t;
}

}  // namespace pfgnet
