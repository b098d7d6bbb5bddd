#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>

#include "pfgnet/tensor.hpp"

namespace pfgnet {

/// Named learnable tensors addressed by '/'-separated paths such as
/// "block/0/gate/w", with a gradient slot of identical shape per entry.
class ParamStore {
 public:
  using Map = std::map<std::string, Tensor, std::less<>>;

  /// Inserts or replaces a parameter; its gradient is reset to zeros.
  void set(std::string name, Tensor value);

  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;
  Tensor& get_mut(std::string_view name);

  const Tensor& grad(std::string_view name) const;
  Tensor& grad_mut(std::string_view name);

  const Map& values() const { return values_; }
  Map& values_mut() { return values_; }
  const Map& grads() const { return grads_; }

  void zero_grad();
  std::size_t size() const { return values_.size(); }

  /// Total number of learnable scalars.
  std::size_t scalar_count() const;

  /// First path holding a non-finite value, or empty.
  std::string first_non_finite() const;

  bool identical(const ParamStore& other) const;

 private:
  Map values_;
  Map grads_;
};

}  // namespace pfgnet
