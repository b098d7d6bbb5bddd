#include "pfgnet/params.hpp"

#include "pfgnet/errors.hpp"

namespace pfgnet {

namespace {

void check_name(std::string_view name) {
  if (name.empty() || name.front() == '/' || name.back() == '/' ||
      name.find("//") != std::string_view::npos) {
    throw ConfigError("invalid parameter path '" + std::string(name) + "'");
  }
}

}  // namespace

void ParamStore::set(std::string name, Tensor value) {
  check_name(name);
  grads_.insert_or_assign(name, Tensor::zeros(value.dims(), DType::float64));
  values_.insert_or_assign(std::move(name), std::move(value));
}

bool ParamStore::contains(std::string_view name) const {
  return values_.find(name) != values_.end();
}

const Tensor& ParamStore::get(std::string_view name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

Tensor& ParamStore::get_mut(std::string_view name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

const Tensor& ParamStore::grad(std::string_view name) const {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

Tensor& ParamStore::grad_mut(std::string_view name) {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, g] : grads_) {
    for (auto& x : g.data()) x = 0.0;
  }
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : values_) n += t.numel();
  return n;
}

std::string ParamStore::first_non_finite() const {
  for (const auto& [name, t] : values_) {
    if (!t.all_finite()) return name;
  }
  return {};
}

bool ParamStore::identical(const ParamStore& other) const {
  if (values_.size() != other.values_.size()) return false;
  auto a = values_.begin();
  auto b = other.values_.begin();
  for (; a != values_.end(); ++a, ++b) {
    if (a->first != b->first || !a->second.identical(b->second)) return false;
  }
  return true;
}

}  // namespace pfgnet
