#include "pfgnet/tensor.hpp"

#include <cassert>
#include <cmath>
#include <cstring>
#include <sstream>

#include "pfgnet/errors.hpp"

namespace pfgnet {

std::size_t dtype_width(DType dtype) {
  return dtype == DType::float32 ? 4 : 8;
}

const char* dtype_name(DType dtype) {
  return dtype == DType::float32 ? "float32" : "float64";
}

DType promote(DType a, DType b) {
  return (a == DType::float64 || b == DType::float64) ? DType::float64
                                                      : DType::float32;
}

std::size_t shape_numel(const Shape& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string shape_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << ',';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_dims(const Shape& dims) {
  if (dims.empty() || dims.size() > 5) {
    throw ConfigError("tensor rank must be in 1..5, got " +
                      std::to_string(dims.size()));
  }
  for (auto d : dims) {
    if (d == 0) throw ConfigError("tensor extents must be >= 1: " + shape_string(dims));
  }
}

}  // namespace

Tensor::Tensor(Shape dims, DType dtype) : dims_(std::move(dims)), dtype_(dtype) {
  check_dims(dims_);
  data_.assign(shape_numel(dims_), 0.0);
}

Tensor::Tensor(Shape dims, std::vector<double> data, DType dtype)
    : dims_(std::move(dims)), data_(std::move(data)), dtype_(dtype) {
  check_dims(dims_);
  if (data_.size() != shape_numel(dims_)) {
    throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                      " does not match extents " + shape_string(dims_));
  }
  settle();
}

Tensor Tensor::zeros(Shape dims, DType dtype) { return Tensor(std::move(dims), dtype); }

Tensor Tensor::full(Shape dims, double value, DType dtype) {
  Tensor t(std::move(dims), dtype);
  for (auto& x : t.data_) x = value;
  t.settle();
  return t;
}

Tensor Tensor::from(std::initializer_list<double> values, DType dtype) {
  return Tensor({values.size()}, std::vector<double>(values), dtype);
}

double& Tensor::at(std::size_t c, std::size_t h, std::size_t w) {
  assert(rank() == 3 && c < dims_[0] && h < dims_[1] && w < dims_[2]);
  return data_[(c * dims_[1] + h) * dims_[2] + w];
}

double Tensor::at(std::size_t c, std::size_t h, std::size_t w) const {
  assert(rank() == 3 && c < dims_[0] && h < dims_[1] && w < dims_[2]);
  return data_[(c * dims_[1] + h) * dims_[2] + w];
}

Tensor Tensor::reshaped(Shape dims) const {
  if (shape_numel(dims) != numel()) {
    throw ConfigError("cannot reshape " + shape_string(dims_) + " to " +
                      shape_string(dims));
  }
  Tensor t = *this;
  check_dims(dims);
  t.dims_ = std::move(dims);
  return t;
}

Tensor Tensor::cast(DType dtype) const {
  Tensor t = *this;
  t.dtype_ = dtype;
  t.settle();
  return t;
}

void Tensor::settle() {
  if (dtype_ == DType::float32) {
    for (auto& x : data_) x = static_cast<double>(static_cast<float>(x));
  }
}

bool Tensor::all_finite() const {
  for (auto x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

bool Tensor::identical(const Tensor& other) const {
  return dims_ == other.dims_ && dtype_ == other.dtype_ &&
         (data_.empty() ||
          std::memcmp(data_.data(), other.data_.data(),
                      data_.size() * sizeof(double)) == 0);
}

void SepKernel::validate() const {
  if (h.rank() != 2 || v.rank() != 2) {
    throw ConfigError("separable kernels must be [C, k]");
  }
  if (h.dims() != v.dims()) {
    throw ConfigError("row kernel " + shape_string(h.dims()) +
                      " and column kernel " + shape_string(v.dims()) +
                      " differ in shape");
  }
  if (h.dim(1) % 2 == 0) {
    throw ConfigError("separable kernel size must be odd, got " +
                      std::to_string(h.dim(1)));
  }
}

Tensor SepKernel::dense() const {
  validate();
  const std::size_t c = channels(), k = size();
  Tensor out({c, k, k}, promote(h.dtype(), v.dtype()));
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        out[(ch * k + i) * k + j] = v[ch * k + i] * h[ch * k + j];
      }
    }
  }
  out.settle();
  return out;
}

}  // namespace pfgnet
