#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pfgnet {

enum class DType : std::uint8_t { float32 = 0, float64 = 1 };

std::size_t dtype_width(DType dtype);
const char* dtype_name(DType dtype);

/// Float64 wins: mixing a float32 and a float64 operand yields float64.
DType promote(DType a, DType b);

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& dims);
std::string shape_string(const Shape& dims);

/// Dense row-major tensor of rank 1 to 5.
///
/// Values are held in double precision. The dtype fixes the storage
/// precision: float32 tensors keep every element rounded to the nearest
/// float, which is also what the binary container writes out.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape dims, DType dtype = DType::float64);
  Tensor(Shape dims, std::vector<double> data, DType dtype = DType::float64);

  static Tensor zeros(Shape dims, DType dtype = DType::float64);
  static Tensor full(Shape dims, double value, DType dtype = DType::float64);
  static Tensor from(std::initializer_list<double> values,
                     DType dtype = DType::float64);

  const Shape& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  DType dtype() const { return dtype_; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // [C,H,W] accessors; no bounds checks beyond debug asserts.
  double& at(std::size_t c, std::size_t h, std::size_t w);
  double at(std::size_t c, std::size_t h, std::size_t w) const;

  /// Same buffer viewed with new extents of identical element count.
  Tensor reshaped(Shape dims) const;

  /// Changes the storage precision, rounding when narrowing to float32.
  Tensor cast(DType dtype) const;

  /// Re-applies the storage precision after an in-place computation.
  void settle();

  bool all_finite() const;

  /// Bitwise comparison of extents, dtype and payload.
  bool identical(const Tensor& other) const;

 private:
  Shape dims_;
  std::vector<double> data_;
  DType dtype_ = DType::float64;
};

/// A horizontal row kernel h and a vertical column kernel v per channel,
/// each stored as [C, k] with k odd.
struct SepKernel {
  Tensor h;
  Tensor v;

  std::size_t channels() const { return h.dim(0); }
  std::size_t size() const { return h.dim(1); }

  /// Throws ConfigError when h and v disagree or k is even.
  void validate() const;

  /// The equivalent dense depthwise kernel v ⊗ h as [C, k, k].
  Tensor dense() const;
};

}  // namespace pfgnet
