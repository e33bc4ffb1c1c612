#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mouthtrace/error.hpp"

namespace mouthtrace {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major float32 array (last axis fastest).
///
/// A rank-0 tensor holds exactly one value. Extents may be zero so that
/// empty batches can be represented and rejected by the operations that
/// care about them.
class Tensor {
 public:
  Tensor() : data_(1, 0.0f) {}
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  static Tensor scalar(float v) { return Tensor(Shape{}, std::vector<float>{v}); }
  static Tensor from(std::initializer_list<float> values);

  const Shape& shape() const { return shape_; }
  std::int64_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  std::span<const float> data() const { return data_; }
  std::span<float> data() { return data_; }
  const float* ptr() const { return data_.data(); }
  float* ptr() { return data_.data(); }

  float operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }
  float& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }

  float at(std::initializer_list<std::int64_t> index) const;
  float& at(std::initializer_list<std::int64_t> index);

  float item() const;

  /// Same data, new shape; element counts must agree.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  bool all_finite() const;

  /// Bitwise equality of shape and payload.
  friend bool bitwise_equal(const Tensor& a, const Tensor& b);

 private:
  std::int64_t flat_index(std::initializer_list<std::int64_t> index) const;

  Shape shape_;
  std::vector<float> data_;
};

// ---------------------------------------------------------------------------
// Elementwise arithmetic. Broadcasting is scalar-against-tensor only.

enum class ElementwiseOp { add, sub, mul, scale, sigmoid, exp, log, max0 };

using Operand = std::variant<Tensor, float>;

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Operand& b = 0.0f);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor max0(const Tensor& a);

float sigmoid(float x);

// ---------------------------------------------------------------------------
// Reductions along one axis, accumulated in double.

enum class ReduceOp { sum, mean, max };

Tensor reduce(ReduceOp op, const Tensor& a, std::size_t axis);

double sum_all(const Tensor& a);

}  // namespace mouthtrace
