#include "mouthtrace/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace mouthtrace {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative extent in shape " + shape_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_numel(shape_)), fill) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size())) {
    throw ShapeError("shape " + shape_string(shape_) + " does not match " + std::to_string(data_.size()) +
                     " values");
  }
}

Tensor Tensor::from(std::initializer_list<float> values) {
  return Tensor(Shape{static_cast<std::int64_t>(values.size())}, std::vector<float>(values));
}

std::int64_t Tensor::flat_index(std::initializer_list<std::int64_t> index) const {
  if (index.size() != shape_.size()) throw ShapeError("index rank mismatch for shape " + shape_string(shape_));
  std::int64_t flat = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i < 0 || i >= shape_[axis]) throw ShapeError("index out of range for shape " + shape_string(shape_));
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

float Tensor::at(std::initializer_list<std::int64_t> index) const { return data_[flat_index(index)]; }
float& Tensor::at(std::initializer_list<std::int64_t> index) { return data_[flat_index(index)]; }

float Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (shape_numel(shape) != numel()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape_ == b.shape_ &&
         (a.data_.empty() || std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0);
}

float sigmoid(float x) {
  // Split on sign so exp never overflows.
  if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.0f + e);
}

namespace {

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, F f) {
  if (a.shape() != b.shape()) {
    throw ShapeError("shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  Tensor out(a.shape());
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

template <typename F>
Tensor map_binary(const Tensor& a, const Operand& b, F f) {
  if (const auto* s = std::get_if<float>(&b)) {
    const float v = *s;
    return map_unary(a, [&](float x) { return f(x, v); });
  }
  const auto& t = std::get<Tensor>(b);
  if (t.rank() == 0) {
    const float v = t.item();
    return map_unary(a, [&](float x) { return f(x, v); });
  }
  return map_binary(a, t, f);
}

}  // namespace

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Operand& b) {
  switch (op) {
    case ElementwiseOp::add: return map_binary(a, b, [](float x, float y) { return x + y; });
    case ElementwiseOp::sub: return map_binary(a, b, [](float x, float y) { return x - y; });
    case ElementwiseOp::mul: return map_binary(a, b, [](float x, float y) { return x * y; });
    case ElementwiseOp::scale: {
      const auto* s = std::get_if<float>(&b);
      if (!s) throw ShapeError("scale expects a scalar operand");
      const float v = *s;
      return map_unary(a, [v](float x) { return x * v; });
    }
    case ElementwiseOp::sigmoid: return map_unary(a, [](float x) { return sigmoid(x); });
    case ElementwiseOp::exp: return map_unary(a, [](float x) { return std::exp(x); });
    case ElementwiseOp::log: return map_unary(a, [](float x) { return std::log(x); });
    case ElementwiseOp::max0: return map_unary(a, [](float x) { return x > 0.0f ? x : 0.0f; });
  }
  throw ShapeError("unknown elementwise op");
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::mul, a, b); }
Tensor scale(const Tensor& a, float s) { return elementwise(ElementwiseOp::scale, a, s); }
Tensor sigmoid(const Tensor& a) { return elementwise(ElementwiseOp::sigmoid, a); }
Tensor exp(const Tensor& a) { return elementwise(ElementwiseOp::exp, a); }
Tensor log(const Tensor& a) { return elementwise(ElementwiseOp::log, a); }
Tensor max0(const Tensor& a) { return elementwise(ElementwiseOp::max0, a); }

Tensor reduce(ReduceOp op, const Tensor& a, std::size_t axis) {
  if (axis >= a.rank()) {
    throw ShapeError("reduce axis " + std::to_string(axis) + " out of range for shape " + shape_string(a.shape()));
  }
  const auto& shape = a.shape();
  std::int64_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::int64_t n = shape[axis];
  if (op == ReduceOp::max && n == 0) throw ShapeError("max over empty axis");

  Shape out_shape;
  for (std::size_t i = 0; i < shape.size(); ++i)
    if (i != axis) out_shape.push_back(shape[i]);
  Tensor out(out_shape);
  const float* src = a.ptr();
  float* dst = out.ptr();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t i = 0; i < inner; ++i) {
      const float* p = src + o * n * inner + i;
      if (op == ReduceOp::max) {
        float m = -std::numeric_limits<float>::infinity();
        for (std::int64_t k = 0; k < n; ++k) m = std::max(m, p[k * inner]);
        dst[o * inner + i] = m;
      } else {
        double acc = 0.0;
        for (std::int64_t k = 0; k < n; ++k) acc += p[k * inner];
        if (op == ReduceOp::mean) acc = n > 0 ? acc / static_cast<double>(n) : 0.0;
        dst[o * inner + i] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

double sum_all(const Tensor& a) {
  double acc = 0.0;
  for (float v : a.data()) acc += v;
  return acc;
}

}  // namespace mouthtrace
