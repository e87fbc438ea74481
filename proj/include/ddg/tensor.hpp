#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ddg {

#ifdef DDG_FLOAT32
using Scalar = float;
#else
using Scalar = double;
#endif

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

/// Dense row-major array. A default-constructed tensor is the empty tensor
/// (no shape, no data) used for parameter-free layers; every other tensor
/// has strictly positive dimensions.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar(0));
  Tensor(Shape shape, std::vector<Scalar> data);

  static Tensor vector(std::initializer_list<Scalar> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<Scalar>> rows);
  static Tensor zeros_like(const Tensor& other);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Rank-2 accessors; throw ShapeError on other ranks.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const Scalar> data() const noexcept { return data_; }
  std::span<Scalar> data() noexcept { return data_; }
  const std::vector<Scalar>& values() const noexcept { return data_; }

  Scalar& operator[](std::size_t i) { return data_[i]; }
  Scalar operator[](std::size_t i) const { return data_[i]; }
  Scalar& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  Scalar at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  Tensor reshaped(Shape shape) const;
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<Scalar> data_;
};

enum class ElementwiseOp { add, sub, mul, scale, relu, tanh, exp };
enum class ReduceOp { sum, max, sq_l2_norm };

/// c = a · b. Every c(i,j) accumulates k = 0..K-1 in ascending order starting
/// from zero, so the result is bitwise equal to the naive triple loop.
Tensor matmul(const Tensor& a, const Tensor& b);
/// c = aᵀ · b, accumulating over rows of a and b in ascending order.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// c = a · bᵀ, each entry a dot product accumulated left to right.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b);
Tensor elementwise(ElementwiseOp op, const Tensor& a, Scalar s);
Tensor elementwise(ElementwiseOp op, const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, Scalar s);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);

/// Sequential left-to-right reductions, accumulated in double. Empty input
/// is a DomainError.
double reduce(ReduceOp op, const Tensor& a);
double sum(const Tensor& a);
double max(const Tensor& a);
double sq_l2_norm(const Tensor& a);

/// Throws NumericError naming `context` if any element is NaN or infinite.
void require_finite(const Tensor& t, const char* context);

}  // namespace ddg
