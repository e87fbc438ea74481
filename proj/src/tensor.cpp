#include "ddg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "ddg/error.hpp"

namespace ddg {

namespace {

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_to_string(t.shape()));
  }
}

template <typename F>
Tensor map(const Tensor& a, F f, const char* op) {
  std::vector<Scalar> out(a.size());
  std::transform(a.values().begin(), a.values().end(), out.begin(), f);
  Tensor r(a.shape(), std::move(out));
  require_finite(r, op);
  return r;
}

template <typename F>
Tensor zip(const Tensor& a, const Tensor& b, F f, const char* op) {
  require_same_shape(a, b, op);
  std::vector<Scalar> out(a.size());
  std::transform(a.values().begin(), a.values().end(), b.values().begin(), out.begin(), f);
  Tensor r(a.shape(), std::move(out));
  require_finite(r, op);
  return r;
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, Scalar fill) : shape_(std::move(shape)) {
  data_.assign(shape_.empty() ? 0 : shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<Scalar> data) : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t expected = shape_.empty() ? 0 : shape_product(shape_);
  if (expected != data_.size()) {
    throw ShapeError("tensor of shape " + shape_to_string(shape_) + " needs " + std::to_string(expected) +
                     " elements, got " + std::to_string(data_.size()));
  }
}

Tensor Tensor::vector(std::initializer_list<Scalar> values) {
  if (values.size() == 0) return Tensor();
  return Tensor({values.size()}, std::vector<Scalar>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<Scalar>> rows) {
  if (rows.size() == 0) return Tensor();
  const std::size_t cols = rows.begin()->size();
  std::vector<Scalar> data;
  data.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::zeros_like(const Tensor& other) { return Tensor(other.shape(), Scalar(0)); }

std::size_t Tensor::rows() const {
  require_matrix(*this, "rows");
  return shape_[0];
}

std::size_t Tensor::cols() const {
  require_matrix(*this, "cols");
  return shape_[1];
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](Scalar v) { return std::isfinite(v); });
}

void require_finite(const Tensor& t, const char* context) {
  if (!t.all_finite()) throw NumericError(std::string(context) + ": non-finite value in tensor");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError("matmul: inner dimensions disagree, " + shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  Tensor c({m, n});
  const Scalar* pa = a.data().data();
  const Scalar* pb = b.data().data();
  Scalar* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    Scalar* crow = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Scalar aip = pa[i * k + p];
      const Scalar* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  require_finite(c, "matmul");
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  const std::size_t r = a.rows(), m = a.cols(), n = b.cols();
  if (b.rows() != r) {
    throw ShapeError("matmul_tn: row counts disagree, " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  Tensor c({m, n});
  const Scalar* pa = a.data().data();
  const Scalar* pb = b.data().data();
  Scalar* pc = c.data().data();
  for (std::size_t p = 0; p < r; ++p) {
    const Scalar* arow = pa + p * m;
    const Scalar* brow = pb + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const Scalar api = arow[i];
      Scalar* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += api * brow[j];
    }
  }
  require_finite(c, "matmul_tn");
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw ShapeError("matmul_nt: column counts disagree, " + shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
  Tensor c({m, n});
  const Scalar* pa = a.data().data();
  const Scalar* pb = b.data().data();
  Scalar* pc = c.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const Scalar* arow = pa + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const Scalar* brow = pb + j * k;
      Scalar acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      pc[i * n + j] = acc;
    }
  }
  require_finite(c, "matmul_nt");
  return c;
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case ElementwiseOp::add: return zip(a, b, std::plus<Scalar>{}, "add");
    case ElementwiseOp::sub: return zip(a, b, std::minus<Scalar>{}, "sub");
    case ElementwiseOp::mul: return zip(a, b, std::multiplies<Scalar>{}, "mul");
    default: throw DomainError("elementwise: operation does not take a tensor operand");
  }
}

Tensor elementwise(ElementwiseOp op, const Tensor& a, Scalar s) {
  switch (op) {
    case ElementwiseOp::add: return map(a, [s](Scalar x) { return x + s; }, "add");
    case ElementwiseOp::sub: return map(a, [s](Scalar x) { return x - s; }, "sub");
    case ElementwiseOp::mul:
    case ElementwiseOp::scale: return map(a, [s](Scalar x) { return x * s; }, "scale");
    default: throw DomainError("elementwise: operation does not take a scalar operand");
  }
}

Tensor elementwise(ElementwiseOp op, const Tensor& a) {
  switch (op) {
    case ElementwiseOp::relu: return map(a, [](Scalar x) { return x > 0 ? x : Scalar(0); }, "relu");
    case ElementwiseOp::tanh: return map(a, [](Scalar x) { return std::tanh(x); }, "tanh");
    case ElementwiseOp::exp: return map(a, [](Scalar x) { return std::exp(x); }, "exp");
    default: throw DomainError("elementwise: binary operation called with one operand");
  }
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(ElementwiseOp::mul, a, b); }
Tensor scale(const Tensor& a, Scalar s) { return elementwise(ElementwiseOp::scale, a, s); }
Tensor relu(const Tensor& a) { return elementwise(ElementwiseOp::relu, a); }
Tensor tanh(const Tensor& a) { return elementwise(ElementwiseOp::tanh, a); }
Tensor exp(const Tensor& a) { return elementwise(ElementwiseOp::exp, a); }

double reduce(ReduceOp op, const Tensor& a) {
  if (a.empty()) throw DomainError("reduce: empty tensor");
  const auto v = a.data();
  switch (op) {
    case ReduceOp::sum: {
      double acc = 0;
      for (Scalar x : v) acc += x;
      return acc;
    }
    case ReduceOp::max: {
      double m = v[0];
      for (Scalar x : v) m = std::max<double>(m, x);
      return m;
    }
    case ReduceOp::sq_l2_norm: {
      double acc = 0;
      for (Scalar x : v) acc += double(x) * double(x);
      return acc;
    }
  }
  throw DomainError("reduce: unknown operation");
}

double sum(const Tensor& a) { return reduce(ReduceOp::sum, a); }
double max(const Tensor& a) { return reduce(ReduceOp::max, a); }
double sq_l2_norm(const Tensor& a) { return reduce(ReduceOp::sq_l2_norm, a); }

}  // namespace ddg
