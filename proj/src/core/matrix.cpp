#include "pits/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pits/kernels.hpp"

namespace pits {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw std::invalid_argument("Matrix: buffer of " + std::to_string(data_.size()) +
                                " values does not match " + std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw std::invalid_argument("Matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::row_vector(std::initializer_list<double> values) {
  return Matrix(1, values.size(), std::vector<double>(values));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix Matrix::reshaped(std::size_t rows, std::size_t cols) const& {
  return Matrix(rows, cols, data_);
}

Matrix Matrix::reshaped(std::size_t rows, std::size_t cols) && {
  return Matrix(rows, cols, std::move(data_));
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

void require_shape(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape() + " vs " +
                                b.shape());
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  require_shape(a.cols() == b.rows(), "matmul", a, b);
  Matrix c(a.rows(), b.cols());
  const auto& k = kernels::active();
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* crow = c.data() + i * n;
    const double* arow = a.data() + i * inner;
    for (std::size_t p = 0; p < inner; ++p) {
      const double av = arow[p];
      if (av != 0.0) k.axpy(av, b.data() + p * n, crow, n);
    }
  }
  return c;
}

void matmul_tn_accumulate(const Matrix& a, const Matrix& b, Matrix& acc) {
  require_shape(a.rows() == b.rows(), "matmul_tn", a, b);
  require_shape(acc.rows() == a.cols() && acc.cols() == b.cols(), "matmul_tn(acc)", acc, b);
  const auto& k = kernels::active();
  const std::size_t m = a.cols();
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.data() + i * m;
    const double* brow = b.data() + i * n;
    for (std::size_t p = 0; p < m; ++p) {
      const double av = arow[p];
      if (av != 0.0) k.axpy(av, brow, acc.data() + p * n, n);
    }
  }
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols(), b.cols());
  matmul_tn_accumulate(a, b, c);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require_shape(a.cols() == b.cols(), "matmul_nt", a, b);
  Matrix c(a.rows(), b.rows());
  const auto& k = kernels::active();
  const std::size_t inner = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      c(i, j) = k.dot(a.data() + i * inner, b.data() + j * inner, inner);
    }
  }
  return c;
}

void add_column_sums(const Matrix& m, Matrix& acc) {
  if (acc.size() != m.cols()) {
    throw std::invalid_argument("add_column_sums: shape mismatch " + m.shape() + " vs " +
                                acc.shape());
  }
  const auto& k = kernels::active();
  for (std::size_t r = 0; r < m.rows(); ++r) k.axpy(1.0, m.data() + r * m.cols(), acc.data(), m.cols());
}

void add_inplace(Matrix& acc, const Matrix& m) {
  require_shape(acc.rows() == m.rows() && acc.cols() == m.cols(), "add_inplace", acc, m);
  kernels::axpy(1.0, m.data(), acc.data(), m.size());
}

Matrix scaled(const Matrix& m, double s) {
  Matrix out = m;
  for (auto& v : out.values()) v *= s;
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_shape(a.rows() == b.rows() && a.cols() == b.cols(), "max_abs_diff", a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace pits
