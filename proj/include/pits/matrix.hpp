#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pits {

// Row-major dense matrix of doubles. Biases and other vectors are 1 x n.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix row_vector(std::initializer_list<double> values);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  void fill(double v);
  // Same buffer viewed with a different shape; rows*cols must be preserved.
  Matrix reshaped(std::size_t rows, std::size_t cols) const&;
  Matrix reshaped(std::size_t rows, std::size_t cols) &&;

  bool all_finite() const;
  std::string shape() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// acc += A^T * B
void matmul_tn_accumulate(const Matrix& a, const Matrix& b, Matrix& acc);

// Column sums added into acc (1 x cols).
void add_column_sums(const Matrix& m, Matrix& acc);

void add_inplace(Matrix& acc, const Matrix& m);
Matrix scaled(const Matrix& m, double s);
double max_abs_diff(const Matrix& a, const Matrix& b);

// Throws std::invalid_argument naming both shapes.
void require_shape(bool ok, const char* op, const Matrix& a, const Matrix& b);

}  // namespace pits
