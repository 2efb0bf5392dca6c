#include "pits/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pits/kernels.hpp"

namespace pits::ops {

Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b) {
  require_shape(x.cols() == w.rows(), "linear", x, w);
  require_shape(b.size() == w.cols(), "linear(bias)", w, b);
  Matrix y(x.rows(), w.cols());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto yr = y.row(r);
    std::copy(b.data(), b.data() + b.size(), yr.begin());
  }
  const auto& k = kernels::active();
  const std::size_t in = x.cols();
  const std::size_t out = w.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* xr = x.data() + r * in;
    double* yr = y.data() + r * out;
    for (std::size_t p = 0; p < in; ++p) {
      if (xr[p] != 0.0) k.axpy(xr[p], w.data() + p * out, yr, out);
    }
  }
  return y;
}

Matrix linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy, Matrix& dw, Matrix& db,
                       bool need_dx) {
  require_shape(dy.rows() == x.rows() && dy.cols() == w.cols(), "linear_backward", x, dy);
  matmul_tn_accumulate(x, dy, dw);
  add_column_sums(dy, db);
  if (!need_dx) return {};
  return matmul_nt(dy, w);
}

Matrix relu(const Matrix& x) {
  Matrix y = x;
  for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Matrix relu_backward(const Matrix& x, const Matrix& dy) {
  require_shape(x.rows() == dy.rows() && x.cols() == dy.cols(), "relu_backward", x, dy);
  Matrix dx(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
  return dx;
}

DropoutMask::DropoutMask(std::size_t rows, std::size_t cols, double rate, bool training, Rng& rng)
    : rate_(rate), rows_(rows), cols_(cols) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  active_ = training && rate > 0.0;
  if (!active_) return;
  scale_ = 1.0 / (1.0 - rate);
  keep_.resize(rows * cols);
  for (auto& k : keep_) k = rng.uniform() >= rate ? 1 : 0;
}

Matrix DropoutMask::apply(const Matrix& x) const {
  if (!active_) return x;
  if (x.rows() != rows_ || x.cols() != cols_) {
    throw std::invalid_argument("dropout: mask shape [" + std::to_string(rows_) + "x" +
                                std::to_string(cols_) + "] vs input " + x.shape());
  }
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = keep_[i] ? x[i] * scale_ : 0.0;
  return y;
}

Matrix dropout(const Matrix& x, double rate, bool training, Rng& rng, DropoutMask& mask) {
  mask = DropoutMask(x.rows(), x.cols(), rate, training, rng);
  return mask.apply(x);
}

Matrix dropout_backward(const Matrix& dy, const DropoutMask& mask) { return mask.apply(dy); }

MaxPoolResult maxpool_adjacent_grouped(const Matrix& z, std::size_t groups) {
  if (groups == 0 || z.rows() % groups != 0) {
    throw std::invalid_argument("maxpool_adjacent: " + z.shape() + " does not split into " +
                                std::to_string(groups) + " groups");
  }
  const std::size_t n_in = z.rows() / groups;
  if (n_in < 2) {
    throw std::invalid_argument("maxpool_adjacent: need at least 2 rows per group, got " + z.shape());
  }
  const std::size_t n_out = n_in / 2;
  const std::size_t d = z.cols();
  MaxPoolResult r{Matrix(groups * n_out, d), std::vector<std::uint32_t>(groups * n_out * d)};
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t n = 0; n < n_out; ++n) {
      const std::size_t a = g * n_in + 2 * n;
      const std::size_t b = a + 1;
      const std::size_t o = g * n_out + n;
      for (std::size_t j = 0; j < d; ++j) {
        const bool take_b = z(b, j) > z(a, j);
        r.out(o, j) = take_b ? z(b, j) : z(a, j);
        r.argmax[o * d + j] = static_cast<std::uint32_t>(take_b ? b : a);
      }
    }
  }
  return r;
}

MaxPoolResult maxpool_adjacent(const Matrix& z) { return maxpool_adjacent_grouped(z, 1); }

Matrix maxpool_adjacent_backward(const Matrix& dy, const std::vector<std::uint32_t>& argmax,
                                 std::size_t in_rows) {
  if (argmax.size() != dy.size()) {
    throw std::invalid_argument("maxpool_adjacent_backward: argmax/grad size mismatch");
  }
  Matrix dz(in_rows, dy.cols());
  for (std::size_t n = 0; n < dy.rows(); ++n) {
    for (std::size_t j = 0; j < dy.cols(); ++j) {
      dz(argmax[n * dy.cols() + j], j) += dy(n, j);
    }
  }
  return dz;
}

}  // namespace pits::ops

namespace pits::ops {

LossGrad mse_loss(const Matrix& pred, const Matrix& target) {
  require_shape(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse_loss", pred, target);
  LossGrad out{0.0, Matrix(pred.rows(), pred.cols())};
  const auto n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    out.loss += d * d;
    out.grad[i] = 2.0 * d / n;
  }
  out.loss /= n;
  return out;
}

LossGrad softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows()) {
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                " labels for logits " + logits.shape());
  }
  LossGrad out{0.0, Matrix(logits.rows(), logits.cols())};
  const auto rows = static_cast<double>(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto lr = logits.row(r);
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) {
      throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(y) +
                                  " outside [0, " + std::to_string(logits.cols()) + ")");
    }
    double mx = lr[0];
    for (double v : lr) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : lr) sum += std::exp(v - mx);
    const double log_z = mx + std::log(sum);
    out.loss += log_z - lr[static_cast<std::size_t>(y)];
    for (std::size_t k = 0; k < lr.size(); ++k) {
      const double p = std::exp(lr[k] - log_z);
      out.grad(r, k) = (p - (static_cast<int>(k) == y ? 1.0 : 0.0)) / rows;
    }
  }
  out.loss /= rows;
  return out;
}

}  // namespace pits::ops
