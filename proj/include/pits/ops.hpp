#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pits/matrix.hpp"
#include "pits/rng.hpp"

namespace pits::ops {

// y = x W + b, row-wise. x: B x in, W: in x out, b: 1 x out.
Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b);

// Accumulates dW += x^T dy and db += colsum(dy); returns dx = dy W^T
// (empty matrix when need_dx is false).
Matrix linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy, Matrix& dw, Matrix& db,
                       bool need_dx = true);

Matrix relu(const Matrix& x);
// Gradient gated by x > 0; the subgradient at exactly 0 is 0.
Matrix relu_backward(const Matrix& x, const Matrix& dy);

// Inverted-dropout mask. An inactive mask (rate 0 or inference) is the identity.
class DropoutMask {
 public:
  DropoutMask() = default;
  DropoutMask(std::size_t rows, std::size_t cols, double rate, bool training, Rng& rng);

  bool active() const { return active_; }
  double rate() const { return rate_; }
  // x * keep / (1 - rate) elementwise; used for forward and backward alike.
  Matrix apply(const Matrix& x) const;

 private:
  bool active_ = false;
  double rate_ = 0.0;
  double scale_ = 1.0;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> keep_;
};

// Forward convenience: draws the mask and records it in `mask`.
Matrix dropout(const Matrix& x, double rate, bool training, Rng& rng, DropoutMask& mask);
Matrix dropout_backward(const Matrix& dy, const DropoutMask& mask);

// Pools adjacent row pairs: out row n = max(in rows 2n, 2n+1), trailing odd
// row dropped. `argmax` records the source row of every output entry; ties
// go to the earlier row.
struct MaxPoolResult {
  Matrix out;
  std::vector<std::uint32_t> argmax;
};
MaxPoolResult maxpool_adjacent(const Matrix& z);
// Same pooling applied independently to `groups` equal blocks of rows;
// argmax holds row indices into z.
MaxPoolResult maxpool_adjacent_grouped(const Matrix& z, std::size_t groups);
Matrix maxpool_adjacent_backward(const Matrix& dy, const std::vector<std::uint32_t>& argmax,
                                 std::size_t in_rows);

}  // namespace pits::ops

namespace pits::ops {

struct LossGrad {
  double loss = 0.0;
  Matrix grad;  // d loss / d prediction
};

// Mean of squared errors over every entry.
LossGrad mse_loss(const Matrix& pred, const Matrix& target);

// Mean over rows of -log softmax(logits)[label]; max-subtracted.
LossGrad softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

}  // namespace pits::ops
