#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pits/data.hpp"

namespace pits::data {
namespace {

Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end) {
  Matrix out(end - begin, m.cols());
  std::copy(m.data() + begin * m.cols(), m.data() + end * m.cols(), out.data());
  return out;
}

}  // namespace

WindowSet::WindowSet(Matrix segment, std::size_t input_len, std::size_t horizon, std::size_t stride)
    : segment_(std::move(segment)), input_len_(input_len), horizon_(horizon), stride_(stride) {
  if (input_len == 0) throw std::invalid_argument("windows: input length must be positive");
  if (stride == 0) throw std::invalid_argument("windows: stride must be positive");
  const std::size_t need = input_len + horizon;
  if (segment_.rows() < need) {
    throw std::invalid_argument("windows: split has " + std::to_string(segment_.rows()) +
                                " steps, need at least L+H = " + std::to_string(need));
  }
  count_ = (segment_.rows() - need) / stride + 1;
}

ForecastWindow WindowSet::at(std::size_t i) const {
  if (i >= count_) throw std::out_of_range("window index out of range");
  const std::size_t origin = i * stride_;
  return {slice_rows(segment_, origin, origin + input_len_),
          slice_rows(segment_, origin + input_len_, origin + input_len_ + horizon_), origin};
}

WindowSet make_forecast_windows(const TimeSeriesDataset& ds, SplitName split, std::size_t input_len,
                                std::size_t horizon, std::size_t stride) {
  if (horizon == 0) throw std::invalid_argument("windows: horizon must be positive");
  const auto [begin, end] = ds.range(split);
  return WindowSet(slice_rows(ds.values, begin, end), input_len, horizon, stride);
}

WindowSet make_input_windows(const TimeSeriesDataset& ds, SplitName split, std::size_t input_len,
                             std::size_t stride) {
  const auto [begin, end] = ds.range(split);
  return WindowSet(slice_rows(ds.values, begin, end), input_len, 0, stride);
}

Normalized instance_normalize(const Matrix& input) {
  const std::size_t len = input.rows();
  const std::size_t channels = input.cols();
  Normalized out{Matrix(len, channels), NormStats{1, channels, std::vector<double>(channels),
                                                  std::vector<double>(channels)}};
  for (std::size_t c = 0; c < channels; ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < len; ++t) mean += input(t, c);
    mean /= static_cast<double>(len);
    double var = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double d = input(t, c) - mean;
      var += d * d;
    }
    var /= static_cast<double>(len);
    const double sd = std::max(std::sqrt(var), kNormEps);
    out.stats.mean[c] = mean;
    out.stats.std[c] = sd;
    for (std::size_t t = 0; t < len; ++t) out.values(t, c) = (input(t, c) - mean) / sd;
  }
  return out;
}

Matrix denormalize(const Matrix& pred, const NormStats& stats, std::size_t b) {
  if (pred.cols() != stats.channels || b >= stats.instances) {
    throw std::invalid_argument("denormalize: prediction " + pred.shape() + " does not match stats for " +
                                std::to_string(stats.channels) + " channels");
  }
  Matrix out(pred.rows(), pred.cols());
  for (std::size_t t = 0; t < pred.rows(); ++t) {
    for (std::size_t c = 0; c < pred.cols(); ++c) {
      out(t, c) = pred(t, c) * stats.std_at(b, c) + stats.mean_at(b, c);
    }
  }
  return out;
}

}  // namespace pits::data
