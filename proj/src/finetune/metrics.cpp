#include <cmath>
#include <stdexcept>
#include <string>

#include "pits/finetune.hpp"

namespace pits::finetune {

ForecastMetrics forecast_metrics(const Matrix& pred, const Matrix& target) {
  require_shape(pred.rows() == target.rows() && pred.cols() == target.cols(), "forecast_metrics", pred, target);
  ForecastMetrics m;
  m.mse_per_step.assign(pred.cols(), 0.0);
  m.mae_per_step.assign(pred.cols(), 0.0);
  m.count = pred.size();
  if (pred.size() == 0) return m;
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    for (std::size_t h = 0; h < pred.cols(); ++h) {
      const double d = pred(r, h) - target(r, h);
      m.mse_per_step[h] += d * d;
      m.mae_per_step[h] += std::abs(d);
    }
  }
  for (std::size_t h = 0; h < pred.cols(); ++h) {
    m.mse += m.mse_per_step[h];
    m.mae += m.mae_per_step[h];
    m.mse_per_step[h] /= static_cast<double>(pred.rows());
    m.mae_per_step[h] /= static_cast<double>(pred.rows());
  }
  m.mse /= static_cast<double>(m.count);
  m.mae /= static_cast<double>(m.count);
  return m;
}

ClassMetrics classification_metrics(std::span<const int> predicted, std::span<const int> actual,
                                    std::size_t classes) {
  if (predicted.size() != actual.size()) {
    throw std::invalid_argument("classification_metrics: " + std::to_string(predicted.size()) +
                                " predictions for " + std::to_string(actual.size()) + " labels");
  }
  if (classes == 0) throw std::invalid_argument("classification_metrics: need at least one class");
  // confusion[actual][predicted]
  std::vector<std::size_t> confusion(classes * classes, 0);
  for (std::size_t i = 0; i < actual.size(); ++i) {
    for (int v : {actual[i], predicted[i]}) {
      if (v < 0 || static_cast<std::size_t>(v) >= classes) {
        throw std::invalid_argument("classification_metrics: label " + std::to_string(v) + " outside [0, " +
                                    std::to_string(classes) + ")");
      }
    }
    ++confusion[static_cast<std::size_t>(actual[i]) * classes + static_cast<std::size_t>(predicted[i])];
  }
  ClassMetrics m;
  m.per_class_precision.assign(classes, 0.0);
  m.per_class_recall.assign(classes, 0.0);
  m.per_class_f1.assign(classes, 0.0);
  std::size_t correct = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    const std::size_t tp = confusion[k * classes + k];
    std::size_t pred_k = 0;
    std::size_t true_k = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      pred_k += confusion[j * classes + k];
      true_k += confusion[k * classes + j];
    }
    correct += tp;
    const double p = pred_k > 0 ? static_cast<double>(tp) / static_cast<double>(pred_k) : 0.0;
    const double r = true_k > 0 ? static_cast<double>(tp) / static_cast<double>(true_k) : 0.0;
    m.per_class_precision[k] = p;
    m.per_class_recall[k] = r;
    m.per_class_f1[k] = p + r > 0 ? 2.0 * p * r / (p + r) : 0.0;
    m.precision += p;
    m.recall += r;
    m.f1 += m.per_class_f1[k];
  }
  const auto kc = static_cast<double>(classes);
  m.precision /= kc;
  m.recall /= kc;
  m.f1 /= kc;
  m.accuracy = actual.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(actual.size());
  return m;
}

}  // namespace pits::finetune
