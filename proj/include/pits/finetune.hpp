#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pits/data.hpp"
#include "pits/model.hpp"
#include "pits/pretrain.hpp"

namespace pits::finetune {

struct FinetuneSchedule {
  std::size_t probe_epochs = 10;
  std::size_t full_epochs = 20;  // twice the probe stage by default
  double lr_probe = 1e-4;
  double lr_full = 1e-4;
  double head_dropout = 0.2;
  std::size_t batch_size = 64;
  std::size_t max_steps = 0;  // per stage; 0: no cap

  static FinetuneSchedule with_probe_epochs(std::size_t probe) {
    FinetuneSchedule s;
    s.probe_epochs = probe;
    s.full_epochs = 2 * probe;
    return s;
  }
  bool follows_double_rule() const { return full_epochs == 2 * probe_epochs; }
};

struct PatchSetup {
  std::size_t patch_len = 12;
  std::size_t stride = 12;
  data::PadMode pad = data::PadMode::none;
};

struct StageLog {
  std::vector<double> epoch_losses;
  std::size_t steps = 0;
};

// Forecasting. The model must carry a forecast head whose N matches the
// patching; training minimizes MSE in instance-normalized space.
model::ModelParams linear_probe(model::ModelParams params, const data::WindowSet& train,
                                const FinetuneSchedule& schedule, const PatchSetup& patches,
                                std::uint64_t seed, StageLog* log = nullptr);
model::ModelParams full_finetune(model::ModelParams params, const data::WindowSet& train,
                                 const FinetuneSchedule& schedule, const PatchSetup& patches,
                                 std::uint64_t seed, StageLog* log = nullptr);
// Probe, then end-to-end.
model::ModelParams finetune_forecast(model::ModelParams params, const data::WindowSet& train,
                                     const FinetuneSchedule& schedule, const PatchSetup& patches,
                                     std::uint64_t seed);

struct SupervisedConfig {
  model::EncoderKind kind = model::EncoderKind::mlp;
  std::size_t input_len = 512;
  std::size_t horizon = 96;
  std::size_t patch_len = 24;
  std::size_t stride = 0;  // 0: floor(P/2)
  data::PadMode pad = data::PadMode::replicate_last;
  std::size_t dim = 128;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::size_t max_steps = 0;
  double lr = 1e-4;
  double head_dropout = 0.2;
  std::size_t window_stride = 1;
  model::Representation repr = model::Representation::z2;
  std::uint64_t seed = 2021;
  std::string config_hash;

  PatchSetup patches() const;
};

// Random-init encoder and forecast head trained jointly on the forecast loss.
model::ModelParams train_supervised(const SupervisedConfig& cfg, const data::WindowSet& train,
                                    StageLog* log = nullptr);
model::ModelParams train_supervised(const SupervisedConfig& cfg, const data::TimeSeriesDataset& ds,
                                    StageLog* log = nullptr);

struct ForecastMetrics {
  double mse = 0.0;
  double mae = 0.0;
  std::vector<double> mse_per_step;
  std::vector<double> mae_per_step;
  std::size_t count = 0;  // predicted values
};

// Rows are (window, channel) pairs, columns horizon steps.
ForecastMetrics forecast_metrics(const Matrix& pred, const Matrix& target);

// Denormalized (B*C) x H predictions for the given windows.
Matrix predict_forecast(const model::ModelParams& params, const data::WindowSet& windows,
                        std::span<const std::size_t> indices, const PatchSetup& patches);
ForecastMetrics evaluate_forecast(const model::ModelParams& params, const data::WindowSet& test,
                                  const PatchSetup& patches, std::size_t threads = 0);

// Classification.
model::ModelParams classifier_probe(model::ModelParams params, const data::LabeledSeriesSet& train,
                                    const FinetuneSchedule& schedule, const PatchSetup& patches,
                                    std::uint64_t seed, StageLog* log = nullptr);
model::ModelParams classifier_full(model::ModelParams params, const data::LabeledSeriesSet& train,
                                   const FinetuneSchedule& schedule, const PatchSetup& patches,
                                   std::uint64_t seed, StageLog* log = nullptr);

struct ClassMetrics {
  double accuracy = 0.0;
  double precision = 0.0;  // macro
  double recall = 0.0;     // macro
  double f1 = 0.0;         // macro
  std::vector<double> per_class_precision;
  std::vector<double> per_class_recall;
  std::vector<double> per_class_f1;
};

// Macro averages over `classes`; 0/0 counts as 0 for a class.
ClassMetrics classification_metrics(std::span<const int> predicted, std::span<const int> actual,
                                    std::size_t classes);
std::vector<int> predict_labels(const model::ModelParams& params, const data::LabeledSeriesSet& set,
                                const PatchSetup& patches);
ClassMetrics evaluate_classification(const model::ModelParams& params, const data::LabeledSeriesSet& test,
                                     const PatchSetup& patches);

}  // namespace pits::finetune
