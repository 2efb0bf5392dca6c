#include <algorithm>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "pits/finetune.hpp"
#include "pits/parallel.hpp"

namespace pits::finetune {
namespace {

using model::ModelParams;
using model::ParamGroup;

// Computes the batch loss and fills grads (already zeroed) for one step.
using BatchLoss = std::function<double(ModelParams&, std::span<const std::size_t>, Rng&, bool train_encoder)>;

void run_stage(ModelParams& params, std::size_t items, std::size_t epochs, std::size_t batch_size,
               std::size_t max_steps, double lr, bool train_encoder, const Rng& stage_rng,
               const BatchLoss& batch_loss, StageLog* log) {
  if (epochs == 0 || items == 0) return;
  if (batch_size == 0) throw std::invalid_argument("finetune: batch_size must be >= 1");
  pretrain::AdamConfig acfg;
  acfg.lr = lr;
  std::vector<model::Param*> group = params.params(ParamGroup::head);
  if (train_encoder) {
    auto enc = params.params(ParamGroup::encoder);
    group.insert(group.begin(), enc.begin(), enc.end());
  }
  pretrain::Adam adam(group, acfg);
  std::vector<std::size_t> order(items);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    if (max_steps > 0 && step >= max_steps) break;
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = stage_rng.derive(streams::shuffle, epoch);
    shuffle.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < items; begin += batch_size) {
      if (max_steps > 0 && step >= max_steps) break;
      const std::size_t end = std::min(items, begin + batch_size);
      params.zero_grads();
      Rng drop = stage_rng.derive(streams::dropout, step);
      total += batch_loss(params, std::span<const std::size_t>(order.data() + begin, end - begin), drop,
                          train_encoder);
      adam.step();
      ++batches;
      ++step;
    }
    if (log != nullptr && batches > 0) log->epoch_losses.push_back(total / static_cast<double>(batches));
  }
  if (log != nullptr) log->steps += step;
}

void check_forecast_head(const ModelParams& params, const data::WindowSet& windows, const PatchSetup& patches) {
  const auto& head = params.forecast_head();
  const std::size_t n = data::patch_count(windows.input_len(), patches.patch_len, patches.stride, patches.pad);
  if (head.num_patches != n) {
    throw std::invalid_argument("forecast head built for N = " + std::to_string(head.num_patches) +
                                ", patching gives N = " + std::to_string(n));
  }
  if (head.horizon != windows.horizon()) {
    throw std::invalid_argument("forecast head built for H = " + std::to_string(head.horizon) +
                                ", windows have H = " + std::to_string(windows.horizon()));
  }
}

BatchLoss forecast_loss(const data::WindowSet& windows, const PatchSetup& patches, double head_dropout) {
  return [&windows, patches, head_dropout](ModelParams& params, std::span<const std::size_t> idx, Rng& rng,
                                           bool train_encoder) {
    const data::ForecastBatch fb = data::make_forecast_batch(windows, idx, patches.patch_len, patches.stride, patches.pad);
    const auto cache = model::encoder_forward(params.encoder, fb.x.patches, fb.x.series(), fb.x.num_patches);
    const bool use_z1 = params.repr == model::Representation::z1;
    const Matrix& z = use_z1 ? cache.z1 : cache.z2;
    model::HeadCache hc;
    const Matrix y = model::forecast_forward(params.forecast_head(), z, fb.x.series(), head_dropout, true, rng, &hc);
    const ops::LossGrad lg = ops::mse_loss(y, fb.target_norm);
    const Matrix dz = model::forecast_backward(params.forecast_head(), hc, lg.grad);
    if (train_encoder) {
      model::encoder_backward(params.encoder, cache, use_z1 ? dz : Matrix(), use_z1 ? Matrix() : dz);
    }
    return lg.loss;
  };
}

BatchLoss classify_loss(const data::LabeledSeriesSet& set, const PatchSetup& patches, double head_dropout) {
  return [&set, patches, head_dropout](ModelParams& params, std::span<const std::size_t> idx, Rng& rng,
                                       bool train_encoder) {
    const data::ClassBatch cb = data::make_class_batch(set, idx, patches.patch_len, patches.stride, patches.pad);
    const auto cache = model::encoder_forward(params.encoder, cb.x.patches, cb.x.series(), cb.x.num_patches);
    const bool use_z1 = params.repr == model::Representation::z1;
    const Matrix& z = use_z1 ? cache.z1 : cache.z2;
    model::HeadCache hc;
    const Matrix logits = model::classify_forward(params.classifier_head(), z, cb.x.instances, cb.x.channels,
                                                  head_dropout, true, rng, &hc);
    const ops::LossGrad lg = ops::softmax_cross_entropy(logits, cb.labels);
    const Matrix dz =
        model::classify_backward(params.classifier_head(), hc, lg.grad, cb.x.instances, cb.x.channels);
    if (train_encoder) {
      model::encoder_backward(params.encoder, cache, use_z1 ? dz : Matrix(), use_z1 ? Matrix() : dz);
    }
    return lg.loss;
  };
}

void check_labels(const ModelParams& params, const data::LabeledSeriesSet& set) {
  const std::size_t k = params.classifier_head().classes;
  for (int y : set.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw std::invalid_argument("label " + std::to_string(y) + " outside the classifier's " +
                                  std::to_string(k) + " classes");
    }
  }
}

}  // namespace

ModelParams linear_probe(ModelParams params, const data::WindowSet& train, const FinetuneSchedule& schedule,
                         const PatchSetup& patches, std::uint64_t seed, StageLog* log) {
  check_forecast_head(params, train, patches);
  run_stage(params, train.size(), schedule.probe_epochs, schedule.batch_size, schedule.max_steps,
            schedule.lr_probe, false, Rng(seed).derive("probe"),
            forecast_loss(train, patches, schedule.head_dropout), log);
  return params;
}

ModelParams full_finetune(ModelParams params, const data::WindowSet& train, const FinetuneSchedule& schedule,
                          const PatchSetup& patches, std::uint64_t seed, StageLog* log) {
  check_forecast_head(params, train, patches);
  run_stage(params, train.size(), schedule.full_epochs, schedule.batch_size, schedule.max_steps,
            schedule.lr_full, true, Rng(seed).derive("full"),
            forecast_loss(train, patches, schedule.head_dropout), log);
  return params;
}

ModelParams finetune_forecast(ModelParams params, const data::WindowSet& train, const FinetuneSchedule& schedule,
                              const PatchSetup& patches, std::uint64_t seed) {
  params = linear_probe(std::move(params), train, schedule, patches, seed);
  return full_finetune(std::move(params), train, schedule, patches, seed);
}

PatchSetup SupervisedConfig::patches() const {
  return {patch_len, stride == 0 ? std::max<std::size_t>(1, patch_len / 2) : stride, pad};
}

ModelParams train_supervised(const SupervisedConfig& cfg, const data::WindowSet& train, StageLog* log) {
  const PatchSetup ps = cfg.patches();
  const std::size_t n = data::patch_count(cfg.input_len, ps.patch_len, ps.stride, ps.pad);
  const Rng root(cfg.seed);
  ModelParams params = model::init_params(cfg.kind, cfg.patch_len, cfg.dim, n, root);
  params.repr = cfg.repr;
  params.config_hash = cfg.config_hash;
  model::init_forecast_head(params, cfg.horizon, root);
  check_forecast_head(params, train, ps);
  run_stage(params, train.size(), cfg.epochs, cfg.batch_size, cfg.max_steps, cfg.lr, true,
            root.derive("supervised"), forecast_loss(train, ps, cfg.head_dropout), log);
  return params;
}

ModelParams train_supervised(const SupervisedConfig& cfg, const data::TimeSeriesDataset& ds, StageLog* log) {
  const auto windows =
      data::make_forecast_windows(ds, data::SplitName::train, cfg.input_len, cfg.horizon, cfg.window_stride);
  return train_supervised(cfg, windows, log);
}

Matrix predict_forecast(const ModelParams& params, const data::WindowSet& windows,
                        std::span<const std::size_t> indices, const PatchSetup& patches) {
  const data::ForecastBatch fb =
      data::make_forecast_batch(windows, indices, patches.patch_len, patches.stride, patches.pad);
  const model::Embeddings e = model::encode(params, fb.x);
  const Matrix y = model::forecast(params, model::select(e, params.repr), fb.x.series());
  Matrix out(y.rows(), y.cols());
  const std::size_t channels = fb.x.channels;
  for (std::size_t s = 0; s < y.rows(); ++s) {
    const std::size_t b = s / channels;
    const std::size_t c = s % channels;
    for (std::size_t h = 0; h < y.cols(); ++h) {
      out(s, h) = y(s, h) * fb.stats.std_at(b, c) + fb.stats.mean_at(b, c);
    }
  }
  return out;
}

ForecastMetrics evaluate_forecast(const ModelParams& params, const data::WindowSet& test, const PatchSetup& patches,
                                  std::size_t threads) {
  check_forecast_head(params, test, patches);
  constexpr std::size_t kChunk = 64;
  const std::size_t chunks = (test.size() + kChunk - 1) / kChunk;
  const std::size_t horizon = test.horizon();
  // per-chunk sums, reduced in chunk order afterwards
  std::vector<std::vector<double>> sq(chunks, std::vector<double>(horizon, 0.0));
  std::vector<std::vector<double>> ab(chunks, std::vector<double>(horizon, 0.0));
  parallel_for(chunks, threads, [&](std::size_t ci) {
    const std::size_t begin = ci * kChunk;
    const std::size_t end = std::min(test.size(), begin + kChunk);
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const Matrix pred = predict_forecast(params, test, idx, patches);
    const data::ForecastBatch truth = data::make_forecast_batch(test, idx, patches.patch_len, patches.stride, patches.pad);
    for (std::size_t r = 0; r < pred.rows(); ++r) {
      for (std::size_t h = 0; h < horizon; ++h) {
        const double d = pred(r, h) - truth.target_raw(r, h);
        sq[ci][h] += d * d;
        ab[ci][h] += std::abs(d);
      }
    }
  });
  ForecastMetrics m;
  m.mse_per_step.assign(horizon, 0.0);
  m.mae_per_step.assign(horizon, 0.0);
  for (std::size_t ci = 0; ci < chunks; ++ci) {
    for (std::size_t h = 0; h < horizon; ++h) {
      m.mse_per_step[h] += sq[ci][h];
      m.mae_per_step[h] += ab[ci][h];
    }
  }
  const std::size_t rows = test.size() * test.channels();
  m.count = rows * horizon;
  for (std::size_t h = 0; h < horizon; ++h) {
    m.mse += m.mse_per_step[h];
    m.mae += m.mae_per_step[h];
    m.mse_per_step[h] /= static_cast<double>(rows);
    m.mae_per_step[h] /= static_cast<double>(rows);
  }
  if (m.count > 0) {
    m.mse /= static_cast<double>(m.count);
    m.mae /= static_cast<double>(m.count);
  }
  return m;
}

ModelParams classifier_probe(ModelParams params, const data::LabeledSeriesSet& train, const FinetuneSchedule& schedule,
                             const PatchSetup& patches, std::uint64_t seed, StageLog* log) {
  check_labels(params, train);
  run_stage(params, train.size(), schedule.probe_epochs, schedule.batch_size, schedule.max_steps,
            schedule.lr_probe, false, Rng(seed).derive("probe"),
            classify_loss(train, patches, schedule.head_dropout), log);
  return params;
}

ModelParams classifier_full(ModelParams params, const data::LabeledSeriesSet& train, const FinetuneSchedule& schedule,
                            const PatchSetup& patches, std::uint64_t seed, StageLog* log) {
  check_labels(params, train);
  run_stage(params, train.size(), schedule.full_epochs, schedule.batch_size, schedule.max_steps,
            schedule.lr_full, true, Rng(seed).derive("full"),
            classify_loss(train, patches, schedule.head_dropout), log);
  return params;
}

std::vector<int> predict_labels(const ModelParams& params, const data::LabeledSeriesSet& set,
                                const PatchSetup& patches) {
  std::vector<int> out;
  constexpr std::size_t kChunk = 64;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < set.size(); begin += kChunk) {
    const std::size_t end = std::min(set.size(), begin + kChunk);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const data::ClassBatch cb = data::make_class_batch(set, idx, patches.patch_len, patches.stride, patches.pad);
    const model::Embeddings e = model::encode(params, cb.x);
    const Matrix logits = model::classify(params, model::select(e, params.repr), cb.x.instances, cb.x.channels);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
      const auto row = logits.row(r);
      out.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
    }
  }
  return out;
}

ClassMetrics evaluate_classification(const ModelParams& params, const data::LabeledSeriesSet& test,
                                     const PatchSetup& patches) {
  check_labels(params, test);
  const auto pred = predict_labels(params, test, patches);
  return classification_metrics(pred, test.labels, params.classifier_head().classes);
}

}  // namespace pits::finetune
