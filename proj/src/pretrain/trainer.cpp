#include <numeric>
#include <stdexcept>

#include "pits/pretrain.hpp"

namespace pits::pretrain {
namespace {

void accumulate(LossBreakdown& acc, const LossBreakdown& l) {
  acc.recon += l.recon;
  acc.recon_mean += l.recon_mean;
  acc.cl_total += l.cl_total;
  acc.total += l.total;
  if (acc.cl_levels.size() < l.cl_levels.size()) acc.cl_levels.resize(l.cl_levels.size(), 0.0);
  for (std::size_t i = 0; i < l.cl_levels.size(); ++i) acc.cl_levels[i] += l.cl_levels[i];
}

void divide(LossBreakdown& acc, double n) {
  acc.recon /= n;
  acc.recon_mean /= n;
  acc.cl_total /= n;
  acc.total /= n;
  for (auto& v : acc.cl_levels) v /= n;
}

}  // namespace

ObjectiveOptions PretrainConfig::objective() const {
  ObjectiveOptions o;
  o.task = task;
  o.cl = cl;
  o.recon_reduce = recon_reduce;
  o.cl_opts = cl_opts;
  return o;
}

void PretrainConfig::validate() const {
  if (patch_len == 0 || stride == 0 || dim == 0) throw std::invalid_argument("pretrain: P, stride and D must be >= 1");
  if (input_len < patch_len && pad == data::PadMode::none) {
    throw std::invalid_argument("pretrain: L = " + std::to_string(input_len) + " is shorter than P = " +
                                std::to_string(patch_len));
  }
  if (batch_size == 0) throw std::invalid_argument("pretrain: batch_size must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("pretrain: dropout must be in [0, 1)");
  if (!(adam.lr > 0.0)) throw std::invalid_argument("pretrain: lr must be > 0");
  if (window_stride == 0) throw std::invalid_argument("pretrain: window_stride must be >= 1");
  const std::size_t n = num_patches();
  if (n < 2) throw std::invalid_argument("pretrain: need at least 2 patches for masking, got N = " + std::to_string(n));
  if (task == Task::pi_cl && !cl) throw std::invalid_argument("pretrain: task pi+cl requires cl on");
}

PretrainResult run_pretraining(const PretrainConfig& cfg, const data::WindowSet& windows,
                               const LogCallback& on_epoch) {
  cfg.validate();
  if (windows.input_len() != cfg.input_len) {
    throw std::invalid_argument("pretrain: windows have L = " + std::to_string(windows.input_len()) +
                                ", config has L = " + std::to_string(cfg.input_len));
  }
  const Rng root(cfg.seed);
  PretrainResult res;
  res.params = model::init_params(cfg.kind, cfg.patch_len, cfg.dim, cfg.num_patches(), root, cfg.dropout);
  res.params.config_hash = cfg.config_hash;
  Adam adam(res.params.params(model::ParamGroup::pretrain), cfg.adam);
  const ObjectiveOptions objective = cfg.objective();

  std::vector<std::size_t> order(windows.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.max_steps > 0 && step >= cfg.max_steps) break;
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = root.derive(streams::shuffle, epoch);
    shuffle.shuffle(std::span<std::size_t>(order));

    LossBreakdown epoch_acc;
    std::size_t epoch_steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      if (cfg.max_steps > 0 && step >= cfg.max_steps) break;
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const data::ForecastBatch fb = data::make_forecast_batch(windows, idx, cfg.patch_len, cfg.stride, cfg.pad);
      Rng mask_rng = root.derive(streams::masking, step);
      const data::MaskPair masks =
          data::complementary_masks(fb.x.instances, fb.x.channels, fb.x.num_patches, mask_rng);
      const LossBreakdown loss =
          pits_loss(res.params, fb.x, masks, objective, root.derive(streams::dropout, step), true);
      adam.step();
      accumulate(epoch_acc, loss);
      ++epoch_steps;
      ++step;
    }
    if (epoch_steps == 0) break;
    divide(epoch_acc, static_cast<double>(epoch_steps));
    LogEntry entry{epoch, step, epoch_acc};
    if (on_epoch) on_epoch(entry);
    res.log.push_back(std::move(entry));
  }
  res.steps = step;
  return res;
}

PretrainResult run_pretraining(const PretrainConfig& cfg, const data::TimeSeriesDataset& ds,
                               const LogCallback& on_epoch) {
  const auto windows = data::make_input_windows(ds, data::SplitName::train, cfg.input_len, cfg.window_stride);
  return run_pretraining(cfg, windows, on_epoch);
}

double evaluate_recon(const model::ModelParams& params, const PretrainConfig& cfg, const data::WindowSet& windows) {
  const Rng root(cfg.seed);
  ObjectiveOptions objective = cfg.objective();
  objective.cl = false;
  model::ModelParams work = params;
  double total = 0.0;
  std::size_t batches = 0;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < windows.size(); begin += cfg.batch_size) {
    const std::size_t end = std::min(windows.size(), begin + cfg.batch_size);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const data::ForecastBatch fb = data::make_forecast_batch(windows, idx, cfg.patch_len, cfg.stride, cfg.pad);
    Rng mask_rng = root.derive("eval_masking", batches);
    const auto masks = data::complementary_masks(fb.x.instances, fb.x.channels, fb.x.num_patches, mask_rng);
    total += pits_loss(work, fb.x, masks, objective, Rng(0), false).recon_mean *
             static_cast<double>(end - begin);
    ++batches;
  }
  return windows.size() > 0 ? total / static_cast<double>(windows.size()) : 0.0;
}

}  // namespace pits::pretrain
