#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pits/data.hpp"
#include "pits/model.hpp"

namespace pits::pretrain {

// Pretext tasks. pi: autoencode every patch. pd: predict masked patches from
// the zero-filled sequence. zero_xu: predict unmasked patches from all-zero
// input. zero_zero: reconstruct zeros from zeros. pi_cl is pi with the
// complementary contrastive loss switched on.
enum class Task { pi, pi_cl, pd, zero_zero, zero_xu };
Task parse_task(const std::string& s);
std::string to_string(Task t);

enum class Reduce { mean, sum };
Reduce parse_reduce(const std::string& s);
std::string to_string(Reduce r);

struct ReconLoss {
  double sum = 0.0;   // sum of squared errors over selected patches
  double mean = 0.0;  // sum / (selected patches * P)
};

// Squared error over all patch rows.
ReconLoss recon_loss(const Matrix& x, const Matrix& x_hat);
// Squared error over rows with weight 1 (weights indexed by patch row).
ReconLoss recon_loss(const Matrix& x, const Matrix& x_hat, std::span<const std::uint8_t> row_weights);

// Layer-1 embeddings of the two complementary views, (S*N) x D each with
// rows ordered (series, patch).
struct ViewEmbeddings {
  std::size_t series = 0;
  std::size_t num_patches = 0;
  Matrix view1;
  Matrix view2;
};

struct LevelLoss {
  double loss = 0.0;
  Matrix d_view1;  // filled only when gradients are requested
  Matrix d_view2;
};

// For each series the 2N embeddings (view 1 then view 2) are scored by dot
// product; anchor n's positive is n + N (mod 2N) and the softmax runs over
// every other embedding. Loss is the mean negative log-probability.
LevelLoss contrastive_level_loss(const Matrix& view1, const Matrix& view2, std::size_t series,
                                 std::size_t num_patches, bool want_grad = false,
                                 std::size_t threads = 0);

// Patch counts per level: N, floor(N/2), ... down to 1.
std::vector<std::size_t> level_sizes(std::size_t num_patches);

struct ClOptions {
  Reduce level_reduce = Reduce::mean;
  bool include_level0 = true;
  std::size_t threads = 0;
};

struct HierarchicalLoss {
  double total = 0.0;
  std::vector<double> per_level;
  Matrix d_view1;
  Matrix d_view2;
};

HierarchicalLoss hierarchical_cl_loss(const ViewEmbeddings& views, const ClOptions& opts,
                                      bool want_grad = false);

struct ObjectiveOptions {
  Task task = Task::pi_cl;
  bool cl = true;
  Reduce recon_reduce = Reduce::mean;
  ClOptions cl_opts;
};
// Options for a task with its default contrastive setting (on for pi_cl only).
ObjectiveOptions objective_for(Task task);

struct LossBreakdown {
  double recon = 0.0;       // term entering the total (per recon_reduce)
  double recon_mean = 0.0;  // normalized per element, for logging
  std::vector<double> cl_levels;
  double cl_total = 0.0;
  double total = 0.0;
};

// Complementary views of the layer-1 embeddings. PI encoders reuse the
// real-patch pass plus one zero-patch evaluation; the mixer is run on m*x and
// (1-m)*x.
ViewEmbeddings build_views(const model::ModelParams& params, const data::PatchBatch& batch,
                           const data::MaskPair& masks);

// Full pretraining objective; grads are zeroed and then filled for every
// encoder and reconstruction-head tensor. Dropout before the reconstruction
// head draws from `dropout_rng` (passed by value so a copy replays the mask).
LossBreakdown pits_loss(model::ModelParams& params, const data::PatchBatch& batch,
                        const data::MaskPair& masks, const ObjectiveOptions& opts, Rng dropout_rng,
                        bool training = true);

// PD baseline: sum over masked patches of the squared error when the encoder
// sees the zero-filled sequence. Forward only.
double pd_task_loss(const model::ModelParams& params, const data::PatchBatch& batch,
                    const data::MaskPair& masks);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moments for a fixed, ordered list of parameters.
class Adam {
 public:
  Adam(std::vector<model::Param*> params, AdamConfig cfg);

  // Throws std::runtime_error naming the tensor when a gradient is not finite.
  void step();
  std::size_t steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<model::Param*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::size_t step_ = 0;
};

struct PretrainConfig {
  Task task = Task::pi_cl;
  bool cl = true;
  model::EncoderKind kind = model::EncoderKind::mlp;
  std::size_t input_len = 512;
  std::size_t patch_len = 12;
  std::size_t stride = 12;
  data::PadMode pad = data::PadMode::none;
  std::size_t dim = 128;
  double dropout = 0.2;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::size_t max_steps = 0;  // 0: no cap
  std::size_t window_stride = 1;
  Reduce recon_reduce = Reduce::mean;
  ClOptions cl_opts;
  AdamConfig adam;
  std::uint64_t seed = 2021;
  std::string config_hash;

  std::size_t num_patches() const { return data::patch_count(input_len, patch_len, stride, pad); }
  ObjectiveOptions objective() const;
  // Throws std::invalid_argument before any compute.
  void validate() const;
};

struct LogEntry {
  std::size_t epoch = 0;
  std::size_t step = 0;
  LossBreakdown loss;  // averaged over the epoch's steps
};

struct PretrainResult {
  model::ModelParams params;
  std::vector<LogEntry> log;
  std::size_t steps = 0;
};

using LogCallback = std::function<void(const LogEntry&)>;

PretrainResult run_pretraining(const PretrainConfig& cfg, const data::WindowSet& windows,
                               const LogCallback& on_epoch = {});
// Uses the train split of an already split dataset.
PretrainResult run_pretraining(const PretrainConfig& cfg, const data::TimeSeriesDataset& ds,
                               const LogCallback& on_epoch = {});

// Inference-mode (no dropout) normalized reconstruction error averaged over
// every window, for the given task's input/target convention.
double evaluate_recon(const model::ModelParams& params, const PretrainConfig& cfg,
                      const data::WindowSet& windows);

}  // namespace pits::pretrain
