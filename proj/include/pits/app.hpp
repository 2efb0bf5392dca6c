#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pits/finetune.hpp"
#include "pits/pretrain.hpp"
#include "pits/toy.hpp"

namespace pits::app {

inline constexpr int kOutputFormatVersion = 1;
inline constexpr const char* kOutRootEnv = "PITS_OUT_ROOT";

struct KeySpec {
  std::string_view key;
  std::string_view default_value;
  std::string_view help;
};
// Every accepted config key; anything else is rejected.
const std::vector<KeySpec>& known_keys();

// Flat key=value configuration. Values are stored as text and parsed on
// access, so a bad value is reported with its key.
class RunConfig {
 public:
  // `command` selects command-scoped defaults ("pretrain", "experiment shift", ...).
  explicit RunConfig(std::string_view command = {});

  void set(const std::string& key, const std::string& value);
  // Lines "key = value"; '#' starts a comment; blank lines ignored.
  void load_file(const std::filesystem::path& path);
  bool is_default(const std::string& key) const;

  const std::string& str(const std::string& key) const;
  std::size_t size(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  std::vector<std::uint64_t> u64_list(const std::string& key) const;

  // 16 hex digits of FNV-1a over "command\n" + sorted "key=value\n",
  // skipping keys that cannot change results (out, threads).
  std::string hash() const;
  const std::string& command() const { return command_; }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::string command_;
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

// Typed views of a config for each pipeline stage.
pretrain::PretrainConfig pretrain_config(const RunConfig& cfg);
finetune::FinetuneSchedule finetune_schedule(const RunConfig& cfg);
finetune::SupervisedConfig supervised_config(const RunConfig& cfg);
// stride/pad "auto" resolve to P / none for self-supervised models.
finetune::PatchSetup patch_setup(const RunConfig& cfg);

data::TimeSeriesDataset load_dataset(const RunConfig& cfg);

// Stacks equal-length series so that windows of length T with stride T are
// exactly the individual series.
data::WindowSet series_windows(const data::LabeledSeriesSet& set);

// Distribution-shift study: one PI-task and one PD-task model per seed,
// trained on the base series, linear-probed on it, then scored on every grid
// point. Grid MSEs are averaged over seeds.
struct ShiftOptions {
  toy::ShiftToyConfig toy = toy::ShiftToyConfig::default_grid();
  model::EncoderKind kind = model::EncoderKind::mlp;
  std::size_t patch_len = 12;
  std::size_t dim = 32;
  double dropout = 0.2;
  std::size_t pretrain_epochs = 20;
  std::size_t batch_size = 32;
  std::size_t probe_epochs = 20;
  double lr = 1e-3;
  std::size_t window_stride = 1;
  std::size_t eval_stride = 8;
  std::vector<std::uint64_t> seeds = {2021, 2022, 2023};
  std::size_t threads = 1;
};

struct ShiftRow {
  double slope_delta = 0.0;
  double amp_delta = 0.0;
  double mse_pi = 0.0;
  double mse_pd = 0.0;
  double gap = 0.0;  // mse_pd - mse_pi
};

std::vector<ShiftRow> run_shift_experiment(const ShiftOptions& opts, std::ostream* progress = nullptr);
// |slope delta| and |amplitude delta|, each scaled by its largest grid value, summed.
double shift_severity(const ShiftRow& row, const std::vector<ShiftRow>& grid);

// Class-structure study: a PI-pretrained encoder against a frozen random one,
// both linear-probed on the same split.
struct ClassToyOptions {
  toy::ClassToyConfig toy;
  model::EncoderKind kind = model::EncoderKind::mlp;
  // D <= P: the representation compresses each patch
  std::size_t patch_len = 16;
  std::size_t dim = 16;
  double dropout = 0.2;
  pretrain::Task task = pretrain::Task::pi;
  std::size_t pretrain_epochs = 50;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  std::size_t probe_epochs = 300;
  double probe_lr = 1e-2;
  double head_dropout = 0.2;
  model::Representation repr = model::Representation::z2;
  double train_fraction = 0.5;
  model::Aggregate agg = model::Aggregate::max;
  std::vector<std::uint64_t> seeds = {2021, 2022, 2023};
};

struct ClassToySeedResult {
  std::uint64_t seed = 0;
  finetune::ClassMetrics pretrained;
  finetune::ClassMetrics random;
  model::ModelParams encoder;  // pretrained encoder of this seed
  data::LabeledSeriesSet set;
};

struct ClassToyResult {
  std::vector<ClassToySeedResult> seeds;
  double mean_acc_pretrained = 0.0;
  double mean_acc_random = 0.0;
};

ClassToyResult run_classtoy_experiment(const ClassToyOptions& opts, std::ostream* progress = nullptr);

// CSV rows "series_id,channel,patch_index,d0..d{D-1}" for every patch of
// every series (full length, patched with the encoder's P and stride).
void write_embeddings_csv(const model::ModelParams& params, const data::LabeledSeriesSet& set,
                          const finetune::PatchSetup& patches, const std::filesystem::path& path);

// Entry point shared by the binary and the tests. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pits::app
