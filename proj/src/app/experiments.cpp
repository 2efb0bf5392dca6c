#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "pits/app.hpp"

namespace pits::app {

data::WindowSet series_windows(const data::LabeledSeriesSet& set) {
  if (set.size() == 0) throw std::invalid_argument("labeled set is empty");
  const std::size_t len = set.series.front().rows();
  const std::size_t channels = set.series.front().cols();
  Matrix stacked(len * set.size(), channels);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const Matrix& s = set.series[i];
    if (s.rows() != len || s.cols() != channels) {
      throw std::invalid_argument("series '" + set.ids[i] + "' is " + s.shape() + ", expected [" +
                                  std::to_string(len) + "x" + std::to_string(channels) + "]");
    }
    std::copy(s.data(), s.data() + s.size(), stacked.data() + i * len * channels);
  }
  return data::WindowSet(std::move(stacked), len, 0, len);
}

std::vector<ShiftRow> run_shift_experiment(const ShiftOptions& opts, std::ostream* progress) {
  if (opts.seeds.empty()) throw std::invalid_argument("shift: no seeds");
  const auto& tc = opts.toy;
  const finetune::PatchSetup ps{opts.patch_len, opts.patch_len, data::PadMode::none};
  auto schedule = finetune::FinetuneSchedule::with_probe_epochs(opts.probe_epochs);
  schedule.lr_probe = opts.lr;
  schedule.batch_size = opts.batch_size;

  const std::size_t points = tc.slope_deltas.size() * tc.amplitude_deltas.size();
  std::vector<ShiftRow> rows(points);
  for (const std::uint64_t seed : opts.seeds) {
    const toy::ShiftToy toy = toy::gen_shift_toy(tc, Rng(seed).derive(streams::data));
    const data::WindowSet pre(toy.train.values, tc.input_len, 0, opts.window_stride);
    const data::WindowSet fc(toy.train.values, tc.input_len, tc.horizon, opts.window_stride);
    std::vector<data::WindowSet> tests;
    tests.reserve(points);
    for (const auto& p : toy.tests) tests.emplace_back(p.test.values, tc.input_len, tc.horizon, opts.eval_stride);

    for (const pretrain::Task task : {pretrain::Task::pi, pretrain::Task::pd}) {
      pretrain::PretrainConfig pc;
      pc.task = task;
      pc.cl = false;
      pc.kind = opts.kind;
      pc.input_len = tc.input_len;
      pc.patch_len = opts.patch_len;
      pc.stride = opts.patch_len;
      pc.dim = opts.dim;
      pc.dropout = opts.dropout;
      pc.batch_size = opts.batch_size;
      pc.epochs = opts.pretrain_epochs;
      pc.window_stride = opts.window_stride;
      pc.adam.lr = opts.lr;
      pc.seed = seed;
      pc.cl_opts.threads = opts.threads;
      model::ModelParams params = pretrain::run_pretraining(pc, pre).params;
      model::init_forecast_head(params, tc.horizon, Rng(seed).derive("head"));
      params = finetune::linear_probe(std::move(params), fc, schedule, ps, seed);
      for (std::size_t k = 0; k < points; ++k) {
        const double mse = finetune::evaluate_forecast(params, tests[k], ps, opts.threads).mse;
        (task == pretrain::Task::pi ? rows[k].mse_pi : rows[k].mse_pd) += mse;
      }
      if (progress != nullptr) {
        *progress << "shift: seed " << seed << " task " << pretrain::to_string(task) << " done\n";
      }
    }
  }
  const auto n = static_cast<double>(opts.seeds.size());
  for (std::size_t k = 0; k < points; ++k) {
    rows[k].slope_delta = tc.slope_deltas[k / tc.amplitude_deltas.size()];
    rows[k].amp_delta = tc.amplitude_deltas[k % tc.amplitude_deltas.size()];
    rows[k].mse_pi /= n;
    rows[k].mse_pd /= n;
    rows[k].gap = rows[k].mse_pd - rows[k].mse_pi;
  }
  return rows;
}

double shift_severity(const ShiftRow& row, const std::vector<ShiftRow>& grid) {
  double max_s = 0.0;
  double max_a = 0.0;
  for (const auto& r : grid) {
    max_s = std::max(max_s, std::abs(r.slope_delta));
    max_a = std::max(max_a, std::abs(r.amp_delta));
  }
  double sev = 0.0;
  if (max_s > 0.0) sev += std::abs(row.slope_delta) / max_s;
  if (max_a > 0.0) sev += std::abs(row.amp_delta) / max_a;
  return sev;
}

ClassToyResult run_classtoy_experiment(const ClassToyOptions& opts, std::ostream* progress) {
  if (opts.seeds.empty()) throw std::invalid_argument("classtoy: no seeds");
  const finetune::PatchSetup ps{opts.patch_len, opts.patch_len, data::PadMode::none};
  auto schedule = finetune::FinetuneSchedule::with_probe_epochs(opts.probe_epochs);
  schedule.lr_probe = opts.probe_lr;
  schedule.batch_size = opts.batch_size;
  schedule.head_dropout = opts.head_dropout;

  ClassToyResult out;
  for (const std::uint64_t seed : opts.seeds) {
    ClassToySeedResult r;
    r.seed = seed;
    r.set = toy::gen_class_toy(opts.toy, Rng(seed).derive(streams::data));
    const auto [train, test] = data::split_labeled(r.set, opts.train_fraction);

    pretrain::PretrainConfig pc;
    pc.task = opts.task;
    pc.cl = opts.task == pretrain::Task::pi_cl;
    pc.kind = opts.kind;
    pc.input_len = opts.toy.length;
    pc.patch_len = opts.patch_len;
    pc.stride = opts.patch_len;
    pc.dim = opts.dim;
    pc.dropout = opts.dropout;
    pc.batch_size = opts.batch_size;
    pc.epochs = opts.pretrain_epochs;
    pc.adam.lr = opts.lr;
    pc.seed = seed;
    r.encoder = pretrain::run_pretraining(pc, series_windows(train)).params;
    // the pretraining run starts from this exact initialization
    model::ModelParams random =
        model::init_params(pc.kind, pc.patch_len, pc.dim, pc.num_patches(), Rng(seed), pc.dropout);

    const Rng head_rng = Rng(seed).derive("head");
    for (auto* params : {&r.encoder, &random}) {
      model::ModelParams probed = *params;
      probed.repr = opts.repr;
      model::init_classifier_head(probed, opts.agg, opts.toy.num_classes, head_rng);
      probed = finetune::classifier_probe(std::move(probed), train, schedule, ps, seed);
      const auto m = finetune::evaluate_classification(probed, test, ps);
      (params == &random ? r.random : r.pretrained) = m;
    }
    if (progress != nullptr) {
      *progress << "classtoy: seed " << seed << " acc pretrained " << r.pretrained.accuracy << " random "
                << r.random.accuracy << "\n";
    }
    out.mean_acc_pretrained += r.pretrained.accuracy;
    out.mean_acc_random += r.random.accuracy;
    out.seeds.push_back(std::move(r));
  }
  out.mean_acc_pretrained /= static_cast<double>(opts.seeds.size());
  out.mean_acc_random /= static_cast<double>(opts.seeds.size());
  return out;
}

void write_embeddings_csv(const model::ModelParams& params, const data::LabeledSeriesSet& set,
                          const finetune::PatchSetup& patches, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << std::setprecision(17);
  os << "series_id,channel,patch_index";
  for (std::size_t d = 0; d < params.encoder.dim; ++d) os << ",d" << d;
  os << "\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::size_t idx[] = {i};
    const data::ClassBatch cb = data::make_class_batch(set, idx, patches.patch_len, patches.stride, patches.pad);
    const model::Embeddings e = model::encode(params, cb.x);
    const Matrix& z = model::select(e, params.repr);
    for (std::size_t c = 0; c < cb.x.channels; ++c) {
      for (std::size_t n = 0; n < cb.x.num_patches; ++n) {
        os << set.ids[i] << "," << c << "," << n;
        for (const double v : z.row(cb.x.row(0, c, n))) os << "," << v;
        os << "\n";
      }
    }
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace pits::app
