#include <cmath>
#include <vector>

#include "doctest.h"
#include "pits/finetune.hpp"
#include "pits/pretrain.hpp"
#include "pits/toy.hpp"
#include "test_util.hpp"

using namespace pits;

namespace {

constexpr std::size_t kL = 24;
constexpr std::size_t kH = 6;
constexpr std::size_t kP = 6;

data::TimeSeriesDataset sine(double scale = 1.0) {
  auto ds = toy::sine_trend_series("s", 0.0, 1.0, 12.0, 240, 0.05, Rng(1));
  for (auto& v : ds.values.values()) v *= scale;
  return data::chronological_split(std::move(ds), {0.6, 0.2, 0.2});
}

model::ModelParams forecaster(std::uint64_t seed = 2) {
  auto p = model::init_params(model::EncoderKind::mlp, kP, 8, kL / kP, Rng(seed));
  model::init_forecast_head(p, kH, Rng(seed).derive("head"));
  return p;
}

finetune::FinetuneSchedule schedule(std::size_t probe) {
  auto s = finetune::FinetuneSchedule::with_probe_epochs(probe);
  s.lr_probe = 1e-2;
  s.lr_full = 1e-3;
  s.batch_size = 16;
  s.head_dropout = 0.0;
  return s;
}

const finetune::PatchSetup kPatches{kP, kP, data::PadMode::none};

// Mean squared deviation of each target from its own window's input mean.
double mean_baseline_mse(const data::WindowSet& ws) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const auto w = ws.at(i);
    for (std::size_t c = 0; c < ws.channels(); ++c) {
      double mean = 0.0;
      for (std::size_t t = 0; t < w.input.rows(); ++t) mean += w.input(t, c) / static_cast<double>(w.input.rows());
      for (std::size_t t = 0; t < w.target.rows(); ++t) {
        s += (w.target(t, c) - mean) * (w.target(t, c) - mean);
        ++n;
      }
    }
  }
  return s / static_cast<double>(n);
}

double last_value_mse(const data::WindowSet& ws) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const auto w = ws.at(i);
    for (std::size_t c = 0; c < ws.channels(); ++c) {
      const double last = w.input(w.input.rows() - 1, c);
      for (std::size_t t = 0; t < w.target.rows(); ++t) {
        s += (w.target(t, c) - last) * (w.target(t, c) - last);
        ++n;
      }
    }
  }
  return s / static_cast<double>(n);
}

}  // namespace

TEST_CASE("forecast metric fixtures") {
  const auto m = finetune::forecast_metrics(Matrix{{1, 2}}, Matrix{{0, 0}});
  CHECK(m.mse == 2.5);
  CHECK(m.mae == 1.5);
  CHECK(m.count == 2);
  CHECK(m.mse_per_step == std::vector<double>{1.0, 4.0});

  const Matrix same{{1, 2}, {3, 4}};
  const auto z = finetune::forecast_metrics(same, same);
  CHECK(z.mse == 0.0);
  CHECK(z.mae == 0.0);
}

TEST_CASE("classification metric fixtures") {
  SUBCASE("two classes") {
    const std::vector<int> pred = {0, 1, 1, 1};
    const std::vector<int> actual = {0, 0, 1, 1};
    const auto m = finetune::classification_metrics(pred, actual, 2);
    CHECK(m.accuracy == 0.75);
    CHECK(m.precision == (1.0 / 1.0 + 2.0 / 3.0) / 2.0);
    CHECK(m.recall == (1.0 / 2.0 + 2.0 / 2.0) / 2.0);
  }
  SUBCASE("all correct") {
    const std::vector<int> y = {0, 1, 2, 2};
    const auto m = finetune::classification_metrics(y, y, 3);
    CHECK(m.accuracy == 1.0);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
  }
  SUBCASE("absent classes contribute zero") {
    const std::vector<int> y = {1, 1};
    const auto m = finetune::classification_metrics(y, y, 3);
    CHECK(m.accuracy == 1.0);
    CHECK(m.per_class_precision == std::vector<double>{0.0, 1.0, 0.0});
    CHECK(m.recall == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
}

TEST_CASE("linear probe freezes the encoder") {
  const auto ds = sine();
  const auto train = data::make_forecast_windows(ds, data::SplitName::train, kL, kH);
  const auto test = data::make_forecast_windows(ds, data::SplitName::test, kL, kH);
  const auto p = forecaster();
  const auto probed = finetune::linear_probe(p, train, schedule(10), kPatches, 1);
  for (const auto t : {&model::EncoderParams::w1, &model::EncoderParams::b1, &model::EncoderParams::w2,
                        &model::EncoderParams::b2}) {
    CHECK((probed.encoder.*t).value == (p.encoder.*t).value);
  }
  CHECK(probed.forecast_head().w.value != p.forecast_head().w.value);
  CHECK(finetune::evaluate_forecast(probed, test, kPatches).mse < mean_baseline_mse(test));

  const auto none = finetune::linear_probe(p, train, schedule(0), kPatches, 1);
  CHECK(none.forecast_head().w.value == p.forecast_head().w.value);
}

TEST_CASE("full fine-tuning") {
  const auto ds = sine();
  const auto train = data::make_forecast_windows(ds, data::SplitName::train, kL, kH);
  CHECK(finetune::FinetuneSchedule::with_probe_epochs(10).follows_double_rule());
  CHECK(finetune::FinetuneSchedule::with_probe_epochs(10).full_epochs == 20);

  finetune::StageLog probe_log;
  finetune::StageLog full_log;
  auto p = finetune::linear_probe(forecaster(), train, schedule(5), kPatches, 1, &probe_log);
  const auto before = p.encoder.w1.value;
  p = finetune::full_finetune(std::move(p), train, schedule(5), kPatches, 1, &full_log);
  CHECK(p.encoder.w1.value != before);
  REQUIRE(full_log.epoch_losses.size() == 10);
  CHECK(full_log.epoch_losses.back() <= probe_log.epoch_losses.back());

  const auto id = finetune::finetune_forecast(forecaster(), train, schedule(0), kPatches, 1);
  CHECK(id.encoder.w1.value == forecaster().encoder.w1.value);
  CHECK(id.forecast_head().w.value == forecaster().forecast_head().w.value);
}

TEST_CASE("head shape mismatch is an error") {
  const auto ds = sine();
  const auto train = data::make_forecast_windows(ds, data::SplitName::train, kL, kH + 1);
  CHECK_THROWS_AS(finetune::linear_probe(forecaster(), train, schedule(1), kPatches, 1), std::invalid_argument);
}

TEST_CASE("evaluation is scale consistent and repeatable") {
  const auto p = finetune::linear_probe(
      forecaster(), data::make_forecast_windows(sine(), data::SplitName::train, kL, kH), schedule(3), kPatches, 1);
  const auto t1 = data::make_forecast_windows(sine(), data::SplitName::test, kL, kH);
  constexpr double alpha = 3.5;
  const auto t2 = data::make_forecast_windows(sine(alpha), data::SplitName::test, kL, kH);
  const auto a = finetune::evaluate_forecast(p, t1, kPatches);
  const auto b = finetune::evaluate_forecast(p, t2, kPatches);
  CHECK(b.mse == doctest::Approx(alpha * alpha * a.mse).epsilon(1e-9));
  CHECK(b.mae == doctest::Approx(alpha * a.mae).epsilon(1e-9));

  const auto again = finetune::evaluate_forecast(p, t1, kPatches);
  CHECK(again.mse == a.mse);
  CHECK(again.mse_per_step == a.mse_per_step);
  CHECK(finetune::evaluate_forecast(p, t1, kPatches, 4).mse == a.mse);
}

TEST_CASE("evaluation matches a direct recomputation") {
  const auto p = forecaster();
  const auto test = data::make_forecast_windows(sine(), data::SplitName::test, kL, kH);
  double s = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::size_t idx[] = {i};
    const Matrix pred = finetune::predict_forecast(p, test, idx, kPatches);
    const auto w = test.at(i);
    for (std::size_t t = 0; t < kH; ++t) s += (pred(0, t) - w.target(t, 0)) * (pred(0, t) - w.target(t, 0));
  }
  CHECK(finetune::evaluate_forecast(p, test, kPatches).mse ==
        doctest::Approx(s / static_cast<double>(test.size() * kH)).epsilon(1e-12));
}

TEST_CASE("supervised training") {
  finetune::SupervisedConfig cfg;
  cfg.input_len = kL;
  cfg.horizon = kH;
  cfg.patch_len = 8;
  cfg.dim = 8;
  cfg.epochs = 15;
  cfg.batch_size = 16;
  cfg.lr = 3e-3;
  cfg.head_dropout = 0.0;
  CHECK(cfg.patches().stride == 4);
  CHECK(cfg.patches().pad == data::PadMode::replicate_last);

  const auto ds = sine();
  const auto a = finetune::train_supervised(cfg, ds);
  const auto b = finetune::train_supervised(cfg, ds);
  CHECK(a.encoder.w1.value == b.encoder.w1.value);
  CHECK(a.forecast_head().w.value == b.forecast_head().w.value);
  // L = 24, P = 8, stride 4, one padded stride: N = (28 - 8) / 4 + 1
  CHECK(a.forecast_head().num_patches == 6);

  const auto test = data::make_forecast_windows(ds, data::SplitName::test, kL, kH);
  CHECK(finetune::evaluate_forecast(a, test, cfg.patches()).mse < last_value_mse(test));
}

TEST_CASE("classification probe and full training") {
  toy::ClassToyConfig tc;
  tc.num_classes = 3;
  tc.per_class = 10;
  tc.length = 32;
  tc.noise_std = 0.1;
  const auto set = toy::gen_class_toy(tc, Rng(4));
  const auto [train, test] = data::split_labeled(set, 0.5);
  const finetune::PatchSetup ps{8, 8, data::PadMode::none};
  auto p = model::init_params(model::EncoderKind::mlp, 8, 8, 4, Rng(1));
  model::init_classifier_head(p, model::Aggregate::max, 3, Rng(2));
  auto s = schedule(50);
  const auto probed = finetune::classifier_probe(p, train, s, ps, 1);
  CHECK(probed.encoder.w1.value == p.encoder.w1.value);
  const auto m = finetune::evaluate_classification(probed, test, ps);
  CHECK(m.accuracy > 1.0 / 3.0);

  const auto labels = finetune::predict_labels(probed, test, ps);
  CHECK(labels.size() == test.size());
  const auto direct = finetune::classification_metrics(labels, test.labels, 3);
  CHECK(direct.accuracy == m.accuracy);

  const auto full = finetune::classifier_full(probed, train, s, ps, 1);
  CHECK(full.encoder.w1.value != p.encoder.w1.value);
}
