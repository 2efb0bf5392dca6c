#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "pits/data.hpp"
#include "pits/toy.hpp"
#include "test_util.hpp"

using namespace pits;
using pits::test::TempDir;
using pits::test::what_of;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

data::TimeSeriesDataset ramp(std::size_t t, std::size_t c = 1) {
  data::TimeSeriesDataset ds;
  ds.name = "ramp";
  ds.values = Matrix(t, c);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < c; ++j) ds.values(i, j) = static_cast<double>(i) + 100.0 * static_cast<double>(j);
  return ds;
}

}  // namespace

TEST_CASE("csv loading") {
  TempDir dir("csv");
  write_text(dir / "ok.csv", "date,a,b\n2020-01-01,1,2\n2020-01-02,3,4\n2020-01-03,5,6\n");
  const auto ds = data::load_csv(dir / "ok.csv");
  CHECK(ds.length() == 3);
  CHECK(ds.channels() == 2);
  CHECK(ds.values(2, 1) == 6.0);
  CHECK(ds.timestamps.size() == 3);
  CHECK(ds.channel_names == std::vector<std::string>{"a", "b"});

  data::CsvSchema only_b;
  only_b.value_cols = {"b"};
  CHECK(data::load_csv(dir / "ok.csv", only_b).values == Matrix{{2}, {4}, {6}});

  write_text(dir / "bad.csv", "date,a,b\n2020-01-01,1,2\n2020-01-02,x,4\n");
  const std::string msg = what_of([&] { data::load_csv(dir / "bad.csv"); });
  CHECK(msg.find("row") != std::string::npos);
  CHECK(msg.find("'a'") != std::string::npos);

  data::CsvSchema missing;
  missing.value_cols = {"nope"};
  CHECK(what_of([&] { data::load_csv(dir / "ok.csv", missing); }).find("nope") != std::string::npos);
  CHECK_THROWS(data::load_csv(dir / "absent.csv"));
}

TEST_CASE("csv round trip") {
  TempDir dir("csvrt");
  auto ds = ramp(5, 2);
  ds.values(1, 1) = 0.1 + 0.2;  // needs full precision to survive
  ds.channel_names = {"x", "y"};
  data::write_csv(ds, dir / "r.csv");
  CHECK(data::load_csv(dir / "r.csv").values == ds.values);
}

TEST_CASE("chronological split boundaries") {
  auto a = data::chronological_split(ramp(10), {0.6, 0.2, 0.2});
  CHECK(a.split->train_end == 6);
  CHECK(a.split->val_end == 8);
  auto b = data::chronological_split(ramp(10), {0.7, 0.1, 0.2});
  CHECK(b.split->train_end == 7);
  CHECK(b.split->val_end == 8);
  CHECK(b.range(data::SplitName::test) == std::pair<std::size_t, std::size_t>{8, 10});
  CHECK_THROWS_AS(data::chronological_split(ramp(10), {0.6, 0.2, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(data::chronological_split(ramp(2), {0.6, 0.2, 0.2}), std::invalid_argument);

  const auto r = data::parse_split_ratios("0.7,0.1,0.2");
  CHECK(r.train == 0.7);
  CHECK(r.test == 0.2);
}

TEST_CASE("forecast window counts") {
  // a 100-step train split: T = 125 with 0.8/0.1/0.1
  const auto ds = data::chronological_split(ramp(125), {0.8, 0.1, 0.1});
  REQUIRE(ds.range(data::SplitName::train).second == 100);
  CHECK(data::make_forecast_windows(ds, data::SplitName::train, 50, 10).size() == 41);
  CHECK(data::make_forecast_windows(ds, data::SplitName::train, 50, 10, 5).size() == 9);
  CHECK(data::make_forecast_windows(ds, data::SplitName::train, 50, 50).size() == 1);
  CHECK_THROWS_AS(data::make_forecast_windows(ds, data::SplitName::train, 50, 51), std::invalid_argument);

  const auto w = data::make_forecast_windows(ds, data::SplitName::train, 50, 10).at(3);
  CHECK(w.input(0, 0) == 3.0);
  CHECK(w.target(0, 0) == 53.0);
  CHECK(w.origin == 3);

  // windows never cross into the next split
  const auto val = data::make_forecast_windows(ds, data::SplitName::val, 5, 2);
  CHECK(val.at(0).input(0, 0) == 100.0);
  CHECK(val.size() == 6);
}

TEST_CASE("instance normalization") {
  const Matrix x{{1}, {2}, {3}};
  const auto n = data::instance_normalize(x);
  double mean = 0.0;
  double var = 0.0;
  for (const double v : n.values.values()) mean += v / 3.0;
  for (const double v : n.values.values()) var += (v - mean) * (v - mean) / 3.0;
  CHECK(std::abs(mean) < 1e-15);
  CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(max_abs_diff(data::denormalize(n.values, n.stats), x) < 1e-12);

  const Matrix flat{{5}, {5}, {5}};
  const auto f = data::instance_normalize(flat);
  CHECK(f.values == Matrix(3, 1));
  CHECK(data::denormalize(f.values, f.stats) == flat);
}

TEST_CASE("patch counts and padding") {
  CHECK(data::patch_count(512, 12, 12, data::PadMode::none) == 42);
  CHECK(data::patch_count(24, 12, 6, data::PadMode::none) == 3);
  CHECK(data::patch_count(24, 12, 6, data::PadMode::replicate_last) == 4);
  CHECK_THROWS_AS(data::patch_count(10, 12, 12, data::PadMode::none), std::invalid_argument);

  Matrix x(8, 1);
  for (std::size_t i = 0; i < 8; ++i) x(i, 0) = static_cast<double>(i);
  const auto plain = data::patchify(x, 4, 2);
  CHECK(plain.num_patches == 3);
  CHECK(plain.patches(2, 0) == 4.0);
  const auto padded = data::patchify(x, 4, 2, data::PadMode::replicate_last);
  CHECK(padded.num_patches == 4);
  // the pad repeats the final step `stride` times
  CHECK(padded.patches(3, 0) == 6.0);
  CHECK(padded.patches(3, 2) == 7.0);
  CHECK(padded.patches(3, 3) == 7.0);
}

TEST_CASE("patch row order is (instance, channel, patch)") {
  std::vector<Matrix> in = {Matrix(6, 2), Matrix(6, 2)};
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t t = 0; t < 6; ++t)
      for (std::size_t c = 0; c < 2; ++c) in[b](t, c) = 100.0 * b + 10.0 * c + t;
  const auto pb = data::patchify(in, 3, 3);
  REQUIRE(pb.patches.rows() == 2 * 2 * 2);
  CHECK(pb.patches(pb.row(1, 0, 1), 0) == 103.0);
  CHECK(pb.patches(pb.row(0, 1, 0), 2) == 12.0);
}

TEST_CASE("complementary masks") {
  for (const std::size_t n : {2u, 4u, 5u, 42u}) {
    Rng rng(n);
    const auto m = data::complementary_masks(3, 2, n, rng);
    for (std::size_t b = 0; b < 3; ++b) {
      for (std::size_t c = 0; c < 2; ++c) {
        std::size_t zeros = 0;
        for (std::size_t p = 0; p < n; ++p) {
          zeros += m.at(b, c, p) == 0;
          CHECK(m.at(b, c, p) + m.complement(b, c, p) == 1);
        }
        CHECK(zeros == n / 2);
      }
    }
  }
  Rng one(1);
  CHECK_THROWS_AS(data::complementary_masks(1, 1, 1, one), std::invalid_argument);
  Rng a(77), b(77);
  CHECK(data::complementary_masks(2, 2, 9, a).m == data::complementary_masks(2, 2, 9, b).m);
}

TEST_CASE("forecast batch normalizes targets with input statistics") {
  const auto ds = data::chronological_split(ramp(60, 2), {0.8, 0.1, 0.1});
  const auto ws = data::make_forecast_windows(ds, data::SplitName::train, 24, 8);
  const std::size_t idx[] = {0, 5};
  const auto batch = data::make_forecast_batch(ws, idx, 12, 12, data::PadMode::none);
  CHECK(batch.x.series() == 4);
  CHECK(batch.target_raw.rows() == 4);
  CHECK(batch.target_raw.cols() == 8);
  const std::size_t r = 1 * 2 + 1;  // window 5, channel 1
  const double expect = (batch.target_raw(r, 0) - batch.stats.mean_at(1, 1)) / batch.stats.std_at(1, 1);
  CHECK(batch.target_norm(r, 0) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("shift toy") {
  const auto cfg = toy::ShiftToyConfig::default_grid();
  CHECK(cfg.slope_deltas.size() * cfg.amplitude_deltas.size() == 98);
  const auto t = toy::gen_shift_toy(cfg, Rng(1));
  CHECK(t.tests.size() == 98);

  const auto zero = toy::sine_trend_series("z", 0.0, 0.0, 24.0, 50, 0.0, Rng(1));
  CHECK(zero.values == Matrix(50, 1));

  // same parameters, no noise: identical series
  const auto s1 = toy::sine_trend_series("a", 0.02, 1.0, 24.0, 50, 0.0, Rng(1));
  const auto s2 = toy::sine_trend_series("b", 0.02, 1.0, 24.0, 50, 0.0, Rng(2));
  CHECK(s1.values == s2.values);
}

TEST_CASE("class toy") {
  toy::ClassToyConfig cfg;
  const auto set = toy::gen_class_toy(cfg, Rng(3));
  CHECK(set.size() == 200);
  CHECK(set.num_classes == 10);

  const auto& pats = toy::class_patterns();
  for (std::size_t i = 0; i < pats.size(); ++i) {
    for (std::size_t j = i + 1; j < pats.size(); ++j) {
      CHECK((pats[i].slope != pats[j].slope || pats[i].period != pats[j].period ||
             pats[i].amplitude != pats[j].amplitude));
    }
  }

  toy::ClassToyConfig clean = cfg;
  clean.noise_std = 0.0;
  clean.random_phase = false;
  const auto c = toy::gen_class_toy(clean, Rng(3));
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (c.labels[i] == c.labels[j]) CHECK(c.series[i] == c.series[j]);
    }
  }
}

TEST_CASE("labeled csv round trip and split") {
  TempDir dir("labeled");
  toy::ClassToyConfig cfg;
  cfg.num_classes = 3;
  cfg.per_class = 4;
  cfg.length = 10;
  const auto set = toy::gen_class_toy(cfg, Rng(5));
  data::write_labeled_csv(set, dir / "v.csv", dir / "l.csv");
  const auto back = data::load_labeled_csv(dir / "v.csv", dir / "l.csv");
  CHECK(back.ids == set.ids);
  CHECK(back.labels == set.labels);
  CHECK(back.series == set.series);

  const auto [train, test] = data::split_labeled(set, 0.5);
  CHECK(train.size() == 6);
  CHECK(test.size() == 6);
  std::set<std::string> seen(train.ids.begin(), train.ids.end());
  for (const auto& id : test.ids) CHECK(seen.count(id) == 0);
}
