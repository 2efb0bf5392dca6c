#include "pits/toy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pits::toy {

ShiftToyConfig ShiftToyConfig::default_grid() {
  ShiftToyConfig cfg;
  for (int i = 0; i < 14; ++i) cfg.slope_deltas.push_back(-0.060 + 0.005 * i);
  for (int j = 0; j < 7; ++j) cfg.amplitude_deltas.push_back(-0.5 + 0.5 * j);
  // snap the grid so that the zero-shift point is exactly zero
  for (auto& v : cfg.slope_deltas) v = std::round(v * 1000.0) / 1000.0;
  return cfg;
}

data::TimeSeriesDataset sine_trend_series(const std::string& name, double slope, double amplitude,
                                          double period, std::size_t length, double noise_std,
                                          Rng rng, double phase) {
  data::TimeSeriesDataset ds;
  ds.name = name;
  ds.values = Matrix(length, 1);
  ds.channel_names = {"value"};
  for (std::size_t t = 0; t < length; ++t) {
    const auto tt = static_cast<double>(t);
    double v = amplitude * std::sin(2.0 * std::numbers::pi * tt / period + phase) + slope * tt;
    if (noise_std > 0.0) v += noise_std * rng.normal();
    ds.values(t, 0) = v;
  }
  return ds;
}

ShiftToy gen_shift_toy(const ShiftToyConfig& cfg, const Rng& rng) {
  if (cfg.slope_deltas.empty() || cfg.amplitude_deltas.empty()) {
    throw std::invalid_argument("gen_shift_toy: empty test grid");
  }
  if (cfg.length < cfg.input_len + cfg.horizon) {
    throw std::invalid_argument("gen_shift_toy: length " + std::to_string(cfg.length) +
                                " shorter than L+H = " + std::to_string(cfg.input_len + cfg.horizon));
  }
  ShiftToy toy;
  toy.train = sine_trend_series("shift_train", cfg.base_slope, cfg.base_amplitude, cfg.period,
                                cfg.length, cfg.noise_std, rng.derive("shift_train"));
  std::uint64_t k = 0;
  for (std::size_t i = 0; i < cfg.slope_deltas.size(); ++i) {
    for (std::size_t j = 0; j < cfg.amplitude_deltas.size(); ++j, ++k) {
      ShiftPoint p;
      p.slope_delta = cfg.slope_deltas[i];
      p.amplitude_delta = cfg.amplitude_deltas[j];
      p.test = sine_trend_series("shift_s" + std::to_string(i) + "_a" + std::to_string(j),
                                 cfg.base_slope + p.slope_delta,
                                 cfg.base_amplitude + p.amplitude_delta, cfg.period, cfg.length,
                                 cfg.noise_std, rng.derive("shift_test", k));
      toy.tests.push_back(std::move(p));
    }
  }
  return toy;
}

const std::vector<ClassPattern>& class_patterns() {
  // trend x seasonality combinations; every pair differs in at least one field
  static const std::vector<ClassPattern> table = {
      {0.00, 8.0, 1.0},   {0.00, 24.0, 1.0},  {0.03, 8.0, 1.0},   {0.03, 24.0, 1.0},
      {-0.03, 8.0, 1.0},  {-0.03, 24.0, 1.0}, {0.00, 12.0, 2.0},  {0.06, 12.0, 0.5},
      {-0.06, 12.0, 0.5}, {0.00, 48.0, 2.0},
  };
  return table;
}

data::LabeledSeriesSet gen_class_toy(const ClassToyConfig& cfg, const Rng& rng) {
  const auto& table = class_patterns();
  if (cfg.num_classes == 0 || cfg.num_classes > table.size()) {
    throw std::invalid_argument("gen_class_toy: num_classes must be in [1, " +
                                std::to_string(table.size()) + "]");
  }
  if (cfg.per_class == 0) throw std::invalid_argument("gen_class_toy: per_class must be >= 1");
  data::LabeledSeriesSet set;
  set.num_classes = cfg.num_classes;
  for (std::size_t k = 0; k < cfg.num_classes; ++k) {
    const ClassPattern& pat = table[k];
    for (std::size_t i = 0; i < cfg.per_class; ++i) {
      const std::uint64_t index = k * 1000003 + i;
      const double phase =
          cfg.random_phase ? rng.derive("class_phase", index).uniform(0.0, 2.0 * std::numbers::pi) : 0.0;
      const auto ds = sine_trend_series("", pat.slope, pat.amplitude, pat.period, cfg.length,
                                        cfg.noise_std, rng.derive("class_toy", index), phase);
      set.ids.push_back("s" + std::to_string(k * cfg.per_class + i));
      set.series.push_back(ds.values);
      set.labels.push_back(static_cast<int>(k));
    }
  }
  return set;
}

}  // namespace pits::toy
