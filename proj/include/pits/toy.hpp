#pragma once

#include <cstddef>
#include <vector>

#include "pits/data.hpp"
#include "pits/rng.hpp"

namespace pits::toy {

// y(t) = amplitude * sin(2 pi t / period + phase) + slope * t + noise.
struct ShiftToyConfig {
  double base_slope = 0.02;
  double base_amplitude = 1.0;
  std::vector<double> slope_deltas;      // test grid, horizontal axis
  std::vector<double> amplitude_deltas;  // test grid, vertical axis
  double period = 24.0;
  std::size_t length = 1200;
  std::size_t input_len = 96;
  std::size_t horizon = 24;
  double noise_std = 0.05;

  // 14 slope deltas x 7 amplitude deltas = 98 grid points, including (0, 0).
  static ShiftToyConfig default_grid();
};

struct ShiftPoint {
  double slope_delta = 0.0;
  double amplitude_delta = 0.0;
  data::TimeSeriesDataset test;
};

struct ShiftToy {
  data::TimeSeriesDataset train;
  std::vector<ShiftPoint> tests;
};

data::TimeSeriesDataset sine_trend_series(const std::string& name, double slope, double amplitude,
                                          double period, std::size_t length, double noise_std,
                                          Rng rng, double phase = 0.0);

// Tests are ordered slope-major (all amplitudes for the first slope delta, ...).
ShiftToy gen_shift_toy(const ShiftToyConfig& cfg, const Rng& rng);

// Per-class generator parameters; the tables are fixed and pairwise distinct.
struct ClassPattern {
  double slope;
  double period;
  double amplitude;
};
const std::vector<ClassPattern>& class_patterns();

struct ClassToyConfig {
  std::size_t num_classes = 10;
  std::size_t per_class = 20;
  std::size_t length = 96;
  double noise_std = 0.3;
  bool random_phase = true;  // phase ~ U[0, 2 pi) per series
};

data::LabeledSeriesSet gen_class_toy(const ClassToyConfig& cfg, const Rng& rng);

}  // namespace pits::toy
