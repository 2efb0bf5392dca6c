#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pits/matrix.hpp"
#include "pits/rng.hpp"

namespace pits::data {

inline constexpr double kNormEps = 1e-8;

enum class SplitName { train, val, test };
SplitName parse_split_name(const std::string& s);
std::string to_string(SplitName s);

struct SplitBounds {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
};

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct TimeSeriesDataset {
  std::string name;
  Matrix values;  // T x C
  std::vector<std::string> timestamps;  // empty or T entries
  std::vector<std::string> channel_names;
  std::optional<SplitBounds> split;

  std::size_t length() const { return values.rows(); }
  std::size_t channels() const { return values.cols(); }
  // [begin, end) rows of the named split; the dataset must be split.
  std::pair<std::size_t, std::size_t> range(SplitName s) const;
};

struct CsvSchema {
  // Unset: the first column is a timestamp when its first cell is not numeric.
  std::optional<std::string> timestamp_col;
  // Empty: every non-timestamp column.
  std::vector<std::string> value_cols;
};

TimeSeriesDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
void write_csv(const TimeSeriesDataset& ds, const std::filesystem::path& path);

// Boundaries at floor(T*train) and floor(T*(train+val)); rows never reordered.
TimeSeriesDataset chronological_split(TimeSeriesDataset ds, const SplitRatios& ratios);
SplitRatios parse_split_ratios(const std::string& text);

struct ForecastWindow {
  Matrix input;   // L x C
  Matrix target;  // H x C (0 x C for input-only windows)
  std::size_t origin = 0;  // first input row, relative to the split start
};

// Sliding windows over one split. Holds its own copy of the split rows and
// materializes windows on access.
class WindowSet {
 public:
  WindowSet() = default;
  WindowSet(Matrix segment, std::size_t input_len, std::size_t horizon, std::size_t stride);

  std::size_t size() const { return count_; }
  std::size_t input_len() const { return input_len_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t channels() const { return segment_.cols(); }
  std::size_t stride() const { return stride_; }
  const Matrix& segment() const { return segment_; }

  ForecastWindow at(std::size_t i) const;

 private:
  Matrix segment_;
  std::size_t input_len_ = 0;
  std::size_t horizon_ = 0;
  std::size_t stride_ = 1;
  std::size_t count_ = 0;
};

// count = floor((T_split - L - H) / stride) + 1; throws when T_split < L + H.
WindowSet make_forecast_windows(const TimeSeriesDataset& ds, SplitName split, std::size_t input_len,
                                std::size_t horizon, std::size_t stride = 1);
// Input-only windows (H = 0) used for self-supervised pretraining.
WindowSet make_input_windows(const TimeSeriesDataset& ds, SplitName split, std::size_t input_len,
                             std::size_t stride = 1);

// Per-(instance, channel) affine statistics.
struct NormStats {
  std::size_t instances = 0;
  std::size_t channels = 0;
  std::vector<double> mean;
  std::vector<double> std;

  double mean_at(std::size_t b, std::size_t c) const { return mean[b * channels + c]; }
  double std_at(std::size_t b, std::size_t c) const { return std[b * channels + c]; }
};

struct Normalized {
  Matrix values;
  NormStats stats;
};

// Zero mean, unit (population) std per channel; std clamped to kNormEps.
Normalized instance_normalize(const Matrix& input);
// Applies the inverse affine map of instance `b` to an H x C prediction.
Matrix denormalize(const Matrix& pred, const NormStats& stats, std::size_t b = 0);

enum class PadMode { none, replicate_last };
PadMode parse_pad_mode(const std::string& s);
std::string to_string(PadMode p);

// Patches of B instances x C channels x N patches, stored as rows
// ((b * C + c) * N + n) of a (B*C*N) x P matrix.
struct PatchBatch {
  std::size_t instances = 0;
  std::size_t channels = 0;
  std::size_t num_patches = 0;
  std::size_t patch_len = 0;
  std::size_t stride = 0;
  PadMode pad = PadMode::none;
  Matrix patches;

  std::size_t series() const { return instances * channels; }
  std::size_t row(std::size_t b, std::size_t c, std::size_t n) const {
    return (b * channels + c) * num_patches + n;
  }
};

// N = floor((L_eff - P) / stride) + 1, where replicate_last pads `stride`
// copies of the final step (L_eff = L + stride).
std::size_t patch_count(std::size_t input_len, std::size_t patch_len, std::size_t stride, PadMode pad);

PatchBatch patchify(std::span<const Matrix> inputs, std::size_t patch_len, std::size_t stride,
                    PadMode pad = PadMode::none);
inline PatchBatch patchify(const Matrix& input, std::size_t patch_len, std::size_t stride,
                           PadMode pad = PadMode::none) {
  return patchify(std::span<const Matrix>(&input, 1), patch_len, stride, pad);
}

// Complementary masks. m(b, c, n) = 0 marks patch n as masked in view 1;
// exactly floor(N/2) zeros per (instance, channel).
struct MaskPair {
  std::size_t instances = 0;
  std::size_t channels = 0;
  std::size_t num_patches = 0;
  std::vector<std::uint8_t> m;

  std::uint8_t at(std::size_t b, std::size_t c, std::size_t n) const {
    return m[(b * channels + c) * num_patches + n];
  }
  std::uint8_t complement(std::size_t b, std::size_t c, std::size_t n) const { return 1 - at(b, c, n); }
  // Indexed by patch row of the matching PatchBatch.
  std::uint8_t at_row(std::size_t r) const { return m[r]; }
};

MaskPair complementary_masks(std::size_t instances, std::size_t channels, std::size_t num_patches,
                             Rng& rng);

// A normalized, patched mini-batch of forecast windows.
struct ForecastBatch {
  PatchBatch x;
  NormStats stats;
  Matrix target_norm;  // (B*C) x H, normalized with the input statistics
  Matrix target_raw;   // (B*C) x H
};

ForecastBatch make_forecast_batch(const WindowSet& windows, std::span<const std::size_t> indices,
                                  std::size_t patch_len, std::size_t stride, PadMode pad);

// Labeled collection of equal-length series (classification).
struct LabeledSeriesSet {
  std::vector<std::string> ids;
  std::vector<Matrix> series;  // each T x C
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return series.size(); }
};

// Value CSV: one column per (series, channel) named "<id>" when C = 1 or
// "<id>:<channel>" otherwise; labels sidecar "series_id,label".
void write_labeled_csv(const LabeledSeriesSet& set, const std::filesystem::path& values_path,
                       const std::filesystem::path& labels_path);
LabeledSeriesSet load_labeled_csv(const std::filesystem::path& values_path,
                                  const std::filesystem::path& labels_path);

// Deterministic split of a labeled set: the first `train_fraction` of each
// class's members (in id order) go to train.
std::pair<LabeledSeriesSet, LabeledSeriesSet> split_labeled(const LabeledSeriesSet& set,
                                                            double train_fraction);

struct ClassBatch {
  PatchBatch x;
  std::vector<int> labels;
};
ClassBatch make_class_batch(const LabeledSeriesSet& set, std::span<const std::size_t> indices,
                            std::size_t patch_len, std::size_t stride, PadMode pad);

}  // namespace pits::data
