#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "pits/data.hpp"

namespace pits::data {

PadMode parse_pad_mode(const std::string& s) {
  if (s == "none") return PadMode::none;
  if (s == "replicate-last" || s == "replicate_last") return PadMode::replicate_last;
  throw std::invalid_argument("unknown pad mode '" + s + "' (expected none|replicate-last)");
}

std::string to_string(PadMode p) { return p == PadMode::none ? "none" : "replicate-last"; }

std::size_t patch_count(std::size_t input_len, std::size_t patch_len, std::size_t stride, PadMode pad) {
  if (patch_len == 0 || stride == 0) throw std::invalid_argument("patchify: P and stride must be >= 1");
  const std::size_t effective = input_len + (pad == PadMode::replicate_last ? stride : 0);
  if (effective < patch_len) {
    throw std::invalid_argument("patchify: input length " + std::to_string(input_len) +
                                " is shorter than patch length " + std::to_string(patch_len));
  }
  return (effective - patch_len) / stride + 1;
}

PatchBatch patchify(std::span<const Matrix> inputs, std::size_t patch_len, std::size_t stride,
                    PadMode pad) {
  if (inputs.empty()) throw std::invalid_argument("patchify: empty batch");
  const std::size_t len = inputs.front().rows();
  const std::size_t channels = inputs.front().cols();
  PatchBatch pb;
  pb.instances = inputs.size();
  pb.channels = channels;
  pb.num_patches = patch_count(len, patch_len, stride, pad);
  pb.patch_len = patch_len;
  pb.stride = stride;
  pb.pad = pad;
  pb.patches = Matrix(pb.instances * channels * pb.num_patches, patch_len);
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    const Matrix& x = inputs[b];
    if (x.rows() != len || x.cols() != channels) {
      throw std::invalid_argument("patchify: instance " + std::to_string(b) + " has shape " + x.shape());
    }
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t n = 0; n < pb.num_patches; ++n) {
        auto dst = pb.patches.row(pb.row(b, c, n));
        for (std::size_t k = 0; k < patch_len; ++k) {
          const std::size_t t = std::min(n * stride + k, len - 1);
          dst[k] = x(t, c);
        }
      }
    }
  }
  return pb;
}

MaskPair complementary_masks(std::size_t instances, std::size_t channels, std::size_t num_patches,
                             Rng& rng) {
  if (num_patches < 2) {
    throw std::invalid_argument("complementary_masks: need N >= 2, got " + std::to_string(num_patches));
  }
  MaskPair mp{instances, channels, num_patches,
              std::vector<std::uint8_t>(instances * channels * num_patches, 1)};
  const std::size_t masked = num_patches / 2;
  std::vector<std::size_t> idx(num_patches);
  for (std::size_t s = 0; s < instances * channels; ++s) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // partial Fisher-Yates: the first `masked` slots are a uniform subset
    for (std::size_t i = 0; i < masked; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(num_patches - i));
      std::swap(idx[i], idx[j]);
      mp.m[s * num_patches + idx[i]] = 0;
    }
  }
  return mp;
}

ForecastBatch make_forecast_batch(const WindowSet& windows, std::span<const std::size_t> indices,
                                  std::size_t patch_len, std::size_t stride, PadMode pad) {
  const std::size_t channels = windows.channels();
  const std::size_t horizon = windows.horizon();
  std::vector<Matrix> inputs;
  inputs.reserve(indices.size());
  ForecastBatch fb;
  fb.stats = NormStats{indices.size(), channels, std::vector<double>(indices.size() * channels),
                       std::vector<double>(indices.size() * channels)};
  fb.target_norm = Matrix(indices.size() * channels, horizon);
  fb.target_raw = Matrix(indices.size() * channels, horizon);
  for (std::size_t b = 0; b < indices.size(); ++b) {
    ForecastWindow w = windows.at(indices[b]);
    Normalized nz = instance_normalize(w.input);
    for (std::size_t c = 0; c < channels; ++c) {
      const double mean = nz.stats.mean[c];
      const double sd = nz.stats.std[c];
      fb.stats.mean[b * channels + c] = mean;
      fb.stats.std[b * channels + c] = sd;
      for (std::size_t h = 0; h < horizon; ++h) {
        fb.target_raw(b * channels + c, h) = w.target(h, c);
        fb.target_norm(b * channels + c, h) = (w.target(h, c) - mean) / sd;
      }
    }
    inputs.push_back(std::move(nz.values));
  }
  fb.x = patchify(inputs, patch_len, stride, pad);
  return fb;
}

ClassBatch make_class_batch(const LabeledSeriesSet& set, std::span<const std::size_t> indices,
                            std::size_t patch_len, std::size_t stride, PadMode pad) {
  std::vector<Matrix> inputs;
  ClassBatch cb;
  for (std::size_t i : indices) {
    inputs.push_back(instance_normalize(set.series.at(i)).values);
    cb.labels.push_back(set.labels[i]);
  }
  cb.x = patchify(inputs, patch_len, stride, pad);
  return cb;
}

}  // namespace pits::data
