#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "pits/data.hpp"
#include "pits/gradcheck.hpp"
#include "pits/matrix.hpp"
#include "pits/ops.hpp"
#include "pits/rng.hpp"

namespace pits::model {

enum class EncoderKind { linear, mlp, mixer };
EncoderKind parse_encoder_kind(const std::string& s);
std::string to_string(EncoderKind k);

enum class Aggregate { max, avg, concat };
Aggregate parse_aggregate(const std::string& s);
std::string to_string(Aggregate a);

// Which encoder layer feeds the downstream head.
enum class Representation { z1, z2 };
Representation parse_representation(const std::string& s);
std::string to_string(Representation r);

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(value.rows(), value.cols()) {}
  bool present() const { return !value.empty(); }
  void zero_grad() { grad.fill(0.0); }
};

// Per-patch encoder. linear: z1 = x W1 + b1, z2 = z1. mlp: z1 = ReLU(x W1 + b1),
// z2 = z1 W2 + b2. mixer: a time-mixing map W_t (N x N) across the patch axis
// of each series first, then the mlp layers.
struct EncoderParams {
  EncoderKind kind = EncoderKind::mlp;
  std::size_t patch_len = 0;
  std::size_t dim = 0;
  std::size_t num_patches = 0;
  double dropout = 0.0;  // applied to z2 before the reconstruction head
  Param w1, b1, w2, b2, wt, bt;

  bool patch_independent() const { return kind != EncoderKind::mixer; }
};

struct ReconHead {
  Param w;  // D x P
  Param b;  // 1 x P
};

// Shared across channels: flattened N*D patch representations -> H.
struct ForecastHead {
  std::size_t num_patches = 0;
  std::size_t dim = 0;
  std::size_t horizon = 0;
  Param w;  // (N*D) x H
  Param b;  // 1 x H
};

// Aggregates over patches (per channel), averages over channels, then maps
// to K logits.
struct ClassifierHead {
  Aggregate agg = Aggregate::max;
  std::size_t num_patches = 0;
  std::size_t dim = 0;
  std::size_t classes = 0;
  Param w;  // D_agg x K, D_agg = D (max/avg) or N*D (concat)
  Param b;  // 1 x K

  std::size_t input_dim() const { return agg == Aggregate::concat ? num_patches * dim : dim; }
};

using DownstreamHead = std::variant<std::monostate, ForecastHead, ClassifierHead>;

enum class ParamGroup { all, encoder, recon, head, pretrain };

struct ModelParams {
  EncoderParams encoder;
  ReconHead recon;
  DownstreamHead head;
  Representation repr = Representation::z2;
  std::uint64_t seed = 0;
  std::string config_hash;

  bool has_forecast_head() const { return std::holds_alternative<ForecastHead>(head); }
  bool has_classifier_head() const { return std::holds_alternative<ClassifierHead>(head); }
  ForecastHead& forecast_head();
  const ForecastHead& forecast_head() const;
  ClassifierHead& classifier_head();
  const ClassifierHead& classifier_head() const;

  // Present tensors in fixed order: encoder (w1 b1 w2 b2 wt bt), recon, head.
  std::vector<Param*> params(ParamGroup group = ParamGroup::all);
  std::vector<const Param*> params(ParamGroup group = ParamGroup::all) const;
  std::vector<ParamView> views(ParamGroup group = ParamGroup::all);
  std::size_t count(ParamGroup group = ParamGroup::all) const;
  void zero_grads();
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0. Each tensor draws
// from its own labeled sub-stream of rng.derive("init").
ModelParams init_params(EncoderKind kind, std::size_t patch_len, std::size_t dim,
                        std::size_t num_patches, const Rng& rng, double dropout = 0.0);
void init_forecast_head(ModelParams& params, std::size_t horizon, const Rng& rng);
void init_classifier_head(ModelParams& params, Aggregate agg, std::size_t classes, const Rng& rng);

// Forward activations kept for the backward pass. Rows are patch rows
// (series * N); `series` and `num_patches` describe the grouping.
struct EncoderCache {
  std::size_t series = 0;
  std::size_t num_patches = 0;
  Matrix input;
  Matrix mixed;  // mixer only
  Matrix pre1;   // mlp/mixer only
  Matrix z1;
  Matrix z2;
};

EncoderCache encoder_forward(const EncoderParams& enc, const Matrix& patches, std::size_t series,
                             std::size_t num_patches);
// Accumulates encoder grads from dL/dz1 and dL/dz2 (either may be empty).
// Returns dL/dinput when need_dx is set.
Matrix encoder_backward(EncoderParams& enc, const EncoderCache& cache, const Matrix& dz1,
                        const Matrix& dz2, bool need_dx = false);

struct Embeddings {
  Matrix z1;  // (B*C*N) x D
  Matrix z2;
};
// Inference pass; deterministic and rng-free.
Embeddings encode(const ModelParams& params, const data::PatchBatch& batch);
const Matrix& select(const Embeddings& e, Representation r);

// x_hat = z2 W + b per patch row.
Matrix reconstruct(const ModelParams& params, const Matrix& z2);

struct HeadCache {
  Matrix input;  // head input after aggregation, before dropout
  ops::DropoutMask mask;
  Matrix dropped;
  std::vector<std::uint32_t> argmax;  // classifier max-aggregation source patch
};

// Per series: flatten N x D and map to H. Returns (B*C) x H in normalized space.
Matrix forecast_forward(const ForecastHead& head, const Matrix& z, std::size_t series,
                        double dropout, bool training, Rng& rng, HeadCache* cache = nullptr);
// Accumulates head grads; returns dL/dz.
Matrix forecast_backward(ForecastHead& head, const HeadCache& cache, const Matrix& dy);
Matrix forecast(const ModelParams& params, const Matrix& z, std::size_t series);

// Returns B x K logits.
Matrix classify_forward(const ClassifierHead& head, const Matrix& z, std::size_t instances,
                        std::size_t channels, double dropout, bool training, Rng& rng,
                        HeadCache* cache = nullptr);
Matrix classify_backward(ClassifierHead& head, const HeadCache& cache, const Matrix& dy,
                         std::size_t instances, std::size_t channels);
Matrix classify(const ModelParams& params, const Matrix& z, std::size_t instances, std::size_t channels);

// Binary weight file; byte layout documented in README.md ("Weight files").
inline constexpr std::uint32_t kWeightFormatVersion = 1;
void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

struct ExpectedShape {
  EncoderKind kind;
  std::size_t patch_len;
  std::size_t dim;
  std::size_t num_patches;  // checked for mixer only
};
// Throws naming expected and actual values on mismatch.
void check_compatible(const ModelParams& params, const ExpectedShape& expected);

}  // namespace pits::model
