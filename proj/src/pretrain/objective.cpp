#include <algorithm>
#include <span>
#include <stdexcept>

#include "pits/pretrain.hpp"

namespace pits::pretrain {
namespace {

using model::EncoderCache;
using model::ModelParams;

Matrix masked_input(const Matrix& x, const data::MaskPair& masks, bool keep_where_one) {
  Matrix out = x;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const bool keep = (masks.at_row(r) == 1) == keep_where_one;
    if (!keep) {
      auto row = out.row(r);
      std::fill(row.begin(), row.end(), 0.0);
    }
  }
  return out;
}

std::vector<std::uint8_t> row_weights(const data::MaskPair& masks, std::uint8_t select) {
  std::vector<std::uint8_t> w(masks.m.size());
  for (std::size_t r = 0; r < w.size(); ++r) w[r] = masks.at_row(r) == select ? 1 : 0;
  return w;
}

void check_masks(const data::PatchBatch& batch, const data::MaskPair& masks) {
  if (masks.instances != batch.instances || masks.channels != batch.channels ||
      masks.num_patches != batch.num_patches) {
    throw std::invalid_argument("masks do not match the patch batch (B, C, N)");
  }
}

// Views and the forward state needed to push their gradients back.
struct ViewState {
  ViewEmbeddings views;
  EncoderCache zero;   // PI: encoder applied to one all-zero patch
  EncoderCache first;  // mixer: pass on m*x
  EncoderCache second; // mixer: pass on (1-m)*x
};

ViewState make_views(const ModelParams& params, const data::PatchBatch& batch,
                     const data::MaskPair& masks, const EncoderCache* real) {
  check_masks(batch, masks);
  const auto& enc = params.encoder;
  ViewState st;
  st.views.series = batch.series();
  st.views.num_patches = batch.num_patches;
  if (enc.patch_independent()) {
    EncoderCache own;
    if (real == nullptr) {
      own = model::encoder_forward(enc, batch.patches, batch.series(), batch.num_patches);
      real = &own;
    }
    st.zero = model::encoder_forward(enc, Matrix(1, enc.patch_len), 1, 1);
    const std::span<const double> zero_row = st.zero.z1.row(0);
    const std::size_t d = enc.dim;
    st.views.view1 = Matrix(real->z1.rows(), d);
    st.views.view2 = Matrix(real->z1.rows(), d);
    for (std::size_t r = 0; r < real->z1.rows(); ++r) {
      const std::span<const double> z = real->z1.row(r);
      const bool in_first = masks.at_row(r) == 1;
      std::copy(in_first ? z.begin() : zero_row.begin(), in_first ? z.end() : zero_row.end(),
                st.views.view1.row(r).begin());
      std::copy(in_first ? zero_row.begin() : z.begin(), in_first ? zero_row.end() : z.end(),
                st.views.view2.row(r).begin());
    }
  } else {
    st.first = model::encoder_forward(enc, masked_input(batch.patches, masks, true), batch.series(),
                                      batch.num_patches);
    st.second = model::encoder_forward(enc, masked_input(batch.patches, masks, false), batch.series(),
                                       batch.num_patches);
    st.views.view1 = st.first.z1;
    st.views.view2 = st.second.z1;
  }
  return st;
}

}  // namespace

ObjectiveOptions objective_for(Task task) {
  ObjectiveOptions o;
  o.task = task;
  o.cl = task == Task::pi_cl;
  return o;
}

ViewEmbeddings build_views(const ModelParams& params, const data::PatchBatch& batch,
                           const data::MaskPair& masks) {
  return make_views(params, batch, masks, nullptr).views;
}

LossBreakdown pits_loss(ModelParams& params, const data::PatchBatch& batch, const data::MaskPair& masks,
                        const ObjectiveOptions& opts, Rng dropout_rng, bool training) {
  check_masks(batch, masks);
  params.zero_grads();
  auto& enc = params.encoder;
  const std::size_t series = batch.series();
  const std::size_t n_p = batch.num_patches;
  const Matrix& x = batch.patches;

  // reconstruction input, target and selected rows per task
  Matrix recon_in;
  Matrix target;
  std::vector<std::uint8_t> weights;
  bool input_is_x = false;
  switch (opts.task) {
    case Task::pi:
    case Task::pi_cl:
      input_is_x = true;
      break;
    case Task::pd:
      recon_in = masked_input(x, masks, true);
      weights = row_weights(masks, 0);
      break;
    case Task::zero_xu:
      recon_in = Matrix(x.rows(), x.cols());
      weights = row_weights(masks, 1);
      break;
    case Task::zero_zero:
      recon_in = Matrix(x.rows(), x.cols());
      target = Matrix(x.rows(), x.cols());
      break;
  }
  const Matrix& recon_target = target.empty() ? x : target;

  const bool need_real = input_is_x || (opts.cl && enc.patch_independent());
  EncoderCache real;
  if (need_real) real = model::encoder_forward(enc, x, series, n_p);
  EncoderCache other;
  if (!input_is_x) other = model::encoder_forward(enc, recon_in, series, n_p);
  EncoderCache& recon_cache = input_is_x ? real : other;

  // reconstruction from z2 through dropout and the patch-wise head
  ops::DropoutMask mask(recon_cache.z2.rows(), recon_cache.z2.cols(), enc.dropout, training, dropout_rng);
  const Matrix z2d = mask.apply(recon_cache.z2);
  const Matrix x_hat = ops::linear(z2d, params.recon.w.value, params.recon.b.value);
  const ReconLoss rl = recon_loss(recon_target, x_hat, weights);

  LossBreakdown out;
  out.recon_mean = rl.mean;
  out.recon = opts.recon_reduce == Reduce::sum ? rl.sum : rl.mean;

  std::size_t selected = x.rows();
  if (!weights.empty()) {
    selected = 0;
    for (auto w : weights) selected += w;
  }
  const double grad_scale =
      opts.recon_reduce == Reduce::sum ? 2.0
                                       : (selected > 0 ? 2.0 / static_cast<double>(selected * x.cols()) : 0.0);
  Matrix dx_hat(x_hat.rows(), x_hat.cols());
  for (std::size_t r = 0; r < x_hat.rows(); ++r) {
    if (!weights.empty() && weights[r] == 0) continue;
    for (std::size_t j = 0; j < x_hat.cols(); ++j) {
      dx_hat(r, j) = grad_scale * (x_hat(r, j) - recon_target(r, j));
    }
  }
  const Matrix dz2d = ops::linear_backward(z2d, params.recon.w.value, dx_hat, params.recon.w.grad,
                                           params.recon.b.grad, true);
  const Matrix dz2 = mask.apply(dz2d);

  Matrix dz1_real;
  if (opts.cl) {
    ViewState st = make_views(params, batch, masks, need_real ? &real : nullptr);
    const HierarchicalLoss hl = hierarchical_cl_loss(st.views, opts.cl_opts, true);
    out.cl_levels = hl.per_level;
    out.cl_total = hl.total;
    if (enc.patch_independent()) {
      dz1_real = Matrix(real.z1.rows(), real.z1.cols());
      Matrix d_zero(1, enc.dim);
      for (std::size_t r = 0; r < dz1_real.rows(); ++r) {
        const bool in_first = masks.at_row(r) == 1;
        const auto own = in_first ? hl.d_view1.row(r) : hl.d_view2.row(r);
        const auto zero = in_first ? hl.d_view2.row(r) : hl.d_view1.row(r);
        auto dst = dz1_real.row(r);
        for (std::size_t j = 0; j < dst.size(); ++j) {
          dst[j] += own[j];
          d_zero[j] += zero[j];
        }
      }
      model::encoder_backward(enc, st.zero, d_zero, Matrix());
    } else {
      model::encoder_backward(enc, st.first, hl.d_view1, Matrix());
      model::encoder_backward(enc, st.second, hl.d_view2, Matrix());
    }
  }

  if (input_is_x) {
    model::encoder_backward(enc, real, dz1_real, dz2);
  } else {
    model::encoder_backward(enc, other, Matrix(), dz2);
    if (!dz1_real.empty()) model::encoder_backward(enc, real, dz1_real, Matrix());
  }

  out.total = out.recon + out.cl_total;
  return out;
}

double pd_task_loss(const ModelParams& params, const data::PatchBatch& batch, const data::MaskPair& masks) {
  check_masks(batch, masks);
  const Matrix zero_filled = masked_input(batch.patches, masks, true);
  const EncoderCache c =
      model::encoder_forward(params.encoder, zero_filled, batch.series(), batch.num_patches);
  const Matrix x_hat = model::reconstruct(params, c.z2);
  const auto weights = row_weights(masks, 0);
  return recon_loss(batch.patches, x_hat, weights).sum;
}

}  // namespace pits::pretrain
