#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pits/kernels.hpp"
#include "pits/parallel.hpp"
#include "pits/pretrain.hpp"

namespace pits::pretrain {

Task parse_task(const std::string& s) {
  if (s == "pi") return Task::pi;
  if (s == "pi+cl" || s == "pi_cl") return Task::pi_cl;
  if (s == "pd") return Task::pd;
  if (s == "zero-zero" || s == "zero_zero") return Task::zero_zero;
  if (s == "zero-xu" || s == "zero_xu") return Task::zero_xu;
  throw std::invalid_argument("unknown task '" + s + "' (expected pi|pi+cl|pd|zero-zero|zero-xu)");
}

std::string to_string(Task t) {
  switch (t) {
    case Task::pi: return "pi";
    case Task::pi_cl: return "pi+cl";
    case Task::pd: return "pd";
    case Task::zero_zero: return "zero-zero";
    case Task::zero_xu: return "zero-xu";
  }
  return "?";
}

Reduce parse_reduce(const std::string& s) {
  if (s == "mean") return Reduce::mean;
  if (s == "sum") return Reduce::sum;
  throw std::invalid_argument("unknown reducer '" + s + "' (expected mean|sum)");
}

std::string to_string(Reduce r) { return r == Reduce::mean ? "mean" : "sum"; }

ReconLoss recon_loss(const Matrix& x, const Matrix& x_hat) {
  return recon_loss(x, x_hat, {});
}

ReconLoss recon_loss(const Matrix& x, const Matrix& x_hat, std::span<const std::uint8_t> row_weights) {
  require_shape(x.rows() == x_hat.rows() && x.cols() == x_hat.cols(), "recon_loss", x, x_hat);
  if (!row_weights.empty() && row_weights.size() != x.rows()) {
    throw std::invalid_argument("recon_loss: " + std::to_string(row_weights.size()) +
                                " row weights for " + x.shape());
  }
  ReconLoss out;
  std::size_t rows = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (!row_weights.empty() && row_weights[r] == 0) continue;
    ++rows;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double d = x(r, j) - x_hat(r, j);
      out.sum += d * d;
    }
  }
  const double count = static_cast<double>(rows * x.cols());
  out.mean = count > 0 ? out.sum / count : 0.0;
  return out;
}

LevelLoss contrastive_level_loss(const Matrix& view1, const Matrix& view2, std::size_t series,
                                 std::size_t num_patches, bool want_grad, std::size_t threads) {
  require_shape(view1.rows() == view2.rows() && view1.cols() == view2.cols(), "contrastive_level_loss",
                view1, view2);
  if (num_patches == 0 || view1.rows() != series * num_patches) {
    throw std::invalid_argument("contrastive_level_loss: " + view1.shape() + " is not " +
                                std::to_string(series) + " series x " + std::to_string(num_patches) +
                                " patches");
  }
  const std::size_t d = view1.cols();
  const std::size_t n_p = num_patches;
  const std::size_t two_n = 2 * n_p;
  const double scale = 1.0 / (2.0 * static_cast<double>(series) * static_cast<double>(n_p));

  LevelLoss out;
  if (want_grad) {
    out.d_view1 = Matrix(view1.rows(), d);
    out.d_view2 = Matrix(view2.rows(), d);
  }
  std::vector<double> per_series(series, 0.0);

  parallel_for(series, threads, [&](std::size_t s) {
    const auto& k = kernels::active();
    auto row_ptr = [&](std::size_t a) -> const double* {
      return a < n_p ? view1.data() + (s * n_p + a) * d : view2.data() + (s * n_p + a - n_p) * d;
    };
    Matrix gram(two_n, two_n);
    for (std::size_t a = 0; a < two_n; ++a) {
      for (std::size_t b = a; b < two_n; ++b) {
        const double v = k.dot(row_ptr(a), row_ptr(b), d);
        gram(a, b) = v;
        gram(b, a) = v;
      }
    }
    Matrix dgram;
    if (want_grad) dgram = Matrix(two_n, two_n);
    double total = 0.0;
    for (std::size_t a = 0; a < two_n; ++a) {
      const std::size_t pos = (a + n_p) % two_n;
      double mx = -INFINITY;
      for (std::size_t b = 0; b < two_n; ++b) {
        if (b != a) mx = std::max(mx, gram(a, b));
      }
      double sum = 0.0;
      for (std::size_t b = 0; b < two_n; ++b) {
        if (b != a) sum += std::exp(gram(a, b) - mx);
      }
      const double log_z = mx + std::log(sum);
      total += log_z - gram(a, pos);
      if (want_grad) {
        for (std::size_t b = 0; b < two_n; ++b) {
          if (b == a) continue;
          const double p = std::exp(gram(a, b) - log_z);
          dgram(a, b) = (p - (b == pos ? 1.0 : 0.0)) * scale;
        }
      }
    }
    per_series[s] = total;
    if (!want_grad) return;
    // dZ = (dG + dG^T) Z
    for (std::size_t a = 0; a < two_n; ++a) {
      double* dst = a < n_p ? out.d_view1.data() + (s * n_p + a) * d
                            : out.d_view2.data() + (s * n_p + a - n_p) * d;
      for (std::size_t b = 0; b < two_n; ++b) {
        const double w = dgram(a, b) + dgram(b, a);
        if (w != 0.0) k.axpy(w, row_ptr(b), dst, d);
      }
    }
  });

  double total = 0.0;
  for (double v : per_series) total += v;
  out.loss = total * scale;
  return out;
}

std::vector<std::size_t> level_sizes(std::size_t num_patches) {
  if (num_patches == 0) throw std::invalid_argument("level_sizes: N must be >= 1");
  std::vector<std::size_t> sizes{num_patches};
  while (sizes.back() > 1) sizes.push_back(sizes.back() / 2);
  return sizes;
}

HierarchicalLoss hierarchical_cl_loss(const ViewEmbeddings& views, const ClOptions& opts, bool want_grad) {
  const std::size_t series = views.series;
  const auto sizes = level_sizes(views.num_patches);
  const std::size_t levels = sizes.size();
  const std::size_t counted = opts.include_level0 ? levels : levels - 1;
  const double weight =
      opts.level_reduce == Reduce::mean && counted > 0 ? 1.0 / static_cast<double>(counted) : 1.0;

  struct Level {
    Matrix v1, v2;
    std::vector<std::uint32_t> arg1, arg2;  // pooling sources in the previous level
    LevelLoss loss;
  };
  std::vector<Level> lv(levels);
  lv[0].v1 = views.view1;
  lv[0].v2 = views.view2;
  for (std::size_t l = 1; l < levels; ++l) {
    auto p1 = ops::maxpool_adjacent_grouped(lv[l - 1].v1, series);
    auto p2 = ops::maxpool_adjacent_grouped(lv[l - 1].v2, series);
    lv[l].v1 = std::move(p1.out);
    lv[l].v2 = std::move(p2.out);
    lv[l].arg1 = std::move(p1.argmax);
    lv[l].arg2 = std::move(p2.argmax);
  }

  HierarchicalLoss out;
  for (std::size_t l = 0; l < levels; ++l) {
    if (l == 0 && !opts.include_level0) continue;
    lv[l].loss = contrastive_level_loss(lv[l].v1, lv[l].v2, series, sizes[l], want_grad, opts.threads);
    out.per_level.push_back(lv[l].loss.loss);
    out.total += weight * lv[l].loss.loss;
  }
  if (!want_grad) return out;

  // walk back down the pyramid, routing pooled grads to the argmax rows
  Matrix g1(lv[levels - 1].v1.rows(), lv[levels - 1].v1.cols());
  Matrix g2(g1.rows(), g1.cols());
  for (std::size_t l = levels; l-- > 0;) {
    if (!lv[l].loss.d_view1.empty()) {
      add_inplace(g1, scaled(lv[l].loss.d_view1, weight));
      add_inplace(g2, scaled(lv[l].loss.d_view2, weight));
    }
    if (l == 0) break;
    g1 = ops::maxpool_adjacent_backward(g1, lv[l].arg1, lv[l - 1].v1.rows());
    g2 = ops::maxpool_adjacent_backward(g2, lv[l].arg2, lv[l - 1].v2.rows());
  }
  out.d_view1 = std::move(g1);
  out.d_view2 = std::move(g2);
  return out;
}

}  // namespace pits::pretrain
