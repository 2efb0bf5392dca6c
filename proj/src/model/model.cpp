#include "pits/model.hpp"

#include <cmath>
#include <stdexcept>

#include "pits/kernels.hpp"

namespace pits::model {
namespace {

Param uniform_param(const std::string& name, std::size_t rows, std::size_t cols, std::size_t fan_in,
                    const Rng& init) {
  Rng r = init.derive(name);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = r.uniform(-bound, bound);
  return Param(name, std::move(m));
}

Param zero_param(const std::string& name, std::size_t cols) { return Param(name, Matrix(1, cols)); }

void push_if(std::vector<Param*>& out, Param& p) {
  if (p.present()) out.push_back(&p);
}

}  // namespace

EncoderKind parse_encoder_kind(const std::string& s) {
  if (s == "linear") return EncoderKind::linear;
  if (s == "mlp") return EncoderKind::mlp;
  if (s == "mixer") return EncoderKind::mixer;
  throw std::invalid_argument("unknown encoder kind '" + s + "' (expected linear|mlp|mixer)");
}

std::string to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::linear: return "linear";
    case EncoderKind::mlp: return "mlp";
    case EncoderKind::mixer: return "mixer";
  }
  return "?";
}

Aggregate parse_aggregate(const std::string& s) {
  if (s == "max") return Aggregate::max;
  if (s == "avg") return Aggregate::avg;
  if (s == "concat") return Aggregate::concat;
  throw std::invalid_argument("unknown aggregate '" + s + "' (expected max|avg|concat)");
}

std::string to_string(Aggregate a) {
  switch (a) {
    case Aggregate::max: return "max";
    case Aggregate::avg: return "avg";
    case Aggregate::concat: return "concat";
  }
  return "?";
}

Representation parse_representation(const std::string& s) {
  if (s == "z1") return Representation::z1;
  if (s == "z2") return Representation::z2;
  throw std::invalid_argument("unknown representation '" + s + "' (expected z1|z2)");
}

std::string to_string(Representation r) { return r == Representation::z1 ? "z1" : "z2"; }

ForecastHead& ModelParams::forecast_head() {
  if (!has_forecast_head()) throw std::logic_error("model has no forecast head");
  return std::get<ForecastHead>(head);
}
const ForecastHead& ModelParams::forecast_head() const {
  if (!has_forecast_head()) throw std::logic_error("model has no forecast head");
  return std::get<ForecastHead>(head);
}
ClassifierHead& ModelParams::classifier_head() {
  if (!has_classifier_head()) throw std::logic_error("model has no classifier head");
  return std::get<ClassifierHead>(head);
}
const ClassifierHead& ModelParams::classifier_head() const {
  if (!has_classifier_head()) throw std::logic_error("model has no classifier head");
  return std::get<ClassifierHead>(head);
}

std::vector<Param*> ModelParams::params(ParamGroup group) {
  std::vector<Param*> out;
  const bool enc = group == ParamGroup::all || group == ParamGroup::encoder || group == ParamGroup::pretrain;
  const bool rec = group == ParamGroup::all || group == ParamGroup::recon || group == ParamGroup::pretrain;
  const bool hd = group == ParamGroup::all || group == ParamGroup::head;
  if (enc) {
    for (Param* p : {&encoder.w1, &encoder.b1, &encoder.w2, &encoder.b2, &encoder.wt, &encoder.bt}) {
      push_if(out, *p);
    }
  }
  if (rec) {
    push_if(out, recon.w);
    push_if(out, recon.b);
  }
  if (hd) {
    if (auto* f = std::get_if<ForecastHead>(&head)) {
      push_if(out, f->w);
      push_if(out, f->b);
    } else if (auto* c = std::get_if<ClassifierHead>(&head)) {
      push_if(out, c->w);
      push_if(out, c->b);
    }
  }
  return out;
}

std::vector<const Param*> ModelParams::params(ParamGroup group) const {
  auto mut = const_cast<ModelParams*>(this)->params(group);
  return {mut.begin(), mut.end()};
}

std::vector<ParamView> ModelParams::views(ParamGroup group) {
  std::vector<ParamView> out;
  for (Param* p : params(group)) out.push_back({p->name, p->value.values(), p->grad.values()});
  return out;
}

std::size_t ModelParams::count(ParamGroup group) const {
  std::size_t n = 0;
  for (const Param* p : params(group)) n += p->value.size();
  return n;
}

void ModelParams::zero_grads() {
  for (Param* p : params(ParamGroup::all)) p->zero_grad();
}

ModelParams init_params(EncoderKind kind, std::size_t patch_len, std::size_t dim,
                        std::size_t num_patches, const Rng& rng, double dropout) {
  if (patch_len == 0 || dim == 0) throw std::invalid_argument("init_params: P and D must be >= 1");
  if (kind == EncoderKind::mixer && num_patches == 0) {
    throw std::invalid_argument("init_params: mixer encoder needs N >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("init_params: dropout must be in [0, 1)");
  const Rng init = rng.derive(streams::init);
  ModelParams mp;
  mp.seed = rng.seed();
  EncoderParams& e = mp.encoder;
  e.kind = kind;
  e.patch_len = patch_len;
  e.dim = dim;
  e.num_patches = num_patches;
  e.dropout = dropout;
  e.w1 = uniform_param("encoder.w1", patch_len, dim, patch_len, init);
  e.b1 = zero_param("encoder.b1", dim);
  if (kind != EncoderKind::linear) {
    e.w2 = uniform_param("encoder.w2", dim, dim, dim, init);
    e.b2 = zero_param("encoder.b2", dim);
  }
  if (kind == EncoderKind::mixer) {
    e.wt = uniform_param("encoder.wt", num_patches, num_patches, num_patches, init);
    e.bt = zero_param("encoder.bt", num_patches);
  }
  mp.recon.w = uniform_param("recon.w", dim, patch_len, dim, init);
  mp.recon.b = zero_param("recon.b", patch_len);
  return mp;
}

void init_forecast_head(ModelParams& params, std::size_t horizon, const Rng& rng) {
  if (params.encoder.num_patches == 0) throw std::invalid_argument("init_forecast_head: model has N = 0");
  const Rng init = rng.derive(streams::init);
  ForecastHead h;
  h.num_patches = params.encoder.num_patches;
  h.dim = params.encoder.dim;
  h.horizon = horizon;
  const std::size_t in = h.num_patches * h.dim;
  h.w = uniform_param("forecast.w", in, horizon, in, init);
  h.b = zero_param("forecast.b", horizon);
  params.head = std::move(h);
}

void init_classifier_head(ModelParams& params, Aggregate agg, std::size_t classes, const Rng& rng) {
  if (classes == 0) throw std::invalid_argument("init_classifier_head: need at least one class");
  const Rng init = rng.derive(streams::init);
  ClassifierHead h;
  h.agg = agg;
  h.num_patches = params.encoder.num_patches;
  h.dim = params.encoder.dim;
  h.classes = classes;
  const std::size_t in = h.input_dim();
  h.w = uniform_param("classifier.w", in, classes, in, init);
  h.b = zero_param("classifier.b", classes);
  params.head = std::move(h);
}

EncoderCache encoder_forward(const EncoderParams& enc, const Matrix& patches, std::size_t series,
                             std::size_t num_patches) {
  if (patches.cols() != enc.patch_len) {
    throw std::invalid_argument("encode: patch length " + std::to_string(patches.cols()) +
                                " does not match encoder P = " + std::to_string(enc.patch_len));
  }
  if (patches.rows() != series * num_patches) {
    throw std::invalid_argument("encode: " + std::to_string(patches.rows()) + " patch rows for " +
                                std::to_string(series) + " series x " + std::to_string(num_patches) +
                                " patches");
  }
  EncoderCache c;
  c.series = series;
  c.num_patches = num_patches;
  c.input = patches;
  const Matrix* layer_in = &c.input;
  if (enc.kind == EncoderKind::mixer) {
    if (num_patches != enc.num_patches) {
      throw std::invalid_argument("encode: mixer built for N = " + std::to_string(enc.num_patches) +
                                  ", got N = " + std::to_string(num_patches));
    }
    const std::size_t p = enc.patch_len;
    const auto& k = kernels::active();
    c.mixed = Matrix(patches.rows(), p);
    for (std::size_t s = 0; s < series; ++s) {
      for (std::size_t n = 0; n < num_patches; ++n) {
        double* dst = c.mixed.data() + (s * num_patches + n) * p;
        const double bias = enc.bt.value[n];
        for (std::size_t j = 0; j < p; ++j) dst[j] = bias;
        for (std::size_t m = 0; m < num_patches; ++m) {
          const double w = enc.wt.value(m, n);
          if (w != 0.0) k.axpy(w, patches.data() + (s * num_patches + m) * p, dst, p);
        }
      }
    }
    layer_in = &c.mixed;
  }
  if (enc.kind == EncoderKind::linear) {
    c.z1 = ops::linear(*layer_in, enc.w1.value, enc.b1.value);
    c.z2 = c.z1;
  } else {
    c.pre1 = ops::linear(*layer_in, enc.w1.value, enc.b1.value);
    c.z1 = ops::relu(c.pre1);
    c.z2 = ops::linear(c.z1, enc.w2.value, enc.b2.value);
  }
  return c;
}

Matrix encoder_backward(EncoderParams& enc, const EncoderCache& cache, const Matrix& dz1,
                        const Matrix& dz2, bool need_dx) {
  Matrix d1(cache.z1.rows(), cache.z1.cols());
  if (!dz1.empty()) add_inplace(d1, dz1);
  const Matrix* layer_in = enc.kind == EncoderKind::mixer ? &cache.mixed : &cache.input;
  const bool need_layer_dx = need_dx || enc.kind == EncoderKind::mixer;

  Matrix dlayer;
  if (enc.kind == EncoderKind::linear) {
    if (!dz2.empty()) add_inplace(d1, dz2);
    dlayer = ops::linear_backward(*layer_in, enc.w1.value, d1, enc.w1.grad, enc.b1.grad, need_layer_dx);
  } else {
    if (!dz2.empty()) {
      Matrix back = ops::linear_backward(cache.z1, enc.w2.value, dz2, enc.w2.grad, enc.b2.grad, true);
      add_inplace(d1, back);
    }
    const Matrix dpre = ops::relu_backward(cache.pre1, d1);
    dlayer = ops::linear_backward(*layer_in, enc.w1.value, dpre, enc.w1.grad, enc.b1.grad, need_layer_dx);
  }
  if (enc.kind != EncoderKind::mixer) return dlayer;

  const std::size_t p = enc.patch_len;
  const std::size_t n_p = cache.num_patches;
  const auto& k = kernels::active();
  Matrix dx;
  if (need_dx) dx = Matrix(cache.input.rows(), p);
  for (std::size_t s = 0; s < cache.series; ++s) {
    for (std::size_t n = 0; n < n_p; ++n) {
      const double* dm = dlayer.data() + (s * n_p + n) * p;
      double bsum = 0.0;
      for (std::size_t j = 0; j < p; ++j) bsum += dm[j];
      enc.bt.grad[n] += bsum;
      for (std::size_t m = 0; m < n_p; ++m) {
        const double* xm = cache.input.data() + (s * n_p + m) * p;
        enc.wt.grad(m, n) += k.dot(xm, dm, p);
        if (need_dx) k.axpy(enc.wt.value(m, n), dm, dx.data() + (s * n_p + m) * p, p);
      }
    }
  }
  return dx;
}

Embeddings encode(const ModelParams& params, const data::PatchBatch& batch) {
  EncoderCache c = encoder_forward(params.encoder, batch.patches, batch.series(), batch.num_patches);
  return {std::move(c.z1), std::move(c.z2)};
}

const Matrix& select(const Embeddings& e, Representation r) { return r == Representation::z1 ? e.z1 : e.z2; }

Matrix reconstruct(const ModelParams& params, const Matrix& z2) {
  return ops::linear(z2, params.recon.w.value, params.recon.b.value);
}

Matrix forecast_forward(const ForecastHead& head, const Matrix& z, std::size_t series, double dropout,
                        bool training, Rng& rng, HeadCache* cache) {
  if (z.cols() != head.dim || z.rows() != series * head.num_patches) {
    throw std::invalid_argument("forecast: head expects N = " + std::to_string(head.num_patches) +
                                ", D = " + std::to_string(head.dim) + " for " + std::to_string(series) +
                                " series, got embeddings " + z.shape());
  }
  // rows ordered (series, patch) so the flattened view shares the buffer layout
  Matrix flat = z.reshaped(series, head.num_patches * head.dim);
  ops::DropoutMask mask(flat.rows(), flat.cols(), dropout, training, rng);
  Matrix dropped = mask.apply(flat);
  Matrix y = ops::linear(dropped, head.w.value, head.b.value);
  if (cache != nullptr) {
    cache->input = std::move(flat);
    cache->mask = std::move(mask);
    cache->dropped = std::move(dropped);
  }
  return y;
}

Matrix forecast_backward(ForecastHead& head, const HeadCache& cache, const Matrix& dy) {
  Matrix ddrop = ops::linear_backward(cache.dropped, head.w.value, dy, head.w.grad, head.b.grad, true);
  Matrix dflat = ops::dropout_backward(ddrop, cache.mask);
  return std::move(dflat).reshaped(dflat.rows() * head.num_patches, head.dim);
}

Matrix forecast(const ModelParams& params, const Matrix& z, std::size_t series) {
  Rng unused(0);
  return forecast_forward(params.forecast_head(), z, series, 0.0, false, unused);
}

Matrix classify_forward(const ClassifierHead& head, const Matrix& z, std::size_t instances,
                        std::size_t channels, double dropout, bool training, Rng& rng, HeadCache* cache) {
  const std::size_t n_p = head.num_patches;
  const std::size_t d = head.dim;
  if (z.cols() != d || z.rows() != instances * channels * n_p) {
    throw std::invalid_argument("classify: head expects N = " + std::to_string(n_p) + ", D = " +
                                std::to_string(d) + ", got embeddings " + z.shape());
  }
  const std::size_t in = head.input_dim();
  Matrix pooled(instances, in);
  std::vector<std::uint32_t> argmax;
  if (head.agg == Aggregate::max) argmax.resize(instances * channels * d);
  const double inv_c = 1.0 / static_cast<double>(channels);
  for (std::size_t b = 0; b < instances; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t s = b * channels + c;
      const double* zs = z.data() + s * n_p * d;
      double* out = pooled.data() + b * in;
      switch (head.agg) {
        case Aggregate::max:
          for (std::size_t j = 0; j < d; ++j) {
            std::uint32_t best = 0;
            for (std::size_t n = 1; n < n_p; ++n) {
              if (zs[n * d + j] > zs[best * d + j]) best = static_cast<std::uint32_t>(n);
            }
            argmax[s * d + j] = best;
            out[j] += zs[best * d + j] * inv_c;
          }
          break;
        case Aggregate::avg:
          for (std::size_t n = 0; n < n_p; ++n) {
            for (std::size_t j = 0; j < d; ++j) out[j] += zs[n * d + j] * inv_c / static_cast<double>(n_p);
          }
          break;
        case Aggregate::concat:
          for (std::size_t i = 0; i < n_p * d; ++i) out[i] += zs[i] * inv_c;
          break;
      }
    }
  }
  ops::DropoutMask mask(pooled.rows(), pooled.cols(), dropout, training, rng);
  Matrix dropped = mask.apply(pooled);
  Matrix logits = ops::linear(dropped, head.w.value, head.b.value);
  if (cache != nullptr) {
    cache->input = std::move(pooled);
    cache->mask = std::move(mask);
    cache->dropped = std::move(dropped);
    cache->argmax = std::move(argmax);
  }
  return logits;
}

Matrix classify_backward(ClassifierHead& head, const HeadCache& cache, const Matrix& dy,
                         std::size_t instances, std::size_t channels) {
  Matrix ddrop = ops::linear_backward(cache.dropped, head.w.value, dy, head.w.grad, head.b.grad, true);
  const Matrix dpooled = ops::dropout_backward(ddrop, cache.mask);
  const std::size_t n_p = head.num_patches;
  const std::size_t d = head.dim;
  const std::size_t in = head.input_dim();
  const double inv_c = 1.0 / static_cast<double>(channels);
  Matrix dz(instances * channels * n_p, d);
  for (std::size_t b = 0; b < instances; ++b) {
    const double* g = dpooled.data() + b * in;
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t s = b * channels + c;
      double* dzs = dz.data() + s * n_p * d;
      switch (head.agg) {
        case Aggregate::max:
          for (std::size_t j = 0; j < d; ++j) dzs[cache.argmax[s * d + j] * d + j] += g[j] * inv_c;
          break;
        case Aggregate::avg:
          for (std::size_t n = 0; n < n_p; ++n) {
            for (std::size_t j = 0; j < d; ++j) dzs[n * d + j] += g[j] * inv_c / static_cast<double>(n_p);
          }
          break;
        case Aggregate::concat:
          for (std::size_t i = 0; i < n_p * d; ++i) dzs[i] += g[i] * inv_c;
          break;
      }
    }
  }
  return dz;
}

Matrix classify(const ModelParams& params, const Matrix& z, std::size_t instances, std::size_t channels) {
  Rng unused(0);
  return classify_forward(params.classifier_head(), z, instances, channels, 0.0, false, unused);
}

void check_compatible(const ModelParams& params, const ExpectedShape& expected) {
  const auto& e = params.encoder;
  auto fail = [](const std::string& what, const std::string& want, const std::string& got) {
    throw std::invalid_argument("incompatible weights: expected " + what + " = " + want + ", file has " + got);
  };
  if (e.kind != expected.kind) fail("kind", to_string(expected.kind), to_string(e.kind));
  if (e.patch_len != expected.patch_len) {
    fail("P", std::to_string(expected.patch_len), std::to_string(e.patch_len));
  }
  if (e.dim != expected.dim) fail("D", std::to_string(expected.dim), std::to_string(e.dim));
  if (e.kind == EncoderKind::mixer && e.num_patches != expected.num_patches) {
    fail("N", std::to_string(expected.num_patches), std::to_string(e.num_patches));
  }
}

}  // namespace pits::model
