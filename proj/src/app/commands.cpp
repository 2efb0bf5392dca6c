#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <stdexcept>

#include <CLI11.hpp>
#include <json.hpp>

#include "pits/app.hpp"
#include "pits/gradcheck.hpp"
#include "pits/parallel.hpp"

namespace pits::app {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct Context {
  const RunConfig& cfg;
  std::ostream& out;
  std::ostream& err;
};

// Output directory, resolved before anything is written.
fs::path output_dir(const RunConfig& cfg) {
  if (!cfg.str("out").empty()) return cfg.str("out");
  const char* root = std::getenv(kOutRootEnv);
  std::string name = cfg.command();
  std::replace(name.begin(), name.end(), ' ', '-');
  return fs::path(root != nullptr && *root != '\0' ? root : "runs") / (name + "-" + cfg.hash());
}

fs::path prepare_output(const RunConfig& cfg) {
  const fs::path dir = output_dir(cfg);
  fs::create_directories(dir);
  json manifest;
  manifest["command"] = cfg.command();
  manifest["config_hash"] = cfg.hash();
  manifest["seed"] = cfg.str("seed");
  manifest["format_version"] = kOutputFormatVersion;
  json values = json::object();
  for (const auto& [k, v] : cfg.values()) {
    if (k != "out" && k != "threads") values[k] = v;
  }
  manifest["config"] = values;
  std::ofstream(dir / "run.json") << manifest.dump(2) << "\n";
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

json stamp(json j, const RunConfig& cfg) {
  j["seed"] = cfg.u64("seed");
  j["config_hash"] = cfg.hash();
  j["format_version"] = kOutputFormatVersion;
  return j;
}

json loss_record(const pretrain::LogEntry& e) {
  json j;
  j["epoch"] = e.epoch;
  j["step"] = e.step;
  j["recon"] = e.loss.recon;
  j["cl_total"] = e.loss.cl_total;
  j["cl_levels"] = e.loss.cl_levels;
  j["total"] = e.loss.total;
  return j;
}

json forecast_record(const std::string& dataset, std::size_t horizon, const std::string& split,
                     const finetune::ForecastMetrics& m, const RunConfig& cfg) {
  json j;
  j["dataset"] = dataset;
  j["horizon"] = horizon;
  j["split"] = split;
  j["mse"] = m.mse;
  j["mae"] = m.mae;
  return stamp(std::move(j), cfg);
}

json class_record(const std::string& dataset, std::size_t classes, const std::string& split,
                  const finetune::ClassMetrics& m, const RunConfig& cfg) {
  json j;
  j["dataset"] = dataset;
  j["classes"] = classes;
  j["split"] = split;
  j["acc"] = m.accuracy;
  j["prec"] = m.precision;
  j["rec"] = m.recall;
  j["f1"] = m.f1;
  j["per_class_f1"] = m.per_class_f1;
  return stamp(std::move(j), cfg);
}

// metrics.jsonl plus the same scalar fields as CSV rows.
void write_metrics(const fs::path& dir, const std::vector<json>& records) {
  auto jl = open_out(dir / "metrics.jsonl");
  for (const auto& r : records) jl << r.dump() << "\n";
  auto csv = open_out(dir / "metrics.csv");
  csv << std::setprecision(17);
  std::vector<std::string> cols;
  for (const auto& [k, v] : records.front().items()) {
    if (!v.is_array()) cols.push_back(k);
  }
  for (std::size_t i = 0; i < cols.size(); ++i) csv << (i ? "," : "") << cols[i];
  csv << "\n";
  for (const auto& r : records) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const auto& v = r.at(cols[i]);
      csv << (i ? "," : "");
      if (v.is_string()) {
        csv << v.get<std::string>();
      } else {
        csv << v.dump();
      }
    }
    csv << "\n";
  }
}

void write_stage_log(std::ostream& os, const std::string& stage, const finetune::StageLog& log) {
  for (std::size_t e = 0; e < log.epoch_losses.size(); ++e) {
    json j;
    j["stage"] = stage;
    j["epoch"] = e;
    j["loss"] = log.epoch_losses[e];
    os << j.dump() << "\n";
  }
}

bool labeled(const RunConfig& cfg) { return !cfg.str("labels").empty(); }

data::LabeledSeriesSet load_labeled(const RunConfig& cfg) {
  if (cfg.str("data").empty()) throw std::invalid_argument("config: data is required");
  return data::load_labeled_csv(cfg.str("data"), cfg.str("labels"));
}

std::string dataset_name(const RunConfig& cfg) { return fs::path(cfg.str("data")).stem().string(); }

model::ModelParams load_weights(const RunConfig& cfg) {
  if (cfg.str("weights").empty()) throw std::invalid_argument("config: weights is required");
  return model::load_params(cfg.str("weights"));
}

// The config's encoder settings must describe the weight file.
void check_weights(const model::ModelParams& params, const RunConfig& cfg, std::size_t num_patches) {
  model::check_compatible(params, {model::parse_encoder_kind(cfg.str("kind")), cfg.size("patch_len"),
                                   cfg.size("dim"), num_patches});
}

int cmd_pretrain(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  pretrain::PretrainConfig pc = pretrain_config(cfg);
  data::WindowSet windows;
  if (labeled(cfg)) {
    // one window per training series; L is the series length
    const auto set = load_labeled(cfg);
    windows = series_windows(data::split_labeled(set, cfg.real("train_fraction")).first);
    pc.input_len = windows.input_len();
    pc.validate();
  } else {
    const data::TimeSeriesDataset ds = load_dataset(cfg);
    windows = data::make_input_windows(ds, data::SplitName::train, pc.input_len, pc.window_stride);
  }
  const fs::path dir = prepare_output(cfg);
  ctx.out << "pretrain: task=" << pretrain::to_string(pc.task) << " kind=" << model::to_string(pc.kind)
          << " L=" << pc.input_len << " P=" << pc.patch_len << " stride=" << pc.stride
          << " N=" << pc.num_patches() << " D=" << pc.dim << " windows=" << windows.size() << "\n";
  auto log = open_out(dir / "loss_log.jsonl");
  const auto res = pretrain::run_pretraining(pc, windows, [&](const pretrain::LogEntry& e) {
    log << stamp(loss_record(e), cfg).dump() << "\n";
  });
  model::ModelParams params = res.params;
  params.seed = pc.seed;
  model::save_params(params, dir / "weights.bin");
  ctx.out << "pretrain: params encoder=" << params.count(model::ParamGroup::encoder)
          << " recon=" << params.count(model::ParamGroup::recon) << "\n";
  ctx.out << "pretrain: " << res.steps << " steps";
  if (!res.log.empty()) ctx.out << ", final loss " << res.log.back().loss.total;
  ctx.out << "\nwrote " << (dir / "weights.bin").string() << "\n";
  return 0;
}

int cmd_finetune(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto schedule = finetune_schedule(cfg);
  const auto ps = patch_setup(cfg);
  const std::string mode = cfg.str("mode");
  if (mode != "ft" && mode != "lp") throw std::invalid_argument("config: mode must be ft or lp, got '" + mode + "'");
  const std::uint64_t seed = cfg.u64("seed");
  const Rng head_rng = Rng(seed).derive("head");
  model::ModelParams params = load_weights(cfg);
  params.repr = model::parse_representation(cfg.str("repr"));
  params.config_hash = cfg.hash();
  std::vector<json> records;
  finetune::StageLog probe_log;
  finetune::StageLog full_log;

  if (labeled(cfg)) {
    const auto set = load_labeled(cfg);
    const auto [train, test] = data::split_labeled(set, cfg.real("train_fraction"));
    const std::size_t len = set.series.front().rows();
    check_weights(params, cfg, data::patch_count(len, ps.patch_len, ps.stride, ps.pad));
    model::init_classifier_head(params, model::parse_aggregate(cfg.str("agg")), set.num_classes, head_rng);
    const fs::path dir = prepare_output(cfg);
    params = finetune::classifier_probe(std::move(params), train, schedule, ps, seed, &probe_log);
    if (mode == "ft") params = finetune::classifier_full(std::move(params), train, schedule, ps, seed, &full_log);
    const auto m = finetune::evaluate_classification(params, test, ps);
    records.push_back(class_record(dataset_name(cfg), set.num_classes, "test", m, cfg));
    model::save_params(params, dir / "weights.bin");
    auto log = open_out(dir / "finetune_log.jsonl");
    write_stage_log(log, "probe", probe_log);
    write_stage_log(log, "full", full_log);
    write_metrics(dir, records);
    ctx.out << "finetune (" << mode << "): acc=" << m.accuracy << " f1=" << m.f1 << "\n";
    return 0;
  }

  const data::TimeSeriesDataset ds = load_dataset(cfg);
  const std::size_t len = cfg.size("input_len");
  const std::size_t horizon = cfg.size("horizon");
  const auto eval_split = data::parse_split_name(cfg.str("eval_split"));
  const auto train = data::make_forecast_windows(ds, data::SplitName::train, len, horizon, cfg.size("window_stride"));
  const auto test = data::make_forecast_windows(ds, eval_split, len, horizon, cfg.size("eval_stride"));
  check_weights(params, cfg, data::patch_count(len, ps.patch_len, ps.stride, ps.pad));
  model::init_forecast_head(params, horizon, head_rng);
  const fs::path dir = prepare_output(cfg);
  params = finetune::linear_probe(std::move(params), train, schedule, ps, seed, &probe_log);
  if (mode == "ft") params = finetune::full_finetune(std::move(params), train, schedule, ps, seed, &full_log);
  const auto m = finetune::evaluate_forecast(params, test, ps, cfg.size("threads"));
  records.push_back(forecast_record(ds.name, horizon, data::to_string(eval_split), m, cfg));
  model::save_params(params, dir / "weights.bin");
  auto log = open_out(dir / "finetune_log.jsonl");
  write_stage_log(log, "probe", probe_log);
  write_stage_log(log, "full", full_log);
  write_metrics(dir, records);
  ctx.out << "finetune (" << mode << "): mse=" << m.mse << " mae=" << m.mae << "\n";
  return 0;
}

int cmd_supervised(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto sc = supervised_config(cfg);
  const data::TimeSeriesDataset ds = load_dataset(cfg);
  const auto eval_split = data::parse_split_name(cfg.str("eval_split"));
  const auto train = data::make_forecast_windows(ds, data::SplitName::train, sc.input_len, sc.horizon, sc.window_stride);
  const auto test = data::make_forecast_windows(ds, eval_split, sc.input_len, sc.horizon, cfg.size("eval_stride"));
  const fs::path dir = prepare_output(cfg);
  finetune::StageLog log;
  model::ModelParams params = finetune::train_supervised(sc, train, &log);
  params.seed = sc.seed;
  const auto m = finetune::evaluate_forecast(params, test, sc.patches(), cfg.size("threads"));
  model::save_params(params, dir / "weights.bin");
  auto os = open_out(dir / "train_log.jsonl");
  write_stage_log(os, "supervised", log);
  write_metrics(dir, {forecast_record(ds.name, sc.horizon, data::to_string(eval_split), m, cfg)});
  const auto ps = sc.patches();
  ctx.out << "supervised: P=" << ps.patch_len << " stride=" << ps.stride << " pad=" << data::to_string(ps.pad)
          << " N=" << params.forecast_head().num_patches << " mse=" << m.mse << " mae=" << m.mae << "\n";
  return 0;
}

// "auto" stride/pad: the self-supervised patching unless only the supervised
// one matches the head.
finetune::PatchSetup eval_patches(const RunConfig& cfg, std::size_t input_len, std::size_t head_patches) {
  finetune::PatchSetup ps = patch_setup(cfg);
  if (cfg.str("stride") != "auto" || cfg.str("pad") != "auto") return ps;
  if (data::patch_count(input_len, ps.patch_len, ps.stride, ps.pad) == head_patches) return ps;
  finetune::SupervisedConfig sc;
  sc.patch_len = ps.patch_len;
  const auto alt = sc.patches();
  if (data::patch_count(input_len, alt.patch_len, alt.stride, alt.pad) == head_patches) return alt;
  return ps;
}

int cmd_eval(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  model::ModelParams params = load_weights(cfg);
  const auto eval_split = data::parse_split_name(cfg.str("eval_split"));
  std::vector<json> records;
  if (params.has_classifier_head()) {
    if (!labeled(cfg)) throw std::invalid_argument("config: classifier weights need labels");
    const auto set = load_labeled(cfg);
    const auto [train, test] = data::split_labeled(set, cfg.real("train_fraction"));
    const auto ps = eval_patches(cfg, set.series.front().rows(), params.classifier_head().num_patches);
    const auto m = finetune::evaluate_classification(params, test, ps);
    records.push_back(class_record(dataset_name(cfg), params.classifier_head().classes, "test", m, cfg));
    ctx.out << "eval: acc=" << m.accuracy << " f1=" << m.f1 << "\n";
  } else if (params.has_forecast_head()) {
    const data::TimeSeriesDataset ds = load_dataset(cfg);
    const std::size_t len = cfg.size("input_len");
    const auto& head = params.forecast_head();
    const auto test = data::make_forecast_windows(ds, eval_split, len, head.horizon, cfg.size("eval_stride"));
    const auto ps = eval_patches(cfg, len, head.num_patches);
    const auto m = finetune::evaluate_forecast(params, test, ps, cfg.size("threads"));
    records.push_back(forecast_record(ds.name, head.horizon, data::to_string(eval_split), m, cfg));
    ctx.out << "eval: mse=" << m.mse << " mae=" << m.mae << "\n";
  } else {
    throw std::invalid_argument(cfg.str("weights") + ": no downstream head to evaluate");
  }
  write_metrics(prepare_output(cfg), records);
  return 0;
}

toy::ShiftToyConfig shift_toy_config(const RunConfig& cfg) {
  auto tc = toy::ShiftToyConfig::default_grid();
  if (cfg.str("toy_length") != "auto") tc.length = cfg.size("toy_length");
  if (cfg.str("toy_noise") != "auto") tc.noise_std = cfg.real("toy_noise");
  tc.input_len = cfg.size("input_len");
  tc.horizon = cfg.size("horizon");
  if (tc.length < tc.input_len + tc.horizon) {
    throw std::invalid_argument("config: toy_length " + std::to_string(tc.length) + " < input_len + horizon");
  }
  return tc;
}

toy::ClassToyConfig class_toy_config(const RunConfig& cfg) {
  toy::ClassToyConfig tc;
  if (cfg.str("toy_length") != "auto") tc.length = cfg.size("toy_length");
  if (cfg.str("toy_noise") != "auto") tc.noise_std = cfg.real("toy_noise");
  tc.num_classes = cfg.size("num_classes");
  tc.per_class = cfg.size("per_class");
  return tc;
}

int cmd_toygen(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Rng rng = Rng(cfg.u64("seed")).derive(streams::data);
  const std::string kind = cfg.str("toy");
  if (kind == "shift") {
    const auto toy = toy::gen_shift_toy(shift_toy_config(cfg), rng);
    const fs::path dir = prepare_output(cfg);
    data::write_csv(toy.train, dir / "train.csv");
    auto grid = open_out(dir / "grid.csv");
    grid << std::setprecision(17) << "index,slope_delta,amp_delta,file\n";
    for (std::size_t k = 0; k < toy.tests.size(); ++k) {
      const std::string file = "test_" + std::to_string(k) + ".csv";
      data::write_csv(toy.tests[k].test, dir / file);
      grid << k << "," << toy.tests[k].slope_delta << "," << toy.tests[k].amplitude_delta << "," << file << "\n";
    }
    ctx.out << "toygen: shift train + " << toy.tests.size() << " test series in " << dir.string() << "\n";
  } else if (kind == "class") {
    const auto set = toy::gen_class_toy(class_toy_config(cfg), rng);
    const fs::path dir = prepare_output(cfg);
    data::write_labeled_csv(set, dir / "values.csv", dir / "labels.csv");
    ctx.out << "toygen: " << set.size() << " labeled series in " << dir.string() << "\n";
  } else {
    throw std::invalid_argument("config: toy must be shift or class, got '" + kind + "'");
  }
  return 0;
}

int cmd_experiment_shift(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  ShiftOptions o;
  o.toy = shift_toy_config(cfg);
  o.kind = model::parse_encoder_kind(cfg.str("kind"));
  o.patch_len = cfg.size("patch_len");
  o.dim = cfg.size("dim");
  o.dropout = cfg.real("dropout");
  o.pretrain_epochs = cfg.size("epochs");
  o.batch_size = cfg.size("batch_size");
  o.probe_epochs = cfg.size("probe_epochs");
  o.lr = cfg.real("lr");
  o.window_stride = cfg.size("window_stride");
  o.eval_stride = cfg.size("eval_stride");
  o.seeds = cfg.u64_list("seeds");
  o.threads = cfg.size("threads");
  if (o.patch_len == 0 || o.dim == 0 || o.batch_size == 0 || o.window_stride == 0 || o.eval_stride == 0) {
    throw std::invalid_argument("config: patch_len, dim, batch_size and strides must be >= 1");
  }
  if (data::patch_count(o.toy.input_len, o.patch_len, o.patch_len, data::PadMode::none) < 2) {
    throw std::invalid_argument("config: input_len / patch_len gives fewer than 2 patches");
  }
  const fs::path dir = prepare_output(cfg);
  const auto rows = run_shift_experiment(o, &ctx.err);
  auto csv = open_out(dir / "shift_grid.csv");
  csv << std::setprecision(17) << "slope_delta,amp_delta,mse_pi,mse_pd,gap\n";
  std::size_t nonneg = 0;
  for (const auto& r : rows) {
    csv << r.slope_delta << "," << r.amp_delta << "," << r.mse_pi << "," << r.mse_pd << "," << r.gap << "\n";
    if (r.gap >= 0.0) ++nonneg;
  }
  ctx.out << "shift: " << rows.size() << " grid points, gap >= 0 on " << nonneg << "\n";
  return 0;
}

int cmd_experiment_classtoy(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  ClassToyOptions o;
  o.toy = class_toy_config(cfg);
  o.kind = model::parse_encoder_kind(cfg.str("kind"));
  o.patch_len = cfg.size("patch_len");
  o.dim = cfg.size("dim");
  o.dropout = cfg.real("dropout");
  o.task = pretrain::parse_task(cfg.str("task"));
  o.pretrain_epochs = cfg.size("epochs");
  o.batch_size = cfg.size("batch_size");
  o.lr = cfg.real("lr");
  o.probe_epochs = cfg.size("probe_epochs");
  o.probe_lr = cfg.str("lr_probe") == "auto" ? o.lr : cfg.real("lr_probe");
  o.head_dropout = cfg.real("head_dropout");
  o.repr = model::parse_representation(cfg.str("repr"));
  o.train_fraction = cfg.real("train_fraction");
  o.agg = model::parse_aggregate(cfg.str("agg"));
  o.seeds = cfg.u64_list("seeds");
  if (data::patch_count(o.toy.length, o.patch_len, o.patch_len, data::PadMode::none) < 2) {
    throw std::invalid_argument("config: toy_length / patch_len gives fewer than 2 patches");
  }
  const fs::path dir = prepare_output(cfg);
  const auto res = run_classtoy_experiment(o, &ctx.err);
  const auto& first = res.seeds.front();
  write_embeddings_csv(first.encoder, first.set, {o.patch_len, o.patch_len, data::PadMode::none},
                       dir / "embeddings.csv");
  auto labels = open_out(dir / "labels.csv");
  labels << "series_id,label\n";
  for (std::size_t i = 0; i < first.set.size(); ++i) labels << first.set.ids[i] << "," << first.set.labels[i] << "\n";
  std::vector<json> records;
  for (const auto& s : res.seeds) {
    for (const bool pretrained : {true, false}) {
      json j = class_record(pretrained ? "classtoy_pretrained" : "classtoy_random", o.toy.num_classes, "test",
                            pretrained ? s.pretrained : s.random, cfg);
      j["seed"] = s.seed;
      records.push_back(std::move(j));
    }
  }
  write_metrics(dir, records);
  ctx.out << "classtoy: probe accuracy pretrained " << res.mean_acc_pretrained << " random "
          << res.mean_acc_random << "\n";
  return 0;
}

int cmd_gradcheck(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  const std::size_t batch = cfg.size("batch_size");
  const std::size_t channels = cfg.size("channels");
  const std::size_t len = cfg.size("input_len");
  const auto ps = patch_setup(cfg);
  const std::size_t dim = cfg.size("dim");
  const double dropout = cfg.real("dropout");
  const double eps = cfg.real("gradcheck_eps");
  const double tol = cfg.real("gradcheck_tol");
  const std::string corrupt = cfg.str("gradcheck_corrupt");
  const std::uint64_t seed = cfg.u64("seed");
  const std::size_t n = data::patch_count(len, ps.patch_len, ps.stride, ps.pad);
  if (batch == 0 || channels == 0 || dim == 0) throw std::invalid_argument("config: batch_size, channels, dim must be >= 1");
  if (n < 2) throw std::invalid_argument("config: gradcheck needs N >= 2, got " + std::to_string(n));
  if (!corrupt.empty()) {
    const auto probe = model::init_params(model::EncoderKind::mixer, ps.patch_len, dim, n, Rng(seed));
    const auto names = probe.params();
    if (std::none_of(names.begin(), names.end(), [&](const model::Param* p) { return p->name == corrupt; })) {
      throw std::invalid_argument("config: gradcheck_corrupt names no tensor: '" + corrupt + "'");
    }
  }

  const Rng root(seed);
  std::vector<Matrix> inputs;
  Rng data_rng = root.derive(streams::data);
  for (std::size_t b = 0; b < batch; ++b) {
    Matrix x(len, channels);
    for (auto& v : x.values()) v = data_rng.normal();
    inputs.push_back(std::move(x));
  }
  const data::PatchBatch pb = data::patchify(inputs, ps.patch_len, ps.stride, ps.pad);
  Rng mask_rng = root.derive(streams::masking);
  const data::MaskPair masks = data::complementary_masks(batch, channels, n, mask_rng);

  const fs::path dir = prepare_output(cfg);
  auto report = open_out(dir / "gradcheck.jsonl");
  bool all_pass = true;
  for (const auto task : {pretrain::Task::pi, pretrain::Task::pi_cl, pretrain::Task::pd}) {
    for (const auto kind : {model::EncoderKind::linear, model::EncoderKind::mlp, model::EncoderKind::mixer}) {
      model::ModelParams params = model::init_params(kind, ps.patch_len, dim, n, root, dropout);
      // zero biases put the zero-patch encoding exactly on the ReLU kink
      Rng jitter = root.derive("gradcheck_bias");
      for (model::Param* p : params.params(model::ParamGroup::pretrain)) {
        if (p->name.ends_with(".b1") || p->name.ends_with(".b2") || p->name.ends_with(".bt") || p->name.ends_with(".b")) {
          for (auto& v : p->value.values()) v = jitter.uniform(-0.5, 0.5);
        }
      }
      pretrain::ObjectiveOptions opts = pretrain::objective_for(task);
      opts.recon_reduce = pretrain::parse_reduce(cfg.str("recon_reduce"));
      opts.cl_opts.level_reduce = pretrain::parse_reduce(cfg.str("cl_level_reduce"));
      opts.cl_opts.include_level0 = cfg.flag("cl_level0");
      const Rng drop = root.derive(streams::dropout);
      pretrain::pits_loss(params, pb, masks, opts, drop, true);

      // analytic grads are copied out: every loss evaluation below refills them
      std::vector<std::vector<double>> grads;
      auto views = params.views(model::ParamGroup::pretrain);
      for (const auto& v : views) {
        grads.emplace_back(v.grad.begin(), v.grad.end());
        if (v.name == corrupt && !grads.back().empty()) grads.back()[0] += 0.1 * (1.0 + std::abs(grads.back()[0]));
      }
      for (std::size_t i = 0; i < views.size(); ++i) views[i].grad = grads[i];

      const auto res = finite_difference_check(
          [&] { return pretrain::pits_loss(params, pb, masks, opts, drop, true).total; }, views, eps);
      const bool pass = res.max_rel_error < tol;
      all_pass = all_pass && pass;
      json j;
      j["task"] = pretrain::to_string(task);
      j["kind"] = model::to_string(kind);
      j["max_rel_error"] = res.max_rel_error;
      j["worst_param"] = res.worst_param;
      j["worst_index"] = res.worst_index;
      j["coordinates"] = res.coordinates;
      j["pass"] = pass;
      report << stamp(std::move(j), cfg).dump() << "\n";
      ctx.out << (pass ? "PASS" : "FAIL") << " task=" << pretrain::to_string(task)
              << " kind=" << model::to_string(kind) << " max_rel_err=" << std::setprecision(3)
              << std::scientific << res.max_rel_error << std::defaultfloat << std::setprecision(6)
              << " worst=" << res.worst_param << "[" << res.worst_index << "]\n";
    }
  }
  ctx.out << "gradcheck: " << (all_pass ? "all combinations pass" : "FAILED") << "\n";
  return all_pass ? 0 : 1;
}

int cmd_export_embeddings(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  model::ModelParams params = load_weights(cfg);
  params.repr = model::parse_representation(cfg.str("repr"));
  const auto ps = patch_setup(cfg);
  data::LabeledSeriesSet set;
  if (labeled(cfg)) {
    set = load_labeled(cfg);
  } else {
    const data::TimeSeriesDataset ds = load_dataset(cfg);
    const auto split = data::parse_split_name(cfg.str("eval_split"));
    const auto windows = data::make_input_windows(ds, split, cfg.size("input_len"), cfg.size("eval_stride"));
    set.num_classes = 1;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      auto w = windows.at(i);
      set.ids.push_back(data::to_string(split) + ":" + std::to_string(w.origin));
      set.series.push_back(std::move(w.input));
      set.labels.push_back(0);
    }
  }
  if (set.size() == 0) throw std::invalid_argument("export-embeddings: no series");
  check_weights(params, cfg, data::patch_count(set.series.front().rows(), ps.patch_len, ps.stride, ps.pad));
  const fs::path dir = prepare_output(cfg);
  write_embeddings_csv(params, set, ps, dir / "embeddings.csv");
  ctx.out << "export-embeddings: " << set.size() << " series -> " << (dir / "embeddings.csv").string() << "\n";
  return 0;
}

struct CommandSpec {
  std::string name;
  std::string help;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Patch-independent self-supervised pretraining for time series", "pits"};
  app.require_subcommand(1);
  const std::vector<CommandSpec> commands = {
      {"pretrain", "self-supervised pretraining; writes weights and a loss log"},
      {"finetune", "linear probe (mode=lp) or probe then end-to-end (mode=ft)"},
      {"supervised", "train encoder and forecast head from scratch"},
      {"eval", "score a trained model"},
      {"toygen", "write toy datasets as CSV"},
      {"experiment", "packaged studies: shift or classtoy"},
      {"gradcheck", "finite-difference check of every task x encoder kind"},
      {"export-embeddings", "per-patch embeddings as CSV"},
  };

  struct Parsed {
    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;
    std::map<std::string, CLI::Option*> options;
    std::string experiment;
  };
  std::map<std::string, Parsed> parsed;
  std::map<std::string, CLI::App*> subs;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    auto& p = parsed[c.name];
    sub->add_option("-c,--config", p.config_file, "key=value config file");
    sub->add_option("--set", p.sets, "key=value override (repeatable)");
    for (const auto& k : known_keys()) {
      const std::string key(k.key);
      p.options[key] = sub->add_option("--" + key, p.flags[key], std::string(k.help))
                           ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
    if (c.name == "experiment") {
      sub->add_option("name", p.experiment, "shift or classtoy")->required()->check(CLI::IsMember({"shift", "classtoy"}));
    }
    subs[c.name] = sub;
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  for (const auto& c : commands) {
    if (!subs[c.name]->parsed()) continue;
    auto& p = parsed[c.name];
    const std::string id = c.name == "experiment" ? "experiment " + p.experiment : c.name;
    try {
      RunConfig cfg(id);
      if (!p.config_file.empty()) cfg.load_file(p.config_file);
      for (const auto& kv : p.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      for (const auto& [key, opt] : p.options) {
        if (opt->count() > 0) cfg.set(key, p.flags[key]);
      }
      set_default_threads(std::max<std::size_t>(1, cfg.size("threads")));
      const Context ctx{cfg, out, err};
      if (id == "pretrain") return cmd_pretrain(ctx);
      if (id == "finetune") return cmd_finetune(ctx);
      if (id == "supervised") return cmd_supervised(ctx);
      if (id == "eval") return cmd_eval(ctx);
      if (id == "toygen") return cmd_toygen(ctx);
      if (id == "experiment shift") return cmd_experiment_shift(ctx);
      if (id == "experiment classtoy") return cmd_experiment_classtoy(ctx);
      if (id == "gradcheck") return cmd_gradcheck(ctx);
      if (id == "export-embeddings") return cmd_export_embeddings(ctx);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      return 2;
    }
  }
  return 1;
}

}  // namespace pits::app
