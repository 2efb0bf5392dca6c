#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "pits/app.hpp"

namespace pits::app {
namespace {

struct CommandDefault {
  std::string_view command;
  std::string_view key;
  std::string_view value;
};

// Small-dims and toy-scale defaults for commands that would otherwise
// inherit the full-scale ones.
const std::vector<CommandDefault>& command_defaults() {
  static const std::vector<CommandDefault> table = {
      {"gradcheck", "batch_size", "2"},
      {"gradcheck", "channels", "2"},
      {"gradcheck", "input_len", "12"},
      {"gradcheck", "patch_len", "3"},
      {"gradcheck", "stride", "3"},
      {"gradcheck", "dim", "5"},
      {"experiment shift", "input_len", "96"},
      {"experiment shift", "horizon", "24"},
      {"experiment shift", "patch_len", "12"},
      {"experiment shift", "dim", "32"},
      {"experiment shift", "epochs", "20"},
      {"experiment shift", "batch_size", "32"},
      {"experiment shift", "probe_epochs", "20"},
      {"experiment shift", "lr", "1e-3"},
      {"experiment shift", "eval_stride", "8"},
      {"experiment classtoy", "task", "pi"},
      {"experiment classtoy", "patch_len", "16"},
      {"experiment classtoy", "dim", "16"},
      {"experiment classtoy", "epochs", "50"},
      {"experiment classtoy", "batch_size", "16"},
      {"experiment classtoy", "probe_epochs", "300"},
      {"experiment classtoy", "lr", "1e-3"},
      {"experiment classtoy", "lr_probe", "1e-2"},
      {"toygen", "input_len", "96"},
      {"toygen", "horizon", "24"},
  };
  return table;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw std::invalid_argument("config: " + key + " = '" + value + "' is not " + expected);
}

template <typename T>
bool parse_int(const std::string& s, T& out) {
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

const std::vector<KeySpec>& known_keys() {
  static const std::vector<KeySpec> keys = {
      {"data", "", "input CSV"},
      {"labels", "", "labels sidecar CSV (series_id,label); switches data to a labeled set"},
      {"timestamp_col", "auto", "timestamp column name, auto or none"},
      {"columns", "", "comma list of value columns; empty takes all"},
      {"split", "0.6,0.2,0.2", "train,val,test ratios"},
      {"eval_split", "test", "split scored by eval/finetune/supervised"},
      {"input_len", "512", "L"},
      {"horizon", "96", "H"},
      {"patch_len", "12", "P"},
      {"stride", "auto", "patch stride; auto is P (P/2 for supervised)"},
      {"pad", "auto", "none or replicate-last; auto is none (replicate-last for supervised)"},
      {"dim", "128", "D"},
      {"kind", "mlp", "linear, mlp or mixer"},
      {"task", "pi+cl", "pi, pi+cl, pd, zero-zero or zero-xu"},
      {"cl", "auto", "contrastive loss on/off; auto is on for pi+cl only"},
      {"cl_level_reduce", "mean", "mean or sum over hierarchy levels"},
      {"cl_level0", "true", "include the un-pooled level"},
      {"recon_reduce", "mean", "mean or sum reconstruction error"},
      {"dropout", "0.2", "dropout before the reconstruction head"},
      {"batch_size", "64", "mini-batch size"},
      {"epochs", "100", "pretraining / supervised epochs"},
      {"max_steps", "0", "step cap per stage; 0 is none"},
      {"window_stride", "1", "training window stride"},
      {"eval_stride", "1", "evaluation window stride"},
      {"lr", "1e-4", "Adam learning rate"},
      {"probe_epochs", "10", "linear-probe epochs"},
      {"full_epochs", "auto", "end-to-end epochs; auto is 2 x probe_epochs"},
      {"lr_probe", "auto", "probe learning rate; auto is lr"},
      {"lr_full", "auto", "end-to-end learning rate; auto is lr"},
      {"head_dropout", "0.2", "dropout before the downstream head"},
      {"mode", "ft", "ft (probe then end-to-end) or lp (probe only)"},
      {"agg", "max", "classifier aggregation: max, avg or concat"},
      {"train_fraction", "0.5", "per-class train share of a labeled set"},
      {"repr", "z2", "encoder layer feeding the downstream head"},
      {"weights", "", "input weight file"},
      {"seed", "2021", "root seed"},
      {"seeds", "2021,2022,2023", "seeds for the packaged experiments"},
      {"toy", "shift", "toygen generator: shift or class"},
      {"toy_length", "auto", "toy series length; auto is 1200 (shift) or 96 (class)"},
      {"toy_noise", "auto", "toy noise std; auto is 0.05 (shift) or 0.3 (class)"},
      {"num_classes", "10", "class toy classes"},
      {"per_class", "20", "class toy series per class"},
      {"channels", "1", "synthetic channels (gradcheck)"},
      {"gradcheck_eps", "1e-5", "finite-difference step"},
      {"gradcheck_tol", "1e-4", "max relative error"},
      {"gradcheck_corrupt", "", "test hook: perturb this tensor's analytic gradient"},
      {"out", "", "output directory; default $PITS_OUT_ROOT/<command>-<hash>"},
      {"threads", "1", "worker threads"},
  };
  return keys;
}

RunConfig::RunConfig(std::string_view command) : command_(command) {
  for (const auto& k : known_keys()) values_[std::string(k.key)] = std::string(k.default_value);
  for (const auto& d : command_defaults()) {
    if (d.command == command) values_[std::string(d.key)] = std::string(d.value);
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
  it->second = value;
  explicit_[key] = true;
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    try {
      set(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

bool RunConfig::is_default(const std::string& key) const { return !explicit_.contains(key); }

const std::string& RunConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::logic_error("config: unregistered key '" + key + "'");
  return it->second;
}

std::size_t RunConfig::size(const std::string& key) const {
  const auto& v = str(key);
  std::size_t out = 0;
  if (!parse_int(v, out)) bad_value(key, v, "a non-negative integer");
  return out;
}

double RunConfig::real(const std::string& key) const {
  const auto& v = str(key);
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) bad_value(key, v, "a finite number");
  return out;
}

bool RunConfig::flag(const std::string& key) const {
  const auto& v = str(key);
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::uint64_t RunConfig::u64(const std::string& key) const {
  const auto& v = str(key);
  std::uint64_t out = 0;
  if (!parse_int(v, out)) bad_value(key, v, "an unsigned integer");
  return out;
}

std::vector<std::uint64_t> RunConfig::u64_list(const std::string& key) const {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(str(key))) {
    std::uint64_t v = 0;
    if (!parse_int(item, v)) bad_value(key, str(key), "a comma list of unsigned integers");
    out.push_back(v);
  }
  if (out.empty()) bad_value(key, str(key), "a non-empty list");
  return out;
}

std::string RunConfig::hash() const {
  std::string text = command_ + "\n";
  for (const auto& [k, v] : values_) {
    if (k == "out" || k == "threads") continue;
    text += k + "=" + v + "\n";
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  return buf;
}

finetune::PatchSetup patch_setup(const RunConfig& cfg) {
  finetune::PatchSetup ps;
  ps.patch_len = cfg.size("patch_len");
  ps.stride = cfg.str("stride") == "auto" ? ps.patch_len : cfg.size("stride");
  ps.pad = cfg.str("pad") == "auto" ? data::PadMode::none : data::parse_pad_mode(cfg.str("pad"));
  if (ps.patch_len == 0 || ps.stride == 0) throw std::invalid_argument("config: patch_len and stride must be >= 1");
  return ps;
}

pretrain::PretrainConfig pretrain_config(const RunConfig& cfg) {
  pretrain::PretrainConfig pc;
  pc.task = pretrain::parse_task(cfg.str("task"));
  pc.cl = cfg.str("cl") == "auto" ? pc.task == pretrain::Task::pi_cl : cfg.flag("cl");
  pc.kind = model::parse_encoder_kind(cfg.str("kind"));
  pc.input_len = cfg.size("input_len");
  const auto ps = patch_setup(cfg);
  pc.patch_len = ps.patch_len;
  pc.stride = ps.stride;
  pc.pad = ps.pad;
  pc.dim = cfg.size("dim");
  pc.dropout = cfg.real("dropout");
  pc.batch_size = cfg.size("batch_size");
  pc.epochs = cfg.size("epochs");
  pc.max_steps = cfg.size("max_steps");
  pc.window_stride = cfg.size("window_stride");
  pc.recon_reduce = pretrain::parse_reduce(cfg.str("recon_reduce"));
  pc.cl_opts.level_reduce = pretrain::parse_reduce(cfg.str("cl_level_reduce"));
  pc.cl_opts.include_level0 = cfg.flag("cl_level0");
  pc.cl_opts.threads = cfg.size("threads");
  pc.adam.lr = cfg.real("lr");
  pc.seed = cfg.u64("seed");
  pc.config_hash = cfg.hash();
  pc.validate();
  return pc;
}

finetune::FinetuneSchedule finetune_schedule(const RunConfig& cfg) {
  auto s = finetune::FinetuneSchedule::with_probe_epochs(cfg.size("probe_epochs"));
  if (cfg.str("full_epochs") != "auto") s.full_epochs = cfg.size("full_epochs");
  const double lr = cfg.real("lr");
  s.lr_probe = cfg.str("lr_probe") == "auto" ? lr : cfg.real("lr_probe");
  s.lr_full = cfg.str("lr_full") == "auto" ? lr : cfg.real("lr_full");
  s.head_dropout = cfg.real("head_dropout");
  s.batch_size = cfg.size("batch_size");
  s.max_steps = cfg.size("max_steps");
  if (!(s.head_dropout >= 0.0 && s.head_dropout < 1.0)) {
    throw std::invalid_argument("config: head_dropout must be in [0, 1)");
  }
  if (s.batch_size == 0) throw std::invalid_argument("config: batch_size must be >= 1");
  if (!(s.lr_probe > 0.0 && s.lr_full > 0.0)) throw std::invalid_argument("config: learning rates must be > 0");
  return s;
}

finetune::SupervisedConfig supervised_config(const RunConfig& cfg) {
  finetune::SupervisedConfig sc;
  sc.kind = model::parse_encoder_kind(cfg.str("kind"));
  sc.input_len = cfg.size("input_len");
  sc.horizon = cfg.size("horizon");
  sc.patch_len = cfg.size("patch_len");
  sc.stride = cfg.str("stride") == "auto" ? 0 : cfg.size("stride");
  sc.pad = cfg.str("pad") == "auto" ? data::PadMode::replicate_last : data::parse_pad_mode(cfg.str("pad"));
  sc.dim = cfg.size("dim");
  sc.epochs = cfg.size("epochs");
  sc.batch_size = cfg.size("batch_size");
  sc.max_steps = cfg.size("max_steps");
  sc.lr = cfg.real("lr");
  sc.head_dropout = cfg.real("head_dropout");
  sc.window_stride = cfg.size("window_stride");
  sc.repr = model::parse_representation(cfg.str("repr"));
  sc.seed = cfg.u64("seed");
  sc.config_hash = cfg.hash();
  if (sc.patch_len == 0 || sc.dim == 0 || sc.batch_size == 0 || sc.horizon == 0 || sc.window_stride == 0) {
    throw std::invalid_argument("config: patch_len, dim, batch_size, horizon and window_stride must be >= 1");
  }
  const auto ps = sc.patches();
  if (data::patch_count(sc.input_len, ps.patch_len, ps.stride, ps.pad) == 0) {
    throw std::invalid_argument("config: input_len " + std::to_string(sc.input_len) + " yields no patches");
  }
  return sc;
}

data::TimeSeriesDataset load_dataset(const RunConfig& cfg) {
  const auto& path = cfg.str("data");
  if (path.empty()) throw std::invalid_argument("config: data is required");
  data::CsvSchema schema;
  const auto& ts = cfg.str("timestamp_col");
  if (ts == "none") {
    schema.timestamp_col.reset();
  } else if (ts != "auto") {
    schema.timestamp_col = ts;
  }
  schema.value_cols = split_list(cfg.str("columns"));
  auto ds = data::load_csv(path, schema);
  if (ts == "none" && !ds.timestamps.empty()) {
    throw std::invalid_argument("config: timestamp_col = none but " + path + " has a non-numeric first column");
  }
  return data::chronological_split(std::move(ds), data::parse_split_ratios(cfg.str("split")));
}

}  // namespace pits::app
