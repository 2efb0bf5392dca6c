#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "pits/model.hpp"

namespace pits::model {
namespace {

static_assert(std::endian::native == std::endian::little, "weight files are little-endian");

constexpr char kMagic[8] = {'P', 'I', 'T', 'S', 'W', 'G', 'T', 'S'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw std::runtime_error(path.string() + ": truncated weight file");
  }
  return v;
}

std::string head_type(const ModelParams& p) {
  if (p.has_forecast_head()) return "forecast";
  if (p.has_classifier_head()) return "classifier";
  return "none";
}

}  // namespace

void save_params(const ModelParams& params, const std::filesystem::path& path) {
  const auto& e = params.encoder;
  nlohmann::ordered_json header;
  header["kind"] = to_string(e.kind);
  header["patch_len"] = e.patch_len;
  header["dim"] = e.dim;
  header["num_patches"] = e.num_patches;
  header["dropout"] = e.dropout;
  header["repr"] = to_string(params.repr);
  header["seed"] = params.seed;
  header["config_hash"] = params.config_hash;
  header["rng"] = std::string(Rng::algorithm);
  header["init"] = "uniform_fan_in";
  nlohmann::ordered_json head;
  head["type"] = head_type(params);
  if (params.has_forecast_head()) {
    head["horizon"] = params.forecast_head().horizon;
    head["num_patches"] = params.forecast_head().num_patches;
  } else if (params.has_classifier_head()) {
    const auto& c = params.classifier_head();
    head["agg"] = to_string(c.agg);
    head["classes"] = c.classes;
    head["num_patches"] = c.num_patches;
  }
  header["head"] = head;
  const auto tensors = params.params(ParamGroup::all);
  nlohmann::ordered_json names = nlohmann::ordered_json::array();
  for (const Param* p : tensors) names.push_back(p->name);
  header["tensors"] = names;
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write weight file: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kWeightFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const Param* p : tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<std::uint64_t>(out, p->value.rows());
    put<std::uint64_t>(out, p->value.cols());
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("failed writing weight file: " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open weight file: " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + ": not a weight file (bad magic)");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kWeightFormatVersion) {
    throw std::runtime_error(path.string() + ": unsupported format version " + std::to_string(version));
  }
  const auto header_len = get<std::uint32_t>(in, path);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), header_len)) throw std::runtime_error(path.string() + ": truncated header");
  const auto header = nlohmann::json::parse(text);

  ModelParams mp;
  auto& e = mp.encoder;
  e.kind = parse_encoder_kind(header.at("kind").get<std::string>());
  e.patch_len = header.at("patch_len").get<std::size_t>();
  e.dim = header.at("dim").get<std::size_t>();
  e.num_patches = header.at("num_patches").get<std::size_t>();
  e.dropout = header.at("dropout").get<double>();
  mp.repr = parse_representation(header.at("repr").get<std::string>());
  mp.seed = header.at("seed").get<std::uint64_t>();
  mp.config_hash = header.at("config_hash").get<std::string>();

  const auto& head = header.at("head");
  const auto type = head.at("type").get<std::string>();
  if (type == "forecast") {
    ForecastHead f;
    f.horizon = head.at("horizon").get<std::size_t>();
    f.num_patches = head.at("num_patches").get<std::size_t>();
    f.dim = e.dim;
    mp.head = std::move(f);
  } else if (type == "classifier") {
    ClassifierHead c;
    c.agg = parse_aggregate(head.at("agg").get<std::string>());
    c.classes = head.at("classes").get<std::size_t>();
    c.num_patches = head.at("num_patches").get<std::size_t>();
    c.dim = e.dim;
    mp.head = std::move(c);
  } else if (type != "none") {
    throw std::runtime_error(path.string() + ": unknown head type '" + type + "'");
  }

  const auto count = get<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw std::runtime_error(path.string() + ": truncated tensor name");
    const auto rows = get<std::uint64_t>(in, path);
    const auto cols = get<std::uint64_t>(in, path);
    Matrix m(rows, cols);
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)))) {
      throw std::runtime_error(path.string() + ": truncated tensor '" + name + "'");
    }
    Param* slot = nullptr;
    if (name == "encoder.w1") slot = &e.w1;
    else if (name == "encoder.b1") slot = &e.b1;
    else if (name == "encoder.w2") slot = &e.w2;
    else if (name == "encoder.b2") slot = &e.b2;
    else if (name == "encoder.wt") slot = &e.wt;
    else if (name == "encoder.bt") slot = &e.bt;
    else if (name == "recon.w") slot = &mp.recon.w;
    else if (name == "recon.b") slot = &mp.recon.b;
    else if (name == "forecast.w" && mp.has_forecast_head()) slot = &mp.forecast_head().w;
    else if (name == "forecast.b" && mp.has_forecast_head()) slot = &mp.forecast_head().b;
    else if (name == "classifier.w" && mp.has_classifier_head()) slot = &mp.classifier_head().w;
    else if (name == "classifier.b" && mp.has_classifier_head()) slot = &mp.classifier_head().b;
    if (slot == nullptr) throw std::runtime_error(path.string() + ": unexpected tensor '" + name + "'");
    *slot = Param(name, std::move(m));
  }

  // shape validation against the header
  auto expect = [&](const Param& p, std::size_t r, std::size_t c) {
    if (p.value.rows() != r || p.value.cols() != c) {
      throw std::runtime_error(path.string() + ": tensor '" + p.name + "' has shape " + p.value.shape() +
                               ", expected [" + std::to_string(r) + "x" + std::to_string(c) + "]");
    }
  };
  expect(e.w1, e.patch_len, e.dim);
  expect(e.b1, 1, e.dim);
  if (e.kind != EncoderKind::linear) {
    expect(e.w2, e.dim, e.dim);
    expect(e.b2, 1, e.dim);
  }
  if (e.kind == EncoderKind::mixer) {
    expect(e.wt, e.num_patches, e.num_patches);
    expect(e.bt, 1, e.num_patches);
  }
  expect(mp.recon.w, e.dim, e.patch_len);
  expect(mp.recon.b, 1, e.patch_len);
  if (mp.has_forecast_head()) {
    const auto& f = mp.forecast_head();
    expect(f.w, f.num_patches * f.dim, f.horizon);
    expect(f.b, 1, f.horizon);
  } else if (mp.has_classifier_head()) {
    const auto& c = mp.classifier_head();
    expect(c.w, c.input_dim(), c.classes);
    expect(c.b, 1, c.classes);
  }
  return mp;
}

}  // namespace pits::model
