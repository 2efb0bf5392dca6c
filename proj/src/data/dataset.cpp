#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include "pits/data.hpp"

namespace pits::data {
namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t start = 0;
    while (start < cell.size() && cell[start] == ' ') ++start;
    cells.push_back(cell.substr(start));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

struct RawCsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

RawCsv read_raw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path.string());
  RawCsv raw;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  raw.header = split_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_line(line);
    if (cells.size() != raw.header.size()) {
      throw std::runtime_error(path.string() + ": line " + std::to_string(line_no) + " has " +
                               std::to_string(cells.size()) + " cells, header has " +
                               std::to_string(raw.header.size()));
    }
    raw.rows.push_back(std::move(cells));
  }
  return raw;
}

std::size_t column_index(const RawCsv& raw, const std::string& name, const std::filesystem::path& path) {
  const auto it = std::find(raw.header.begin(), raw.header.end(), name);
  if (it == raw.header.end()) {
    throw std::runtime_error(path.string() + ": missing column '" + name + "'");
  }
  return static_cast<std::size_t>(it - raw.header.begin());
}

std::string format_value(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

SplitName parse_split_name(const std::string& s) {
  if (s == "train") return SplitName::train;
  if (s == "val") return SplitName::val;
  if (s == "test") return SplitName::test;
  throw std::invalid_argument("unknown split '" + s + "' (expected train|val|test)");
}

std::string to_string(SplitName s) {
  switch (s) {
    case SplitName::train: return "train";
    case SplitName::val: return "val";
    case SplitName::test: return "test";
  }
  return "?";
}

std::pair<std::size_t, std::size_t> TimeSeriesDataset::range(SplitName s) const {
  if (!split) throw std::logic_error("dataset '" + name + "' has no split boundaries");
  switch (s) {
    case SplitName::train: return {0, split->train_end};
    case SplitName::val: return {split->train_end, split->val_end};
    case SplitName::test: return {split->val_end, length()};
  }
  return {0, 0};
}

TimeSeriesDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  const RawCsv raw = read_raw(path);
  if (raw.rows.size() < 2) {
    throw std::runtime_error(path.string() + ": need at least 2 data rows, found " +
                             std::to_string(raw.rows.size()));
  }

  std::optional<std::size_t> ts_col;
  if (schema.timestamp_col) {
    ts_col = column_index(raw, *schema.timestamp_col, path);
  } else if (!parse_number(raw.rows.front().front())) {
    ts_col = 0;
  }

  std::vector<std::size_t> cols;
  if (schema.value_cols.empty()) {
    for (std::size_t c = 0; c < raw.header.size(); ++c) {
      if (!ts_col || c != *ts_col) cols.push_back(c);
    }
  } else {
    for (const auto& name : schema.value_cols) cols.push_back(column_index(raw, name, path));
  }
  if (cols.empty()) throw std::runtime_error(path.string() + ": no value columns");

  TimeSeriesDataset ds;
  ds.name = path.stem().string();
  ds.values = Matrix(raw.rows.size(), cols.size());
  for (std::size_t c : cols) ds.channel_names.push_back(raw.header[c]);
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    if (ts_col) ds.timestamps.push_back(raw.rows[r][*ts_col]);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const auto& cell = raw.rows[r][cols[j]];
      const auto v = parse_number(cell);
      if (!v) {
        // row numbers are 1-based data rows (header excluded), columns by name
        throw std::runtime_error(path.string() + ": non-numeric value '" + cell + "' at row " +
                                 std::to_string(r + 1) + ", column '" + raw.header[cols[j]] + "'");
      }
      ds.values(r, j) = *v;
    }
  }
  return ds;
}

void write_csv(const TimeSeriesDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CSV file: " + path.string());
  out << "date";
  for (std::size_t c = 0; c < ds.channels(); ++c) {
    out << ',' << (c < ds.channel_names.size() ? ds.channel_names[c] : "ch" + std::to_string(c));
  }
  out << '\n';
  for (std::size_t r = 0; r < ds.length(); ++r) {
    out << (r < ds.timestamps.size() ? ds.timestamps[r] : "t" + std::to_string(r));
    for (std::size_t c = 0; c < ds.channels(); ++c) out << ',' << format_value(ds.values(r, c));
    out << '\n';
  }
}

SplitRatios parse_split_ratios(const std::string& text) {
  std::vector<double> parts;
  std::string tok;
  std::istringstream in(text);
  const char sep = text.find(':') != std::string::npos ? ':' : ',';
  while (std::getline(in, tok, sep)) {
    const auto v = parse_number(tok);
    if (!v) throw std::invalid_argument("split ratios: cannot parse '" + tok + "'");
    parts.push_back(*v);
  }
  if (parts.size() != 3) throw std::invalid_argument("split ratios: expected three values in '" + text + "'");
  const double total = parts[0] + parts[1] + parts[2];
  // "6:2:2" style integers are accepted and rescaled
  if (total > 1.0 + 1e-9 && sep == ':') {
    for (auto& p : parts) p /= total;
  }
  return {parts[0], parts[1], parts[2]};
}

TimeSeriesDataset chronological_split(TimeSeriesDataset ds, const SplitRatios& ratios) {
  if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0)) {
    throw std::invalid_argument("chronological_split: ratios must be positive");
  }
  const double sum = ratios.train + ratios.val + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("chronological_split: ratios sum to " + format_value(sum) +
                                ", expected 1");
  }
  const auto t = static_cast<double>(ds.length());
  // small tolerance keeps e.g. 10 * 0.7 at 7 despite 0.7 being inexact
  const auto train_end = static_cast<std::size_t>(std::floor(t * ratios.train + 1e-9));
  const auto val_end = static_cast<std::size_t>(std::floor(t * (ratios.train + ratios.val) + 1e-9));
  if (train_end == 0 || val_end <= train_end || val_end >= ds.length()) {
    throw std::invalid_argument("chronological_split: a split would be empty (T=" +
                                std::to_string(ds.length()) + ")");
  }
  ds.split = SplitBounds{train_end, val_end};
  return ds;
}

void write_labeled_csv(const LabeledSeriesSet& set, const std::filesystem::path& values_path,
                       const std::filesystem::path& labels_path) {
  if (set.series.empty()) throw std::invalid_argument("write_labeled_csv: empty set");
  const std::size_t len = set.series.front().rows();
  const std::size_t channels = set.series.front().cols();
  std::ofstream out(values_path);
  if (!out) throw std::runtime_error("cannot write CSV file: " + values_path.string());
  out << "date";
  for (std::size_t i = 0; i < set.size(); ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      out << ',' << set.ids[i];
      if (channels > 1) out << ':' << c;
    }
  }
  out << '\n';
  for (std::size_t t = 0; t < len; ++t) {
    out << 't' << t;
    for (std::size_t i = 0; i < set.size(); ++i) {
      for (std::size_t c = 0; c < channels; ++c) out << ',' << format_value(set.series[i](t, c));
    }
    out << '\n';
  }

  std::ofstream lab(labels_path);
  if (!lab) throw std::runtime_error("cannot write CSV file: " + labels_path.string());
  lab << "series_id,label\n";
  for (std::size_t i = 0; i < set.size(); ++i) lab << set.ids[i] << ',' << set.labels[i] << '\n';
}

LabeledSeriesSet load_labeled_csv(const std::filesystem::path& values_path,
                                  const std::filesystem::path& labels_path) {
  const TimeSeriesDataset grid = load_csv(values_path);
  const RawCsv labels = read_raw(labels_path);
  const std::size_t id_col = column_index(labels, "series_id", labels_path);
  const std::size_t label_col = column_index(labels, "label", labels_path);

  // group columns by series id, preserving first-appearance order
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> columns;
  for (std::size_t c = 0; c < grid.channel_names.size(); ++c) {
    const auto& name = grid.channel_names[c];
    const auto colon = name.find(':');
    const std::string id = colon == std::string::npos ? name : name.substr(0, colon);
    if (!columns.contains(id)) order.push_back(id);
    columns[id].push_back(c);
  }

  LabeledSeriesSet set;
  int max_label = -1;
  for (std::size_t r = 0; r < labels.rows.size(); ++r) {
    const auto& id = labels.rows[r][id_col];
    const auto lv = parse_number(labels.rows[r][label_col]);
    if (!lv || *lv < 0 || std::floor(*lv) != *lv) {
      throw std::runtime_error(labels_path.string() + ": bad label at row " + std::to_string(r + 1));
    }
    const auto it = columns.find(id);
    if (it == columns.end()) {
      throw std::runtime_error(labels_path.string() + ": series '" + id + "' not found in " +
                               values_path.string());
    }
    Matrix s(grid.length(), it->second.size());
    for (std::size_t t = 0; t < grid.length(); ++t) {
      for (std::size_t c = 0; c < it->second.size(); ++c) s(t, c) = grid.values(t, it->second[c]);
    }
    set.ids.push_back(id);
    set.series.push_back(std::move(s));
    set.labels.push_back(static_cast<int>(*lv));
    max_label = std::max(max_label, static_cast<int>(*lv));
  }
  set.num_classes = static_cast<std::size_t>(max_label + 1);
  return set;
}

std::pair<LabeledSeriesSet, LabeledSeriesSet> split_labeled(const LabeledSeriesSet& set,
                                                            double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split_labeled: fraction must be in (0, 1)");
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < set.size(); ++i) by_class[set.labels[i]].push_back(i);
  std::vector<bool> is_train(set.size(), false);
  for (const auto& [label, members] : by_class) {
    const auto n_train = static_cast<std::size_t>(
        std::max(1.0, std::floor(static_cast<double>(members.size()) * train_fraction)));
    for (std::size_t k = 0; k < members.size() && k < n_train; ++k) is_train[members[k]] = true;
  }
  LabeledSeriesSet train;
  LabeledSeriesSet test;
  train.num_classes = test.num_classes = set.num_classes;
  for (std::size_t i = 0; i < set.size(); ++i) {
    auto& dst = is_train[i] ? train : test;
    dst.ids.push_back(set.ids[i]);
    dst.series.push_back(set.series[i]);
    dst.labels.push_back(set.labels[i]);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace pits::data
