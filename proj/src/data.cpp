#include "tsexplain/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "text_io.hpp"
#include "tsexplain/error.hpp"

namespace tsexplain {
namespace {

struct RawTable {
  std::vector<double> labels;
  std::vector<Series> rows;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

bool is_data_line(std::string_view line) {
  auto t = trim(line);
  return !t.empty() && t.front() != '#';
}

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> fields;
  if (delim == ' ') {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      fields.push_back(line.substr(i, j - i));
      i = j;
    }
    return fields;
  }
  std::size_t start = 0;
  while (true) {
    auto end = line.find(delim, start);
    if (end == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, end - start)));
    start = end + 1;
  }
  if (fields.size() > 1 && fields.back().empty()) fields.pop_back();
  return fields;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw Error(ErrorCode::kNonNumeric, "line " + std::to_string(line_no) +
                                            ": non-numeric field '" + std::string(field) + "'");
  }
  return value;
}

char resolve_delimiter(const std::vector<std::string_view>& lines, Delimiter delimiter) {
  switch (delimiter) {
    case Delimiter::kTab: return '\t';
    case Delimiter::kComma: return ',';
    case Delimiter::kAuto: break;
  }
  for (auto line : lines) {
    if (!is_data_line(line)) continue;
    if (line.find('\t') != std::string_view::npos) return '\t';
    if (line.find(',') != std::string_view::npos) return ',';
    return ' ';
  }
  return ',';
}

RawTable parse_table(std::string_view text, Delimiter delimiter) {
  auto lines = split_lines(text);
  const char delim = resolve_delimiter(lines, delimiter);
  RawTable table;
  std::size_t length = 0;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (!is_data_line(lines[n])) continue;
    auto fields = split_fields(trim(lines[n]), delim);
    if (fields.size() < 2) {
      throw Error(ErrorCode::kRaggedRows,
                  "line " + std::to_string(n + 1) + ": expected a label and values");
    }
    const std::size_t t = fields.size() - 1;
    if (table.rows.empty()) {
      length = t;
    } else if (t != length) {
      throw Error(ErrorCode::kRaggedRows, "line " + std::to_string(n + 1) + ": " +
                                              std::to_string(t) + " values, expected " +
                                              std::to_string(length));
    }
    table.labels.push_back(parse_number<double>(fields[0], n + 1));
    Series row(t);
    for (std::size_t i = 0; i < t; ++i) row[i] = parse_number<float>(fields[i + 1], n + 1);
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw Error(ErrorCode::kEmptyInput, "no samples in input");
  return table;
}

TimeSeriesDataset build(std::vector<RawTable> tables, const std::vector<Split>& splits) {
  std::vector<double> originals;
  for (const auto& t : tables) originals.insert(originals.end(), t.labels.begin(), t.labels.end());
  std::sort(originals.begin(), originals.end());
  originals.erase(std::unique(originals.begin(), originals.end()), originals.end());

  std::vector<Series> samples;
  std::vector<int> labels;
  std::vector<Split> sample_splits;
  for (std::size_t k = 0; k < tables.size(); ++k) {
    for (std::size_t i = 0; i < tables[k].rows.size(); ++i) {
      auto it = std::lower_bound(originals.begin(), originals.end(), tables[k].labels[i]);
      labels.push_back(static_cast<int>(it - originals.begin()));
      samples.push_back(std::move(tables[k].rows[i]));
      sample_splits.push_back(splits[k]);
    }
  }
  const int classes = static_cast<int>(originals.size());
  return TimeSeriesDataset(std::move(samples), std::move(labels), std::move(sample_splits),
                           classes, std::move(originals));
}

}  // namespace

std::string_view split_name(Split split) { return split == Split::kTrain ? "train" : "test"; }

Delimiter parse_delimiter(std::string_view name) {
  if (name == "tab") return Delimiter::kTab;
  if (name == "comma") return Delimiter::kComma;
  if (name == "auto" || name.empty()) return Delimiter::kAuto;
  throw Error(ErrorCode::kInvalidConfig, "unknown delimiter '" + std::string(name) + "'");
}

TimeSeriesDataset::TimeSeriesDataset(std::vector<Series> samples, std::vector<int> labels,
                                     std::vector<Split> splits, int class_count,
                                     std::vector<double> original_labels)
    : samples_(std::move(samples)),
      labels_(std::move(labels)),
      splits_(std::move(splits)),
      original_labels_(std::move(original_labels)),
      class_count_(class_count) {
  if (samples_.empty()) throw Error(ErrorCode::kEmptyInput, "dataset has no samples");
  if (labels_.size() != samples_.size() || splits_.size() != samples_.size()) {
    throw Error(ErrorCode::kShapeMismatch, "labels/splits do not match sample count");
  }
  if (class_count_ < 2) {
    throw Error(ErrorCode::kInvalidArgument, "dataset needs at least two classes");
  }
  length_ = samples_.front().size();
  if (length_ < 2) throw Error(ErrorCode::kShapeMismatch, "series length must be >= 2");
  for (const auto& s : samples_) {
    if (s.size() != length_) throw Error(ErrorCode::kRaggedRows, "series lengths differ");
  }
  for (int label : labels_) {
    if (label < 0 || label >= class_count_) {
      throw Error(ErrorCode::kInvalidArgument, "label out of range");
    }
  }
  if (original_labels_.empty()) {
    for (int k = 0; k < class_count_; ++k) original_labels_.push_back(k);
  }
  if (static_cast<int>(original_labels_.size()) != class_count_) {
    throw Error(ErrorCode::kShapeMismatch, "original label map size != class count");
  }
}

std::vector<std::size_t> TimeSeriesDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < splits_.size(); ++i) {
    if (splits_[i] == split) out.push_back(i);
  }
  return out;
}

DatasetStats compute_stats(const TimeSeriesDataset& dataset, std::optional<Split> split) {
  double sum = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (split && dataset.split(i) != *split) continue;
    for (float v : dataset.sample(i)) {
      sum += v;
      lo = std::min(lo, static_cast<double>(v));
      hi = std::max(hi, static_cast<double>(v));
      ++count;
    }
  }
  if (count == 0) return {};
  return {sum / static_cast<double>(count), lo, hi};
}

TimeSeriesDataset parse_ucr(std::string_view text, Delimiter delimiter, Split split) {
  std::vector<RawTable> tables;
  tables.push_back(parse_table(text, delimiter));
  return build(std::move(tables), {split});
}

TimeSeriesDataset parse_ucr_pair(std::string_view train_text, std::string_view test_text,
                                 Delimiter delimiter) {
  std::vector<RawTable> tables;
  tables.push_back(parse_table(train_text, delimiter));
  tables.push_back(parse_table(test_text, delimiter));
  if (tables[0].rows.front().size() != tables[1].rows.front().size()) {
    throw Error(ErrorCode::kRaggedRows, "train and test series lengths differ");
  }
  return build(std::move(tables), {Split::kTrain, Split::kTest});
}

TimeSeriesDataset load_ucr(const std::filesystem::path& train_path,
                           const std::optional<std::filesystem::path>& test_path,
                           Delimiter delimiter) {
  const auto train_text = detail::read_text_file(train_path);
  if (!test_path) return parse_ucr(train_text, delimiter, Split::kTrain);
  return parse_ucr_pair(train_text, detail::read_text_file(*test_path), delimiter);
}

std::string to_ucr(const TimeSeriesDataset& dataset, char delimiter, std::optional<Split> split) {
  std::ostringstream out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (split && dataset.split(i) != *split) continue;
    char label[32];
    auto [end, ec] = std::to_chars(label, label + sizeof(label),
                                   dataset.original_labels()[dataset.label(i)]);
    out << std::string_view(label, end - label);
    for (float v : dataset.sample(i)) out << delimiter << detail::format_float(v);
    out << '\n';
  }
  return out.str();
}

TimeSeriesDataset resplit(const TimeSeriesDataset& dataset, double test_fraction,
                          unsigned long long seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "test_fraction must be in (0, 1)");
  }
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(dataset.size())));
  std::vector<Split> splits(dataset.size(), Split::kTrain);
  for (std::size_t k = 0; k < n_test && k < order.size(); ++k) splits[order[k]] = Split::kTest;
  return TimeSeriesDataset(dataset.samples(), dataset.labels(), std::move(splits),
                           dataset.class_count(), dataset.original_labels());
}

Series z_normalize(std::span<const float> series) {
  const double n = static_cast<double>(series.size());
  double mean = 0.0;
  for (float v : series) mean += v;
  mean /= n;
  double var = 0.0;
  for (float v : series) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  Series out(series.size(), 0.0f);
  if (sd < 1e-12) return out;
  for (std::size_t i = 0; i < series.size(); ++i) {
    out[i] = static_cast<float>((series[i] - mean) / sd);
  }
  return out;
}

TimeSeriesDataset z_normalize(const TimeSeriesDataset& dataset) {
  std::vector<Series> samples;
  samples.reserve(dataset.size());
  for (const auto& s : dataset.samples()) samples.push_back(z_normalize(s));
  return TimeSeriesDataset(std::move(samples), dataset.labels(), dataset.splits(),
                           dataset.class_count(), dataset.original_labels());
}

std::string_view confusion_category_name(ConfusionCategory category) {
  switch (category) {
    case ConfusionCategory::kTruePositive: return "TP";
    case ConfusionCategory::kTrueNegative: return "TN";
    case ConfusionCategory::kFalsePositive: return "FP";
    case ConfusionCategory::kFalseNegative: return "FN";
    case ConfusionCategory::kNone: return "none";
  }
  return "none";
}

ConfusionCell confusion_assign(int true_class, int pred_class, int class_count) {
  if (true_class < 0 || true_class >= class_count || pred_class < 0 || pred_class >= class_count) {
    throw Error(ErrorCode::kInvalidArgument, "class index out of range");
  }
  ConfusionCell cell{true_class, pred_class, ConfusionCategory::kNone,
                     true_class * class_count + pred_class};
  if (class_count == 2) {
    const bool truth = true_class == 1;
    const bool pred = pred_class == 1;
    if (truth && pred) cell.category = ConfusionCategory::kTruePositive;
    else if (!truth && !pred) cell.category = ConfusionCategory::kTrueNegative;
    else if (!truth && pred) cell.category = ConfusionCategory::kFalsePositive;
    else cell.category = ConfusionCategory::kFalseNegative;
  }
  return cell;
}

std::string_view confusion_color(ConfusionCategory category) {
  switch (category) {
    case ConfusionCategory::kTruePositive: return "#4e79a7";
    case ConfusionCategory::kTrueNegative: return "#76b7b2";
    case ConfusionCategory::kFalsePositive: return "#f28e2c";
    case ConfusionCategory::kFalseNegative: return "#e15759";
    case ConfusionCategory::kNone: return "";
  }
  return "";
}

}  // namespace tsexplain
