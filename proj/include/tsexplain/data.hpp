#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tsexplain {

using Series = std::vector<float>;

enum class Split { kTrain, kTest };
enum class Delimiter { kAuto, kTab, kComma };

std::string_view split_name(Split split);
Delimiter parse_delimiter(std::string_view name);

/// Labeled univariate series of one common length.
///
/// Labels are contiguous class indices; `original_labels()[k]` is the value
/// that appeared in the source file for class `k`.
class TimeSeriesDataset {
 public:
  TimeSeriesDataset() = default;
  TimeSeriesDataset(std::vector<Series> samples, std::vector<int> labels,
                    std::vector<Split> splits, int class_count,
                    std::vector<double> original_labels = {});

  std::size_t size() const { return samples_.size(); }
  std::size_t length() const { return length_; }
  int class_count() const { return class_count_; }

  const Series& sample(std::size_t i) const { return samples_.at(i); }
  int label(std::size_t i) const { return labels_.at(i); }
  Split split(std::size_t i) const { return splits_.at(i); }

  const std::vector<Series>& samples() const { return samples_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<Split>& splits() const { return splits_; }
  const std::vector<double>& original_labels() const { return original_labels_; }

  std::vector<std::size_t> indices(Split split) const;

 private:
  std::vector<Series> samples_;
  std::vector<int> labels_;
  std::vector<Split> splits_;
  std::vector<double> original_labels_;
  int class_count_ = 0;
  std::size_t length_ = 0;
};

/// Scalar summary over every value of a set of series.
struct DatasetStats {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

DatasetStats compute_stats(const TimeSeriesDataset& dataset,
                           std::optional<Split> split = std::nullopt);

// UCR text: `label<delim>v1<delim>...<delim>vT` per line, `#` comments.
TimeSeriesDataset parse_ucr(std::string_view text,
                            Delimiter delimiter = Delimiter::kAuto,
                            Split split = Split::kTrain);

// Parses a train and a test document with one shared label mapping.
TimeSeriesDataset parse_ucr_pair(std::string_view train_text,
                                 std::string_view test_text,
                                 Delimiter delimiter = Delimiter::kAuto);

TimeSeriesDataset load_ucr(const std::filesystem::path& train_path,
                           const std::optional<std::filesystem::path>& test_path,
                           Delimiter delimiter = Delimiter::kAuto);

/// Writes samples of one split (or all) back in UCR form with original labels.
std::string to_ucr(const TimeSeriesDataset& dataset, char delimiter = '\t',
                   std::optional<Split> split = std::nullopt);

/// Reassigns split tags: a seeded shuffle sends `test_fraction` of the
/// samples to the test split.
TimeSeriesDataset resplit(const TimeSeriesDataset& dataset, double test_fraction,
                          unsigned long long seed);

Series z_normalize(std::span<const float> series);

TimeSeriesDataset z_normalize(const TimeSeriesDataset& dataset);

enum class ConfusionCategory { kTruePositive, kTrueNegative, kFalsePositive, kFalseNegative, kNone };

std::string_view confusion_category_name(ConfusionCategory category);

struct ConfusionCell {
  int true_class = 0;
  int pred_class = 0;
  ConfusionCategory category = ConfusionCategory::kNone;
  int color_index = 0;
};

// Class index 1 is the positive class for binary data.
ConfusionCell confusion_assign(int true_class, int pred_class, int class_count);

// UI colour for a binary confusion category (#4e79a7 TP, #76b7b2 TN,
// #f28e2c FP, #e15759 FN); empty for kNone.
std::string_view confusion_color(ConfusionCategory category);

}  // namespace tsexplain
