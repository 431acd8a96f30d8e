// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "patchcrypt/image.hpp"

namespace patchcrypt {

class MetricsError : public Error {
 public:
  using Error::Error;
};

/// counts(g, p): pixels with ground truth g predicted as p. Pixels whose
/// ground truth equals the ignore label are never counted.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes,
                           std::uint8_t ignore_label = LabelMap::kIgnoreLabel);

  std::size_t classes() const noexcept { return classes_; }
  std::uint8_t ignore_label() const noexcept { return ignore_; }
  std::uint64_t count(std::size_t gt, std::size_t pred) const {
    return counts_[gt * classes_ + pred];
  }
  std::uint64_t total() const noexcept { return total_; }

  /// Throws MetricsError on a size mismatch or an out-of-range label, naming
  /// the pixel index.
  void accumulate(const LabelMap& gt, const LabelMap& pred);
  /// Elementwise sum; class count and ignore label must agree.
  void merge(const ConfusionMatrix& other);

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_;
  std::uint8_t ignore_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

/// Percentages in [0, 100]. A class whose IoU denominator TP+FP+FN is zero is
/// absent (nullopt) and left out of the means; so is a class's accuracy when
/// it never occurs in the ground truth (TP+FN == 0).
struct MetricsReport {
  std::vector<std::optional<double>> per_class_iou;
  std::vector<std::optional<double>> per_class_acc;
  double aacc = 0.0;
  double macc = 0.0;
  double miou = 0.0;

  /// One-line JSON; absent entries are null.
  std::string to_json() const;
  /// Human-readable table, two decimals.
  std::string to_table() const;
};

/// Throws MetricsError when no pixel has been accumulated.
MetricsReport compute(const ConfusionMatrix& cm);

}  // namespace patchcrypt
