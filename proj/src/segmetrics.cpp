// SPDX-License-Identifier: Apache-2.0
#include "patchcrypt/segmetrics.hpp"

#include <cstdio>

namespace patchcrypt {
namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string json_number(const std::optional<double>& v) {
  if (!v) return "null";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

std::string json_array(const std::vector<std::optional<double>>& values) {
  std::string s = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ",";
    s += json_number(values[i]);
  }
  return s + "]";
}

double mean_of_present(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::size_t classes, std::uint8_t ignore_label)
    : classes_(classes), ignore_(ignore_label) {
  if (classes == 0 || classes > 256) {
    throw InvalidArgument("class count must be in 1..256, got " + std::to_string(classes));
  }
  if (ignore_label < classes) {
    throw InvalidArgument("ignore label " + std::to_string(ignore_label) +
                          " collides with a class id (K = " + std::to_string(classes) + ")");
  }
  counts_.assign(classes * classes, 0);
}

void ConfusionMatrix::accumulate(const LabelMap& gt, const LabelMap& pred) {
  if (gt.width() != pred.width() || gt.height() != pred.height()) {
    throw MetricsError("ground truth is " + std::to_string(gt.width()) + "x" +
                       std::to_string(gt.height()) + " but prediction is " +
                       std::to_string(pred.width()) + "x" + std::to_string(pred.height()));
  }
  auto g = gt.labels();
  auto p = pred.labels();
  // Validate first so a failed call leaves the matrix untouched.
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] != ignore_ && g[i] >= classes_) {
      throw MetricsError("ground-truth label " + std::to_string(g[i]) + " at pixel " +
                         std::to_string(i) + " is outside 0.." +
                         std::to_string(classes_ - 1));
    }
    if (p[i] >= classes_) {
      throw MetricsError("predicted label " + std::to_string(p[i]) + " at pixel " +
                         std::to_string(i) + " is outside 0.." +
                         std::to_string(classes_ - 1));
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] == ignore_) continue;
    ++counts_[g[i] * classes_ + p[i]];
    ++total_;
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_ || other.ignore_ != ignore_) {
    throw InvalidArgument("cannot merge confusion matrices with different class setups");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  total_ += other.total_;
}

MetricsReport compute(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw MetricsError("no pixels accumulated");
  const std::size_t k = cm.classes();
  MetricsReport report;
  report.per_class_iou.resize(k);
  report.per_class_acc.resize(k);
  std::uint64_t correct = 0;
  for (std::size_t x = 0; x < k; ++x) {
    const std::uint64_t tp = cm.count(x, x);
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    for (std::size_t y = 0; y < k; ++y) {
      if (y == x) continue;
      fp += cm.count(y, x);
      fn += cm.count(x, y);
    }
    correct += tp;
    if (tp + fp + fn > 0) {
      report.per_class_iou[x] = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    }
    if (tp + fn > 0) {
      report.per_class_acc[x] = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
  }
  report.aacc = 100.0 * static_cast<double>(correct) / static_cast<double>(cm.total());
  report.miou = mean_of_present(report.per_class_iou);
  report.macc = mean_of_present(report.per_class_acc);
  return report;
}

std::string MetricsReport::to_json() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "\"aAcc\":%.17g,\"mAcc\":%.17g,\"mIoU\":%.17g", aacc, macc, miou);
  return std::string("{") + buf + ",\"per_class_iou\":" + json_array(per_class_iou) +
         ",\"per_class_acc\":" + json_array(per_class_acc) + "}";
}

std::string MetricsReport::to_table() const {
  std::string out = "class      IoU      Acc\n";
  for (std::size_t x = 0; x < per_class_iou.size(); ++x) {
    char line[96];
    std::snprintf(line, sizeof line, "%5zu %8s %8s\n", x,
                  per_class_iou[x] ? fixed(*per_class_iou[x], 2).c_str() : "-",
                  per_class_acc[x] ? fixed(*per_class_acc[x], 2).c_str() : "-");
    out += line;
  }
  out += "aAcc " + fixed(aacc, 2) + "  mAcc " + fixed(macc, 2) + "  mIoU " + fixed(miou, 2) + "\n";
  return out;
}

}  // namespace patchcrypt
