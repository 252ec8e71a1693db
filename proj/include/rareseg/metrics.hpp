/* Copyright 2026 The rareseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#ifndef RARESEG_METRICS_HPP_
#define RARESEG_METRICS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rareseg/class_table.hpp"
#include "rareseg/raster.hpp"

namespace rareseg {

// counts(g, p): valid pixels with ground truth g predicted as p.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = 0);

  int num_classes() const { return n_; }
  std::uint64_t at(int truth, int pred) const {
    return counts_[static_cast<std::size_t>(truth) * n_ + pred];
  }
  std::uint64_t total() const;
  std::uint64_t tp(int c) const { return at(c, c); }
  std::uint64_t fp(int c) const;  // column c minus diagonal
  std::uint64_t fn(int c) const;  // row c minus diagonal

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

  std::vector<std::uint64_t>& counts() { return counts_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

 private:
  int n_;
  std::vector<std::uint64_t> counts_;
};

// Adds one prediction/truth pair. Pixels whose truth is `ignore_id` are
// skipped; any other out-of-range value is a ValidationError.
void accumulate(ConfusionMatrix& cm, const LabelMask& predicted,
                const LabelMask& truth, std::uint8_t ignore_id = 255);

// Serial form of accumulate, kept as the baseline for the parallel one.
void accumulate_serial(ConfusionMatrix& cm, const LabelMask& predicted,
                       const LabelMask& truth, std::uint8_t ignore_id = 255);

// TP / (TP + FP + FN); nullopt when the denominator is zero.
std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm);

enum class UndefinedClassPolicy { kExclude, kAsZero };

// Arithmetic mean of the defined entries (or of all entries with undefined
// ones counted as zero). Units follow the input (fractions or percent).
double mean_iou(std::span<const std::optional<double>> iou,
                UndefinedClassPolicy policy = UndefinedClassPolicy::kExclude);

struct MetricsReport {
  std::vector<std::string> names;
  std::vector<std::optional<double>> iou;
  std::vector<std::uint64_t> tp, fp, fn, truth_pixels, pred_pixels;
  double miou = 0.0;

  // class_id,name,iou,tp,fp,fn,truth_pixels,pred_pixels (iou empty when
  // undefined), followed by a mean row.
  std::string ToCsv() const;
  // One header row of class names plus mIoU and one row of IoU percentages.
  std::string ToTableRow() const;
};

MetricsReport report(const ConfusionMatrix& cm, const ClassTable& table,
                     UndefinedClassPolicy policy = UndefinedClassPolicy::kExclude);

}  // namespace rareseg

#endif  // RARESEG_METRICS_HPP_
