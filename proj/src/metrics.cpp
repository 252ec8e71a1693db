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
#include "rareseg/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "rareseg/error.hpp"

namespace rareseg {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : n_(num_classes),
      counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto v : counts_) t += v;
  return t;
}

std::uint64_t ConfusionMatrix::fp(int c) const {
  std::uint64_t s = 0;
  for (int g = 0; g < n_; ++g) s += at(g, c);
  return s - at(c, c);
}

std::uint64_t ConfusionMatrix::fn(int c) const {
  std::uint64_t s = 0;
  for (int p = 0; p < n_; ++p) s += at(c, p);
  return s - at(c, c);
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.n_ != n_) {
    throw ShapeError("metrics", "confusion matrices differ in class count");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

namespace {

void CheckPair(const ConfusionMatrix& cm, const LabelMask& pred,
               const LabelMask& truth) {
  if (pred.height != truth.height || pred.width != truth.width) {
    throw ShapeError("metrics", "prediction " + std::to_string(pred.height) +
                                    "x" + std::to_string(pred.width) +
                                    " vs truth " + std::to_string(truth.height) +
                                    "x" + std::to_string(truth.width));
  }
  if (cm.num_classes() <= 0) throw ShapeError("metrics", "empty confusion matrix");
}

[[noreturn]] void BadLabel(const char* what, int value, std::size_t i,
                           int width) {
  throw ValidationError("metrics", std::string(what) + " label " +
                                       std::to_string(value) + " at (row " +
                                       std::to_string(i / width) + ", col " +
                                       std::to_string(i % width) + ")");
}

}  // namespace

void accumulate_serial(ConfusionMatrix& cm, const LabelMask& predicted,
                       const LabelMask& truth, std::uint8_t ignore_id) {
  CheckPair(cm, predicted, truth);
  const int n = cm.num_classes();
  for (std::size_t i = 0; i < truth.data.size(); ++i) {
    const int g = truth.data[i];
    if (g == ignore_id) continue;
    const int p = predicted.data[i];
    if (g >= n) BadLabel("truth", g, i, truth.width);
    if (p >= n) BadLabel("predicted", p, i, truth.width);
    ++cm.counts()[static_cast<std::size_t>(g) * n + p];
  }
}

void accumulate(ConfusionMatrix& cm, const LabelMask& predicted,
                const LabelMask& truth, std::uint8_t ignore_id) {
  CheckPair(cm, predicted, truth);
  const int n = cm.num_classes();
  const std::ptrdiff_t rows = truth.height;
  bool bad = false;
  // Per-thread matrices over row blocks, then an exact integer sum.
#pragma omp parallel
  {
    std::vector<std::uint64_t> local(cm.counts().size(), 0);
    bool local_bad = false;
#pragma omp for schedule(static) nowait
    for (std::ptrdiff_t y = 0; y < rows; ++y) {
      for (int x = 0; x < truth.width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * truth.width + x;
        const int g = truth.data[i];
        if (g == ignore_id) continue;
        const int p = predicted.data[i];
        if (g >= n || p >= n) {
          local_bad = true;
          continue;
        }
        ++local[static_cast<std::size_t>(g) * n + p];
      }
    }
#pragma omp critical
    {
      for (std::size_t i = 0; i < local.size(); ++i) cm.counts()[i] += local[i];
      bad = bad || local_bad;
    }
  }
  if (bad) {
    // Re-scan serially to name the first offending pixel; counts added above
    // are rolled back so the matrix is unchanged on error.
    ConfusionMatrix undo(n);
    for (std::size_t i = 0; i < truth.data.size(); ++i) {
      const int g = truth.data[i];
      if (g == ignore_id) continue;
      const int p = predicted.data[i];
      if (g < n && p < n) ++undo.counts()[static_cast<std::size_t>(g) * n + p];
    }
    for (std::size_t i = 0; i < undo.counts().size(); ++i) {
      cm.counts()[i] -= undo.counts()[i];
    }
    for (std::size_t i = 0; i < truth.data.size(); ++i) {
      const int g = truth.data[i];
      if (g == ignore_id) continue;
      if (g >= n) BadLabel("truth", g, i, truth.width);
      if (predicted.data[i] >= n) BadLabel("predicted", predicted.data[i], i, truth.width);
    }
  }
}

std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.num_classes());
  for (int c = 0; c < cm.num_classes(); ++c) {
    const std::uint64_t denom = cm.tp(c) + cm.fp(c) + cm.fn(c);
    if (denom > 0) out[c] = static_cast<double>(cm.tp(c)) / static_cast<double>(denom);
  }
  return out;
}

double mean_iou(std::span<const std::optional<double>> iou,
                UndefinedClassPolicy policy) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : iou) {
    if (v) {
      sum += *v;
      ++n;
    } else if (policy == UndefinedClassPolicy::kAsZero) {
      ++n;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

MetricsReport report(const ConfusionMatrix& cm, const ClassTable& table,
                     UndefinedClassPolicy policy) {
  if (cm.num_classes() != table.size()) {
    throw ShapeError("metrics", "class table and confusion matrix disagree");
  }
  MetricsReport r;
  r.iou = iou_per_class(cm);
  for (int c = 0; c < cm.num_classes(); ++c) {
    r.names.push_back(table.name(c));
    r.tp.push_back(cm.tp(c));
    r.fp.push_back(cm.fp(c));
    r.fn.push_back(cm.fn(c));
    r.truth_pixels.push_back(cm.tp(c) + cm.fn(c));
    r.pred_pixels.push_back(cm.tp(c) + cm.fp(c));
  }
  r.miou = mean_iou(r.iou, policy);
  return r;
}

std::string MetricsReport::ToCsv() const {
  std::ostringstream out;
  out << "class_id,name,iou,tp,fp,fn,truth_pixels,pred_pixels\n";
  char buf[32];
  for (std::size_t c = 0; c < names.size(); ++c) {
    out << c << ',' << names[c] << ',';
    if (iou[c]) {
      std::snprintf(buf, sizeof(buf), "%.6f", *iou[c]);
      out << buf;
    }
    out << ',' << tp[c] << ',' << fp[c] << ',' << fn[c] << ','
        << truth_pixels[c] << ',' << pred_pixels[c] << '\n';
  }
  std::snprintf(buf, sizeof(buf), "%.6f", miou);
  out << "mean,mIoU," << buf << ",,,,,\n";
  return out.str();
}

std::string MetricsReport::ToTableRow() const {
  std::ostringstream head, row;
  char buf[32];
  for (std::size_t c = 0; c < names.size(); ++c) {
    head << names[c] << ',';
    if (iou[c]) {
      std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * *iou[c]);
      row << buf;
    }
    row << ',';
  }
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * miou);
  head << "mIoU\n";
  row << buf << '\n';
  return head.str() + row.str();
}

}  // namespace rareseg
