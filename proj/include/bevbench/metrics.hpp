#pragma once

#include <utility>
#include <vector>

#include "bevbench/label_map.hpp"

namespace bevbench {

// k x k confusion counts, row = ground truth, column = prediction. Pixels
// whose ground truth is the ignored class are not counted at all; ignored
// predictions on kept pixels count as errors.
struct Confusion {
  int k = 0;
  std::vector<long long> m;

  explicit Confusion(int k_) : k(k_), m(static_cast<std::size_t>(k_) * k_, 0) {}

  long long& at(int gt, int pred) { return m[static_cast<std::size_t>(gt) * k + pred]; }
  long long at(int gt, int pred) const { return m[static_cast<std::size_t>(gt) * k + pred]; }

  // mask selects pixels; invert flips the selection. Null mask keeps all.
  void add(const LabelMap& gt, const LabelMap& pred, ClassId ignore = 0,
           const BoolMap* mask = nullptr, bool invert = false);
  long long total() const;

  Confusion& operator+=(const Confusion& o);
  bool operator==(const Confusion& o) const { return k == o.k && m == o.m; }
};

double pixel_accuracy(const Confusion& c);

// IoU per class; classes with empty union get -1 and are skipped by the mean.
// The ignored class never receives an IoU.
std::vector<double> per_class_iou(const Confusion& c, ClassId ignore = 0);
double mean_iou(const Confusion& c, ClassId ignore = 0);

double pixel_accuracy(const LabelMap& pred, const LabelMap& gt, ClassId ignore = 0);
std::pair<std::vector<double>, double> mean_iou_of(const LabelMap& pred, const LabelMap& gt,
                                                   ClassId ignore = 0);

// Floor-versus-rest view of a map: 1 where the label matches cls, 2 elsewhere.
LabelMap binarize(const LabelMap& m, ClassId cls);

}  // namespace bevbench
