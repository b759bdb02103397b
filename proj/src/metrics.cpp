#include "bevbench/metrics.hpp"

#include <string>

#include "bevbench/scene.hpp"

namespace bevbench {

void Confusion::add(const LabelMap& gt, const LabelMap& pred, ClassId ignore,
                    const BoolMap* mask, bool invert) {
  if (gt.h != pred.h || gt.w != pred.w)
    throw ShapeError("confusion: ground truth " + std::to_string(gt.h) + "x" +
                     std::to_string(gt.w) + " vs prediction " + std::to_string(pred.h) + "x" +
                     std::to_string(pred.w));
  if (mask && (mask->h != gt.h || mask->w != gt.w))
    throw ShapeError("confusion: mask shape mismatch");
  for (std::size_t i = 0; i < gt.v.size(); ++i) {
    if (mask && (mask->v[i] != 0) == invert) continue;
    const ClassId g = gt.v[i];
    const ClassId p = pred.v[i];
    if (g == ignore) continue;
    if (g >= k || p >= k)
      throw LabelError("confusion: label " + std::to_string(int(g >= k ? g : p)) +
                       " out of range for " + std::to_string(k) + " classes");
    at(g, p) += 1;
  }
}

long long Confusion::total() const {
  long long t = 0;
  for (long long v : m) t += v;
  return t;
}

Confusion& Confusion::operator+=(const Confusion& o) {
  if (k != o.k) throw ShapeError("confusion: class count mismatch");
  for (std::size_t i = 0; i < m.size(); ++i) m[i] += o.m[i];
  return *this;
}

double pixel_accuracy(const Confusion& c) {
  long long correct = 0;
  for (int i = 0; i < c.k; ++i) correct += c.at(i, i);
  const long long t = c.total();
  return t == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(t);
}

std::vector<double> per_class_iou(const Confusion& c, ClassId ignore) {
  std::vector<double> iou(static_cast<std::size_t>(c.k), -1.0);
  for (int cls = 0; cls < c.k; ++cls) {
    if (cls == ignore) continue;
    long long inter = c.at(cls, cls);
    long long uni = -inter;
    for (int j = 0; j < c.k; ++j) uni += c.at(cls, j) + c.at(j, cls);
    if (uni > 0) iou[static_cast<std::size_t>(cls)] = static_cast<double>(inter) / uni;
  }
  return iou;
}

double mean_iou(const Confusion& c, ClassId ignore) {
  const std::vector<double> iou = per_class_iou(c, ignore);
  double sum = 0.0;
  int n = 0;
  for (double v : iou)
    if (v >= 0.0) {
      sum += v;
      ++n;
    }
  return n == 0 ? 0.0 : sum / n;
}

double pixel_accuracy(const LabelMap& pred, const LabelMap& gt, ClassId ignore) {
  Confusion c(kNumClasses);
  c.add(gt, pred, ignore);
  return pixel_accuracy(c);
}

std::pair<std::vector<double>, double> mean_iou_of(const LabelMap& pred, const LabelMap& gt,
                                                   ClassId ignore) {
  Confusion c(kNumClasses);
  c.add(gt, pred, ignore);
  return {per_class_iou(c, ignore), mean_iou(c, ignore)};
}

LabelMap binarize(const LabelMap& m, ClassId cls) {
  LabelMap out(m.h, m.w);
  for (std::size_t i = 0; i < m.v.size(); ++i) out.v[i] = m.v[i] == cls ? 1 : 2;
  return out;
}

}  // namespace bevbench
