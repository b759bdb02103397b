#include "bevbench/baseline.hpp"

#include <limits>
#include <string>

namespace bevbench {

Vec3 backproject(const CameraPose& pose, const CameraIntrinsics& intr, int u, int v,
                 double depth) {
  if (!(depth > 0.0))
    throw DataError("backproject requires positive depth, got " + std::to_string(depth));
  Vec3 f, r, dn;
  camera_basis(pose, f, r, dn);
  const double a = (u + 0.5 - intr.cx) / intr.fx;
  const double b = (v + 0.5 - intr.cy) / intr.fy;
  return pose.position + depth * (f + a * r + b * dn);
}

LabelMap rasterize_topdown(const std::vector<Vec3>& points, const std::vector<ClassId>& labels,
                           const TopdownSpec& td, double max_height) {
  if (points.size() != labels.size())
    throw ShapeError("rasterize_topdown: " + std::to_string(points.size()) + " points vs " +
                     std::to_string(labels.size()) + " labels");
  LabelMap pred(td.g, td.g, kUnknown);
  std::vector<double> best(pred.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t n = 0; n < points.size(); ++n) {
    const Vec3& p = points[n];
    if (p.z > max_height) continue;
    const auto [i, j] = topdown_cell(td, p.x, p.y);
    if (i < 0 || i >= td.g || j < 0 || j >= td.g) continue;
    const std::size_t idx = static_cast<std::size_t>(i) * td.g + j;
    if (p.z >= best[idx]) {
      best[idx] = p.z;
      pred.at(i, j) = labels[n];
    }
  }
  return pred;
}

std::vector<int> view_subset(int total, int n_views) {
  if (n_views < 1 || n_views > total || total % n_views != 0)
    throw ConfigError("view count " + std::to_string(n_views) + " must evenly divide the " +
                      std::to_string(total) + " stored views");
  std::vector<int> idx;
  const int stride = total / n_views;
  for (int k = 0; k < total; k += stride) idx.push_back(k);
  return idx;
}

LabelMap baseline_predict(const Sample& s, const TopdownSpec& td, double max_height,
                          int n_views) {
  const std::vector<int> subset = view_subset(static_cast<int>(s.views.size()), n_views);
  std::vector<Vec3> points;
  std::vector<ClassId> labels;
  points.reserve(subset.size() * static_cast<std::size_t>(s.intrinsics.width) *
                 s.intrinsics.height);
  labels.reserve(points.capacity());
  for (int k : subset) {
    const FirstView& fv = s.views[static_cast<std::size_t>(k)];
    const int w = s.intrinsics.width;
    const int h = s.intrinsics.height;
    if (fv.sem.h != h || fv.sem.w != w ||
        fv.depth.size() != static_cast<std::size_t>(w) * h)
      throw ConfigError("view " + std::to_string(k) + " lacks aligned semantics and depth");
    for (int v = 0; v < h; ++v)
      for (int u = 0; u < w; ++u) {
        points.push_back(backproject(s.poses[static_cast<std::size_t>(k)], s.intrinsics, u, v,
                                     fv.depth[static_cast<std::size_t>(v) * w + u]));
        labels.push_back(fv.sem.at(v, u));
      }
  }
  return rasterize_topdown(points, labels, td, max_height);
}

}  // namespace bevbench
