#pragma once

#include <vector>

#include "bevbench/dataset.hpp"
#include "bevbench/render.hpp"

namespace bevbench {

// World point seen at pixel (u, v): the camera ray through the pixel center,
// advanced to z-depth `depth`. Throws DataError for non-positive depth.
Vec3 backproject(const CameraPose& pose, const CameraIntrinsics& intr, int u, int v,
                 double depth);

// Paints labeled points into the top-down grid. Per cell the highest point
// wins (ties go to the later point); points above max_height are discarded.
// Cells nothing lands in stay unknown.
LabelMap rasterize_topdown(const std::vector<Vec3>& points, const std::vector<ClassId>& labels,
                           const TopdownSpec& td, double max_height);

// Depth + semantics back-projection baseline over an evenly strided subset of
// n_views of the sample's views (n_views must divide the stored count).
LabelMap baseline_predict(const Sample& s, const TopdownSpec& td, double max_height,
                          int n_views);

// Stride-selected view indices: n_views evenly spaced out of total.
std::vector<int> view_subset(int total, int n_views);

}  // namespace bevbench
