#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "bevbench/label_map.hpp"
#include "bevbench/scene.hpp"

namespace bevbench {

// One rendered first-person view. Depth is z-depth in meters: distance along
// the optical axis, not ray length, so back-projection is linear. RGB is
// interleaved row-major.
struct FirstView {
  LabelMap sem;
  std::vector<double> depth;
  std::vector<std::uint8_t> rgb;
};

struct Hit {
  double t = 0;  // z-depth parameter
  ClassId cls = kUnknown;
  Vec3 normal;
};

// Recorded depth sits this far past the true surface along the ray, so the
// reconstructed point falls strictly inside the hit solid. That makes cell
// binning of boundary hits deterministic while staying well under the 1e-6 m
// surface-consistency budget.
inline constexpr double kDepthNudge = 1e-7;

// Nearest surface along origin + t*dir, t > 0. dir need not be normalized;
// with dir = forward + a*right + b*down the parameter t is the z-depth.
Hit trace_ray(const Scene& scene, Vec3 origin, Vec3 dir);

// Camera basis for a first-view pose: forward, right, down in world frame.
void camera_basis(const CameraPose& pose, Vec3& forward, Vec3& right, Vec3& down);

FirstView render_first_view(const Scene& scene, const CameraPose& pose,
                            const CameraIntrinsics& intr);

// Square top-down window of side s meters centered on `center`, g x g cells.
// Row 0 faces +x, column 0 faces +y.
struct TopdownSpec {
  double center_x = 0;
  double center_y = 0;
  double s = 10.0;
  int g = 64;
};

inline double cell_size(const TopdownSpec& td) { return td.s / td.g; }

// (row, col) of the cell containing (x, y), possibly out of [0, g) range.
std::pair<int, int> topdown_cell(const TopdownSpec& td, double x, double y);

// Width of the wall footprint painted outside the floor extent.
inline constexpr double kWallBand = 0.25;

// Ground truth: each cell labeled by the topmost surface at its center; cells
// outside the floor extent are wall within kWallBand of it, unknown beyond.
// Second return is the surface height per cell.
std::pair<LabelMap, std::vector<double>> render_topdown_gt(const Scene& scene,
                                                           const TopdownSpec& td);

// A cell is visible iff some first-view ray's hit point (below wall height)
// bins into it and the hit class equals the ground-truth class there.
BoolMap compute_visibility(const Scene& scene, const std::vector<CameraPose>& poses,
                           const CameraIntrinsics& intr, const TopdownSpec& td,
                           const LabelMap& gt);

struct CorruptionSpec {
  double flip_p = 0.05;
  int erode_r = 1;
};

// Erodes object regions by erode_r (eroded pixels take the floor/wall
// majority of their neighborhood), then flips each pixel to a uniformly
// random different non-unknown class with probability flip_p.
LabelMap corrupt_mask(const LabelMap& sem, const CorruptionSpec& spec, std::uint64_t seed);

}  // namespace bevbench
