#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "bevbench/errors.hpp"
#include "bevbench/label_map.hpp"

namespace bevbench {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

// Class ids and their fixed render palette.
inline constexpr int kNumClasses = 9;
inline constexpr ClassId kUnknown = 0;
inline constexpr ClassId kFloor = 1;
inline constexpr ClassId kWall = 2;
extern const std::array<std::array<std::uint8_t, 3>, kNumClasses> kPalette;
extern const std::array<const char*, kNumClasses> kClassNames;

struct Box {
  Vec3 lo;  // lo.z is always 0: boxes rest on the floor
  Vec3 hi;
  ClassId cls = kUnknown;
};

// Axis-aligned rectangular room with z-up world frame. The floor spans
// [x0,x1]x[y0,y1] at z=0; the four walls rise from its edges. Object
// footprints, room extents, and agent anchors all sit on a lattice of pitch
// `lattice` so that top-down cell edges coincide with surface boundaries.
struct Scene {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double wall_height = 3.0;
  double lattice = 10.0 / 64.0;
  std::vector<Box> boxes;
  std::uint64_t rng_seed = 0;
  std::array<Vec3, 4> agent_anchors{};  // z = 0; camera height added per pose
  std::array<std::array<int, 3>, kNumClasses> color_jitter{};
};

struct SceneParams {
  double room_min = 8.0;
  double room_max = 12.0;
  double wall_height = 3.0;
  int min_boxes = 5;
  int max_boxes = 10;
  double wall_clearance = 0.3;   // min gap between boxes and walls
  double agent_clearance = 0.5;  // min gap between boxes and agent anchors
  double lattice = 10.0 / 64.0;  // snap pitch; set to grid_s / grid_g
};

Scene generate_scene(std::uint64_t seed, const SceneParams& params);

struct CameraIntrinsics {
  int width = 64;
  int height = 64;
  double fx = 32, fy = 32, cx = 32, cy = 32;
};

// fx from horizontal FOV; fy = fx (square pixels); principal point centered.
CameraIntrinsics make_intrinsics(int width, int height, double hfov_deg);

// Position plus yaw about +z, measured from +x. The optical axis is always
// horizontal: pitch and roll are fixed to zero in first-view mode.
struct CameraPose {
  Vec3 position;
  double yaw = 0;
};

}  // namespace bevbench
