#include "bevbench/scene.hpp"

#include <cmath>
#include <string>

#include "bevbench/rng.hpp"

namespace bevbench {

const std::array<std::array<std::uint8_t, 3>, kNumClasses> kPalette = {{
    {0, 0, 0},        // unknown
    {200, 200, 200},  // floor
    {120, 120, 120},  // wall
    {200, 120, 40},   // table
    {220, 60, 60},    // chair
    {60, 120, 220},   // sofa
    {160, 60, 200},   // bed
    {60, 180, 80},    // cabinet
    {230, 220, 70},   // pillar
}};

const std::array<const char*, kNumClasses> kClassNames = {
    "unknown", "floor", "wall", "table", "chair", "sofa", "bed", "cabinet", "pillar"};

CameraIntrinsics make_intrinsics(int width, int height, double hfov_deg) {
  if (width <= 0 || height <= 0) throw ConfigError("non-positive image dimensions");
  if (hfov_deg <= 0.0 || hfov_deg >= 180.0) throw ConfigError("horizontal FOV out of (0, 180)");
  CameraIntrinsics intr;
  intr.width = width;
  intr.height = height;
  intr.fx = (width / 2.0) / std::tan(hfov_deg * 3.14159265358979323846 / 360.0);
  intr.fy = intr.fx;
  intr.cx = width / 2.0;
  intr.cy = height / 2.0;
  return intr;
}

namespace {

struct ClassDims {
  double sx_min, sx_max;  // footprint side ranges, meters
  double sy_min, sy_max;
  double h_min, h_max;
  bool full_height;  // pillars reach the wall top
};

ClassDims dims_for(ClassId cls) {
  switch (cls) {
    case 3: return {0.8, 1.6, 0.8, 1.6, 0.65, 0.80, false};   // table
    case 4: return {0.4, 0.7, 0.4, 0.7, 0.80, 1.00, false};   // chair
    case 5: return {1.2, 2.2, 0.8, 1.1, 0.70, 0.90, false};   // sofa
    case 6: return {1.4, 2.0, 1.9, 2.2, 0.50, 0.65, false};   // bed
    case 7: return {0.5, 1.4, 0.4, 0.7, 1.60, 2.20, false};   // cabinet
    case 8: return {0.3, 0.6, 0.3, 0.6, 0.0, 0.0, true};      // pillar
    default: throw GenerationError("no dimensions for class " + std::to_string(int(cls)));
  }
}

bool footprints_clash(const Box& a, const Box& b, double gap) {
  return a.lo.x < b.hi.x + gap && b.lo.x < a.hi.x + gap && a.lo.y < b.hi.y + gap &&
         b.lo.y < a.hi.y + gap;
}

double point_footprint_dist(Vec3 p, const Box& b) {
  const double dx = std::max({b.lo.x - p.x, 0.0, p.x - b.hi.x});
  const double dy = std::max({b.lo.y - p.y, 0.0, p.y - b.hi.y});
  return std::max(dx, dy);
}

}  // namespace

Scene generate_scene(std::uint64_t seed, const SceneParams& params) {
  if (params.max_boxes < 1)
    throw GenerationError("scene requires at least one object box (max_boxes = " +
                          std::to_string(params.max_boxes) + ")");
  if (params.max_boxes > 12) throw GenerationError("scene allows at most 12 object boxes");
  if (params.min_boxes < 1 || params.min_boxes > params.max_boxes)
    throw GenerationError("invalid box count range");
  if (params.lattice <= 0.0 || params.room_min <= 0.0 || params.room_max < params.room_min)
    throw GenerationError("invalid room geometry parameters");

  const double cs = params.lattice;
  Rng rng(hash_combine(seed, "scene-geometry"));

  Scene scene;
  scene.rng_seed = seed;
  scene.lattice = cs;
  scene.wall_height = params.wall_height;

  const int cells_min = static_cast<int>(std::ceil(params.room_min / cs));
  const int cells_max = static_cast<int>(std::floor(params.room_max / cs));
  if (cells_max < cells_min) throw GenerationError("room size range narrower than lattice");
  const int wc = rng.uniform_int(cells_min, cells_max);
  const int hc = rng.uniform_int(cells_min, cells_max);
  scene.x0 = 0.0;
  scene.y0 = 0.0;
  scene.x1 = wc * cs;
  scene.y1 = hc * cs;

  // Agent anchors at the four quadrant centers, snapped to the lattice.
  const auto snap = [cs](double v) { return std::llround(v / cs) * cs; };
  scene.agent_anchors = {Vec3{snap(0.25 * scene.x1), snap(0.25 * scene.y1), 0},
                         Vec3{snap(0.75 * scene.x1), snap(0.25 * scene.y1), 0},
                         Vec3{snap(0.25 * scene.x1), snap(0.75 * scene.y1), 0},
                         Vec3{snap(0.75 * scene.x1), snap(0.75 * scene.y1), 0}};

  const int n_boxes = rng.uniform_int(params.min_boxes, params.max_boxes);
  const int margin_cells = static_cast<int>(std::ceil(params.wall_clearance / cs));
  for (int b = 0; b < n_boxes; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const ClassId cls = static_cast<ClassId>(rng.uniform_int(3, kNumClasses - 1));
      ClassDims d = dims_for(cls);
      if (rng.bernoulli(0.5)) {
        std::swap(d.sx_min, d.sy_min);
        std::swap(d.sx_max, d.sy_max);
      }
      const int sxc = std::max(2, static_cast<int>(std::llround(rng.uniform(d.sx_min, d.sx_max) / cs)));
      const int syc = std::max(2, static_cast<int>(std::llround(rng.uniform(d.sy_min, d.sy_max) / cs)));
      if (sxc + 2 * margin_cells >= wc || syc + 2 * margin_cells >= hc) continue;
      const int ix = rng.uniform_int(margin_cells, wc - margin_cells - sxc);
      const int iy = rng.uniform_int(margin_cells, hc - margin_cells - syc);
      Box box;
      box.cls = cls;
      box.lo = {ix * cs, iy * cs, 0.0};
      box.hi = {(ix + sxc) * cs, (iy + syc) * cs,
                d.full_height ? params.wall_height : rng.uniform(d.h_min, d.h_max)};

      bool ok = true;
      for (const Box& other : scene.boxes)
        if (footprints_clash(box, other, cs)) ok = false;
      for (const Vec3& anchor : scene.agent_anchors)
        if (point_footprint_dist(anchor, box) < params.agent_clearance) ok = false;
      if (!ok) continue;
      scene.boxes.push_back(box);
      placed = true;
    }
    if (!placed)
      throw GenerationError("box placement rejection budget exhausted after 1000 tries (box " +
                            std::to_string(b) + ")");
  }

  Rng jitter_rng(hash_combine(seed, "palette-jitter"));
  for (auto& jc : scene.color_jitter)
    for (int& ch : jc) ch = jitter_rng.uniform_int(-12, 12);
  scene.color_jitter[kUnknown] = {0, 0, 0};
  return scene;
}

}  // namespace bevbench
