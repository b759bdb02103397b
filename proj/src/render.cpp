#include "bevbench/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bevbench/rng.hpp"

namespace bevbench {

namespace {

constexpr double kTMin = 1e-9;

bool inside_footprint(const Box& b, double x, double y) {
  return x > b.lo.x && x < b.hi.x && y > b.lo.y && y < b.hi.y;
}

void consider_wall(double plane, double origin, double d, Vec3 normal, double& best_t, Hit& hit) {
  if (d == 0.0) return;
  const double t = (plane - origin) / d;
  if (t > kTMin && t < best_t) {
    best_t = t;
    hit = {t, kWall, normal};
  }
}

}  // namespace

Hit trace_ray(const Scene& scene, Vec3 origin, Vec3 dir) {
  double best_t = std::numeric_limits<double>::infinity();
  Hit hit;

  if (dir.z < 0.0) {
    const double t = -origin.z / dir.z;
    if (t > kTMin && t < best_t) {
      best_t = t;
      hit = {t, kFloor, {0, 0, 1}};
    }
  }
  consider_wall(scene.x0, origin.x, dir.x, {1, 0, 0}, best_t, hit);
  consider_wall(scene.x1, origin.x, dir.x, {-1, 0, 0}, best_t, hit);
  consider_wall(scene.y0, origin.y, dir.y, {0, 1, 0}, best_t, hit);
  consider_wall(scene.y1, origin.y, dir.y, {0, -1, 0}, best_t, hit);

  for (const Box& box : scene.boxes) {
    // Slab test; tracks which axis provides the entry face for the normal.
    double t_enter = -std::numeric_limits<double>::infinity();
    double t_exit = std::numeric_limits<double>::infinity();
    int enter_axis = -1;
    const double o[3] = {origin.x, origin.y, origin.z};
    const double d[3] = {dir.x, dir.y, dir.z};
    const double lo[3] = {box.lo.x, box.lo.y, box.lo.z};
    const double hi[3] = {box.hi.x, box.hi.y, box.hi.z};
    bool miss = false;
    for (int ax = 0; ax < 3 && !miss; ++ax) {
      if (d[ax] == 0.0) {
        if (o[ax] <= lo[ax] || o[ax] >= hi[ax]) miss = true;
        continue;
      }
      double t0 = (lo[ax] - o[ax]) / d[ax];
      double t1 = (hi[ax] - o[ax]) / d[ax];
      if (t0 > t1) std::swap(t0, t1);
      if (t0 > t_enter) {
        t_enter = t0;
        enter_axis = ax;
      }
      t_exit = std::min(t_exit, t1);
    }
    if (miss || t_enter > t_exit || t_enter <= kTMin || t_enter >= best_t) continue;
    Vec3 n{0, 0, 0};
    const double sign = d[enter_axis] > 0.0 ? -1.0 : 1.0;
    if (enter_axis == 0) n.x = sign;
    if (enter_axis == 1) n.y = sign;
    if (enter_axis == 2) n.z = sign;
    best_t = t_enter;
    hit = {t_enter, box.cls, n};
  }

  if (!std::isfinite(best_t))
    throw DataError("ray escaped the closed room; scene geometry is inconsistent");
  return hit;
}

void camera_basis(const CameraPose& pose, Vec3& forward, Vec3& right, Vec3& down) {
  const double c = std::cos(pose.yaw);
  const double s = std::sin(pose.yaw);
  forward = {c, s, 0};
  right = {s, -c, 0};
  down = {0, 0, -1};
}

static void check_pose(const Scene& scene, const CameraPose& pose) {
  const Vec3 p = pose.position;
  if (p.x <= scene.x0 || p.x >= scene.x1 || p.y <= scene.y0 || p.y >= scene.y1 || p.z <= 0.0)
    throw PoseError("camera outside the room interior");
  for (const Box& b : scene.boxes)
    if (inside_footprint(b, p.x, p.y) && p.z < b.hi.z)
      throw PoseError("camera inside an object box");
}

FirstView render_first_view(const Scene& scene, const CameraPose& pose,
                            const CameraIntrinsics& intr) {
  check_pose(scene, pose);
  Vec3 f, r, dn;
  camera_basis(pose, f, r, dn);

  const int w = intr.width;
  const int h = intr.height;
  FirstView view;
  view.sem = LabelMap(h, w);
  view.depth.resize(static_cast<std::size_t>(h) * w);
  view.rgb.resize(static_cast<std::size_t>(h) * w * 3);

  // Directional light; shading = ambient + diffuse against the face normal.
  const Vec3 to_light = [&] {
    Vec3 l{-0.45, -0.2, 0.85};
    const double n = std::sqrt(dot(l, l));
    return Vec3{l.x / n, l.y / n, l.z / n};
  }();

  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const double a = (u + 0.5 - intr.cx) / intr.fx;
      const double b = (v + 0.5 - intr.cy) / intr.fy;
      const Vec3 dir = f + a * r + b * dn;
      const Hit hit = trace_ray(scene, pose.position, dir);
      const std::size_t idx = static_cast<std::size_t>(v) * w + u;
      view.sem.at(v, u) = hit.cls;
      view.depth[idx] = hit.t + kDepthNudge;
      const double lambert = 0.6 + 0.4 * std::max(0.0, dot(hit.normal, to_light));
      for (int ch = 0; ch < 3; ++ch) {
        const int base = kPalette[hit.cls][ch] + scene.color_jitter[hit.cls][ch];
        const long long px = std::llround(std::clamp(base, 0, 255) * lambert);
        view.rgb[idx * 3 + ch] = static_cast<std::uint8_t>(std::clamp<long long>(px, 0, 255));
      }
    }
  }
  return view;
}

std::pair<int, int> topdown_cell(const TopdownSpec& td, double x, double y) {
  const double cs = cell_size(td);
  const int i = static_cast<int>(std::floor((td.center_x + td.s / 2 - x) / cs));
  const int j = static_cast<int>(std::floor((td.center_y + td.s / 2 - y) / cs));
  return {i, j};
}

namespace {

// Cell index range whose centers fall strictly inside [lo, hi] on one axis,
// clamped to the grid. Centers sit at center+s/2-(i+0.5)*cs, decreasing in i.
std::pair<int, int> center_range(double grid_hi, double cs, int g, double lo, double hi) {
  const int i_min = static_cast<int>(std::floor((grid_hi - hi) / cs - 0.5)) + 1;
  const int i_max = static_cast<int>(std::ceil((grid_hi - lo) / cs - 0.5)) - 1;
  return {std::max(0, i_min), std::min(g - 1, i_max)};
}

void paint_rect(const TopdownSpec& td, double x_lo, double x_hi, double y_lo, double y_hi,
                ClassId cls, double height, LabelMap& gt, std::vector<double>& hmap) {
  const double cs = cell_size(td);
  const auto [i0, i1] = center_range(td.center_x + td.s / 2, cs, td.g, x_lo, x_hi);
  const auto [j0, j1] = center_range(td.center_y + td.s / 2, cs, td.g, y_lo, y_hi);
  for (int i = i0; i <= i1; ++i) {
    for (int j = j0; j <= j1; ++j) {
      gt.at(i, j) = cls;
      hmap[static_cast<std::size_t>(i) * td.g + j] = height;
    }
  }
}

}  // namespace

std::pair<LabelMap, std::vector<double>> render_topdown_gt(const Scene& scene,
                                                           const TopdownSpec& td) {
  if (td.g < 8) throw GenerationError("top-down grid resolution must be at least 8");
  LabelMap gt(td.g, td.g, kUnknown);
  std::vector<double> hmap(static_cast<std::size_t>(td.g) * td.g, 0.0);

  // Wall footprint band first, then the floor interior carves it back to the
  // true extent, then object boxes from lowest to highest.
  paint_rect(td, scene.x0 - kWallBand, scene.x1 + kWallBand, scene.y0 - kWallBand,
             scene.y1 + kWallBand, kWall, scene.wall_height, gt, hmap);
  paint_rect(td, scene.x0, scene.x1, scene.y0, scene.y1, kFloor, 0.0, gt, hmap);

  std::vector<const Box*> order;
  order.reserve(scene.boxes.size());
  for (const Box& b : scene.boxes) order.push_back(&b);
  std::stable_sort(order.begin(), order.end(),
                   [](const Box* a, const Box* b) { return a->hi.z < b->hi.z; });
  for (const Box* b : order)
    paint_rect(td, b->lo.x, b->hi.x, b->lo.y, b->hi.y, b->cls, b->hi.z, gt, hmap);
  return {std::move(gt), std::move(hmap)};
}

BoolMap compute_visibility(const Scene& scene, const std::vector<CameraPose>& poses,
                           const CameraIntrinsics& intr, const TopdownSpec& td,
                           const LabelMap& gt) {
  BoolMap vis(td.g, td.g, false);
  for (const CameraPose& pose : poses) {
    Vec3 f, r, dn;
    camera_basis(pose, f, r, dn);
    for (int v = 0; v < intr.height; ++v) {
      for (int u = 0; u < intr.width; ++u) {
        const double a = (u + 0.5 - intr.cx) / intr.fx;
        const double b = (v + 0.5 - intr.cy) / intr.fy;
        const Vec3 dir = f + a * r + b * dn;
        const Hit hit = trace_ray(scene, pose.position, dir);
        const Vec3 pt = pose.position + (hit.t + kDepthNudge) * dir;
        if (pt.z > scene.wall_height) continue;
        const auto [i, j] = topdown_cell(td, pt.x, pt.y);
        if (i < 0 || i >= td.g || j < 0 || j >= td.g) continue;
        if (gt.at(i, j) == hit.cls) vis.set(i, j, true);
      }
    }
  }
  return vis;
}

LabelMap corrupt_mask(const LabelMap& sem, const CorruptionSpec& spec, std::uint64_t seed) {
  if (spec.flip_p < 0.0 || spec.flip_p > 1.0) throw ConfigError("flip probability outside [0,1]");
  if (spec.erode_r < 0) throw ConfigError("negative erosion radius");
  LabelMap out = sem;

  if (spec.erode_r > 0) {
    for (int r = 0; r < sem.h; ++r) {
      for (int c = 0; c < sem.w; ++c) {
        const ClassId k = sem.at(r, c);
        if (k <= kWall) continue;
        bool interior = true;
        int n_floor = 0, n_wall = 0;
        for (int dr = -spec.erode_r; dr <= spec.erode_r; ++dr) {
          for (int dc = -spec.erode_r; dc <= spec.erode_r; ++dc) {
            const int rr = std::clamp(r + dr, 0, sem.h - 1);
            const int cc = std::clamp(c + dc, 0, sem.w - 1);
            const ClassId nb = sem.at(rr, cc);
            if (nb != k) interior = false;
            if (nb == kFloor) ++n_floor;
            if (nb == kWall) ++n_wall;
          }
        }
        if (!interior) out.at(r, c) = n_wall > n_floor ? kWall : kFloor;
      }
    }
  }

  Rng rng(hash_combine(seed, "mask-flips"));
  for (std::size_t i = 0; i < out.v.size(); ++i) {
    if (!rng.bernoulli(spec.flip_p)) continue;
    const ClassId cur = out.v[i];
    // Uniform over the non-unknown classes other than the current one.
    int pick = rng.uniform_int(1, cur >= 1 && cur <= kNumClasses - 1 ? kNumClasses - 2
                                                                     : kNumClasses - 1);
    if (cur >= 1 && pick >= static_cast<int>(cur)) ++pick;
    out.v[i] = static_cast<ClassId>(pick);
  }
  return out;
}

}  // namespace bevbench
