#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "bevbench/dataset.hpp"
#include "bevbench/image_io.hpp"
#include "bevbench/render.hpp"
#include "bevbench/rng.hpp"
#include "bevbench/scene.hpp"

using namespace bevbench;
namespace fs = std::filesystem;

namespace {

Scene empty_room(double w, double h) {
  Scene s;
  s.x0 = 0;
  s.y0 = 0;
  s.x1 = w;
  s.y1 = h;
  s.wall_height = 3.0;
  s.lattice = 10.0 / 64.0;
  return s;
}

bool scenes_equal(const Scene& a, const Scene& b) {
  if (a.x0 != b.x0 || a.x1 != b.x1 || a.y0 != b.y0 || a.y1 != b.y1) return false;
  if (a.boxes.size() != b.boxes.size()) return false;
  for (std::size_t i = 0; i < a.boxes.size(); ++i) {
    const Box& p = a.boxes[i];
    const Box& q = b.boxes[i];
    if (p.cls != q.cls || p.lo.x != q.lo.x || p.lo.y != q.lo.y || p.lo.z != q.lo.z ||
        p.hi.x != q.hi.x || p.hi.y != q.hi.y || p.hi.z != q.hi.z)
      return false;
  }
  for (int i = 0; i < 4; ++i)
    if (a.agent_anchors[i].x != b.agent_anchors[i].x ||
        a.agent_anchors[i].y != b.agent_anchors[i].y)
      return false;
  return a.color_jitter == b.color_jitter;
}

// Independent implementation of the per-cell ground-truth rule: the topmost
// surface at the cell center, scanned box by box.
ClassId oracle_cell_label(const Scene& sc, double x, double y) {
  ClassId best = kUnknown;
  double best_h = -1.0;
  if (x > sc.x0 && x < sc.x1 && y > sc.y0 && y < sc.y1) {
    best = kFloor;
    best_h = 0.0;
  } else {
    const double dx = std::max({sc.x0 - x, 0.0, x - sc.x1});
    const double dy = std::max({sc.y0 - y, 0.0, y - sc.y1});
    if (std::max(dx, dy) <= kWallBand && std::max(dx, dy) > 0.0) return kWall;
    return kUnknown;
  }
  for (const Box& b : sc.boxes) {
    if (x > b.lo.x && x < b.hi.x && y > b.lo.y && y < b.hi.y && b.hi.z > best_h) {
      best = b.cls;
      best_h = b.hi.z;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("scene generation is deterministic and respects invariants") {
  SceneParams params;
  Scene a = generate_scene(42, params);
  Scene b = generate_scene(42, params);
  CHECK(scenes_equal(a, b));
  CHECK_FALSE(scenes_equal(a, generate_scene(43, params)));

  SceneParams degenerate;
  degenerate.max_boxes = 0;
  CHECK_THROWS_AS(generate_scene(1, degenerate), GenerationError);
  SceneParams too_many;
  too_many.max_boxes = 13;
  CHECK_THROWS_AS(generate_scene(1, too_many), GenerationError);
}

TEST_CASE("scene invariant sweep") {
  SceneParams params;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const Scene s = generate_scene(seed, params);
    REQUIRE(s.x1 - s.x0 >= params.room_min - 0.5);
    REQUIRE(s.x1 - s.x0 <= params.room_max);
    REQUIRE(s.boxes.size() >= 1);
    REQUIRE(s.boxes.size() <= 12);
    for (const Box& b : s.boxes) {
      REQUIRE(b.lo.x < b.hi.x);
      REQUIRE(b.lo.y < b.hi.y);
      REQUIRE(b.lo.z < b.hi.z);
      REQUIRE(b.lo.x >= s.x0);
      REQUIRE(b.hi.x <= s.x1);
      REQUIRE(b.lo.y >= s.y0);
      REQUIRE(b.hi.y <= s.y1);
      REQUIRE(b.cls >= 3);
      REQUIRE(b.cls <= 8);
      // snapped to the lattice
      const double cs = s.lattice;
      for (double v : {b.lo.x, b.lo.y, b.hi.x, b.hi.y})
        REQUIRE(std::abs(v / cs - std::llround(v / cs)) < 1e-12);
      for (const Vec3& anchor : s.agent_anchors) {
        const double dx = std::max({b.lo.x - anchor.x, 0.0, anchor.x - b.hi.x});
        const double dy = std::max({b.lo.y - anchor.y, 0.0, anchor.y - b.hi.y});
        REQUIRE(std::max(dx, dy) >= params.agent_clearance - 1e-12);
      }
    }
    for (std::size_t i = 0; i < s.boxes.size(); ++i)
      for (std::size_t j = i + 1; j < s.boxes.size(); ++j) {
        const Box& p = s.boxes[i];
        const Box& q = s.boxes[j];
        const bool overlap =
            p.lo.x < q.hi.x && q.lo.x < p.hi.x && p.lo.y < q.hi.y && q.lo.y < p.hi.y;
        REQUIRE_FALSE(overlap);
      }
  }
}

TEST_CASE("camera facing a wall three meters away") {
  Scene room = empty_room(6.0, 6.0);
  // odd image size puts one pixel exactly on the optical axis
  CameraIntrinsics intr = make_intrinsics(65, 65, 90.0);
  CameraPose pose{{3.0, 3.0, 1.2}, 0.0};
  FirstView fv = render_first_view(room, pose, intr);
  const int c = 32;
  CHECK(fv.sem.at(c, c) == kWall);
  CHECK(fv.depth[static_cast<std::size_t>(c) * 65 + c] == doctest::Approx(3.0).epsilon(1e-7));

  // rays never escape a closed room: no unknown labels anywhere
  for (ClassId v : fv.sem.v) CHECK(v != kUnknown);
}

TEST_CASE("no unknown labels in first views of generated scenes") {
  SceneParams params;
  CameraIntrinsics intr = make_intrinsics(64, 64, 90.0);
  for (std::uint64_t seed : {7ull, 99ull, 1234ull}) {
    const Scene s = generate_scene(seed, params);
    for (int k = 0; k < 4; ++k) {
      CameraPose pose{{s.agent_anchors[0].x, s.agent_anchors[0].y, 1.2},
                      2.0 * 3.14159265358979323846 * k / 4};
      FirstView fv = render_first_view(s, pose, intr);
      for (ClassId v : fv.sem.v) REQUIRE(v != kUnknown);
    }
  }
}

TEST_CASE("renderer rejects poses inside geometry") {
  Scene room = empty_room(6.0, 6.0);
  Box b;
  b.lo = {2.0, 2.0, 0.0};
  b.hi = {4.0, 4.0, 1.0};
  b.cls = 3;
  room.boxes.push_back(b);
  CameraIntrinsics intr = make_intrinsics(16, 16, 90.0);
  CHECK_THROWS_AS(render_first_view(room, {{7.0, 3.0, 1.2}, 0.0}, intr), PoseError);
  CHECK_THROWS_AS(render_first_view(room, {{3.0, 3.0, 0.5}, 0.0}, intr), PoseError);
  // above the box is legal
  CHECK_NOTHROW(render_first_view(room, {{3.0, 3.0, 1.5}, 0.0}, intr));
}

TEST_CASE("single box pixels match an independent intersection oracle") {
  Scene room = empty_room(8.0, 8.0);
  Box b;
  b.lo = {4.0, 3.0, 0.0};
  b.hi = {5.5, 4.5, 0.9};
  b.cls = 3;
  room.boxes.push_back(b);
  CameraIntrinsics intr = make_intrinsics(64, 64, 90.0);
  CameraPose pose{{1.5, 2.0, 1.2}, 0.35};
  FirstView fv = render_first_view(room, pose, intr);

  Vec3 f, r, dn;
  camera_basis(pose, f, r, dn);
  int checked = 0;
  for (int v = 0; v < 64; ++v) {
    for (int u = 0; u < 64; ++u) {
      const double a = (u + 0.5 - intr.cx) / intr.fx;
      const double bb = (v + 0.5 - intr.cy) / intr.fy;
      const Vec3 d = f + a * r + bb * dn;
      const Vec3 o = pose.position;
      // independent interval construction, one axis at a time
      double t_in = 0.0, t_out = 1e30;
      bool hit = true;
      const double os[3] = {o.x, o.y, o.z};
      const double ds[3] = {d.x, d.y, d.z};
      const double los[3] = {b.lo.x, b.lo.y, b.lo.z};
      const double his[3] = {b.hi.x, b.hi.y, b.hi.z};
      for (int ax = 0; ax < 3; ++ax) {
        if (ds[ax] == 0.0) {
          if (os[ax] <= los[ax] || os[ax] >= his[ax]) hit = false;
          continue;
        }
        const double ta = (los[ax] - os[ax]) / ds[ax];
        const double tb = (his[ax] - os[ax]) / ds[ax];
        t_in = std::max(t_in, std::min(ta, tb));
        t_out = std::min(t_out, std::max(ta, tb));
      }
      hit = hit && t_in < t_out && t_in > 0.0;
      // the box is unoccluded from this pose, so box pixels == oracle hits,
      // except where a nearer wall/floor hit wins (cannot happen here: the
      // box is interior) — compare the full pixel set both ways
      const bool rendered_box = fv.sem.at(v, u) == 3;
      if (hit) {
        REQUIRE(rendered_box);
        // renderer depth = oracle entry + nudge
        const double rd = fv.depth[static_cast<std::size_t>(v) * 64 + u];
        REQUIRE(std::abs(rd - (t_in + 1e-7)) < 1e-9);
        ++checked;
      } else {
        REQUIRE_FALSE(rendered_box);
      }
    }
  }
  CHECK(checked > 50);  // the box actually appears in frame
}

TEST_CASE("renderer is bit-deterministic") {
  SceneParams params;
  const Scene s = generate_scene(5, params);
  CameraIntrinsics intr = make_intrinsics(64, 64, 90.0);
  CameraPose pose{{s.agent_anchors[1].x, s.agent_anchors[1].y, 1.2}, 1.0};
  FirstView a = render_first_view(s, pose, intr);
  FirstView b = render_first_view(s, pose, intr);
  CHECK(a.sem == b.sem);
  CHECK(a.depth == b.depth);
  CHECK(a.rgb == b.rgb);
}

TEST_CASE("top-down ground truth equals brute-force center scan on 100 scenes") {
  SceneParams params;
  for (std::uint64_t seed = 1000; seed < 1100; ++seed) {
    const Scene s = generate_scene(seed, params);
    const Vec3 agent = s.agent_anchors[seed % 4];
    const TopdownSpec td{agent.x, agent.y, 10.0, 64};
    const auto [gt, hmap] = render_topdown_gt(s, td);
    const double cs = cell_size(td);
    for (int i = 0; i < td.g; ++i) {
      for (int j = 0; j < td.g; ++j) {
        const double x = td.center_x + td.s / 2 - (i + 0.5) * cs;
        const double y = td.center_y + td.s / 2 - (j + 0.5) * cs;
        REQUIRE(gt.at(i, j) == oracle_cell_label(s, x, y));
      }
    }
  }
}

TEST_CASE("top-down layout basics") {
  Scene room = empty_room(8.0, 8.0);
  Box b;
  b.lo = {4.0, 4.0, 0.0};
  b.hi = {5.0, 5.0, 0.7};  // lattice-aligned: 4.0 = 25.6 cells -> not exact...
  b.cls = 3;
  const double cs = room.lattice;
  // snap explicitly so footprint edges sit on cell boundaries
  b.lo.x = std::llround(4.0 / cs) * cs;
  b.lo.y = std::llround(4.0 / cs) * cs;
  b.hi.x = b.lo.x + 6 * cs;
  b.hi.y = b.lo.y + 6 * cs;
  room.boxes.push_back(b);

  const TopdownSpec td{4.0, 4.0, 10.0, 64};
  const auto [gt, hmap] = render_topdown_gt(room, td);

  int n_table = 0;
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) {
      const double x = td.center_x + td.s / 2 - (i + 0.5) * cell_size(td);
      const double y = td.center_y + td.s / 2 - (j + 0.5) * cell_size(td);
      const ClassId got = gt.at(i, j);
      if (got == 3) {
        ++n_table;
        CHECK(hmap[static_cast<std::size_t>(i) * 64 + j] == 0.7);
      }
      REQUIRE(got == oracle_cell_label(room, x, y));
    }
  CHECK(n_table == 36);  // exact 6x6 cell footprint

  // row 0 faces +x: the cell center x of row 0 exceeds that of row 63
  CHECK(td.center_x + td.s / 2 - 0.5 * cell_size(td) >
        td.center_x + td.s / 2 - 63.5 * cell_size(td));
  CHECK_THROWS_AS(render_topdown_gt(room, TopdownSpec{4, 4, 10.0, 4}), GenerationError);
}

TEST_CASE("visibility: empty room annulus fully visible, monotone in views") {
  Scene room = empty_room(9.0, 9.0);
  CameraIntrinsics intr = make_intrinsics(64, 64, 90.0);
  const Vec3 agent{4.5, 4.5, 1.2};
  const TopdownSpec td{agent.x, agent.y, 10.0, 64};
  const auto [gt, hmap] = render_topdown_gt(room, td);

  std::vector<CameraPose> poses;
  for (int k = 0; k < 8; ++k)
    poses.push_back({agent, 2.0 * 3.14159265358979323846 * k / 8});

  BoolMap vis8 = compute_visibility(room, poses, intr, td, gt);
  const double cs = cell_size(td);
  for (int i = 0; i < 64; ++i) {
    for (int j = 0; j < 64; ++j) {
      if (gt.at(i, j) != kFloor) continue;
      const double x = td.center_x + td.s / 2 - (i + 0.5) * cs;
      const double y = td.center_y + td.s / 2 - (j + 0.5) * cs;
      const double d = std::hypot(x - agent.x, y - agent.y);
      if (d > 1.45 && d < 2.2) REQUIRE(vis8.at(i, j));
    }
  }

  // monotone: visibility under a view subset is a subset of the full set
  std::vector<CameraPose> two(poses.begin(), poses.begin() + 2);
  BoolMap vis2 = compute_visibility(room, two, intr, td, gt);
  int n2 = 0, n8 = 0;
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) {
      n2 += vis2.at(i, j);
      n8 += vis8.at(i, j);
      if (vis2.at(i, j)) REQUIRE(vis8.at(i, j));
    }
  CHECK(n2 < n8);
}

TEST_CASE("cells behind a full-height occluder are invisible") {
  Scene room = empty_room(8.0, 8.0);
  const double cs = room.lattice;
  Box pillar;
  pillar.cls = 8;
  pillar.lo = {std::llround(5.0 / cs) * cs, std::llround(3.75 / cs) * cs, 0.0};
  pillar.hi = {pillar.lo.x + 3 * cs, pillar.lo.y + 3 * cs, 3.0};
  room.boxes.push_back(pillar);

  CameraIntrinsics intr = make_intrinsics(64, 64, 90.0);
  const Vec3 agent{2.0 - fmod(2.0, cs), 4.0 - fmod(4.0, cs), 1.2};
  const TopdownSpec td{agent.x, agent.y, 10.0, 64};
  const auto [gt, hmap] = render_topdown_gt(room, td);
  std::vector<CameraPose> poses;
  for (int k = 0; k < 8; ++k)
    poses.push_back({agent, 2.0 * 3.14159265358979323846 * k / 8});
  BoolMap vis = compute_visibility(room, poses, intr, td, gt);

  // sample a point straight behind the pillar center relative to the agent
  const double pcx = (pillar.lo.x + pillar.hi.x) / 2;
  const double pcy = (pillar.lo.y + pillar.hi.y) / 2;
  const double dx = pcx - agent.x, dy = pcy - agent.y;
  const double n = std::hypot(dx, dy);
  const double bx = pcx + 0.35 * dx / n, by = pcy + 0.35 * dy / n;
  const auto [bi, bj] = topdown_cell(td, bx, by);
  REQUIRE(gt.at(bi, bj) == kFloor);
  CHECK_FALSE(vis.at(bi, bj));
}

TEST_CASE("corrupt_mask identity, limit, determinism") {
  LabelMap m(32, 32, kFloor);
  for (int r = 10; r < 20; ++r)
    for (int c = 10; c < 20; ++c) m.at(r, c) = 4;

  CHECK(corrupt_mask(m, {0.0, 0}, 7) == m);

  LabelMap all_flipped = corrupt_mask(m, {1.0, 0}, 7);
  for (std::size_t i = 0; i < m.v.size(); ++i) CHECK(all_flipped.v[i] != m.v[i]);

  CHECK(corrupt_mask(m, {0.3, 1}, 9) == corrupt_mask(m, {0.3, 1}, 9));
  CHECK_FALSE(corrupt_mask(m, {0.3, 1}, 9) == corrupt_mask(m, {0.3, 1}, 10));
}

TEST_CASE("corrupt_mask erosion trims object boundaries") {
  LabelMap m(9, 9, kFloor);
  for (int r = 3; r <= 5; ++r)
    for (int c = 3; c <= 5; ++c) m.at(r, c) = 3;
  LabelMap out = corrupt_mask(m, {0.0, 1}, 1);
  // 3x3 object with radius-1 erosion: only the center survives
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 9; ++c) {
      if (r == 4 && c == 4)
        CHECK(out.at(r, c) == 3);
      else
        CHECK(out.at(r, c) == kFloor);
    }

  // a lone pixel vanishes entirely
  LabelMap lone(5, 5, kWall);
  lone.at(2, 2) = 5;
  LabelMap gone = corrupt_mask(lone, {0.0, 1}, 1);
  CHECK(gone.at(2, 2) == kWall);
}

TEST_CASE("corrupt_mask flip rate statistics") {
  LabelMap m(1000, 1000, kFloor);
  const double p = 0.05;
  LabelMap out = corrupt_mask(m, {p, 0}, 123);
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < m.v.size(); ++i) flipped += out.v[i] != m.v[i];
  const double rate = static_cast<double>(flipped) / m.v.size();
  CHECK(std::abs(rate - p) < 0.01);
  // flips target every non-unknown class
  std::set<ClassId> seen(out.v.begin(), out.v.end());
  CHECK(seen.size() == 8);
  CHECK(seen.count(kUnknown) == 0);
}

TEST_CASE("sample write/read round-trip") {
  GenConfig cfg;
  cfg.split = "val";
  cfg.n_samples = 1;
  cfg.seed = 21;
  const fs::path dir = fs::temp_directory_path() / "bevbench_sample_rt";
  fs::remove_all(dir);

  Sample s = generate_sample(cfg, default_id_base("val"));
  write_sample(s, dir.string());
  Sample r1 = read_sample(dir.string());
  // depth is projected onto the millimeter grid by the file format; the
  // projection is idempotent, so a second trip is exact
  write_sample(r1, dir.string());
  Sample r2 = read_sample(dir.string());
  CHECK(r1 == r2);
  CHECK(r1.topdown_gt == s.topdown_gt);
  CHECK(r1.visibility == s.visibility);
  CHECK(r1.views[0].sem == s.views[0].sem);
  for (std::size_t i = 0; i < s.views[0].depth.size(); ++i)
    CHECK(std::abs(r1.views[0].depth[i] - s.views[0].depth[i]) <= 5.0001e-4);

  // corrupt file reporting carries a byte offset
  {
    std::ofstream f(dir / "sem_0.pgm", std::ios::binary | std::ios::trunc);
    f << "P5\n64 64\n255\n";  // header only, raster missing
  }
  bool threw = false;
  try {
    read_sample(dir.string());
  } catch (const FormatError& e) {
    threw = true;
    CHECK(e.byte_offset() > 0);
  }
  CHECK(threw);
  fs::remove_all(dir);
}

TEST_CASE("dataset generation is byte-identical across runs and worker counts") {
  GenConfig cfg;
  cfg.split = "train";
  cfg.n_samples = 6;
  cfg.seed = 77;
  const fs::path root = fs::temp_directory_path() / "bevbench_ds_det";
  fs::remove_all(root);
  generate_dataset(cfg, (root / "a").string());
  generate_dataset(cfg, (root / "b").string());
  GenConfig cfg2 = cfg;
  cfg2.workers = 3;
  generate_dataset(cfg2, (root / "c").string());

  auto tree_bytes = [](const fs::path& p) {
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& e : fs::recursive_directory_iterator(p)) {
      if (!e.is_regular_file()) continue;
      std::ifstream f(e.path(), std::ios::binary);
      std::string bytes((std::istreambuf_iterator<char>(f)), {});
      files.emplace_back(fs::relative(e.path(), p).string(), std::move(bytes));
    }
    std::sort(files.begin(), files.end());
    return files;
  };
  const auto a = tree_bytes(root / "a");
  const auto b = tree_bytes(root / "b");
  auto c = tree_bytes(root / "c");
  CHECK(a == b);
  // worker count appears in the echoed config; sample bytes must still match
  for (auto& [name, bytes] : c) {
    if (name == "manifest.json") continue;
    const auto it = std::find_if(a.begin(), a.end(), [&](const auto& f) { return f.first == name; });
    REQUIRE(it != a.end());
    CHECK(bytes == it->second);
  }

  DatasetReader reader((root / "a").string());
  CHECK(reader.size() == 6);
  Sample s0 = reader.load(0);
  Sample s3 = reader.load(3);
  CHECK(s0.scene_seed == s3.scene_seed);  // same scene, different anchors
  CHECK(s0.agent.x != s3.agent.x);
  Sample s4 = reader.load(4);
  CHECK(s0.scene_seed != s4.scene_seed);
  fs::remove_all(root);
}

TEST_CASE("target domain build corrupts masks and flags GT as eval-only") {
  GenConfig cfg;
  cfg.split = "val";
  cfg.n_samples = 2;
  cfg.seed = 5;
  const fs::path root = fs::temp_directory_path() / "bevbench_target";
  fs::remove_all(root);
  generate_dataset(cfg, (root / "src").string());

  DatasetManifest tm = build_target_domain((root / "src").string(), {0.0, 0}, 9,
                                           (root / "tgt0").string());
  CHECK(tm.gt_eval_only);
  CHECK(tm.config.split == "target");
  DatasetReader src((root / "src").string());
  DatasetReader tgt0((root / "tgt0").string());
  CHECK(src.load(0).views[0].sem == tgt0.load(0).views[0].sem);  // zero corruption

  build_target_domain((root / "src").string(), {0.2, 1}, 9, (root / "tgt").string());
  DatasetReader tgt((root / "tgt").string());
  Sample a = src.load(0);
  Sample b = tgt.load(0);
  CHECK_FALSE(a.views[0].sem == b.views[0].sem);
  CHECK(a.topdown_gt == b.topdown_gt);  // labels intact, only inputs corrupted

  // generating a target split directly also corrupts
  GenConfig tc;
  tc.split = "target";
  tc.n_samples = 1;
  tc.seed = 5;
  DatasetManifest direct = generate_dataset(tc, (root / "direct").string());
  CHECK(direct.gt_eval_only);
  fs::remove_all(root);
}
