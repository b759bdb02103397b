#include "bevbench/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "bevbench/image_io.hpp"
#include "bevbench/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace bevbench {

bool Sample::operator==(const Sample& o) const {
  if (id != o.id || scene_seed != o.scene_seed || poses.size() != o.poses.size() ||
      views.size() != o.views.size())
    return false;
  if (agent.x != o.agent.x || agent.y != o.agent.y || agent.z != o.agent.z) return false;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (poses[i].position.x != o.poses[i].position.x ||
        poses[i].position.y != o.poses[i].position.y ||
        poses[i].position.z != o.poses[i].position.z || poses[i].yaw != o.poses[i].yaw)
      return false;
  }
  const auto& a = intrinsics;
  const auto& b = o.intrinsics;
  if (a.width != b.width || a.height != b.height || a.fx != b.fx || a.fy != b.fy ||
      a.cx != b.cx || a.cy != b.cy)
    return false;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (!(views[i].sem == o.views[i].sem) || views[i].depth != o.views[i].depth ||
        views[i].rgb != o.views[i].rgb)
      return false;
  }
  return topdown_gt == o.topdown_gt && visibility == o.visibility;
}

std::int64_t default_id_base(const std::string& split) {
  if (split == "train") return 0;
  if (split == "val") return 1000000;
  if (split == "target") return 2000000;
  throw ConfigError("unknown split '" + split + "' (expected train, val, or target)");
}

std::uint64_t sample_seed(std::uint64_t dataset_seed, std::int64_t sample_id) {
  return hash_combine(dataset_seed, static_cast<std::uint64_t>(sample_id));
}

std::uint64_t scene_seed_for(std::uint64_t dataset_seed, std::int64_t sample_id) {
  return hash_combine(hash_combine(dataset_seed, "scene"),
                      static_cast<std::uint64_t>(sample_id / 4));
}

Sample generate_sample(const GenConfig& cfg, std::int64_t id) {
  SceneParams sp = cfg.scene;
  sp.lattice = cfg.grid_s / cfg.grid_g;
  const Scene scene = generate_scene(scene_seed_for(cfg.seed, id), sp);

  Sample s;
  s.id = id;
  s.scene_seed = scene.rng_seed;
  const Vec3 anchor = scene.agent_anchors[static_cast<std::size_t>(id % 4)];
  s.agent = {anchor.x, anchor.y, cfg.camera_height};
  s.intrinsics = make_intrinsics(cfg.image_w, cfg.image_h, cfg.hfov_deg);

  for (int k = 0; k < cfg.n_views; ++k)
    s.poses.push_back({s.agent, 2.0 * 3.14159265358979323846 * k / cfg.n_views});

  for (const CameraPose& pose : s.poses)
    s.views.push_back(render_first_view(scene, pose, s.intrinsics));

  const TopdownSpec td{s.agent.x, s.agent.y, cfg.grid_s, cfg.grid_g};
  auto [gt, hmap] = render_topdown_gt(scene, td);
  s.visibility = compute_visibility(scene, s.poses, s.intrinsics, td, gt);
  s.topdown_gt = std::move(gt);

  if (cfg.corrupt) {
    const std::uint64_t base = sample_seed(cfg.seed, id);
    for (int k = 0; k < cfg.n_views; ++k)
      s.views[static_cast<std::size_t>(k)].sem =
          corrupt_mask(s.views[static_cast<std::size_t>(k)].sem, cfg.corruption,
                       hash_combine(hash_combine(base, "corrupt"), static_cast<std::uint64_t>(k)));
  }
  return s;
}

namespace {

std::string sample_dir_name(std::int64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%08lld", static_cast<long long>(id));
  return buf;
}

json pose_json(const Sample& s) {
  json poses = json::array();
  for (const CameraPose& p : s.poses)
    poses.push_back({{"position", {p.position.x, p.position.y, p.position.z}}, {"yaw", p.yaw}});
  return json{{"agent_position", {s.agent.x, s.agent.y, s.agent.z}},
              {"poses", poses},
              {"intrinsics",
               {{"width", s.intrinsics.width},
                {"height", s.intrinsics.height},
                {"fx", s.intrinsics.fx},
                {"fy", s.intrinsics.fy},
                {"cx", s.intrinsics.cx},
                {"cy", s.intrinsics.cy}}}};
}

json config_json(const GenConfig& c) {
  return json{{"split", c.split},
              {"n_samples", c.n_samples},
              {"seed", c.seed},
              {"n_views", c.n_views},
              {"image_w", c.image_w},
              {"image_h", c.image_h},
              {"hfov_deg", c.hfov_deg},
              {"grid_g", c.grid_g},
              {"grid_s", c.grid_s},
              {"camera_height", c.camera_height},
              {"id_base", c.id_base},
              {"workers", c.workers},
              {"scene",
               {{"room_min", c.scene.room_min},
                {"room_max", c.scene.room_max},
                {"wall_height", c.scene.wall_height},
                {"min_boxes", c.scene.min_boxes},
                {"max_boxes", c.scene.max_boxes},
                {"wall_clearance", c.scene.wall_clearance},
                {"agent_clearance", c.scene.agent_clearance}}},
              {"corrupt", c.corrupt},
              {"corruption", {{"flip_p", c.corruption.flip_p}, {"erode_r", c.corruption.erode_r}}}};
}

GenConfig config_from_json(const json& j) {
  GenConfig c;
  c.split = j.at("split").get<std::string>();
  c.n_samples = j.at("n_samples").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.n_views = j.at("n_views").get<int>();
  c.image_w = j.at("image_w").get<int>();
  c.image_h = j.at("image_h").get<int>();
  c.hfov_deg = j.at("hfov_deg").get<double>();
  c.grid_g = j.at("grid_g").get<int>();
  c.grid_s = j.at("grid_s").get<double>();
  c.camera_height = j.at("camera_height").get<double>();
  c.id_base = j.at("id_base").get<std::int64_t>();
  c.workers = j.at("workers").get<int>();
  const json& s = j.at("scene");
  c.scene.room_min = s.at("room_min").get<double>();
  c.scene.room_max = s.at("room_max").get<double>();
  c.scene.wall_height = s.at("wall_height").get<double>();
  c.scene.min_boxes = s.at("min_boxes").get<int>();
  c.scene.max_boxes = s.at("max_boxes").get<int>();
  c.scene.wall_clearance = s.at("wall_clearance").get<double>();
  c.scene.agent_clearance = s.at("agent_clearance").get<double>();
  c.corrupt = j.at("corrupt").get<bool>();
  c.corruption.flip_p = j.at("corruption").at("flip_p").get<double>();
  c.corruption.erode_r = j.at("corruption").at("erode_r").get<int>();
  return c;
}

}  // namespace

void write_sample(const Sample& s, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
  for (std::size_t k = 0; k < s.views.size(); ++k) {
    const FirstView& v = s.views[k];
    const std::string stem = dir + "/";
    write_label_map(stem + "sem_" + std::to_string(k) + ".pgm", v.sem);
    write_depth(stem + "depth_" + std::to_string(k) + ".pgm", v.sem.h, v.sem.w, v.depth);
    write_ppm(stem + "rgb_" + std::to_string(k) + ".ppm", v.sem.h, v.sem.w, v.rgb.data());
  }
  write_label_map(dir + "/topdown.pgm", s.topdown_gt);
  write_bool_map(dir + "/vis.pgm", s.visibility);
  json meta = pose_json(s);
  meta["id"] = s.id;
  meta["scene_seed"] = s.scene_seed;
  write_text_file(dir + "/pose.json", meta.dump(2) + "\n");
}

Sample read_sample(const std::string& dir) {
  Sample s;
  json meta;
  try {
    meta = json::parse(read_text_file(dir + "/pose.json"));
  } catch (const json::exception& e) {
    throw FormatError(dir + "/pose.json: " + e.what(), 0);
  }
  try {
    s.id = meta.at("id").get<std::int64_t>();
    s.scene_seed = meta.at("scene_seed").get<std::uint64_t>();
    const auto& ap = meta.at("agent_position");
    s.agent = {ap.at(0).get<double>(), ap.at(1).get<double>(), ap.at(2).get<double>()};
    const auto& intr = meta.at("intrinsics");
    s.intrinsics.width = intr.at("width").get<int>();
    s.intrinsics.height = intr.at("height").get<int>();
    s.intrinsics.fx = intr.at("fx").get<double>();
    s.intrinsics.fy = intr.at("fy").get<double>();
    s.intrinsics.cx = intr.at("cx").get<double>();
    s.intrinsics.cy = intr.at("cy").get<double>();
    for (const auto& pj : meta.at("poses")) {
      CameraPose p;
      const auto& pp = pj.at("position");
      p.position = {pp.at(0).get<double>(), pp.at(1).get<double>(), pp.at(2).get<double>()};
      p.yaw = pj.at("yaw").get<double>();
      s.poses.push_back(p);
    }
  } catch (const json::exception& e) {
    throw FormatError(dir + "/pose.json: " + e.what(), 0);
  }

  for (std::size_t k = 0; k < s.poses.size(); ++k) {
    FirstView v;
    const std::string stem = dir + "/";
    v.sem = read_label_map(stem + "sem_" + std::to_string(k) + ".pgm");
    int dh = 0, dw = 0;
    v.depth = read_depth(stem + "depth_" + std::to_string(k) + ".pgm", dh, dw);
    if (dh != v.sem.h || dw != v.sem.w)
      throw FormatError(dir + ": depth/semantic dimensions disagree for view " + std::to_string(k),
                        0);
    ImageRgb rgb = read_ppm(stem + "rgb_" + std::to_string(k) + ".ppm");
    if (rgb.h != v.sem.h || rgb.w != v.sem.w)
      throw FormatError(dir + ": rgb/semantic dimensions disagree for view " + std::to_string(k),
                        0);
    v.rgb = std::move(rgb.v);
    s.views.push_back(std::move(v));
  }
  s.topdown_gt = read_label_map(dir + "/topdown.pgm");
  s.visibility = read_bool_map(dir + "/vis.pgm");
  return s;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  json samples = json::array();
  for (const ManifestEntry& e : m.samples)
    samples.push_back(
        {{"id", e.id}, {"seed", e.sample_seed}, {"scene_seed", e.scene_seed}, {"dir", e.dir}});
  json palette = json::array();
  for (const auto& c : kPalette) palette.push_back({c[0], c[1], c[2]});
  json j{{"format_version", m.format_version},
         {"config", config_json(m.config)},
         {"modalities", {"semantic", "depth", "rgb"}},
         {"palette", palette},
         {"gt_eval_only", m.gt_eval_only},
         {"samples", samples}};
  write_text_file(path, j.dump(2) + "\n");
}

DatasetManifest read_manifest(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what(), 0);
  }
  DatasetManifest m;
  try {
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != 1)
      throw ConfigError("unsupported dataset format version " +
                        std::to_string(m.format_version));
    m.config = config_from_json(j.at("config"));
    m.gt_eval_only = j.at("gt_eval_only").get<bool>();
    for (const auto& e : j.at("samples")) {
      ManifestEntry me;
      me.id = e.at("id").get<std::int64_t>();
      me.sample_seed = e.at("seed").get<std::uint64_t>();
      me.scene_seed = e.at("scene_seed").get<std::uint64_t>();
      me.dir = e.at("dir").get<std::string>();
      m.samples.push_back(me);
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what(), 0);
  }
  return m;
}

DatasetManifest generate_dataset(const GenConfig& cfg_in, const std::string& out_dir) {
  GenConfig cfg = cfg_in;
  if (cfg.n_samples <= 0) throw ConfigError("n_samples must be positive");
  if (cfg.n_views <= 0) throw ConfigError("n_views must be positive");
  if (cfg.grid_g < 8) throw ConfigError("grid_g must be at least 8");
  if (cfg.grid_s <= 0.0) throw ConfigError("grid_s must be positive");
  if (cfg.workers < 1) throw ConfigError("workers must be at least 1");
  if (cfg.id_base < 0) cfg.id_base = default_id_base(cfg.split);
  if (cfg.split == "target") cfg.corrupt = true;

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir + ": " + ec.message());

  DatasetManifest m;
  m.config = cfg;
  m.gt_eval_only = cfg.split == "target";
  for (int i = 0; i < cfg.n_samples; ++i) {
    const std::int64_t id = cfg.id_base + i;
    m.samples.push_back(
        {id, sample_seed(cfg.seed, id), scene_seed_for(cfg.seed, id), sample_dir_name(id)});
  }

  // Per-sample outputs depend only on (config, id), so any partition across
  // workers writes the same bytes.
  const int workers = std::min(cfg.workers, cfg.n_samples);
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto run_range = [&](int begin, int step) {
    try {
      for (int i = begin; i < cfg.n_samples; i += step) {
        const Sample s = generate_sample(cfg, cfg.id_base + i);
        write_sample(s, out_dir + "/" + m.samples[static_cast<std::size_t>(i)].dir);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
    }
  };
  if (workers == 1) {
    run_range(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(run_range, t, workers);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  write_manifest(m, out_dir + "/manifest.json");
  return m;
}

DatasetReader::DatasetReader(const std::string& dir)
    : root(dir), manifest(read_manifest(dir + "/manifest.json")) {}

Sample DatasetReader::load(std::size_t index) const {
  if (index >= manifest.samples.size())
    throw DataError("sample index " + std::to_string(index) + " out of range");
  return read_sample(root + "/" + manifest.samples[index].dir);
}

DatasetManifest build_target_domain(const std::string& src_dir, const CorruptionSpec& spec,
                                    std::uint64_t seed, const std::string& out_dir) {
  DatasetReader src(src_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir + ": " + ec.message());

  DatasetManifest m = src.manifest;
  m.config.split = "target";
  m.config.corrupt = true;
  m.config.corruption = spec;
  m.gt_eval_only = true;
  for (std::size_t i = 0; i < src.size(); ++i) {
    Sample s = src.load(i);
    for (std::size_t k = 0; k < s.views.size(); ++k)
      s.views[k].sem = corrupt_mask(
          s.views[k].sem, spec,
          hash_combine(hash_combine(hash_combine(seed, static_cast<std::uint64_t>(s.id)),
                                    "corrupt"),
                       static_cast<std::uint64_t>(k)));
    write_sample(s, out_dir + "/" + m.samples[i].dir);
  }
  write_manifest(m, out_dir + "/manifest.json");
  return m;
}

}  // namespace bevbench
