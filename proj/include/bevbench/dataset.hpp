#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bevbench/render.hpp"
#include "bevbench/scene.hpp"

namespace bevbench {

// One agent placement: N first-person views in all three modalities plus the
// exact top-down ground truth and its visibility mask.
struct Sample {
  std::int64_t id = 0;
  std::uint64_t scene_seed = 0;
  Vec3 agent;  // camera position (z = camera height)
  std::vector<CameraPose> poses;
  CameraIntrinsics intrinsics;
  std::vector<FirstView> views;
  LabelMap topdown_gt;
  BoolMap visibility;

  bool operator==(const Sample& o) const;
};

struct GenConfig {
  std::string split = "train";  // train | val | target
  int n_samples = 2000;
  std::uint64_t seed = 1;
  int n_views = 8;
  int image_w = 64;
  int image_h = 64;
  double hfov_deg = 90.0;
  int grid_g = 64;
  double grid_s = 10.0;
  double camera_height = 1.2;
  SceneParams scene;
  bool corrupt = false;  // target-domain semantic mask corruption
  CorruptionSpec corruption;
  std::int64_t id_base = -1;  // derived from split when negative
  int workers = 1;
};

struct ManifestEntry {
  std::int64_t id = 0;
  std::uint64_t sample_seed = 0;
  std::uint64_t scene_seed = 0;
  std::string dir;
};

struct DatasetManifest {
  int format_version = 1;
  GenConfig config;
  bool gt_eval_only = false;  // target split: top-down labels are not for training
  std::vector<ManifestEntry> samples;
};

std::int64_t default_id_base(const std::string& split);

std::uint64_t sample_seed(std::uint64_t dataset_seed, std::int64_t sample_id);
std::uint64_t scene_seed_for(std::uint64_t dataset_seed, std::int64_t sample_id);

// Builds the sample fully in memory (depth unquantized). Samples with the
// same id/4 share a scene; id%4 picks the agent anchor.
Sample generate_sample(const GenConfig& cfg, std::int64_t id);

DatasetManifest generate_dataset(const GenConfig& cfg, const std::string& out_dir);

void write_sample(const Sample& s, const std::string& dir);
// Depth comes back quantized to the millimeter file grid.
Sample read_sample(const std::string& dir);

void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

// Reads a split written by generate_dataset; sample ids resolve through the
// manifest in out_dir/manifest.json.
struct DatasetReader {
  explicit DatasetReader(const std::string& dir);
  std::size_t size() const { return manifest.samples.size(); }
  Sample load(std::size_t index) const;

  std::string root;
  DatasetManifest manifest;
};

// Rewrites an existing dataset with corrupted semantic masks, flagged as the
// target split with evaluation-only ground truth.
DatasetManifest build_target_domain(const std::string& src_dir, const CorruptionSpec& spec,
                                    std::uint64_t seed, const std::string& out_dir);

}  // namespace bevbench
