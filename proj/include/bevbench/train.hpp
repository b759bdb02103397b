#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bevbench/dataset.hpp"
#include "bevbench/metrics.hpp"
#include "bevbench/model.hpp"

namespace bevbench {

struct TrainConfig {
  std::string optimizer = "adam";  // adam | sgd
  double lr = 1e-3;
  int batch_size = 8;
  int epochs = 15;
  std::uint64_t seed = 1;
  std::string dataset_dir;  // training split
  std::string val_dir;      // optional: evaluated on the checkpoint cadence
  int views = 8;            // 1 | 2 | 4 | 8, strided out of the stored yaw set
  std::vector<std::string> modalities{"semantic"};
  int checkpoint_every = 5;  // epochs between checkpoints; 0 = final only
  std::string out_dir;       // checkpoints + step log land here when set

  void validate() const;
};

// Deterministic shuffled batch schedule over n samples: epoch e is an
// independent Fisher-Yates permutation derived from (seed, e), cut into
// batch_size slices (last slice may be short).
class BatchStream {
 public:
  BatchStream(std::size_t n, std::uint64_t seed, int batch_size);
  std::int64_t batches_per_epoch() const { return batches_; }
  std::vector<std::size_t> batch(std::int64_t epoch, std::int64_t index) const;

 private:
  std::size_t n_;
  std::uint64_t seed_;
  int batch_size_;
  std::int64_t batches_;
};

struct MetricsReport {
  std::string config_json = "{}";
  double pa = 0;
  double miou = 0;
  std::vector<double> per_class_iou;
  double pa_visible = 0;
  double pa_occluded = 0;
  double miou_visible = 0;
  double miou_occluded = 0;
  double wall_clock_s = 0;
};

struct TrainResult {
  std::vector<double> loss_curve;  // one mean loss per optimizer step
  std::vector<MetricsReport> val_reports;
  std::string final_checkpoint;  // empty when out_dir is unset
};

// Builds a fresh model matching the training config; init_seed is derived
// from cfg.seed so matched runs share initialization.
VpnModel make_model(const TrainConfig& cfg, bool view_relation, int mid_c = 32);

// Minimizes softmax cross-entropy of top-down logits against ground truth.
// Deterministic given config+seed. Throws TrainingError (with step) when the
// loss stops being finite, ConfigError when the split withholds labels.
TrainResult train(VpnModel& model, const TrainConfig& cfg);

// Argmax class map of a single sample under the model's own view count.
LabelMap predict_map(const VpnModel& model, const Sample& s);

// Metrics over a split, stratified by the visibility mask. views/modalities
// must match the model's config (ConfigError otherwise).
MetricsReport evaluate(const VpnModel& model, const std::string& dataset_dir, int views,
                       const std::vector<std::string>& modalities);

struct AblationResult {
  TrainResult with_relation;
  TrainResult without_relation;
  MetricsReport report_with;
  MetricsReport report_without;
};

// Trains the full pipeline and the relation-free arm from one config and
// seed (shared encoder/decoder init) and evaluates both on the val split.
AblationResult run_ablation(const TrainConfig& cfg);

// Averages per-pixel softmax outputs of per-modality models, then argmaxes.
// All models must agree on the class count (ConfigError).
MetricsReport late_fusion_eval(const std::vector<const VpnModel*>& models,
                               const std::string& dataset_dir);

}  // namespace bevbench
