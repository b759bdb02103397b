#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bevbench/train.hpp"

namespace bevbench {

// Patch discriminator over class-probability maps: five 4x4 stride-2 convs
// (K -> 64 -> 128 -> 256 -> 512 -> 1), leaky ReLU 0.2 between them, raw
// logit map out. A 64x64 input yields a 2x2 logit map.
class Discriminator {
 public:
  Discriminator(int in_channels, std::uint64_t seed);

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  int in_channels() const { return in_channels_; }

  // x is (C, H, W); returns the (1, H/32, W/32) logit map.
  Tensor forward(Tape& tape, const Tensor& x) const;

 private:
  int in_channels_;
  ParamSet params_;
};

struct AdaptConfig {
  std::string checkpoint;   // pretrained segmenter, required
  std::string source_dir;   // labeled source split
  std::string target_dir;   // unlabeled target split (labels eval-only)
  std::string out_dir;      // step log + adapted checkpoints land here when set
  double lambda_adv = 1e-3;
  double g_lr = 2.5e-4;
  double d_lr = 1e-4;
  int steps = 200;
  int batch_size = 4;
  std::uint64_t seed = 1;
  bool adv_on_presoftmax = false;  // feed D logits instead of probabilities
  int eval_every = 50;             // steps between target metrics; 0 = final only
  int views = 8;
  std::vector<std::string> modalities{"semantic"};

  void validate() const;
};

struct AdaptStepLog {
  std::int64_t step = 0;
  double l_seg = 0.0;
  double l_adv = 0.0;
  double l_d = 0.0;
};

struct AdaptResult {
  std::vector<AdaptStepLog> steps;
  std::vector<double> pa_target_binary;  // cadence evaluations plus final
  double source_binary_pa = 0.0;         // before any adaptation step
  double adapted_binary_pa = 0.0;
  std::string final_checkpoint;
  MetricsReport source_only;  // target-split metrics before any adaptation
  MetricsReport adapted;      // and after
};

// Pixel accuracy of floor-versus-rest after collapsing both maps to the
// two-way split, unknown cells ignored.
double binary_floor_pa(const VpnModel& model, const std::string& dataset_dir);

// Full target-split report plus the binary floor score stored alongside.
MetricsReport evaluate_transfer(const VpnModel& model, const std::string& dataset_dir,
                                double* binary_pa = nullptr);

// Output-space adversarial adaptation: each step takes a supervised segmenter
// step on source, a fooling step on target through frozen D (skipped when
// lambda_adv is zero), and a discriminator step on both detached maps.
AdaptResult adapt_train(VpnModel& model, const AdaptConfig& cfg);

}  // namespace bevbench
