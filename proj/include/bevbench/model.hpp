#pragma once

#include <string>
#include <vector>

#include "bevbench/checkpoint.hpp"
#include "bevbench/dataset.hpp"
#include "bevbench/ops.hpp"
#include "bevbench/optim.hpp"

namespace bevbench {

// Input channels per modality: semantic one-hot 9, depth 1, rgb 3.
int modality_channels(const std::string& modality);

struct ModelConfig {
  int views = 8;
  std::vector<std::string> modalities{"semantic"};
  int image_h = 64;
  int image_w = 64;
  int mid_h = 16;  // feature resolution after the two stride-2 convs
  int mid_w = 16;
  int mid_c = 32;
  int classes = 9;
  // Per-view spatial relation blocks between encoder and fusion. Off, the
  // pipeline degenerates to encode -> sum -> decode (the ablation arm).
  bool view_relation = true;

  int relation_dim() const { return mid_h * mid_w; }
  void validate() const;  // throws ConfigError

  bool operator==(const ModelConfig&) const = default;
};

// One tensor per (selected view, modality), [view][modality_index], each
// channels x H x W.
using ViewInputs = std::vector<std::vector<Tensor>>;

// Image stacks for an evenly strided subset of the sample's views: semantic
// as one-hot planes, depth scaled into [0,1] by a 12 m range, rgb by 1/255.
ViewInputs build_inputs(const Sample& s, int n_views,
                        const std::vector<std::string>& modalities);

// Encoders (shared across views within a modality), per-(view, modality)
// two-layer spatial relation MLPs, elementwise-sum fusion, conv decoder.
class VpnModel {
 public:
  VpnModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // Closed-form size the parameter set is asserted against at construction.
  long long expected_param_count() const;

  // conv3(stride 1) -> relu -> conv3(stride 2) -> relu -> conv3(stride 2)
  // -> relu, channels c_in -> 16 -> mid_c -> mid_c.
  Tensor encode(Tape& tape, const Tensor& image, const std::string& modality) const;

  // Per-channel-shared MLP over flattened spatial positions:
  // relu(f W1 + b1) W2 + b2, reshaped back. Identity when view_relation is
  // off.
  Tensor relate(Tape& tape, const Tensor& feat, int view, const std::string& modality) const;

  // conv3 -> relu -> up2 -> conv3 -> relu -> up2 -> conv1 to class logits.
  Tensor decode(Tape& tape, const Tensor& fused) const;

  Tensor forward(Tape& tape, const ViewInputs& inputs) const;

 private:
  ModelConfig cfg_;
  ParamSet params_;
};

// Elementwise sum of equally shaped maps; ConfigError when empty.
Tensor fuse_sum(Tape& tape, const std::vector<Tensor>& maps);

std::string model_meta_json(const ModelConfig& cfg);
ModelConfig model_config_from_meta(const std::string& meta_json);

// Reconstructs a model from a checkpoint written with model_meta_json meta.
VpnModel load_model(const std::string& checkpoint_path);

}  // namespace bevbench
