#include "bevbench/model.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

#include "bevbench/baseline.hpp"
#include "bevbench/rng.hpp"

namespace bevbench {

using nlohmann::json;

int modality_channels(const std::string& modality) {
  if (modality == "semantic") return kNumClasses;
  if (modality == "depth") return 1;
  if (modality == "rgb") return 3;
  throw ConfigError("unknown modality \"" + modality + "\"");
}

void ModelConfig::validate() const {
  if (views < 1) throw ConfigError("model needs at least one view");
  if (modalities.empty()) throw ConfigError("model needs at least one modality");
  for (const std::string& m : modalities) modality_channels(m);
  for (std::size_t i = 0; i < modalities.size(); ++i)
    for (std::size_t j = i + 1; j < modalities.size(); ++j)
      if (modalities[i] == modalities[j]) throw ConfigError("duplicate modality " + modalities[i]);
  if (mid_h < 1 || mid_w < 1 || mid_c < 1) throw ConfigError("feature dims must be positive");
  if (image_h != 4 * mid_h || image_w != 4 * mid_w)
    throw ConfigError("encoder stride chain needs image dims = 4x feature dims, got " +
                      std::to_string(image_h) + "x" + std::to_string(image_w) + " vs " +
                      std::to_string(mid_h) + "x" + std::to_string(mid_w));
  if (classes < 2) throw ConfigError("need at least two output classes");
}

namespace {

constexpr int kEncC1 = 16;  // channels after the first encoder conv
constexpr int kDecC = 16;   // channels between decoder upsamples

// Fan-in scaled Gaussian; gain 2 for layers feeding a ReLU, 1 for linear
// outputs, so activation variance holds steady and the starting loss sits at
// the uniform-softmax value.
Tensor fan_in_init(const Shape& shape, int fan_in, double gain, Rng& rng) {
  const double stddev = std::sqrt(gain / fan_in);
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (double& x : v) x = stddev * rng.normal();
  return Tensor::from_data(shape, std::move(v), true);
}

std::string slot_name(const std::string& modality, int view) {
  return "rel." + modality + "." + (view < 10 ? "0" : "") + std::to_string(view);
}

}  // namespace

VpnModel::VpnModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  auto add = [&](const std::string& name, Shape shape, int fan_in, double gain = 2.0) {
    if (fan_in == 0) {
      params_.add(name, Tensor::zeros(shape, true));
      return;
    }
    Rng rng(hash_combine(hash_combine(seed, "init"), name));
    params_.add(name, fan_in_init(shape, fan_in, gain, rng));
  };

  for (const std::string& mod : cfg_.modalities) {
    const int c_in = modality_channels(mod);
    add("enc." + mod + ".w1", {kEncC1, c_in, 3, 3}, c_in * 9);
    add("enc." + mod + ".b1", {kEncC1}, 0);
    add("enc." + mod + ".w2", {cfg_.mid_c, kEncC1, 3, 3}, kEncC1 * 9);
    add("enc." + mod + ".b2", {cfg_.mid_c}, 0);
    add("enc." + mod + ".w3", {cfg_.mid_c, cfg_.mid_c, 3, 3}, cfg_.mid_c * 9);
    add("enc." + mod + ".b3", {cfg_.mid_c}, 0);
    if (cfg_.view_relation) {
      const int d = cfg_.relation_dim();
      for (int v = 0; v < cfg_.views; ++v) {
        const std::string base = slot_name(mod, v);
        add(base + ".w1", {d, d}, d);
        add(base + ".b1", {d}, 0);
        add(base + ".w2", {d, d}, d, 1.0);  // no ReLU after the second layer
        add(base + ".b2", {d}, 0);
      }
    }
  }
  // Sum fusion stacks views x modalities same-scale maps, so the first
  // decoder conv counts that multiplicity in its fan-in; otherwise the
  // initial logits blow up with the view count and the starting loss drifts
  // away from the uniform-softmax value.
  const int fused_mult = cfg_.views * static_cast<int>(cfg_.modalities.size());
  add("dec.w1", {cfg_.mid_c, cfg_.mid_c, 3, 3}, cfg_.mid_c * 9 * fused_mult);
  add("dec.b1", {cfg_.mid_c}, 0);
  add("dec.w2", {kDecC, cfg_.mid_c, 3, 3}, cfg_.mid_c * 9);
  add("dec.b2", {kDecC}, 0);
  add("dec.w3", {cfg_.classes, kDecC, 1, 1}, kDecC, 1.0);  // linear classifier head
  add("dec.b3", {cfg_.classes}, 0);

  if (params_.numel() != expected_param_count())
    throw ConfigError("parameter count drifted from the documented closed form");
}

long long VpnModel::expected_param_count() const {
  long long n = 0;
  for (const std::string& mod : cfg_.modalities) {
    const long long c_in = modality_channels(mod);
    n += kEncC1 * c_in * 9 + kEncC1;
    n += static_cast<long long>(cfg_.mid_c) * kEncC1 * 9 + cfg_.mid_c;
    n += static_cast<long long>(cfg_.mid_c) * cfg_.mid_c * 9 + cfg_.mid_c;
    if (cfg_.view_relation) {
      const long long d = cfg_.relation_dim();
      n += cfg_.views * (2 * d * d + 2 * d);
    }
  }
  n += static_cast<long long>(cfg_.mid_c) * cfg_.mid_c * 9 + cfg_.mid_c;
  n += static_cast<long long>(kDecC) * cfg_.mid_c * 9 + kDecC;
  n += static_cast<long long>(cfg_.classes) * kDecC + cfg_.classes;
  return n;
}

Tensor VpnModel::encode(Tape& tape, const Tensor& image, const std::string& modality) const {
  const int c_in = modality_channels(modality);
  if (!image.defined() || image.shape().size() != 3 || image.shape()[0] != c_in ||
      image.shape()[1] != cfg_.image_h || image.shape()[2] != cfg_.image_w)
    throw ShapeError("encoder expects " + std::to_string(c_in) + "x" +
                     std::to_string(cfg_.image_h) + "x" + std::to_string(cfg_.image_w) + " for " +
                     modality + ", got " + (image.defined() ? shape_str(image.shape()) : "none"));
  const std::string e = "enc." + modality + ".";
  Tensor h = relu(tape, conv2d(tape, image, params_.at(e + "w1"), params_.at(e + "b1"), 1, 1));
  h = relu(tape, conv2d(tape, h, params_.at(e + "w2"), params_.at(e + "b2"), 2, 1));
  return relu(tape, conv2d(tape, h, params_.at(e + "w3"), params_.at(e + "b3"), 2, 1));
}

Tensor VpnModel::relate(Tape& tape, const Tensor& feat, int view,
                        const std::string& modality) const {
  if (feat.shape() != Shape{cfg_.mid_c, cfg_.mid_h, cfg_.mid_w})
    throw ShapeError("relation block expects " + std::to_string(cfg_.mid_c) + "x" +
                     std::to_string(cfg_.mid_h) + "x" + std::to_string(cfg_.mid_w) + ", got " +
                     shape_str(feat.shape()));
  if (view < 0 || view >= cfg_.views)
    throw ConfigError("view index " + std::to_string(view) + " out of range");
  if (!cfg_.view_relation) return feat;
  const std::string base = slot_name(modality, view);
  Tensor flat = flatten_spatial(tape, feat);
  Tensor h = relu(tape, add_row_bias(tape, matmul(tape, flat, params_.at(base + ".w1")),
                                     params_.at(base + ".b1")));
  h = add_row_bias(tape, matmul(tape, h, params_.at(base + ".w2")), params_.at(base + ".b2"));
  return reshape(tape, h, {cfg_.mid_c, cfg_.mid_h, cfg_.mid_w});
}

Tensor VpnModel::decode(Tape& tape, const Tensor& fused) const {
  if (fused.shape() != Shape{cfg_.mid_c, cfg_.mid_h, cfg_.mid_w})
    throw ShapeError("decoder expects " + std::to_string(cfg_.mid_c) + "x" +
                     std::to_string(cfg_.mid_h) + "x" + std::to_string(cfg_.mid_w) + ", got " +
                     shape_str(fused.shape()));
  Tensor h = relu(tape, conv2d(tape, fused, params_.at("dec.w1"), params_.at("dec.b1"), 1, 1));
  h = upsample_nearest(tape, h, 2);
  h = relu(tape, conv2d(tape, h, params_.at("dec.w2"), params_.at("dec.b2"), 1, 1));
  h = upsample_nearest(tape, h, 2);
  return conv2d(tape, h, params_.at("dec.w3"), params_.at("dec.b3"), 1, 0);
}

Tensor VpnModel::forward(Tape& tape, const ViewInputs& inputs) const {
  if (static_cast<int>(inputs.size()) != cfg_.views)
    throw ConfigError("model wants " + std::to_string(cfg_.views) + " views, got " +
                      std::to_string(inputs.size()));
  std::vector<Tensor> maps;
  maps.reserve(inputs.size() * cfg_.modalities.size());
  for (int v = 0; v < cfg_.views; ++v) {
    if (inputs[static_cast<std::size_t>(v)].size() != cfg_.modalities.size())
      throw ConfigError("view " + std::to_string(v) + " is missing modalities");
    for (std::size_t m = 0; m < cfg_.modalities.size(); ++m) {
      Tensor f = encode(tape, inputs[static_cast<std::size_t>(v)][m], cfg_.modalities[m]);
      maps.push_back(relate(tape, f, v, cfg_.modalities[m]));
    }
  }
  return decode(tape, fuse_sum(tape, maps));
}

Tensor fuse_sum(Tape& tape, const std::vector<Tensor>& maps) {
  if (maps.empty()) throw ConfigError("nothing to fuse");
  Tensor acc = maps[0];
  for (std::size_t i = 1; i < maps.size(); ++i) acc = add(tape, acc, maps[i]);
  return acc;
}

ViewInputs build_inputs(const Sample& s, int n_views,
                        const std::vector<std::string>& modalities) {
  if (modalities.empty()) throw ConfigError("no modalities selected");
  const std::vector<int> subset = view_subset(static_cast<int>(s.views.size()), n_views);
  const int h = s.intrinsics.height;
  const int w = s.intrinsics.width;
  const std::size_t hw = static_cast<std::size_t>(h) * w;

  ViewInputs out;
  out.reserve(subset.size());
  for (int k : subset) {
    const FirstView& fv = s.views[static_cast<std::size_t>(k)];
    std::vector<Tensor> mods;
    for (const std::string& mod : modalities) {
      if (mod == "semantic") {
        if (fv.sem.h != h || fv.sem.w != w)
          throw ConfigError("sample view " + std::to_string(k) + " has no semantic image");
        std::vector<double> v(static_cast<std::size_t>(kNumClasses) * hw, 0.0);
        for (std::size_t i = 0; i < hw; ++i) v[fv.sem.v[i] * hw + i] = 1.0;
        mods.push_back(Tensor::from_data({kNumClasses, h, w}, std::move(v)));
      } else if (mod == "depth") {
        if (fv.depth.size() != hw)
          throw ConfigError("sample view " + std::to_string(k) + " has no depth image");
        std::vector<double> v(hw);
        for (std::size_t i = 0; i < hw; ++i) v[i] = std::min(fv.depth[i] / 12.0, 1.0);
        mods.push_back(Tensor::from_data({1, h, w}, std::move(v)));
      } else if (mod == "rgb") {
        if (fv.rgb.size() != 3 * hw)
          throw ConfigError("sample view " + std::to_string(k) + " has no rgb image");
        std::vector<double> v(3 * hw);
        for (std::size_t i = 0; i < hw; ++i)
          for (int c = 0; c < 3; ++c) v[c * hw + i] = fv.rgb[3 * i + c] / 255.0;
        mods.push_back(Tensor::from_data({3, h, w}, std::move(v)));
      } else {
        throw ConfigError("unknown modality \"" + mod + "\"");
      }
    }
    out.push_back(std::move(mods));
  }
  return out;
}

std::string model_meta_json(const ModelConfig& cfg) {
  json j{{"model",
          {{"views", cfg.views},
           {"modalities", cfg.modalities},
           {"image_h", cfg.image_h},
           {"image_w", cfg.image_w},
           {"mid_h", cfg.mid_h},
           {"mid_w", cfg.mid_w},
           {"mid_c", cfg.mid_c},
           {"classes", cfg.classes},
           {"view_relation", cfg.view_relation}}}};
  return j.dump();
}

ModelConfig model_config_from_meta(const std::string& meta_json) {
  ModelConfig cfg;
  try {
    const json j = json::parse(meta_json).at("model");
    cfg.views = j.at("views").get<int>();
    cfg.modalities = j.at("modalities").get<std::vector<std::string>>();
    cfg.image_h = j.at("image_h").get<int>();
    cfg.image_w = j.at("image_w").get<int>();
    cfg.mid_h = j.at("mid_h").get<int>();
    cfg.mid_w = j.at("mid_w").get<int>();
    cfg.mid_c = j.at("mid_c").get<int>();
    cfg.classes = j.at("classes").get<int>();
    cfg.view_relation = j.at("view_relation").get<bool>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint meta lacks a model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

VpnModel load_model(const std::string& checkpoint_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  VpnModel model(model_config_from_meta(ckpt.meta_json), 0);
  restore_params(model.params(), ckpt);
  return model;
}

}  // namespace bevbench
