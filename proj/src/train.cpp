#include "bevbench/train.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "bevbench/log.hpp"
#include "bevbench/rng.hpp"

namespace bevbench {

using nlohmann::json;
namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (optimizer != "adam" && optimizer != "sgd")
    throw ConfigError("optimizer must be adam or sgd, got \"" + optimizer + "\"");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and >= 0");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (views != 1 && views != 2 && views != 4 && views != 8)
    throw ConfigError("views must be one of 1, 2, 4, 8");
  if (modalities.empty()) throw ConfigError("at least one modality required");
  for (const std::string& m : modalities) modality_channels(m);
  for (std::size_t i = 0; i < modalities.size(); ++i)
    for (std::size_t j = i + 1; j < modalities.size(); ++j)
      if (modalities[i] == modalities[j]) throw ConfigError("duplicate modality " + modalities[i]);
  if (dataset_dir.empty()) throw ConfigError("training dataset path required");
  if (checkpoint_every < 0) throw ConfigError("checkpoint cadence must be >= 0");
}

BatchStream::BatchStream(std::size_t n, std::uint64_t seed, int batch_size)
    : n_(n), seed_(seed), batch_size_(batch_size) {
  if (n == 0) throw ConfigError("empty dataset");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  batches_ = static_cast<std::int64_t>((n + batch_size - 1) / batch_size);
}

std::vector<std::size_t> BatchStream::batch(std::int64_t epoch, std::int64_t index) const {
  if (index < 0 || index >= batches_) throw ConfigError("batch index out of range");
  std::vector<std::size_t> order(n_);
  for (std::size_t i = 0; i < n_; ++i) order[i] = i;
  Rng rng(hash_combine(seed_, static_cast<std::uint64_t>(epoch)));
  rng.shuffle(order);
  const std::size_t lo = static_cast<std::size_t>(index) * batch_size_;
  const std::size_t hi = std::min(n_, lo + batch_size_);
  return {order.begin() + static_cast<std::ptrdiff_t>(lo),
          order.begin() + static_cast<std::ptrdiff_t>(hi)};
}

namespace {

json train_config_to_json(const TrainConfig& c) {
  return json{{"optimizer", c.optimizer},
              {"lr", c.lr},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"seed", c.seed},
              {"dataset_dir", c.dataset_dir},
              {"val_dir", c.val_dir},
              {"views", c.views},
              {"modalities", c.modalities},
              {"checkpoint_every", c.checkpoint_every},
              {"out_dir", c.out_dir}};
}

std::string checkpoint_meta(const VpnModel& model, const TrainConfig& cfg, int epoch) {
  json j = json::parse(model_meta_json(model.config()));
  j["train"] = train_config_to_json(cfg);
  j["epoch"] = epoch;
  return j.dump();
}

void optimizer_step(ParamSet& params, const TrainConfig& cfg) {
  if (cfg.optimizer == "adam")
    adam_step(params, cfg.lr);
  else
    sgd_step(params, cfg.lr);
}

}  // namespace

VpnModel make_model(const TrainConfig& cfg, bool view_relation, int mid_c) {
  cfg.validate();
  const DatasetManifest m = read_manifest(cfg.dataset_dir + "/manifest.json");
  ModelConfig mc;
  mc.views = cfg.views;
  mc.modalities = cfg.modalities;
  mc.image_h = m.config.image_h;
  mc.image_w = m.config.image_w;
  mc.mid_h = mc.image_h / 4;
  mc.mid_w = mc.image_w / 4;
  mc.mid_c = mid_c;
  mc.classes = kNumClasses;
  mc.view_relation = view_relation;
  if (m.config.grid_g != mc.image_h || m.config.grid_g != mc.image_w)
    throw ConfigError("decoder emits image-sized maps; top-down grid " +
                      std::to_string(m.config.grid_g) + " must match image " +
                      std::to_string(mc.image_h) + "x" + std::to_string(mc.image_w));
  return VpnModel(mc, hash_combine(cfg.seed, "model-init"));
}

TrainResult train(VpnModel& model, const TrainConfig& cfg) {
  cfg.validate();
  DatasetReader ds(cfg.dataset_dir);
  if (ds.manifest.gt_eval_only)
    throw ConfigError("split " + cfg.dataset_dir + " withholds top-down labels from training");
  if (model.config().views != cfg.views || model.config().modalities != cfg.modalities)
    throw ConfigError("model was built for a different view/modality selection");

  TrainResult result;
  if (!cfg.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.out_dir + ": " + ec.message());
  }
  std::ofstream log_file;
  if (!cfg.out_dir.empty()) log_file.open(cfg.out_dir + "/train_log.jsonl", std::ios::trunc);

  BatchStream stream(ds.size(), hash_combine(cfg.seed, "shuffle"), cfg.batch_size);
  std::int64_t step = 0;
  const auto t0 = std::chrono::steady_clock::now();

  auto checkpoint_at = [&](int epoch, const std::string& name) {
    if (cfg.out_dir.empty()) return std::string();
    const std::string path = cfg.out_dir + "/" + name;
    save_checkpoint(path, model.params(), checkpoint_meta(model, cfg, epoch));
    return path;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::int64_t b = 0; b < stream.batches_per_epoch(); ++b, ++step) {
      const std::vector<std::size_t> idx = stream.batch(epoch, b);
      model.params().zero_grad();
      double batch_loss = 0.0;
      try {
        for (std::size_t i : idx) {
          const Sample s = ds.load(i);
          Tape tape;
          Tensor logits = model.forward(tape, build_inputs(s, cfg.views, cfg.modalities));
          Tensor loss = softmax_cross_entropy(tape, logits, s.topdown_gt, 0);
          Tensor scaled = mul_scalar(tape, loss, 1.0 / static_cast<double>(idx.size()));
          tape.backward(scaled);
          batch_loss += loss.item() / static_cast<double>(idx.size());
        }
      } catch (const DataError& e) {
        throw TrainingError(std::string("diverged: ") + e.what(), step);
      }
      if (!std::isfinite(batch_loss)) throw TrainingError("training loss is not finite", step);
      optimizer_step(model.params(), cfg);
      result.loss_curve.push_back(batch_loss);
      epoch_loss += batch_loss;
      if (log_file.is_open())
        log_file << json{{"step", step}, {"epoch", epoch}, {"loss", batch_loss}}.dump() << "\n";
    }
    log_info("epoch " + std::to_string(epoch) + " mean loss " +
             std::to_string(epoch_loss / std::max<std::int64_t>(1, stream.batches_per_epoch())));
    const bool cadence_hit = cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0;
    if (cadence_hit && epoch + 1 < cfg.epochs) {
      char name[32];
      std::snprintf(name, sizeof name, "ckpt_epoch_%04d.bin", epoch + 1);
      checkpoint_at(epoch + 1, name);
      if (!cfg.val_dir.empty())
        result.val_reports.push_back(evaluate(model, cfg.val_dir, cfg.views, cfg.modalities));
    }
  }
  result.final_checkpoint = checkpoint_at(cfg.epochs, "ckpt_final.bin");
  if (!cfg.val_dir.empty())
    result.val_reports.push_back(evaluate(model, cfg.val_dir, cfg.views, cfg.modalities));
  (void)t0;
  return result;
}

LabelMap predict_map(const VpnModel& model, const Sample& s) {
  Tape tape;
  Tape::NoGrad pause(tape);
  Tensor logits =
      model.forward(tape, build_inputs(s, model.config().views, model.config().modalities));
  const int k = model.config().classes;
  const int h = logits.shape()[1];
  const int w = logits.shape()[2];
  LabelMap pred(h, w);
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (std::size_t i = 0; i < hw; ++i) {
    int best = 0;
    double best_v = logits[static_cast<int>(i)];
    for (int c = 1; c < k; ++c) {
      const double v = logits[static_cast<int>(c * hw + i)];
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    pred.v[i] = static_cast<ClassId>(best);
  }
  return pred;
}

MetricsReport evaluate(const VpnModel& model, const std::string& dataset_dir, int views,
                       const std::vector<std::string>& modalities) {
  if (model.config().views != views || model.config().modalities != modalities)
    throw ConfigError("checkpoint was trained for a different view/modality selection");
  const auto t0 = std::chrono::steady_clock::now();
  DatasetReader ds(dataset_dir);
  Confusion all(kNumClasses), vis(kNumClasses), occ(kNumClasses);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Sample s = ds.load(i);
    const LabelMap pred = predict_map(model, s);
    all.add(s.topdown_gt, pred, 0);
    vis.add(s.topdown_gt, pred, 0, &s.visibility, false);
    occ.add(s.topdown_gt, pred, 0, &s.visibility, true);
  }
  MetricsReport r;
  r.config_json = json{{"dataset", dataset_dir}, {"views", views}, {"modalities", modalities}}
                      .dump();
  r.pa = pixel_accuracy(all);
  r.miou = mean_iou(all);
  r.per_class_iou = per_class_iou(all);
  r.pa_visible = pixel_accuracy(vis);
  r.pa_occluded = pixel_accuracy(occ);
  r.miou_visible = mean_iou(vis);
  r.miou_occluded = mean_iou(occ);
  r.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

AblationResult run_ablation(const TrainConfig& cfg) {
  cfg.validate();
  AblationResult r;
  VpnModel with = make_model(cfg, true);
  VpnModel without = make_model(cfg, false);
  TrainConfig ca = cfg, cb = cfg;
  if (!cfg.out_dir.empty()) {
    ca.out_dir = cfg.out_dir + "/with_relation";
    cb.out_dir = cfg.out_dir + "/no_relation";
  }
  r.with_relation = train(with, ca);
  r.without_relation = train(without, cb);
  if (!cfg.val_dir.empty()) {
    r.report_with = evaluate(with, cfg.val_dir, cfg.views, cfg.modalities);
    r.report_without = evaluate(without, cfg.val_dir, cfg.views, cfg.modalities);
  }
  return r;
}

MetricsReport late_fusion_eval(const std::vector<const VpnModel*>& models,
                               const std::string& dataset_dir) {
  if (models.empty()) throw ConfigError("late fusion needs at least one model");
  const int k = models[0]->config().classes;
  for (const VpnModel* m : models)
    if (m->config().classes != k)
      throw ConfigError("late fusion requires a shared class count");

  const auto t0 = std::chrono::steady_clock::now();
  DatasetReader ds(dataset_dir);
  Confusion all(kNumClasses), vis(kNumClasses), occ(kNumClasses);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Sample s = ds.load(i);
    std::vector<double> avg;
    for (const VpnModel* m : models) {
      Tape tape;
      Tape::NoGrad pause(tape);
      Tensor p = softmax_channels(
          tape, m->forward(tape, build_inputs(s, m->config().views, m->config().modalities)));
      if (avg.empty()) avg.assign(static_cast<std::size_t>(p.size()), 0.0);
      if (static_cast<int>(avg.size()) != p.size())
        throw ConfigError("late fusion requires a shared output shape");
      for (int j = 0; j < p.size(); ++j) avg[static_cast<std::size_t>(j)] += p[j];
    }
    const std::size_t hw = avg.size() / static_cast<std::size_t>(k);
    LabelMap pred(s.topdown_gt.h, s.topdown_gt.w);
    for (std::size_t px = 0; px < hw; ++px) {
      int best = 0;
      double best_v = avg[px];
      for (int c = 1; c < k; ++c)
        if (avg[c * hw + px] > best_v) {
          best_v = avg[c * hw + px];
          best = c;
        }
      pred.v[px] = static_cast<ClassId>(best);
    }
    all.add(s.topdown_gt, pred, 0);
    vis.add(s.topdown_gt, pred, 0, &s.visibility, false);
    occ.add(s.topdown_gt, pred, 0, &s.visibility, true);
  }
  MetricsReport r;
  json names = json::array();
  for (const VpnModel* m : models) names.push_back(json::parse(model_meta_json(m->config())));
  r.config_json = json{{"dataset", dataset_dir}, {"late_fusion_of", names}}.dump();
  r.pa = pixel_accuracy(all);
  r.miou = mean_iou(all);
  r.per_class_iou = per_class_iou(all);
  r.pa_visible = pixel_accuracy(vis);
  r.pa_occluded = pixel_accuracy(occ);
  r.miou_visible = mean_iou(vis);
  r.miou_occluded = mean_iou(occ);
  r.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace bevbench
