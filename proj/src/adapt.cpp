#include "bevbench/adapt.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bevbench/checkpoint.hpp"
#include "bevbench/log.hpp"
#include "bevbench/rng.hpp"

namespace bevbench {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kLeakySlope = 0.2;

Tensor gaussian_init(const Shape& shape, std::int64_t fan_in, double gain, Rng& rng) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) n *= d;
  std::vector<double> v(static_cast<std::size_t>(n));
  const double std_dev = std::sqrt(gain / static_cast<double>(fan_in));
  for (double& x : v) x = std_dev * rng.normal();
  return Tensor::from_data(shape, std::move(v), true);
}

Tensor detach_copy(const Tensor& t) {
  return Tensor::from_data(t.shape(), {t.values().begin(), t.values().end()}, false);
}

}  // namespace

Discriminator::Discriminator(int in_channels, std::uint64_t seed) : in_channels_(in_channels) {
  if (in_channels < 1) throw ConfigError("discriminator needs at least one input channel");
  const int widths[6] = {in_channels, 64, 128, 256, 512, 1};
  for (int l = 1; l <= 5; ++l) {
    const std::string wn = "disc.w" + std::to_string(l);
    const std::string bn = "disc.b" + std::to_string(l);
    Rng rng(hash_combine(hash_combine(seed, "init"), wn));
    const std::int64_t fan_in = static_cast<std::int64_t>(widths[l - 1]) * 4 * 4;
    const double gain = l < 5 ? 2.0 : 1.0;  // final layer is a linear logit map
    params_.add(wn, gaussian_init({widths[l], widths[l - 1], 4, 4}, fan_in, gain, rng));
    params_.add(bn, Tensor::zeros({widths[l]}, true));
  }
}

Tensor Discriminator::forward(Tape& tape, const Tensor& x) const {
  if (x.shape().size() != 3 || x.shape()[0] != in_channels_)
    throw ShapeError("discriminator expects (" + std::to_string(in_channels_) +
                     ", H, W) input");
  Tensor h = x;
  for (int l = 1; l <= 5; ++l) {
    h = conv2d(tape, h, params_.at("disc.w" + std::to_string(l)),
               params_.at("disc.b" + std::to_string(l)), 2, 1);
    if (l < 5) h = leaky_relu(tape, h, kLeakySlope);
  }
  return h;
}

void AdaptConfig::validate() const {
  if (checkpoint.empty()) throw ConfigError("adapt needs a pretrained segmenter checkpoint");
  if (source_dir.empty()) throw ConfigError("adapt needs a labeled source dataset");
  if (target_dir.empty()) throw ConfigError("adapt needs a target dataset");
  if (!std::isfinite(lambda_adv) || lambda_adv < 0)
    throw ConfigError("lambda_adv must be finite and non-negative");
  if (!std::isfinite(g_lr) || g_lr < 0 || !std::isfinite(d_lr) || d_lr < 0)
    throw ConfigError("learning rates must be finite and non-negative");
  if (steps < 0) throw ConfigError("steps must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (eval_every < 0) throw ConfigError("eval_every must be non-negative");
  if (views != 1 && views != 2 && views != 4 && views != 8)
    throw ConfigError("views must be one of 1, 2, 4, 8");
  if (modalities.empty()) throw ConfigError("at least one modality is required");
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    modality_channels(modalities[i]);
    for (std::size_t j = i + 1; j < modalities.size(); ++j)
      if (modalities[i] == modalities[j])
        throw ConfigError("duplicate modality " + modalities[i]);
  }
}

double binary_floor_pa(const VpnModel& model, const std::string& dataset_dir) {
  DatasetReader ds(dataset_dir);
  Confusion conf(3);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Sample s = ds.load(i);
    const LabelMap pred = predict_map(model, s);
    conf.add(binarize(s.topdown_gt, kFloor), binarize(pred, kFloor), 0);
  }
  return pixel_accuracy(conf);
}

MetricsReport evaluate_transfer(const VpnModel& model, const std::string& dataset_dir,
                                double* binary_pa) {
  MetricsReport r =
      evaluate(model, dataset_dir, model.config().views, model.config().modalities);
  if (binary_pa) *binary_pa = binary_floor_pa(model, dataset_dir);
  return r;
}

AdaptResult adapt_train(VpnModel& model, const AdaptConfig& cfg) {
  cfg.validate();
  const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
  restore_params(model.params(), ckpt);
  if (model.config().views != cfg.views || model.config().modalities != cfg.modalities)
    throw ConfigError("model was built for a different view/modality selection");

  DatasetReader source(cfg.source_dir);
  if (source.manifest.gt_eval_only)
    throw ConfigError("source split " + cfg.source_dir + " withholds training labels");
  DatasetReader target(cfg.target_dir);

  if (!cfg.out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create " + cfg.out_dir + ": " + ec.message());
  }
  std::ofstream log_file;
  if (!cfg.out_dir.empty()) log_file.open(cfg.out_dir + "/adapt_log.jsonl", std::ios::trunc);

  Discriminator disc(model.config().classes, hash_combine(cfg.seed, "disc"));
  BatchStream s_stream(source.size(), hash_combine(cfg.seed, "shuffle"), cfg.batch_size);
  BatchStream t_stream(target.size(), hash_combine(cfg.seed, "target-shuffle"),
                       cfg.batch_size);

  AdaptResult result;
  result.source_only = evaluate_transfer(model, cfg.target_dir, &result.source_binary_pa);
  log_info("source-only binary floor pa " + std::to_string(result.source_binary_pa));

  auto class_maps = [&](Tape& tape, const Sample& s) {
    Tensor logits = model.forward(tape, build_inputs(s, cfg.views, cfg.modalities));
    return cfg.adv_on_presoftmax ? logits : softmax_channels(tape, logits);
  };

  for (int step = 0; step < cfg.steps; ++step) {
    const auto s_idx =
        s_stream.batch(step / s_stream.batches_per_epoch(), step % s_stream.batches_per_epoch());
    const auto t_idx =
        t_stream.batch(step / t_stream.batches_per_epoch(), step % t_stream.batches_per_epoch());
    const double sn = static_cast<double>(s_idx.size());
    const double tn = static_cast<double>(t_idx.size());

    std::vector<Tensor> maps_s, maps_t;  // detached inputs for the discriminator phase
    AdaptStepLog log{step, 0.0, 0.0, 0.0};

    try {
      // supervised segmentation step on the labeled source batch
      model.params().zero_grad();
      for (std::size_t i : s_idx) {
        const Sample s = source.load(i);
        Tape tape;
        Tensor logits = model.forward(tape, build_inputs(s, cfg.views, cfg.modalities));
        Tensor loss = softmax_cross_entropy(tape, logits, s.topdown_gt, kUnknown);
        tape.backward(mul_scalar(tape, loss, 1.0 / sn));
        log.l_seg += loss.item() / sn;
        Tape::NoGrad pause(tape);
        maps_s.push_back(detach_copy(cfg.adv_on_presoftmax ? logits
                                                           : softmax_channels(tape, logits)));
      }

      // fooling step on target: gradients reach only the segmenter because the
      // discriminator is stepped separately on detached maps below
      if (cfg.lambda_adv != 0.0) {
        for (std::size_t i : t_idx) {
          const Sample s = target.load(i);
          Tape tape;
          Tensor maps = class_maps(tape, s);
          Tensor fool = bce_with_logits(tape, disc.forward(tape, maps), 1.0);
          tape.backward(mul_scalar(tape, fool, cfg.lambda_adv / tn));
          log.l_adv += fool.item() / tn;
          Tape::NoGrad pause(tape);
          maps_t.push_back(detach_copy(maps));
        }
      } else {
        for (std::size_t i : t_idx) {
          const Sample s = target.load(i);
          Tape tape;
          Tape::NoGrad pause(tape);
          maps_t.push_back(detach_copy(class_maps(tape, s)));
        }
      }
      if (!std::isfinite(log.l_seg) || !std::isfinite(log.l_adv))
        throw TrainingError("segmenter loss is not finite", step);
      adam_step(model.params(), cfg.g_lr);

      // discriminator step: source maps are real, target maps are fake
      disc.params().zero_grad();
      for (const Tensor& m : maps_s) {
        Tape tape;
        Tensor d = bce_with_logits(tape, disc.forward(tape, m), 1.0);
        tape.backward(mul_scalar(tape, d, 1.0 / sn));
        log.l_d += d.item() / sn;
      }
      for (const Tensor& m : maps_t) {
        Tape tape;
        Tensor d = bce_with_logits(tape, disc.forward(tape, m), 0.0);
        tape.backward(mul_scalar(tape, d, 1.0 / tn));
        log.l_d += d.item() / tn;
      }
      if (!std::isfinite(log.l_d)) throw TrainingError("discriminator loss is not finite", step);
      adam_step(disc.params(), cfg.d_lr);
    } catch (const DataError& e) {
      throw TrainingError(std::string("diverged: ") + e.what(), step);
    }

    result.steps.push_back(log);
    json line{{"step", log.step}, {"l_seg", log.l_seg}, {"l_adv", log.l_adv}, {"l_d", log.l_d}};
    if (cfg.eval_every > 0 && (step + 1) % cfg.eval_every == 0 && step + 1 < cfg.steps) {
      const double pa = binary_floor_pa(model, cfg.target_dir);
      result.pa_target_binary.push_back(pa);
      line["pa_target_binary"] = pa;
      log_info("step " + std::to_string(step) + " target binary pa " + std::to_string(pa));
    }
    if (log_file.is_open()) log_file << line.dump() << "\n";
  }

  result.adapted = evaluate_transfer(model, cfg.target_dir, &result.adapted_binary_pa);
  result.pa_target_binary.push_back(result.adapted_binary_pa);
  if (log_file.is_open())
    log_file << json{{"step", cfg.steps},
                     {"pa_target_binary", result.adapted_binary_pa}}.dump()
             << "\n";
  log_info("adapted binary floor pa " + std::to_string(result.adapted_binary_pa));

  if (!cfg.out_dir.empty()) {
    const std::string path = cfg.out_dir + "/ckpt_adapted.bin";
    json meta = json::parse(model_meta_json(model.config()));
    meta["adapt"] = {{"lambda_adv", cfg.lambda_adv},
                     {"g_lr", cfg.g_lr},
                     {"d_lr", cfg.d_lr},
                     {"steps", cfg.steps},
                     {"batch_size", cfg.batch_size},
                     {"seed", cfg.seed},
                     {"adv_on_presoftmax", cfg.adv_on_presoftmax},
                     {"views", cfg.views},
                     {"modalities", cfg.modalities}};
    save_checkpoint(path, model.params(), meta.dump());
    save_checkpoint(cfg.out_dir + "/ckpt_disc.bin", disc.params(),
                    json{{"discriminator", {{"in_channels", disc.in_channels()}}}}.dump());
    result.final_checkpoint = path;
  }
  return result;
}

}  // namespace bevbench
