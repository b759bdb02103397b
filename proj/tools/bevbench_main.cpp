#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "bevbench/adapt.hpp"
#include "bevbench/baseline.hpp"
#include "bevbench/image_io.hpp"
#include "bevbench/log.hpp"
#include "bevbench/report.hpp"
#include "bevbench/run_config.hpp"

namespace fs = std::filesystem;
using namespace bevbench;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::size_t end = comma == std::string::npos ? csv.size() : comma;
    if (end > start) out.push_back(csv.substr(start, end - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("--modalities needs at least one name");
  return out;
}

void echo_config(const RunConfig& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  write_text_file(out_dir + "/effective_config.json", run_config_to_json(cfg));
}

void write_eval_outputs(const std::string& out_dir, const VpnModel& model,
                        const std::string& dataset_dir, const MetricsReport& report,
                        int panels) {
  write_report_json(out_dir + "/report.json", report);
  write_legend(out_dir + "/legend.ppm");
  DatasetReader ds(dataset_dir);
  const int n = std::min<int>(panels, static_cast<int>(ds.size()));
  for (int i = 0; i < n; ++i) {
    const Sample s = ds.load(i);
    char name[32];
    std::snprintf(name, sizeof name, "panel_%03d.ppm", i);
    write_panel(out_dir + "/" + name, s, predict_map(model, s), model.config().views);
  }
}

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int views = 0;
  std::string modalities;
  double lambda_adv = -1.0;
  int workers = 0;
  int samples = 0;
  bool seed_set = false, views_set = false, lambda_set = false;
};

RunConfig load_config(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) cfg = load_run_config(f.config_path);
  return cfg;
}

int cmd_gen_data(const CommonFlags& f) {
  RunConfig cfg = load_config(f);
  if (f.seed_set) cfg.dataset.seed = f.seed;
  if (f.samples > 0) cfg.dataset.n_samples = f.samples;
  if (f.workers > 0) cfg.dataset.workers = f.workers;
  echo_config(cfg, f.out_dir);
  const DatasetManifest m = generate_dataset(cfg.dataset, f.out_dir);
  log_info("wrote " + std::to_string(m.samples.size()) + " samples to " + f.out_dir);
  std::cout << f.out_dir << "\n";
  return 0;
}

int cmd_train(const CommonFlags& f) {
  RunConfig cfg = load_config(f);
  if (f.seed_set) cfg.train.seed = f.seed;
  if (f.views_set) cfg.train.views = f.views;
  if (!f.modalities.empty()) cfg.train.modalities = split_csv(f.modalities);
  cfg.train.out_dir = f.out_dir;
  echo_config(cfg, f.out_dir);
  VpnModel model = make_model(cfg.train, cfg.model_view_relation, cfg.model_mid_c);
  const TrainResult r = train(model, cfg.train);
  if (!r.val_reports.empty()) {
    write_eval_outputs(f.out_dir, model, cfg.train.val_dir, r.val_reports.back(), 1);
    std::cout << "val miou " << r.val_reports.back().miou << "\n";
  }
  std::cout << r.final_checkpoint << "\n";
  return 0;
}

int cmd_ablate(const CommonFlags& f) {
  RunConfig cfg = load_config(f);
  if (f.seed_set) cfg.train.seed = f.seed;
  if (f.views_set) cfg.train.views = f.views;
  if (!f.modalities.empty()) cfg.train.modalities = split_csv(f.modalities);
  cfg.train.out_dir = f.out_dir;
  echo_config(cfg, f.out_dir);
  const AblationResult r = run_ablation(cfg.train);
  json summary{{"miou_with_relation", r.report_with.miou},
               {"miou_without_relation", r.report_without.miou},
               {"delta_miou", r.report_with.miou - r.report_without.miou},
               {"pa_with_relation", r.report_with.pa},
               {"pa_without_relation", r.report_without.pa}};
  write_text_file(f.out_dir + "/ablation.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_baseline(const CommonFlags& f) {
  RunConfig cfg = load_config(f);
  int views = cfg.eval.views;
  if (f.views_set) views = f.views;
  if (cfg.eval.dataset_dir.empty()) throw ConfigError("eval.dataset_dir is required");
  echo_config(cfg, f.out_dir);

  DatasetReader ds(cfg.eval.dataset_dir);
  const double max_h = ds.manifest.config.scene.wall_height;
  Confusion all(kNumClasses), vis(kNumClasses), occ(kNumClasses);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Sample s = ds.load(i);
    const TopdownSpec td{s.agent.x, s.agent.y, ds.manifest.config.grid_s,
                         ds.manifest.config.grid_g};
    const LabelMap pred = baseline_predict(s, td, max_h, views);
    char name[40];
    std::snprintf(name, sizeof name, "baseline_pred_%05lld.pgm",
                  static_cast<long long>(s.id));
    write_label_map(f.out_dir + "/" + name, pred);
    if (i == 0) write_panel(f.out_dir + "/panel_000.ppm", s, pred, views);
    all.add(s.topdown_gt, pred, kUnknown);
    vis.add(s.topdown_gt, pred, kUnknown, &s.visibility, false);
    occ.add(s.topdown_gt, pred, kUnknown, &s.visibility, true);
  }
  MetricsReport r;
  r.config_json = json{{"dataset", cfg.eval.dataset_dir}, {"views", views},
                       {"predictor", "geometric_baseline"}}
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
  write_report_json(f.out_dir + "/report.json", r);
  write_legend(f.out_dir + "/legend.ppm");
  std::cout << "baseline pa " << r.pa << " miou " << r.miou << "\n";
  return 0;
}

int cmd_eval(const CommonFlags& f) {
  RunConfig cfg = load_config(f);
  if (f.views_set) cfg.eval.views = f.views;
  if (!f.modalities.empty()) cfg.eval.modalities = split_csv(f.modalities);
  if (cfg.eval.checkpoint.empty()) throw ConfigError("eval.checkpoint is required");
  if (cfg.eval.dataset_dir.empty()) throw ConfigError("eval.dataset_dir is required");
  echo_config(cfg, f.out_dir);
  VpnModel model = load_model(cfg.eval.checkpoint);
  const MetricsReport r = evaluate(model, cfg.eval.dataset_dir, cfg.eval.views,
                                   cfg.eval.modalities);
  write_eval_outputs(f.out_dir, model, cfg.eval.dataset_dir, r, 1);
  std::cout << "pa " << r.pa << " miou " << r.miou << "\n";
  return 0;
}

int cmd_adapt(const CommonFlags& f) {
  RunConfig cfg = load_config(f);
  if (f.seed_set) cfg.adapt.seed = f.seed;
  if (f.views_set) cfg.adapt.views = f.views;
  if (f.lambda_set) cfg.adapt.lambda_adv = f.lambda_adv;
  if (!f.modalities.empty()) cfg.adapt.modalities = split_csv(f.modalities);
  cfg.adapt.out_dir = f.out_dir;
  echo_config(cfg, f.out_dir);
  VpnModel model = load_model(cfg.adapt.checkpoint);
  const AdaptResult r = adapt_train(model, cfg.adapt);
  write_report_json(f.out_dir + "/report.json", r.adapted);
  json summary{{"source_binary_pa", r.source_binary_pa},
               {"adapted_binary_pa", r.adapted_binary_pa},
               {"delta_binary_pa", r.adapted_binary_pa - r.source_binary_pa},
               {"source_miou", r.source_only.miou},
               {"adapted_miou", r.adapted.miou},
               {"steps", static_cast<std::int64_t>(r.steps.size())}};
  write_text_file(f.out_dir + "/adapt_summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_report(const CommonFlags& f) {
  RunConfig cfg = load_config(f);
  if (f.views_set) cfg.eval.views = f.views;
  if (!f.modalities.empty()) cfg.eval.modalities = split_csv(f.modalities);
  if (cfg.eval.checkpoint.empty()) throw ConfigError("eval.checkpoint is required");
  if (cfg.eval.dataset_dir.empty()) throw ConfigError("eval.dataset_dir is required");
  echo_config(cfg, f.out_dir);
  VpnModel model = load_model(cfg.eval.checkpoint);
  const MetricsReport r = evaluate(model, cfg.eval.dataset_dir, cfg.eval.views,
                                   cfg.eval.modalities);
  write_eval_outputs(f.out_dir, model, cfg.eval.dataset_dir, r, 4);
  std::cout << metrics_report_to_json(r) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-view top-down semantic segmentation workbench"};
  app.require_subcommand(1);

  CommonFlags f;
  auto add_common = [&](CLI::App* sub, bool with_out_required) {
    sub->add_option("--config", f.config_path, "JSON run configuration file");
    auto* out = sub->add_option("--out", f.out_dir, "output directory for this run");
    if (with_out_required) out->required();
    sub->add_option("--seed", f.seed, "seed override")->each([&](const std::string&) {
      f.seed_set = true;
    });
    sub->add_option("--views", f.views, "number of views: 1, 2, 4 or 8")
        ->each([&](const std::string&) { f.views_set = true; });
    sub->add_option("--modalities", f.modalities,
                    "comma-separated subset of semantic,depth,rgb");
  };

  auto* gen = app.add_subcommand("gen-data", "generate a dataset split");
  add_common(gen, true);
  gen->add_option("--samples", f.samples, "sample count override");
  gen->add_option("--workers", f.workers, "parallel sample writers");

  auto* tr = app.add_subcommand("train", "train the cross-view segmenter");
  add_common(tr, true);

  auto* ab = app.add_subcommand("ablate", "train with and without the view relation stage");
  add_common(ab, true);

  auto* ba = app.add_subcommand("baseline", "run the geometric back-projection baseline");
  add_common(ba, true);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common(ev, true);

  auto* ad = app.add_subcommand("adapt", "adversarial adaptation to a target domain");
  add_common(ad, true);
  ad->add_option("--lambda-adv", f.lambda_adv, "adversarial loss weight override")
      ->each([&](const std::string&) { f.lambda_set = true; });

  auto* re = app.add_subcommand("report", "metrics and qualitative panels for a checkpoint");
  add_common(re, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(f);
    if (tr->parsed()) return cmd_train(f);
    if (ab->parsed()) return cmd_ablate(f);
    if (ba->parsed()) return cmd_baseline(f);
    if (ev->parsed()) return cmd_eval(f);
    if (ad->parsed()) return cmd_adapt(f);
    if (re->parsed()) return cmd_report(f);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
