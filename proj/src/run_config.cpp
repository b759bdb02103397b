#include "bevbench/run_config.hpp"

#include <json.hpp>

#include <initializer_list>

#include "bevbench/image_io.hpp"

namespace bevbench {
using nlohmann::json;

namespace {

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
}

void reject_unknown(const json& j, const std::string& where,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError("unknown key \"" + key + "\" in " + where);
  }
}

template <typename T>
void get_to(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError("bad value for " + where + "." + key + ": " + e.what());
  }
}

void parse_scene(const json& j, SceneParams& s) {
  expect_object(j, "dataset.scene");
  reject_unknown(j, "dataset.scene",
                 {"room_min", "room_max", "wall_height", "min_boxes", "max_boxes",
                  "wall_clearance", "agent_clearance", "lattice"});
  get_to(j, "room_min", s.room_min, "dataset.scene");
  get_to(j, "room_max", s.room_max, "dataset.scene");
  get_to(j, "wall_height", s.wall_height, "dataset.scene");
  get_to(j, "min_boxes", s.min_boxes, "dataset.scene");
  get_to(j, "max_boxes", s.max_boxes, "dataset.scene");
  get_to(j, "wall_clearance", s.wall_clearance, "dataset.scene");
  get_to(j, "agent_clearance", s.agent_clearance, "dataset.scene");
  get_to(j, "lattice", s.lattice, "dataset.scene");
}

void parse_corruption(const json& j, CorruptionSpec& c) {
  expect_object(j, "dataset.corruption");
  reject_unknown(j, "dataset.corruption", {"flip_p", "erode_r"});
  get_to(j, "flip_p", c.flip_p, "dataset.corruption");
  get_to(j, "erode_r", c.erode_r, "dataset.corruption");
}

void parse_dataset(const json& j, GenConfig& d) {
  expect_object(j, "dataset");
  reject_unknown(j, "dataset",
                 {"split", "n_samples", "seed", "n_views", "image_w", "image_h", "hfov_deg",
                  "grid_g", "grid_s", "camera_height", "scene", "corrupt", "corruption",
                  "id_base", "workers"});
  get_to(j, "split", d.split, "dataset");
  get_to(j, "n_samples", d.n_samples, "dataset");
  get_to(j, "seed", d.seed, "dataset");
  get_to(j, "n_views", d.n_views, "dataset");
  get_to(j, "image_w", d.image_w, "dataset");
  get_to(j, "image_h", d.image_h, "dataset");
  get_to(j, "hfov_deg", d.hfov_deg, "dataset");
  get_to(j, "grid_g", d.grid_g, "dataset");
  get_to(j, "grid_s", d.grid_s, "dataset");
  get_to(j, "camera_height", d.camera_height, "dataset");
  if (j.contains("scene")) parse_scene(j.at("scene"), d.scene);
  get_to(j, "corrupt", d.corrupt, "dataset");
  if (j.contains("corruption")) parse_corruption(j.at("corruption"), d.corruption);
  get_to(j, "id_base", d.id_base, "dataset");
  get_to(j, "workers", d.workers, "dataset");
}

void parse_train(const json& j, TrainConfig& t) {
  expect_object(j, "train");
  reject_unknown(j, "train",
                 {"optimizer", "lr", "batch_size", "epochs", "seed", "dataset_dir", "val_dir",
                  "views", "modalities", "checkpoint_every", "out_dir"});
  get_to(j, "optimizer", t.optimizer, "train");
  get_to(j, "lr", t.lr, "train");
  get_to(j, "batch_size", t.batch_size, "train");
  get_to(j, "epochs", t.epochs, "train");
  get_to(j, "seed", t.seed, "train");
  get_to(j, "dataset_dir", t.dataset_dir, "train");
  get_to(j, "val_dir", t.val_dir, "train");
  get_to(j, "views", t.views, "train");
  get_to(j, "modalities", t.modalities, "train");
  get_to(j, "checkpoint_every", t.checkpoint_every, "train");
  get_to(j, "out_dir", t.out_dir, "train");
}

void parse_adapt(const json& j, AdaptConfig& a) {
  expect_object(j, "adapt");
  reject_unknown(j, "adapt",
                 {"checkpoint", "source_dir", "target_dir", "out_dir", "lambda_adv", "g_lr",
                  "d_lr", "steps", "batch_size", "seed", "adv_on_presoftmax", "eval_every",
                  "views", "modalities"});
  get_to(j, "checkpoint", a.checkpoint, "adapt");
  get_to(j, "source_dir", a.source_dir, "adapt");
  get_to(j, "target_dir", a.target_dir, "adapt");
  get_to(j, "out_dir", a.out_dir, "adapt");
  get_to(j, "lambda_adv", a.lambda_adv, "adapt");
  get_to(j, "g_lr", a.g_lr, "adapt");
  get_to(j, "d_lr", a.d_lr, "adapt");
  get_to(j, "steps", a.steps, "adapt");
  get_to(j, "batch_size", a.batch_size, "adapt");
  get_to(j, "seed", a.seed, "adapt");
  get_to(j, "adv_on_presoftmax", a.adv_on_presoftmax, "adapt");
  get_to(j, "eval_every", a.eval_every, "adapt");
  get_to(j, "views", a.views, "adapt");
  get_to(j, "modalities", a.modalities, "adapt");
}

void parse_eval(const json& j, EvalConfig& e) {
  expect_object(j, "eval");
  reject_unknown(j, "eval", {"dataset_dir", "checkpoint", "views", "modalities"});
  get_to(j, "dataset_dir", e.dataset_dir, "eval");
  get_to(j, "checkpoint", e.checkpoint, "eval");
  get_to(j, "views", e.views, "eval");
  get_to(j, "modalities", e.modalities, "eval");
}

void parse_model(const json& j, RunConfig& cfg) {
  expect_object(j, "model");
  reject_unknown(j, "model", {"mid_c", "view_relation"});
  get_to(j, "mid_c", cfg.model_mid_c, "model");
  get_to(j, "view_relation", cfg.model_view_relation, "model");
}

}  // namespace

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  expect_object(j, "config");
  reject_unknown(j, "config", {"dataset", "model", "train", "adapt", "eval"});
  RunConfig cfg;
  if (j.contains("dataset")) parse_dataset(j.at("dataset"), cfg.dataset);
  if (j.contains("model")) parse_model(j.at("model"), cfg);
  if (j.contains("train")) parse_train(j.at("train"), cfg.train);
  if (j.contains("adapt")) parse_adapt(j.at("adapt"), cfg.adapt);
  if (j.contains("eval")) parse_eval(j.at("eval"), cfg.eval);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return run_config_from_json(read_text_file(path));
}

std::string run_config_to_json(const RunConfig& cfg) {
  const GenConfig& d = cfg.dataset;
  const TrainConfig& t = cfg.train;
  const AdaptConfig& a = cfg.adapt;
  const EvalConfig& e = cfg.eval;
  json j{
      {"dataset",
       {{"split", d.split},
        {"n_samples", d.n_samples},
        {"seed", d.seed},
        {"n_views", d.n_views},
        {"image_w", d.image_w},
        {"image_h", d.image_h},
        {"hfov_deg", d.hfov_deg},
        {"grid_g", d.grid_g},
        {"grid_s", d.grid_s},
        {"camera_height", d.camera_height},
        {"scene",
         {{"room_min", d.scene.room_min},
          {"room_max", d.scene.room_max},
          {"wall_height", d.scene.wall_height},
          {"min_boxes", d.scene.min_boxes},
          {"max_boxes", d.scene.max_boxes},
          {"wall_clearance", d.scene.wall_clearance},
          {"agent_clearance", d.scene.agent_clearance},
          {"lattice", d.scene.lattice}}},
        {"corrupt", d.corrupt},
        {"corruption", {{"flip_p", d.corruption.flip_p}, {"erode_r", d.corruption.erode_r}}},
        {"id_base", d.id_base},
        {"workers", d.workers}}},
      {"model", {{"mid_c", cfg.model_mid_c}, {"view_relation", cfg.model_view_relation}}},
      {"train",
       {{"optimizer", t.optimizer},
        {"lr", t.lr},
        {"batch_size", t.batch_size},
        {"epochs", t.epochs},
        {"seed", t.seed},
        {"dataset_dir", t.dataset_dir},
        {"val_dir", t.val_dir},
        {"views", t.views},
        {"modalities", t.modalities},
        {"checkpoint_every", t.checkpoint_every},
        {"out_dir", t.out_dir}}},
      {"adapt",
       {{"checkpoint", a.checkpoint},
        {"source_dir", a.source_dir},
        {"target_dir", a.target_dir},
        {"out_dir", a.out_dir},
        {"lambda_adv", a.lambda_adv},
        {"g_lr", a.g_lr},
        {"d_lr", a.d_lr},
        {"steps", a.steps},
        {"batch_size", a.batch_size},
        {"seed", a.seed},
        {"adv_on_presoftmax", a.adv_on_presoftmax},
        {"eval_every", a.eval_every},
        {"views", a.views},
        {"modalities", a.modalities}}},
      {"eval",
       {{"dataset_dir", e.dataset_dir},
        {"checkpoint", e.checkpoint},
        {"views", e.views},
        {"modalities", e.modalities}}}};
  return j.dump(2) + "\n";
}

}  // namespace bevbench
