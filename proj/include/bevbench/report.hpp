#pragma once

#include <string>
#include <vector>

#include "bevbench/dataset.hpp"
#include "bevbench/train.hpp"

namespace bevbench {

// Schema: {config, pa, miou, per_class_iou, pa_visible, pa_occluded,
// miou_visible, miou_occluded, wall_clock_s}. Absent classes carry IoU -1.
std::string metrics_report_to_json(const MetricsReport& r);
MetricsReport metrics_report_from_json(const std::string& text);
void write_report_json(const std::string& path, const MetricsReport& r);
MetricsReport read_report_json(const std::string& path);

// Class map colored with the fixed class palette (no per-scene jitter),
// interleaved rgb.
std::vector<std::uint8_t> colorize(const LabelMap& m);

// Single row of n_views + 2 equally sized tiles: the selected semantic view
// inputs, the prediction, the ground truth.
void write_panel(const std::string& path, const Sample& s, const LabelMap& pred, int n_views);

// One 16x16 swatch per class in class order, byte-exact palette colors.
void write_legend(const std::string& path);

}  // namespace bevbench
