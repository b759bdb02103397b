#include "bevbench/report.hpp"

#include <json.hpp>

#include "bevbench/baseline.hpp"
#include "bevbench/image_io.hpp"

namespace bevbench {

using nlohmann::json;

std::string metrics_report_to_json(const MetricsReport& r) {
  json j{{"config", json::parse(r.config_json)},
         {"pa", r.pa},
         {"miou", r.miou},
         {"per_class_iou", r.per_class_iou},
         {"pa_visible", r.pa_visible},
         {"pa_occluded", r.pa_occluded},
         {"miou_visible", r.miou_visible},
         {"miou_occluded", r.miou_occluded},
         {"wall_clock_s", r.wall_clock_s}};
  return j.dump(2);
}

MetricsReport metrics_report_from_json(const std::string& text) {
  MetricsReport r;
  try {
    const json j = json::parse(text);
    r.config_json = j.at("config").dump();
    r.pa = j.at("pa").get<double>();
    r.miou = j.at("miou").get<double>();
    r.per_class_iou = j.at("per_class_iou").get<std::vector<double>>();
    r.pa_visible = j.at("pa_visible").get<double>();
    r.pa_occluded = j.at("pa_occluded").get<double>();
    r.miou_visible = j.at("miou_visible").get<double>();
    r.miou_occluded = j.at("miou_occluded").get<double>();
    r.wall_clock_s = j.at("wall_clock_s").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad metrics report: ") + e.what(), 0);
  }
  return r;
}

void write_report_json(const std::string& path, const MetricsReport& r) {
  write_text_file(path, metrics_report_to_json(r) + "\n");
}

MetricsReport read_report_json(const std::string& path) {
  return metrics_report_from_json(read_text_file(path));
}

std::vector<std::uint8_t> colorize(const LabelMap& m) {
  std::vector<std::uint8_t> rgb(m.v.size() * 3);
  for (std::size_t i = 0; i < m.v.size(); ++i) {
    const ClassId c = m.v[i] < kNumClasses ? m.v[i] : 0;
    rgb[3 * i + 0] = kPalette[c][0];
    rgb[3 * i + 1] = kPalette[c][1];
    rgb[3 * i + 2] = kPalette[c][2];
  }
  return rgb;
}

void write_panel(const std::string& path, const Sample& s, const LabelMap& pred, int n_views) {
  const std::vector<int> subset = view_subset(static_cast<int>(s.views.size()), n_views);
  const int th = s.topdown_gt.h;
  const int tw = s.topdown_gt.w;
  for (int k : subset) {
    const FirstView& fv = s.views[static_cast<std::size_t>(k)];
    if (fv.sem.h != th || fv.sem.w != tw)
      throw ShapeError("panel tiles must share one size, view " + std::to_string(k) + " is " +
                       std::to_string(fv.sem.h) + "x" + std::to_string(fv.sem.w));
  }
  if (pred.h != th || pred.w != tw) throw ShapeError("panel prediction/ground-truth size mismatch");

  const int tiles = n_views + 2;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(th) * tw * tiles * 3);
  auto blit = [&](int tile, const std::vector<std::uint8_t>& rgb) {
    for (int r = 0; r < th; ++r)
      for (int c = 0; c < tw; ++c)
        for (int ch = 0; ch < 3; ++ch)
          out[(static_cast<std::size_t>(r) * tiles * tw + tile * tw + c) * 3 + ch] =
              rgb[(static_cast<std::size_t>(r) * tw + c) * 3 + ch];
  };
  for (int t = 0; t < n_views; ++t)
    blit(t, colorize(s.views[static_cast<std::size_t>(subset[static_cast<std::size_t>(t)])].sem));
  blit(n_views, colorize(pred));
  blit(n_views + 1, colorize(s.topdown_gt));
  write_ppm(path, th, tiles * tw, out.data());
}

void write_legend(const std::string& path) {
  const int sw = 16;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(sw) * sw * kNumClasses * 3);
  for (int c = 0; c < kNumClasses; ++c)
    for (int r = 0; r < sw; ++r)
      for (int x = 0; x < sw; ++x)
        for (int ch = 0; ch < 3; ++ch)
          out[(static_cast<std::size_t>(r) * kNumClasses * sw + c * sw + x) * 3 + ch] =
              kPalette[c][ch];
  write_ppm(path, sw, kNumClasses * sw, out.data());
}

}  // namespace bevbench
