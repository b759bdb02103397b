#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "bevbench/adapt.hpp"
#include "bevbench/baseline.hpp"
#include "bevbench/checkpoint.hpp"
#include "bevbench/metrics.hpp"
#include "bevbench/ops.hpp"
#include "bevbench/train.hpp"

namespace py = pybind11;
using namespace bevbench;

namespace {

LabelMap labelmap_from_array(const py::array_t<std::uint8_t>& a) {
  if (a.ndim() != 2) throw py::value_error("label map must be 2-d");
  LabelMap m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  auto r = a.unchecked<2>();
  for (int i = 0; i < m.h; ++i)
    for (int j = 0; j < m.w; ++j) m.at(i, j) = r(i, j);
  return m;
}

py::array_t<std::uint8_t> labelmap_to_array(const LabelMap& m) {
  py::array_t<std::uint8_t> a({m.h, m.w});
  std::memcpy(a.mutable_data(), m.v.data(), m.v.size());
  return a;
}

py::array_t<bool> boolmap_to_array(const BoolMap& m) {
  py::array_t<bool> a({m.h, m.w});
  auto w = a.mutable_unchecked<2>();
  for (int i = 0; i < m.h; ++i)
    for (int j = 0; j < m.w; ++j) w(i, j) = m.v[static_cast<std::size_t>(i) * m.w + j] != 0;
  return a;
}

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                         bool requires_grad) {
  Shape shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<std::size_t>(i)] = static_cast<int>(a.shape(i));
  std::vector<double> data(a.data(), a.data() + a.size());
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

py::array_t<double> span_to_array(const Shape& shape, std::span<const double> v) {
  std::vector<py::ssize_t> dims(shape.begin(), shape.end());
  py::array_t<double> a(dims);
  std::memcpy(a.mutable_data(), v.data(), v.size() * sizeof(double));
  return a;
}

py::dict report_to_dict(const MetricsReport& r) {
  py::dict d;
  d["pa"] = r.pa;
  d["miou"] = r.miou;
  d["per_class_iou"] = r.per_class_iou;
  d["pa_visible"] = r.pa_visible;
  d["pa_occluded"] = r.pa_occluded;
  d["miou_visible"] = r.miou_visible;
  d["miou_occluded"] = r.miou_occluded;
  d["wall_clock_s"] = r.wall_clock_s;
  return d;
}

Confusion confusion_of(const py::array_t<std::uint8_t>& gt, const py::array_t<std::uint8_t>& pred,
                       ClassId ignore, int classes) {
  Confusion c(classes);
  c.add(labelmap_from_array(gt), labelmap_from_array(pred), ignore);
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "cross-view top-down semantic segmentation workbench";

  m.attr("NUM_CLASSES") = kNumClasses;
  m.attr("UNKNOWN") = static_cast<int>(kUnknown);
  m.attr("FLOOR") = static_cast<int>(kFloor);
  m.attr("WALL") = static_cast<int>(kWall);
  {
    py::list palette;
    for (int c = 0; c < kNumClasses; ++c)
      palette.append(py::make_tuple(kPalette[c][0], kPalette[c][1], kPalette[c][2]));
    m.attr("PALETTE") = palette;
  }

  py::register_exception<Error>(m, "BevbenchError", PyExc_RuntimeError);

  // --- autograd core ------------------------------------------------------
  py::class_<Tensor>(m, "Tensor")
      .def(py::init([](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                       bool requires_grad) { return tensor_from_array(a, requires_grad); }),
           py::arg("data"), py::arg("requires_grad") = false)
      .def_property_readonly("shape", [](const Tensor& t) { return t.shape(); })
      .def_property_readonly("requires_grad", &Tensor::requires_grad)
      .def("numpy", [](const Tensor& t) { return span_to_array(t.shape(), t.values()); })
      .def("grad", [](const Tensor& t) { return span_to_array(t.shape(), t.grad()); })
      .def("item", &Tensor::item)
      .def("zero_grad", &Tensor::zero_grad);

  py::class_<Tape>(m, "Tape")
      .def(py::init<>())
      .def("backward", &Tape::backward, py::arg("loss"));

  m.def("matmul", &matmul, py::arg("tape"), py::arg("a"), py::arg("b"));
  m.def("add", &add, py::arg("tape"), py::arg("a"), py::arg("b"));
  m.def("sub", &sub, py::arg("tape"), py::arg("a"), py::arg("b"));
  m.def("mul", &mul, py::arg("tape"), py::arg("a"), py::arg("b"));
  m.def("mul_scalar", &mul_scalar, py::arg("tape"), py::arg("a"), py::arg("s"));
  m.def("sum", &sum, py::arg("tape"), py::arg("a"));
  m.def("relu", &relu, py::arg("tape"), py::arg("a"));
  m.def("leaky_relu", &leaky_relu, py::arg("tape"), py::arg("a"), py::arg("slope") = 0.2);
  m.def("softmax_channels", &softmax_channels, py::arg("tape"), py::arg("logits"));
  m.def("conv2d", &conv2d, py::arg("tape"), py::arg("x"), py::arg("w"), py::arg("bias"),
        py::arg("stride") = 1, py::arg("pad") = 0);
  m.def(
      "softmax_cross_entropy",
      [](Tape& tape, const Tensor& logits, const py::array_t<std::uint8_t>& gt, int ignore) {
        return softmax_cross_entropy(tape, logits, labelmap_from_array(gt),
                                     static_cast<ClassId>(ignore));
      },
      py::arg("tape"), py::arg("logits"), py::arg("gt"), py::arg("ignore") = 0);
  m.def("bce_with_logits", &bce_with_logits, py::arg("tape"), py::arg("logits"),
        py::arg("target"));

  // --- metrics --------------------------------------------------------------
  m.def(
      "confusion",
      [](const py::array_t<std::uint8_t>& gt, const py::array_t<std::uint8_t>& pred,
         int ignore, int classes) {
        const Confusion c = confusion_of(gt, pred, static_cast<ClassId>(ignore), classes);
        py::array_t<long long> a({classes, classes});
        std::memcpy(a.mutable_data(), c.m.data(), c.m.size() * sizeof(long long));
        return a;
      },
      py::arg("gt"), py::arg("pred"), py::arg("ignore") = 0, py::arg("classes") = kNumClasses);
  m.def(
      "pixel_accuracy",
      [](const py::array_t<std::uint8_t>& gt, const py::array_t<std::uint8_t>& pred,
         int ignore, int classes) {
        return pixel_accuracy(confusion_of(gt, pred, static_cast<ClassId>(ignore), classes));
      },
      py::arg("gt"), py::arg("pred"), py::arg("ignore") = 0, py::arg("classes") = kNumClasses);
  m.def(
      "per_class_iou",
      [](const py::array_t<std::uint8_t>& gt, const py::array_t<std::uint8_t>& pred,
         int ignore, int classes) {
        return per_class_iou(confusion_of(gt, pred, static_cast<ClassId>(ignore), classes),
                             static_cast<ClassId>(ignore));
      },
      py::arg("gt"), py::arg("pred"), py::arg("ignore") = 0, py::arg("classes") = kNumClasses);
  m.def(
      "mean_iou",
      [](const py::array_t<std::uint8_t>& gt, const py::array_t<std::uint8_t>& pred,
         int ignore, int classes) {
        return mean_iou(confusion_of(gt, pred, static_cast<ClassId>(ignore), classes),
                        static_cast<ClassId>(ignore));
      },
      py::arg("gt"), py::arg("pred"), py::arg("ignore") = 0, py::arg("classes") = kNumClasses);

  // --- scene synthesis -------------------------------------------------------
  py::class_<SceneParams>(m, "SceneParams")
      .def(py::init<>())
      .def_readwrite("room_min", &SceneParams::room_min)
      .def_readwrite("room_max", &SceneParams::room_max)
      .def_readwrite("wall_height", &SceneParams::wall_height)
      .def_readwrite("min_boxes", &SceneParams::min_boxes)
      .def_readwrite("max_boxes", &SceneParams::max_boxes)
      .def_readwrite("wall_clearance", &SceneParams::wall_clearance)
      .def_readwrite("agent_clearance", &SceneParams::agent_clearance)
      .def_readwrite("lattice", &SceneParams::lattice);

  py::class_<CorruptionSpec>(m, "CorruptionSpec")
      .def(py::init<>())
      .def_readwrite("flip_p", &CorruptionSpec::flip_p)
      .def_readwrite("erode_r", &CorruptionSpec::erode_r);

  py::class_<GenConfig>(m, "GenConfig")
      .def(py::init<>())
      .def_readwrite("split", &GenConfig::split)
      .def_readwrite("n_samples", &GenConfig::n_samples)
      .def_readwrite("seed", &GenConfig::seed)
      .def_readwrite("n_views", &GenConfig::n_views)
      .def_readwrite("image_w", &GenConfig::image_w)
      .def_readwrite("image_h", &GenConfig::image_h)
      .def_readwrite("hfov_deg", &GenConfig::hfov_deg)
      .def_readwrite("grid_g", &GenConfig::grid_g)
      .def_readwrite("grid_s", &GenConfig::grid_s)
      .def_readwrite("camera_height", &GenConfig::camera_height)
      .def_readwrite("scene", &GenConfig::scene)
      .def_readwrite("corrupt", &GenConfig::corrupt)
      .def_readwrite("corruption", &GenConfig::corruption)
      .def_readwrite("id_base", &GenConfig::id_base)
      .def_readwrite("workers", &GenConfig::workers);

  m.def(
      "generate_dataset",
      [](const GenConfig& cfg, const std::string& out_dir) {
        return generate_dataset(cfg, out_dir).samples.size();
      },
      py::arg("config"), py::arg("out_dir"), py::call_guard<py::gil_scoped_release>());

  m.def("dataset_size", [](const std::string& dir) { return DatasetReader(dir).size(); },
        py::arg("dataset_dir"));
  m.def(
      "load_sample",
      [](const std::string& dir, std::size_t index) {
        const DatasetReader ds(dir);
        const Sample s = ds.load(index);
        const GenConfig& gc = ds.manifest.config;
        py::dict d;
        d["id"] = s.id;
        d["agent"] = py::make_tuple(s.agent.x, s.agent.y, s.agent.z);
        d["topdown_gt"] = labelmap_to_array(s.topdown_gt);
        d["visibility"] = boolmap_to_array(s.visibility);
        py::list views;
        for (const FirstView& v : s.views) {
          py::dict vd;
          vd["sem"] = labelmap_to_array(v.sem);
          py::array_t<double> depth({gc.image_h, gc.image_w});
          std::memcpy(depth.mutable_data(), v.depth.data(), v.depth.size() * sizeof(double));
          vd["depth"] = depth;
          views.append(vd);
        }
        d["views"] = views;
        return d;
      },
      py::arg("dataset_dir"), py::arg("index"));

  m.def(
      "baseline_predict",
      [](const std::string& dir, std::size_t index, int views) {
        const DatasetReader ds(dir);
        const Sample s = ds.load(index);
        const GenConfig& gc = ds.manifest.config;
        const TopdownSpec td{s.agent.x, s.agent.y, gc.grid_s, gc.grid_g};
        return labelmap_to_array(baseline_predict(s, td, gc.scene.wall_height, views));
      },
      py::arg("dataset_dir"), py::arg("index"), py::arg("views") = 8);

  // --- training, evaluation, adaptation ------------------------------------
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("dataset_dir", &TrainConfig::dataset_dir)
      .def_readwrite("val_dir", &TrainConfig::val_dir)
      .def_readwrite("views", &TrainConfig::views)
      .def_readwrite("modalities", &TrainConfig::modalities)
      .def_readwrite("checkpoint_every", &TrainConfig::checkpoint_every)
      .def_readwrite("out_dir", &TrainConfig::out_dir);

  m.def(
      "train",
      [](const TrainConfig& cfg, bool view_relation, int mid_c) {
        VpnModel model = make_model(cfg, view_relation, mid_c);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(model, cfg);
        }
        py::dict d;
        d["loss_curve"] = r.loss_curve;
        d["final_checkpoint"] = r.final_checkpoint;
        py::list reports;
        for (const MetricsReport& rep : r.val_reports) reports.append(report_to_dict(rep));
        d["val_reports"] = reports;
        return d;
      },
      py::arg("config"), py::arg("view_relation") = true, py::arg("mid_c") = 32);

  m.def(
      "evaluate",
      [](const std::string& checkpoint, const std::string& dataset_dir) {
        VpnModel model = load_model(checkpoint);
        MetricsReport rep;
        {
          py::gil_scoped_release release;
          rep = evaluate(model, dataset_dir, model.config().views, model.config().modalities);
        }
        return report_to_dict(rep);
      },
      py::arg("checkpoint"), py::arg("dataset_dir"));

  m.def(
      "predict_topdown",
      [](const std::string& checkpoint, const std::string& dataset_dir, std::size_t index) {
        const VpnModel model = load_model(checkpoint);
        const Sample s = DatasetReader(dataset_dir).load(index);
        return labelmap_to_array(predict_map(model, s));
      },
      py::arg("checkpoint"), py::arg("dataset_dir"), py::arg("index"));

  py::class_<AdaptConfig>(m, "AdaptConfig")
      .def(py::init<>())
      .def_readwrite("checkpoint", &AdaptConfig::checkpoint)
      .def_readwrite("source_dir", &AdaptConfig::source_dir)
      .def_readwrite("target_dir", &AdaptConfig::target_dir)
      .def_readwrite("out_dir", &AdaptConfig::out_dir)
      .def_readwrite("lambda_adv", &AdaptConfig::lambda_adv)
      .def_readwrite("g_lr", &AdaptConfig::g_lr)
      .def_readwrite("d_lr", &AdaptConfig::d_lr)
      .def_readwrite("steps", &AdaptConfig::steps)
      .def_readwrite("batch_size", &AdaptConfig::batch_size)
      .def_readwrite("seed", &AdaptConfig::seed)
      .def_readwrite("adv_on_presoftmax", &AdaptConfig::adv_on_presoftmax)
      .def_readwrite("eval_every", &AdaptConfig::eval_every)
      .def_readwrite("views", &AdaptConfig::views)
      .def_readwrite("modalities", &AdaptConfig::modalities);

  m.def(
      "adapt",
      [](const AdaptConfig& cfg) {
        VpnModel model = load_model(cfg.checkpoint);
        AdaptResult r;
        {
          py::gil_scoped_release release;
          r = adapt_train(model, cfg);
        }
        py::dict d;
        d["source_binary_pa"] = r.source_binary_pa;
        d["adapted_binary_pa"] = r.adapted_binary_pa;
        d["pa_target_binary"] = r.pa_target_binary;
        d["final_checkpoint"] = r.final_checkpoint;
        d["source"] = report_to_dict(r.source_only);
        d["adapted"] = report_to_dict(r.adapted);
        return d;
      },
      py::arg("config"));
}
