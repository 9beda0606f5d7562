// Python bindings for the signflow core: config handling, pipeline stages,
// metrics, and the small numeric reference ops. Heavy lifting stays in C++;
// Python sees plain dicts, strings and numpy arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>
#include <vector>

#include "signflow/config.hpp"
#include "signflow/errors.hpp"
#include "signflow/metrics.hpp"
#include "signflow/model_zoo.hpp"
#include "signflow/pipeline.hpp"
#include "signflow/preprocess.hpp"
#include "signflow/report.hpp"
#include "signflow/synthetic.hpp"

namespace py = pybind11;
using namespace signflow;

namespace {

prep::ImageTensor array_to_tensor(const py::array_t<double, py::array::c_style>& arr) {
  const py::buffer_info info = arr.request();
  if (info.ndim != 2 && info.ndim != 3)
    throw py::value_error("expected a HxW or HxWxC array");
  const int h = static_cast<int>(info.shape[0]);
  const int w = static_cast<int>(info.shape[1]);
  const int c = info.ndim == 3 ? static_cast<int>(info.shape[2]) : 1;
  prep::ImageTensor t(h, w, c);
  const double* src = static_cast<const double*>(info.ptr);
  std::copy(src, src + t.data.size(), t.data.begin());
  return t;
}

py::array_t<double> tensor_to_array(const prep::ImageTensor& t) {
  py::array_t<double> arr({t.height, t.width, t.channels});
  std::copy(t.data.begin(), t.data.end(), arr.mutable_data());
  return arr;
}

py::dict bundle_to_dict(const metrics::MetricBundle& b) {
  py::dict d;
  d["precision"] = b.precision;
  d["recall"] = b.recall;
  d["f1"] = b.f1;
  d["accuracy"] = b.accuracy;
  d["aggregation"] = b.aggregation;
  py::list per_class;
  for (const metrics::ClassMetrics& c : b.per_class) {
    py::dict row;
    row["class"] = c.class_name;
    row["tp"] = c.tp;
    row["fp"] = c.fp;
    row["fn"] = c.fn;
    row["support"] = c.support;
    row["precision"] = c.precision;
    row["recall"] = c.recall;
    row["f1"] = c.f1;
    per_class.append(row);
  }
  d["per_class"] = per_class;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "signflow core bindings";

  py::register_exception<Error>(m, "SignflowError", PyExc_RuntimeError);

  py::class_<config::ExperimentConfig>(m, "ExperimentConfig")
      .def_property_readonly("hash", &config::config_hash)
      .def_property_readonly("output_dir",
                             [](const config::ExperimentConfig& c) { return c.output.dir; })
      .def_property_readonly("backbone",
                             [](const config::ExperimentConfig& c) { return c.model.backbone; })
      .def_property_readonly("k", [](const config::ExperimentConfig& c) { return c.split.k; })
      .def_property_readonly("seed",
                             [](const config::ExperimentConfig& c) { return c.split.seed; })
      .def("canonical_json", &config::to_canonical_json);

  m.def("parse_config", &config::parse_config, py::arg("json_text"));
  m.def("load_config", &config::load_config, py::arg("path"));

  m.def("generate_synthetic", &synth::generate_dataset, py::arg("root"),
        py::arg("num_classes"), py::arg("per_class"), py::arg("seed"),
        py::arg("image_size") = 64,
        "Write a folder-per-class separable blob dataset (PNG).");

  // Pipeline stages. Each validates upstream artifacts and skips itself when
  // already complete for this config hash.
  m.def("run", [](const config::ExperimentConfig& cfg) {
    pipeline::RunLock lock(pipeline::run_paths(cfg));
    pipeline::run(cfg);
  });
  m.def("prepare", [](const config::ExperimentConfig& cfg) {
    pipeline::RunLock lock(pipeline::run_paths(cfg));
    pipeline::stage_prepare(cfg);
  });
  m.def("balance", [](const config::ExperimentConfig& cfg) {
    pipeline::RunLock lock(pipeline::run_paths(cfg));
    pipeline::stage_balance(cfg);
  });
  m.def("split", [](const config::ExperimentConfig& cfg) {
    pipeline::RunLock lock(pipeline::run_paths(cfg));
    pipeline::stage_split(cfg);
  });
  m.def("train", [](const config::ExperimentConfig& cfg) {
    pipeline::RunLock lock(pipeline::run_paths(cfg));
    pipeline::stage_train(cfg);
  });
  m.def("evaluate", [](const config::ExperimentConfig& cfg) {
    pipeline::RunLock lock(pipeline::run_paths(cfg));
    pipeline::stage_evaluate(cfg);
  });
  m.def("explain", [](const config::ExperimentConfig& cfg) {
    pipeline::RunLock lock(pipeline::run_paths(cfg));
    pipeline::stage_explain(cfg);
  });
  m.def("report", [](const config::ExperimentConfig& cfg) {
    pipeline::RunLock lock(pipeline::run_paths(cfg));
    pipeline::stage_report(cfg);
  });
  m.def(
      "evaluate_fold",
      [](const config::ExperimentConfig& cfg, int fold, const std::string& phase) {
        pipeline::RunLock lock(pipeline::run_paths(cfg));
        return report::fold_reports_to_json(pipeline::evaluate_single(cfg, fold, phase));
      },
      py::arg("config"), py::arg("fold"), py::arg("phase") = "test",
      "Evaluate one trained fold; returns the report rows as JSON.");

  m.def(
      "classification_metrics",
      [](const std::vector<std::string>& y_true, const std::vector<std::string>& y_pred,
         const std::vector<std::string>& classes, const std::string& aggregation) {
        const metrics::ConfusionMatrix cm = metrics::confusion(y_true, y_pred, classes);
        return bundle_to_dict(metrics::precision_recall_f1(cm, aggregation));
      },
      py::arg("y_true"), py::arg("y_pred"), py::arg("classes"),
      py::arg("aggregation") = "macro");

  m.def(
      "confusion_matrix",
      [](const std::vector<std::string>& y_true, const std::vector<std::string>& y_pred,
         const std::vector<std::string>& classes) {
        const metrics::ConfusionMatrix cm = metrics::confusion(y_true, y_pred, classes);
        const int n = static_cast<int>(cm.classes.size());
        py::array_t<std::int64_t> arr({n, n});
        std::copy(cm.counts.begin(), cm.counts.end(), arr.mutable_data());
        return arr;
      },
      py::arg("y_true"), py::arg("y_pred"), py::arg("classes"));

  m.def(
      "resize",
      [](const py::array_t<double, py::array::c_style>& img, int height, int width) {
        return tensor_to_array(prep::resize(array_to_tensor(img), height, width));
      },
      py::arg("image"), py::arg("height"), py::arg("width"),
      "Bilinear resize with half-pixel centers; returns HxWxC.");

  m.def("relu6", py::vectorize(zoo::relu6), py::arg("x"));
  m.def(
      "compound_scale",
      [](double alpha, double beta, double gamma, double phi) {
        const zoo::CompoundScaling s = zoo::compound_scale(alpha, beta, gamma, phi);
        py::dict d;
        d["alpha"] = s.alpha;
        d["beta"] = s.beta;
        d["gamma"] = s.gamma;
        d["phi"] = s.phi;
        d["depth"] = s.depth;
        d["width"] = s.width;
        d["resolution"] = s.resolution;
        return d;
      },
      py::arg("alpha"), py::arg("beta"), py::arg("gamma"), py::arg("phi"));

  m.def("percent_truncated", &report::percent_truncated, py::arg("fraction"),
        "Fraction as a percent string, truncated to two decimals.");
}
