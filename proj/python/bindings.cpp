#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "segvit/checkpoint.hpp"
#include "segvit/config.hpp"
#include "segvit/dataset.hpp"
#include "segvit/errors.hpp"
#include "segvit/evaluation.hpp"
#include "segvit/flops.hpp"
#include "segvit/model_check.hpp"
#include "segvit/trainer.hpp"

namespace py = pybind11;
using namespace segvit;

namespace {

using U8 = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;

U8 to_array(const LabelMap& m) {
  U8 out({m.height, m.width});
  std::memcpy(out.mutable_data(), m.labels.data(), m.labels.size());
  return out;
}

U8 to_array(const Image& im) {
  U8 out({im.height, im.width, int64_t{3}});
  std::memcpy(out.mutable_data(), im.rgb.data(), im.rgb.size());
  return out;
}

LabelMap label_map(const U8& a) {
  if (a.ndim() != 2) throw DimensionError("label map must be 2-D, got " + std::to_string(a.ndim()) + "-D");
  LabelMap m(a.shape(0), a.shape(1));
  std::memcpy(m.labels.data(), a.data(), m.labels.size());
  return m;
}

Image image(const U8& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw DimensionError("image must be H x W x 3");
  Image im{a.shape(0), a.shape(1), std::vector<uint8_t>(static_cast<size_t>(a.size()))};
  std::memcpy(im.rgb.data(), a.data(), im.rgb.size());
  return im;
}

py::dict stats_dict(const StepStats& s) {
  py::dict d;
  d["iteration"] = s.iteration;
  d["lr"] = s.lr;
  d["loss"] = s.loss;
  d["cls"] = s.cls;
  d["focal"] = s.focal;
  d["dice"] = s.dice;
  d["grad_norm"] = s.grad_norm;
  return d;
}

py::dict miou_dict(const MiouResult& r) {
  py::dict d;
  py::list iou;
  for (const auto& v : r.iou) {
    if (v) {
      iou.append(*v);
    } else {
      iou.append(py::none());
    }
  }
  d["iou"] = iou;
  d["mean"] = r.mean;
  d["pixels"] = r.pixels;
  return d;
}

// Owns the training split so the trainer can be stepped from Python.
struct PyTrainer {
  explicit PyTrainer(const SegVitConfig& c) : trainer(c) {}
  PyTrainer(const SegVitConfig& c, const std::filesystem::path& ckpt) : trainer(c, read_checkpoint(ckpt)) {}

  Trainer trainer;
  std::vector<Sample> train;

  void require_data() const {
    if (train.empty()) throw DataError("no training split loaded");
  }
};

}  // namespace

PYBIND11_MODULE(_segvit, m) {
  m.doc() = "SegViT: plain ViT encoder with an attention-to-mask decoder, in C++.";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<SegVitConfig>(m, "Config")
      .def(py::init<>())
      .def_static("load", &SegVitConfig::load, py::arg("path"))
      .def_static("parse", &SegVitConfig::parse, py::arg("text"), py::arg("origin") = "<string>")
      .def("set", &SegVitConfig::set, py::arg("key"), py::arg("value"))
      .def("get", &SegVitConfig::get, py::arg("key"))
      .def_static("keys", &SegVitConfig::keys)
      .def("serialize", &SegVitConfig::serialize)
      .def("validate", &SegVitConfig::validate)
      .def("__getitem__", &SegVitConfig::get)
      .def("__setitem__", &SegVitConfig::set)
      .def("__repr__", [](const SegVitConfig& c) { return "<segvit.Config\n" + c.serialize() + ">"; });

  m.def(
      "flops",
      [](const SegVitConfig& c, int64_t crop_h, int64_t crop_w) {
        const auto cost = estimate(c.model, crop_h, crop_w);
        py::dict d;
        for (const auto& [name, v] : cost.components()) d[py::str(name)] = v;
        d["backbone_total"] = cost.backbone_total();
        d["qu_total"] = cost.qu_total();
        d["decoder_total"] = cost.decoder_total();
        d["total"] = cost.total();
        return d;
      },
      py::arg("config"), py::arg("crop_h"), py::arg("crop_w"),
      "Multiply-accumulate counts per component (one MAC counts as one FLOP).");

  m.def(
      "flops_ratio",
      [](const SegVitConfig& plain, const SegVitConfig& shrunk, int64_t crop_h, int64_t crop_w) {
        return compare(plain.model, shrunk.model, crop_h, crop_w).ratio;
      },
      py::arg("plain"), py::arg("shrunk"), py::arg("crop_h"), py::arg("crop_w"));

  m.def(
      "make_sample",
      [](const SegVitConfig& c, const std::string& split, int64_t index) {
        const auto& e = c.model.encoder;
        const Sample s = make_sample(c.data, e.image_height, e.image_width, split, index);
        return py::make_tuple(to_array(s.image), to_array(s.labels));
      },
      py::arg("config"), py::arg("split"), py::arg("index"),
      "Synthetic (image, labels) pair; a pure function of the data seed, split and index.");

  m.def("generate_dataset", &generate_dataset, py::arg("directory"), py::arg("config"));

  m.def(
      "miou",
      [](const std::vector<U8>& preds, const std::vector<U8>& gts, int64_t k) {
        std::vector<LabelMap> p, g;
        for (const auto& a : preds) p.push_back(label_map(a));
        for (const auto& a : gts) g.push_back(label_map(a));
        return miou_dict(miou(p, g, k));
      },
      py::arg("preds"), py::arg("gts"), py::arg("num_classes"),
      "Dataset-level IoU per class and their mean; 255 in the ground truth is ignored.");

  m.def(
      "gradcheck",
      [](const SegVitConfig& c, const std::string& mode, int64_t samples, double step) {
        SegVitConfig cfg = c;
        cfg.set("shrunk.mode", mode);
        GradCheckOptions opt;
        opt.samples_per_tensor = samples;
        opt.step = step;
        const auto r = check_model_gradients(cfg, opt);
        py::dict d;
        d["max_rel_error"] = r.max_rel_error;
        d["worst_param"] = r.worst_param;
        d["probes"] = r.probes;
        return d;
      },
      py::arg("config"), py::arg("mode") = "off", py::arg("samples") = 4, py::arg("step") = 1e-5);

  py::class_<SegVitModel<float>>(m, "Model")
      .def_static(
          "from_checkpoint",
          [](const std::filesystem::path& p) { return load_model(read_checkpoint(p)); },
          py::arg("path"))
      .def(
          "infer",
          [](const SegVitModel<float>& model, const U8& img) {
            return to_array(infer(model, image_tensor<float>(image(img))));
          },
          py::arg("image"), "Label map for an H x W x 3 uint8 image.")
      .def_property_readonly("num_parameters", [](const SegVitModel<float>& model) {
        int64_t n = 0;
        for (const auto& p : model.params().all()) n += p.tensor.numel();
        return n;
      });

  py::class_<PyTrainer>(m, "Trainer")
      .def(py::init<const SegVitConfig&>(), py::arg("config"))
      .def(py::init<const SegVitConfig&, const std::filesystem::path&>(), py::arg("config"), py::arg("checkpoint"))
      .def(
          "load_data",
          [](PyTrainer& t, const std::filesystem::path& dir) { t.train = load_split(dir, "train"); },
          py::arg("directory"))
      .def(
          "use_generated",
          [](PyTrainer& t, int64_t count) {
            const auto& c = t.trainer.config();
            const auto& e = c.model.encoder;
            t.train.clear();
            for (int64_t i = 0; i < count; ++i) {
              t.train.push_back(make_sample(c.data, e.image_height, e.image_width, "train", i));
            }
          },
          py::arg("count"), "Render the first `count` training samples in memory.")
      .def("step",
           [](PyTrainer& t) {
             t.require_data();
             StepStats s;
             {
               py::gil_scoped_release release;
               s = t.trainer.step(t.train);
             }
             return stats_dict(s);
           })
      .def_property_readonly("iteration", [](const PyTrainer& t) { return t.trainer.iteration(); })
      .def(
          "save",
          [](const PyTrainer& t, const std::filesystem::path& p) { write_checkpoint(p, t.trainer.checkpoint()); },
          py::arg("path"))
      .def(
          "evaluate",
          [](const PyTrainer& t, const std::filesystem::path& dir, const std::string& split, int64_t limit) {
            return miou_dict(evaluate(t.trainer.model(), load_split(dir, split), limit));
          },
          py::arg("directory"), py::arg("split") = "eval", py::arg("limit") = -1);
}
