#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "usmae/cli/cli.hpp"
#include "usmae/data/phantom.hpp"
#include "usmae/data/preprocess.hpp"
#include "usmae/data/split.hpp"
#include "usmae/errors.hpp"
#include "usmae/metrics/metrics.hpp"
#include "usmae/optim/checkpoint.hpp"
#include "usmae/scorecam/scorecam.hpp"
#include "usmae/vitmae/mask.hpp"
#include "usmae/vitmae/model.hpp"

namespace py = pybind11;
using namespace usmae;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

ndgrad::Tensor image_tensor(const FloatArray& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw ShapeError("expected a square 2-D image");
  const auto n = static_cast<std::size_t>(a.shape(0));
  return ndgrad::Tensor::from({1, n, n}, std::vector<float>(a.data(), a.data() + n * n));
}

py::array_t<std::uint8_t> gray_array(const data::GrayImage& img) {
  py::array_t<std::uint8_t> out({img.height, img.width});
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

data::RgbImage rgb_from(const ByteArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("expected an HxWx3 array");
  data::RgbImage img(a.shape(1), a.shape(0));
  std::copy(a.data(), a.data() + img.pixels.size(), img.pixels.begin());
  return img;
}

data::GrayImage gray_from(const ByteArray& a) {
  if (a.ndim() != 2) throw ShapeError("expected an HxW array");
  data::GrayImage img(a.shape(1), a.shape(0));
  std::copy(a.data(), a.data() + img.pixels.size(), img.pixels.begin());
  return img;
}

std::vector<data::SampleRecord> records_from_labels(const std::vector<int>& labels,
                                                    const std::vector<std::string>& groups) {
  std::vector<data::SampleRecord> recs(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 2) throw ContractError("labels must be 0, 1 or 2");
    recs[i].label = static_cast<data::Label>(labels[i]);
    recs[i].path = std::to_string(i);
    if (!groups.empty()) recs[i].group = groups.at(i);
  }
  return recs;
}

vitmae::ModelConfig config_from(const py::dict& d) {
  auto json_mod = py::module_::import("json");
  return vitmae::model_config_from_json(
      nlohmann::json::parse(json_mod.attr("dumps")(d).cast<std::string>()));
}

py::dict config_dict(const vitmae::ModelConfig& cfg) {
  auto json_mod = py::module_::import("json");
  return json_mod.attr("loads")(vitmae::to_json(cfg).dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Core bindings of the usmae library";

  py::register_exception<Error>(m, "UsmaeError", PyExc_RuntimeError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<StateError>(m, "StateError", PyExc_RuntimeError);
  py::register_exception<DegenerateError>(m, "DegenerateError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def("roc_auc", [](const std::vector<double>& scores, const std::vector<int>& labels) {
    return metrics::roc_auc(scores, labels);
  });
  m.def(
      "evaluate_predictions",
      [](const DoubleArray& probs, const std::vector<int>& labels) {
        if (probs.ndim() != 2) throw ShapeError("probs must be [n, k]");
        const auto k = static_cast<std::size_t>(probs.shape(1));
        return metrics::evaluate_predictions(
            std::span<const double>(probs.data(), probs.size()), labels, k);
      },
      py::arg("probs"), py::arg("labels"));

  m.def("masked_count", &vitmae::masked_count);
  m.def(
      "sample_mask",
      [](std::size_t n, double ratio, std::uint64_t seed) {
        const auto plan = vitmae::sample_mask(n, ratio, seed);
        return py::dict(py::arg("masked") = plan.masked, py::arg("permutation") = plan.permutation,
                        py::arg("num_masked") = plan.num_masked);
      },
      py::arg("num_patches"), py::arg("mask_ratio"), py::arg("seed"));

  m.def(
      "fold_plan",
      [](const std::vector<int>& labels, double test_fraction, std::size_t k, std::size_t repeats,
         std::uint64_t seed, const std::vector<std::string>& groups) {
        const auto recs = records_from_labels(labels, groups);
        const auto plan = data::make_fold_plan(
            recs, test_fraction, k, repeats, seed,
            groups.empty() ? data::SplitMode::image : data::SplitMode::group);
        return py::dict(py::arg("test") = plan.test, py::arg("cv") = plan.cv,
                        py::arg("validation") = plan.validation,
                        py::arg("text") = data::format_fold_plan(plan));
      },
      py::arg("labels"), py::arg("test_fraction"), py::arg("folds") = 4, py::arg("repeats") = 5,
      py::arg("seed") = 0, py::arg("groups") = std::vector<std::string>{});

  m.def(
      "render_phantom",
      [](const std::string& label, std::size_t size, std::uint64_t seed, double speckle) {
        const auto parsed = data::parse_label(label);
        if (!parsed) throw ContractError("unknown label " + label);
        auto spec = data::random_phantom_spec(*parsed, size, seed);
        spec.speckle_sigma = speckle;
        const auto ph = data::render_phantom(spec);
        return py::make_tuple(gray_array(ph.image), gray_array(ph.anomaly));
      },
      py::arg("label"), py::arg("size") = 64, py::arg("seed") = 0, py::arg("speckle") = 0.25);
  m.def(
      "synth_dataset",
      [](const std::filesystem::path& dir, std::size_t normal, std::size_t mcdk, std::size_t utd,
         std::size_t size, std::uint64_t seed) {
        data::SynthOptions o;
        o.normal = normal;
        o.mcdk = mcdk;
        o.utd = utd;
        o.size = size;
        o.seed = seed;
        return data::synth_dataset(dir, o).size();
      },
      py::arg("dir"), py::arg("normal") = 400, py::arg("mcdk") = 40, py::arg("utd") = 160,
      py::arg("size") = 64, py::arg("seed") = 0);
  m.def("deannotate", [](const ByteArray& rgb) { return gray_array(data::deannotate(rgb_from(rgb))); });
  m.def("resize_normalize", [](const ByteArray& gray, std::size_t size) {
    const auto t = data::resize_normalize(gray_from(gray), size);
    py::array_t<float> out({size, size});
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
  });

  py::class_<vitmae::Model>(m, "Model")
      .def_static(
          "pretraining",
          [](const py::dict& cfg, std::uint64_t seed) {
            return vitmae::Model::pretraining(config_from(cfg), seed);
          },
          py::arg("config") = py::dict(), py::arg("seed") = 0)
      .def_static(
          "finetuning",
          [](const py::dict& cfg, std::uint64_t seed) {
            return vitmae::Model::finetuning(config_from(cfg), seed);
          },
          py::arg("config") = py::dict(), py::arg("seed") = 0)
      .def_static("load", [](const std::filesystem::path& p) {
        return optim::load_checkpoint(p).to_model();
      })
      .def("save",
           [](const vitmae::Model& model, const std::filesystem::path& p, std::uint64_t seed) {
             optim::CheckpointMeta meta;
             meta.model = model.config();
             meta.seed = seed;
             meta.mode = model.mode();
             return optim::save_checkpoint(p, model, meta);
           },
           py::arg("path"), py::arg("seed") = 0)
      .def_property_readonly("config", [](const vitmae::Model& m) { return config_dict(m.config()); })
      .def_property_readonly("mode",
                             [](const vitmae::Model& m) {
                               return m.mode() == vitmae::ModelMode::pretraining ? "pretraining"
                                                                                 : "finetuning";
                             })
      .def("parameter_count", &vitmae::Model::parameter_count)
      .def("to_finetuning", &vitmae::Model::to_finetuning, py::arg("seed"),
           py::arg("num_classes") = 0)
      .def("classify",
           [](const vitmae::Model& m, const FloatArray& image) {
             ndgrad::NoGradGuard guard;
             return m.forward_classify(image_tensor(image)).probs;
           })
      .def(
          "mae_loss",
          [](const vitmae::Model& m, const FloatArray& image, std::uint64_t seed) {
            ndgrad::NoGradGuard guard;
            const auto t = image_tensor(image);
            const ndgrad::Tensor images[] = {t};
            const vitmae::MaskPlan plans[] = {
                vitmae::sample_mask(m.config().num_patches(), m.config().mask_ratio, seed)};
            return static_cast<double>(m.forward_mae_batch(images, plans).loss.item());
          },
          py::arg("image"), py::arg("seed") = 0)
      .def(
          "scorecam",
          [](const vitmae::Model& m, const FloatArray& image, int target, std::size_t budget) {
            scorecam::ScorecamOptions o;
            o.channel_budget = budget;
            const auto map = scorecam::scorecam(m, image_tensor(image), target, o);
            py::array_t<double> out({map.height, map.width});
            std::copy(map.values.begin(), map.values.end(), out.mutable_data());
            return out;
          },
          py::arg("image"), py::arg("target"), py::arg("channel_budget") = 64);

  m.def(
      "cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = cli::run(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      "Runs the usmae command line in-process; returns (exit code, stdout, stderr).");
}
