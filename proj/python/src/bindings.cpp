#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ad1d/anchor_fit.hpp"
#include "ad1d/dataset_io.hpp"
#include "ad1d/detection.hpp"
#include "ad1d/metrics.hpp"
#include "ad1d/model.hpp"
#include "ad1d/preprocess.hpp"
#include "ad1d/synthetic.hpp"
#include "ad1d/trainer.hpp"

namespace py = pybind11;
using namespace ad1d;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::span<const float> as_span(const FloatArray& a) {
    if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
    return {a.data(), static_cast<std::size_t>(a.size())};
}

FloatArray to_array(std::vector<float> v) {
    FloatArray out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::dict report_dict(const EvalReport& r) {
    py::dict classes;
    for (const auto& c : r.classes) {
        py::dict d;
        d["truths"] = c.n_truths;
        d["detections"] = c.n_detections;
        d["ap50"] = c.ap50;
        d["ap75"] = c.ap75;
        classes[py::str(c.name)] = d;
    }
    py::dict out;
    out["map50"] = r.map50;
    out["map75"] = r.map75;
    out["samples"] = r.samples;
    out["classes"] = classes;
    return out;
}

}  // namespace

PYBIND11_MODULE(_ad1d, m) {
    m.doc() = "Single-shot anomaly detection on 1-D spectrum captures";

    // Library errors surface as ValueError (bad input/config) or ArithmeticError.
    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

    py::class_<Annotation>(m, "Annotation")
        .def(py::init([](int cls, double x, double w) { return Annotation{cls, x, w}; }), py::arg("cls"),
             py::arg("center"), py::arg("width"))
        .def_readwrite("cls", &Annotation::cls)
        .def_readwrite("center", &Annotation::x)
        .def_readwrite("width", &Annotation::w)
        .def_property_readonly("start", &Annotation::start)
        .def_property_readonly("end", &Annotation::end)
        .def("__repr__", [](const Annotation& a) {
            return "Annotation(" + class_name(a.cls) + ", center=" + std::to_string(a.x) +
                   ", width=" + std::to_string(a.w) + ")";
        });

    py::class_<Sample>(m, "Sample")
        .def(py::init([](const FloatArray& values, std::vector<Annotation> annotations) {
                 const auto s = as_span(values);
                 return Sample{{s.begin(), s.end()}, std::move(annotations), SampleSource::Labeled};
             }),
             py::arg("values"), py::arg("annotations") = std::vector<Annotation>{})
        .def_property_readonly("values", [](const Sample& s) { return to_array(s.values); })
        .def_readwrite("annotations", &Sample::annotations)
        .def("__len__", [](const Sample& s) { return s.values.size(); });

    py::class_<Detection>(m, "Detection")
        .def_readonly("cls", &Detection::cls)
        .def_readonly("confidence", &Detection::confidence)
        .def_readonly("center", &Detection::center)
        .def_readonly("width", &Detection::width)
        .def_readonly("scale", &Detection::scale)
        .def_property_readonly("start", &Detection::start)
        .def_property_readonly("end", &Detection::end)
        .def("__repr__", [](const Detection& d) {
            return "Detection(" + class_name(d.cls) + ", conf=" + std::to_string(d.confidence) +
                   ", center=" + std::to_string(d.center) + ", width=" + std::to_string(d.width) + ")";
        });

    py::enum_<NmsMode>(m, "NmsMode").value("HARD", NmsMode::Hard).value("SOFT", NmsMode::Soft);

    py::class_<DetectorConfig>(m, "DetectorConfig")
        .def(py::init<>())
        .def_readwrite("conf_threshold", &DetectorConfig::conf_threshold)
        .def_readwrite("nms_mode", &DetectorConfig::nms_mode)
        .def_readwrite("nms_threshold", &DetectorConfig::nms_threshold)
        .def_readwrite("soft_sigma", &DetectorConfig::soft_sigma)
        .def_readwrite("soft_final_threshold", &DetectorConfig::soft_final_threshold);

    py::class_<Model>(m, "Model")
        .def_static("load", &load_weights, py::arg("path"))
        .def_static(
            "create",
            [](int input_size, std::vector<double> anchors, std::uint64_t seed) {
                AnchorSet a = AnchorSet::reference();
                if (!anchors.empty()) {
                    if (anchors.size() != a.widths.size()) throw py::value_error("need 9 anchor widths");
                    std::copy(anchors.begin(), anchors.end(), a.widths.begin());
                }
                return Model::create(make_reference_spec(input_size, 5), a, default_class_names(), seed);
            },
            py::arg("input_size") = 416, py::arg("anchors") = std::vector<double>{}, py::arg("seed") = 1)
        .def("save", [](const Model& model, const std::string& path) { save_weights(model, path); })
        .def_property_readonly("parameter_count", &Model::parameter_count)
        .def_property_readonly("input_size", [](const Model& model) { return model.spec().input_size; })
        .def_property_readonly("class_names", &Model::class_names)
        .def_property_readonly("anchors",
                               [](const Model& model) {
                                   const auto& w = model.anchors().widths;
                                   return std::vector<double>(w.begin(), w.end());
                               })
        .def(
            "detect",
            [](const Model& model, const FloatArray& series, const DetectorConfig& cfg) {
                const auto s = as_span(series);
                py::gil_scoped_release release;
                return model.detect(s, cfg);
            },
            py::arg("series"), py::arg("config") = DetectorConfig{})
        .def(
            "evaluate",
            [](const Model& model, const Dataset& data, const DetectorConfig& cfg) {
                EvalReport r;
                {
                    py::gil_scoped_release release;
                    r = evaluate(model, data, cfg);
                }
                return report_dict(r);
            },
            py::arg("data"), py::arg("config") = DetectorConfig{});

    m.def(
        "generate_synthetic",
        [](std::uint64_t seed, int count, const std::string& mix) {
            return generate_synthetic(seed, mix.empty() ? ClassMix::uniform() : ClassMix::parse(mix), count);
        },
        py::arg("seed"), py::arg("count"), py::arg("mix") = "");
    m.def("load_dataset", &load_dataset, py::arg("path"));
    m.def("save_dataset", &save_dataset, py::arg("path"), py::arg("data"));
    m.def(
        "compute_anchors",
        [](const Dataset& data, int input_size) {
            const auto a = compute_anchors(data, input_size);
            return std::vector<double>(a.widths.begin(), a.widths.end());
        },
        py::arg("data"), py::arg("input_size") = 416);

    m.def(
        "binning_min_downsample",
        [](const FloatArray& series, int target) { return to_array(binning_min_downsample(as_span(series), target)); },
        py::arg("series"), py::arg("target"));
    m.def(
        "prepare_input",
        [](const FloatArray& series, int input_size) { return to_array(prepare_input(as_span(series), input_size)); },
        py::arg("series"), py::arg("input_size") = 416);
    m.def("iou_1d", &iou_1d, py::arg("center_a"), py::arg("width_a"), py::arg("center_b"), py::arg("width_b"));

    m.def(
        "train",
        [](const Dataset& train, const Dataset& test, const Model& initial, const std::string& config) {
            TrainConfig cfg;
            cfg.apply_text(config);
            cfg.validate();
            py::gil_scoped_release release;
            auto r = train_loop(train, test, initial, cfg);
            return std::make_pair(std::move(r.best), r.batches);
        },
        py::arg("train"), py::arg("test"), py::arg("initial"), py::arg("config") = "",
        "Trains from `initial`; `config` holds \"key value\" lines. Returns (best model, batches).");
}
