// Python bindings. Structured values cross the boundary as JSON strings; the
// cluekit package decodes them into dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "cluekit/bundle_io.hpp"
#include "cluekit/experiments.hpp"

namespace py = pybind11;
using namespace cluekit;
using json = nlohmann::json;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Array to_numpy(const Vec& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
  return Tensor(Shape{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))},
                std::vector<double>(a.data(), a.data() + a.size()));
}

std::span<const double> as_span(const Array& a) { return {a.data(), static_cast<std::size_t>(a.size())}; }

json parse(const std::string& s) { return s.empty() ? json::object() : json::parse(s); }

}  // namespace

PYBIND11_MODULE(_cluekit, m) {
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

  py::class_<Dataset>(m, "Dataset")
      .def_static("generate", [](const std::string& spec) { return generate(parse(spec)); })
      .def_static("load", [](const std::string& dir) { return load_dataset(dir); })
      .def("save", [](const Dataset& d, const std::string& dir) { save_dataset(d, dir); })
      .def("subset", [](const Dataset& d, const std::string& split) {
        if (split != "train" && split != "test") throw ConfigError("unknown split '" + split + "'");
        return d.subset(split == "train" ? Split::Train : Split::Test);
      })
      .def_property_readonly("inputs", [](const Dataset& d) { return to_numpy(d.inputs); })
      .def_property_readonly("labels", [](const Dataset& d) { return d.labels; })
      .def_property_readonly("classes", [](const Dataset& d) { return d.classes; })
      .def_property_readonly("spec_json", [](const Dataset& d) { return d.spec.dump(); })
      .def("__len__", &Dataset::size);

  py::class_<ModelBundle>(m, "Bundle")
      .def_static("load", [](const std::string& dir) { return load_bundle(dir); })
      .def_static(
          "train",
          [](const Dataset& d, const std::string& vae, const std::string& ens, std::uint64_t seed) {
            py::gil_scoped_release release;
            return train_bundle(d, vae_hyper_from_json(parse(vae)), ensemble_hyper_from_json(parse(ens)), seed);
          },
          py::arg("data"), py::arg("vae") = "", py::arg("ensemble") = "", py::arg("seed") = 0)
      .def("save", [](const ModelBundle& b, const std::string& dir) { save_bundle(b, dir); })
      .def("encode", [](const ModelBundle& b, const Array& x) { return to_numpy(encode(b, as_span(x))); })
      .def("decode", [](const ModelBundle& b, const Array& z) { return to_numpy(decode(b, as_span(z))); })
      .def("predict", [](const ModelBundle& b, const Array& x) { return to_numpy(predict_probs(b, as_span(x))); })
      .def("predict_batch", [](const ModelBundle& b, const Array& x) { return to_numpy(predict_batch(b, to_tensor(x))); })
      .def_property_readonly("report_json", [](const ModelBundle& b) { return b.report.dump(); })
      .def_property_readonly("latent_dim", [](const ModelBundle& b) { return b.dims.latent; });

  m.def("entropy", [](const Array& p) { return entropy(as_span(p)); });
  m.def("top_uncertain", &top_uncertain, py::arg("data"), py::arg("bundle"), py::arg("n"));
  m.def(
      "explain",
      [](const Dataset& data, const std::vector<std::size_t>& rows, const ModelBundle& bundle, const std::string& method,
         const std::string& config, const std::string& diversity) {
        const auto meth = method_from_name(method);
        auto cfg = ExperimentConfig::from_json(parse(config));
        cfg.validate();
        const auto spec = DiversitySpec::from_json(parse(diversity));
        py::gil_scoped_release release;
        return explain(data, rows, bundle, meth, cfg, spec).to_json().dump();
      },
      py::arg("data"), py::arg("rows"), py::arg("bundle"), py::arg("method") = "dclue", py::arg("config") = "",
      py::arg("diversity") = "");
}
