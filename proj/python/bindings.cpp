#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "genrec/runner.hpp"

namespace py = pybind11;
using namespace genrec;

namespace {

py::array_t<double> to_numpy(Tensor const &t)
{
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Tensor from_numpy(py::array_t<double, py::array::c_style | py::array::forcecast> const &a)
{
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(shape, std::vector<double>(a.data(), a.data() + a.size()));
}

} // namespace

PYBIND11_MODULE(_genrec, m)
{
  m.doc() = "Video recovery with deconvolutional generator priors";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<RangeError>(m, "RangeError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<DivergedError>(m, "DivergedError", PyExc_RuntimeError);

  py::class_<Architecture>(m, "Architecture")
      .def_static("preset", &Architecture::preset, py::arg("name"))
      .def_readonly("latent_dim", &Architecture::latent_dim)
      .def_readonly("base_channels", &Architecture::base_channels)
      .def_readonly("base_size", &Architecture::base_size)
      .def_readonly("deconv_channels", &Architecture::deconv_channels)
      .def_property_readonly("output_shape", &Architecture::output_shape)
      .def("layer_param_counts", &Architecture::layer_param_counts)
      .def("with_output_channels", &Architecture::with_output_channels, py::arg("channels"));

  m.def("param_count", &param_count, py::arg("arch"));

  py::class_<SeededRng>(m, "Rng").def(py::init<std::uint64_t>(), py::arg("seed") = 0).def("normal", &SeededRng::normal);

  py::class_<Weights>(m, "Weights")
      .def_static("random", &Weights::random, py::arg("arch"), py::arg("rng"))
      .def_property_readonly("architecture", &Weights::architecture)
      .def("flatten", [](Weights const &w) { return to_numpy(Tensor::vector(w.flatten())); })
      .def("save", [](Weights const &w, fs::path const &p) { save_weights(p, w); })
      .def_static("load", &load_weights, py::arg("path"))
      .def("__eq__", [](Weights const &a, Weights const &b) { return a == b; });

  m.def(
      "generate",
      [](Weights const &w, py::array_t<double, py::array::c_style | py::array::forcecast> const &z) {
        return to_numpy(generate(w, std::span<double const>(z.data(), std::size_t(z.size()))));
      },
      py::arg("weights"), py::arg("z"));

  m.def(
      "make_sequence",
      [](std::string const &kind, std::size_t frames, std::size_t size, std::uint64_t seed) {
        auto spec = SequenceSpec::defaults(parse_sequence_kind(kind));
        spec.frames = frames;
        spec.size = size;
        spec.seed = seed;
        py::list out;
        for (auto const &f : make_sequence(spec).frames) { out.append(to_numpy(f)); }
        return out;
      },
      py::arg("kind"), py::arg("frames"), py::arg("size") = 64, py::arg("seed") = 0);

  m.def(
      "psnr", [](py::array_t<double> const &x, py::array_t<double> const &y) { return psnr(from_numpy(x), from_numpy(y)); },
      py::arg("reference"), py::arg("estimate"));

  m.def(
      "project_rank", [](py::array_t<double> const &z, std::size_t r) { return to_numpy(project_rank(from_numpy(z), r).codes); },
      py::arg("z"), py::arg("r"));
  m.def(
      "project_affine",
      [](py::array_t<double> const &z, std::size_t d) { return to_numpy(project_affine(from_numpy(z), d).codes); },
      py::arg("z"), py::arg("d"));
  m.def(
      "max_line_distance", [](py::array_t<double> const &z) { return max_line_distance(from_numpy(z)); }, py::arg("z"));

  m.def(
      "run_experiment",
      [](std::map<std::string, std::string> const &config) {
        ExperimentOutcome o;
        {
          py::gil_scoped_release release;
          o = run_experiment(ExperimentConfig::from_map(config));
        }
        py::dict d;
        d["z"] = to_numpy(o.result.z);
        d["residual_history"] = o.result.residual_history;
        d["initial_loss"] = o.result.initial_loss;
        d["final_loss"] = o.result.final_loss;
        d["psnr"] = o.result.metrics ? o.result.metrics->psnr : std::vector<double>{};
        d["mean_psnr"] = o.result.metrics ? py::cast(o.result.metrics->mean_psnr) : py::none();
        d["holdout_psnr"] = o.holdout_psnr ? py::cast(*o.holdout_psnr) : py::none();
        d["baseline_psnr"] = o.baseline_psnr ? py::cast(*o.baseline_psnr) : py::none();
        py::list frames;
        for (auto const &f : o.result.frames) { frames.append(to_numpy(f)); }
        d["frames"] = frames;
        return d;
      },
      py::arg("config"));

  m.attr("__version__") = std::string(kVersion.substr(kVersion.find(' ') + 1));
}
