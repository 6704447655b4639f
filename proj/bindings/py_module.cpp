// Python bindings for the poisoning defense pipeline.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "poisonguard/defense.hpp"
#include "poisonguard/extraction.hpp"
#include "poisonguard/network.hpp"
#include "poisonguard/synthetic.hpp"

namespace py = pybind11;

namespace {

std::vector<std::vector<double>> matrix_rows(const pg::Matrix& m) {
  std::vector<std::vector<double>> out(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto row = m.row(r);
    out[r].assign(row.begin(), row.end());
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_poisonguard, m) {
  m.doc() = "backdoor poisoning defense pipeline";

  py::class_<pg::Shape>(m, "Shape")
      .def(py::init([](std::size_t h, std::size_t w, std::size_t c) {
             return pg::Shape{h, w, c};
           }),
           py::arg("height"), py::arg("width"), py::arg("channels") = 1)
      .def_readwrite("height", &pg::Shape::height)
      .def_readwrite("width", &pg::Shape::width)
      .def_readwrite("channels", &pg::Shape::channels)
      .def("size", &pg::Shape::size);

  py::class_<pg::Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("shape", &pg::Dataset::shape)
      .def_readwrite("class_count", &pg::Dataset::class_count)
      .def_readwrite("pixel_max", &pg::Dataset::pixel_max)
      .def_readwrite("pixels", &pg::Dataset::pixels)
      .def_readwrite("labels", &pg::Dataset::labels)
      .def_readwrite("poisoned_flags", &pg::Dataset::poisoned_flags)
      .def_readwrite("original_labels", &pg::Dataset::original_labels)
      .def("dim", &pg::Dataset::dim)
      .def("__len__", &pg::Dataset::size)
      .def("image",
           [](const pg::Dataset& d, std::size_t i) {
             if (i >= d.size()) throw py::index_error();
             const auto x = d.image(i);
             return std::vector<double>(x.begin(), x.end());
           })
      .def("indices_of_class", &pg::Dataset::indices_of_class)
      .def("poisoned_count", &pg::Dataset::poisoned_count);

  py::enum_<pg::PoisonKind>(m, "PoisonKind")
      .value("Overlay", pg::PoisonKind::Overlay)
      .value("Dot", pg::PoisonKind::Dot);

  py::class_<pg::PoisonSpec>(m, "PoisonSpec")
      .def_readwrite("mask", &pg::PoisonSpec::mask)
      .def_readwrite("pattern", &pg::PoisonSpec::pattern)
      .def_readwrite("target_class", &pg::PoisonSpec::target_class)
      .def_readwrite("base_class", &pg::PoisonSpec::base_class)
      .def_readwrite("ratio", &pg::PoisonSpec::ratio)
      .def_readwrite("kind", &pg::PoisonSpec::kind);

  m.def("make_dot_poison",
        [](const pg::Shape& shape, std::size_t y, std::size_t x,
           std::vector<double> color, std::uint16_t target,
           std::uint16_t base, double ratio) {
          return pg::make_dot_poison(shape, y, x, color, target, base, ratio);
        },
        py::arg("shape"), py::arg("y"), py::arg("x"), py::arg("color"),
        py::arg("target_class"), py::arg("base_class"), py::arg("ratio"));
  m.def("make_overlay_poison", &pg::make_overlay_poison, py::arg("shape"),
        py::arg("pattern"), py::arg("opacity"), py::arg("target_class"),
        py::arg("base_class"), py::arg("ratio"));
  m.def("procedural_pattern", &pg::procedural_pattern);
  m.def("apply_poison",
        [](std::vector<double> x, const pg::PoisonSpec& spec,
           double pixel_max) { return pg::apply_poison(x, spec, pixel_max); },
        py::arg("x"), py::arg("spec"), py::arg("pixel_max") = 255.0);
  m.def("poison_dataset", &pg::poison_dataset, py::arg("dataset"),
        py::arg("spec"), py::arg("seed"));
  m.def("make_synthetic_image_task", &pg::make_synthetic_image_task,
        py::arg("classes"), py::arg("shape"), py::arg("samples_per_class"),
        py::arg("noise"), py::arg("seed"));
  m.def("load_cifar10_binary", &pg::load_cifar10_binary);
  m.def("save_dataset", &pg::save_dataset);
  m.def("load_dataset", &pg::load_dataset);

  py::class_<pg::Network>(m, "Network")
      .def("input_dim", &pg::Network::input_dim)
      .def("class_count", &pg::Network::class_count);

  py::class_<pg::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &pg::TrainConfig::learning_rate)
      .def_readwrite("epochs", &pg::TrainConfig::epochs)
      .def_readwrite("batch_size", &pg::TrainConfig::batch_size)
      .def_readwrite("seed", &pg::TrainConfig::seed)
      .def_readwrite("shuffle", &pg::TrainConfig::shuffle);

  py::class_<pg::EvalReport>(m, "EvalReport")
      .def_readonly("accuracy", &pg::EvalReport::accuracy)
      .def_readonly("per_class_accuracy", &pg::EvalReport::per_class_accuracy)
      .def_readonly("poisoned_accuracy", &pg::EvalReport::poisoned_accuracy);

  m.def("make_mlp",
        [](std::vector<std::size_t> dims, std::uint64_t seed) {
          return pg::make_mlp(dims, seed);
        },
        py::arg("dims"), py::arg("seed"));
  m.def("logits",
        [](const pg::Network& n, std::vector<double> x) {
          return pg::logits(n, x);
        });
  m.def("forward",
        [](const pg::Network& n, std::vector<double> x) {
          return pg::forward(n, x);
        });
  m.def("predict",
        [](const pg::Network& n, std::vector<double> x) {
          return pg::predict(n, x);
        });
  m.def("loss",
        [](const pg::Network& n, std::vector<double> x, std::size_t y) {
          return pg::loss(n, x, y);
        });
  m.def("input_gradient",
        [](const pg::Network& n, std::vector<double> x, std::size_t y) {
          return pg::input_gradient(n, x, y);
        });
  m.def("train", &pg::train, py::arg("net"), py::arg("dataset"),
        py::arg("config"));
  m.def("evaluate", &pg::evaluate);
  m.def("save_network", &pg::save_network);
  m.def("load_network", &pg::load_network);

  py::class_<pg::GradientMatrix>(m, "GradientMatrix")
      .def_readonly("sample_ids", &pg::GradientMatrix::sample_ids)
      .def_readonly("label_used", &pg::GradientMatrix::label_used)
      .def_readonly("centered", &pg::GradientMatrix::centered)
      .def_readonly("dropped_ids", &pg::GradientMatrix::dropped_ids)
      .def("rows", [](const pg::GradientMatrix& g) {
        return matrix_rows(g.matrix);
      });

  py::class_<pg::PoisonSignal>(m, "PoisonSignal")
      .def_readonly("v", &pg::PoisonSignal::v)
      .def_readonly("label_used", &pg::PoisonSignal::label_used)
      .def_readonly("rayleigh", &pg::PoisonSignal::rayleigh);

  m.def("gradient_matrix",
        [](const pg::Network& net, const pg::Dataset& d,
           std::vector<std::size_t> ids, std::uint16_t label, bool center) {
          return pg::gradient_matrix(net, d, ids, label, center);
        },
        py::arg("net"), py::arg("dataset"), py::arg("sample_ids"),
        py::arg("label"), py::arg("center") = false);
  m.def("extract_signal",
        [](const pg::GradientMatrix& gm) { return pg::extract_signal(gm); });
  m.def("principal_scores", &pg::principal_scores);
  m.def("export_signal_ppm",
        [](const std::filesystem::path& stem, std::vector<double> v,
           const pg::Shape& shape) { pg::export_signal_ppm(stem, v, shape); });

  py::class_<pg::Gaussian1D>(m, "Gaussian1D")
      .def_readonly("mean", &pg::Gaussian1D::mean)
      .def_readonly("variance", &pg::Gaussian1D::variance)
      .def_readonly("weight", &pg::Gaussian1D::weight);

  py::class_<pg::GmmResult>(m, "GmmResult")
      .def_readonly("components", &pg::GmmResult::components)
      .def_readonly("assignments", &pg::GmmResult::assignments)
      .def_readonly("log_likelihood", &pg::GmmResult::log_likelihood)
      .def_readonly("iterations", &pg::GmmResult::iterations)
      .def_readonly("converged", &pg::GmmResult::converged)
      .def_readonly("degenerate", &pg::GmmResult::degenerate);

  m.def("gmm2_fit",
        [](std::vector<double> samples, std::uint64_t seed) {
          return pg::gmm2_fit(samples, seed);
        },
        py::arg("samples"), py::arg("seed") = 0);
  m.def("gap_split_fit",
        [](std::vector<double> samples, double min_fraction) {
          return pg::gap_split_fit(samples, min_fraction);
        },
        py::arg("samples"), py::arg("min_fraction") = 0.02);
  m.def("wasserstein2_gaussians", &pg::wasserstein2_gaussians);

  py::class_<pg::FilterResult>(m, "FilterResult")
      .def_readonly("clean_ids", &pg::FilterResult::clean_ids)
      .def_readonly("poisoned_ids", &pg::FilterResult::poisoned_ids)
      .def_readonly("scores", &pg::FilterResult::scores)
      .def_readonly("degenerate", &pg::FilterResult::degenerate);

  py::class_<pg::DetectConfig>(m, "DetectConfig")
      .def(py::init<>())
      .def_readwrite("tau", &pg::DetectConfig::tau)
      .def_readwrite("min_separation", &pg::DetectConfig::min_separation)
      .def_readwrite("seed", &pg::DetectConfig::seed);

  py::class_<pg::DetectionReport>(m, "DetectionReport")
      .def_readonly("per_class_w2", &pg::DetectionReport::per_class_w2)
      .def_readonly("per_class_mean_abs_component",
                    &pg::DetectionReport::per_class_mean_abs_component)
      .def_readonly("target_class", &pg::DetectionReport::target_class)
      .def_readonly("base_class", &pg::DetectionReport::base_class)
      .def_readonly("tau", &pg::DetectionReport::tau)
      .def_readonly("ratio", &pg::DetectionReport::ratio)
      .def_readonly("flagged", &pg::DetectionReport::flagged)
      .def_readonly("candidate_poisoned_ids",
                    &pg::DetectionReport::candidate_poisoned_ids)
      .def_readonly("runners_up", &pg::DetectionReport::runners_up);

  py::class_<pg::NeutralizeConfig>(m, "NeutralizeConfig")
      .def(py::init<>())
      .def_readwrite("rho", &pg::NeutralizeConfig::rho)
      .def_readwrite("tau", &pg::NeutralizeConfig::tau)
      .def_readwrite("min_separation", &pg::NeutralizeConfig::min_separation)
      .def_readwrite("retrain_epochs", &pg::NeutralizeConfig::retrain_epochs)
      .def_readwrite("learning_rate", &pg::NeutralizeConfig::learning_rate)
      .def_readwrite("batch_size", &pg::NeutralizeConfig::batch_size)
      .def_readwrite("seed", &pg::NeutralizeConfig::seed);

  py::class_<pg::NeutralizeResult>(m, "NeutralizeResult")
      .def_readonly("net", &pg::NeutralizeResult::net)
      .def_readonly("detection", &pg::NeutralizeResult::detection)
      .def_readonly("filter", &pg::NeutralizeResult::filter)
      .def_readonly("acted", &pg::NeutralizeResult::acted)
      .def_readonly("clean_before", &pg::NeutralizeResult::clean_before)
      .def_readonly("clean_after", &pg::NeutralizeResult::clean_after)
      .def_readonly("poisoned_before", &pg::NeutralizeResult::poisoned_before)
      .def_readonly("poisoned_after", &pg::NeutralizeResult::poisoned_after);

  m.def("filter_poisoned", &pg::filter_poisoned, py::arg("net"),
        py::arg("dataset"), py::arg("target_class"), py::arg("base_class"));
  m.def("detect_poison_classes", &pg::detect_poison_classes, py::arg("net"),
        py::arg("dataset"), py::arg("config"));
  m.def("counter_poison_augment",
        [](const pg::Network& net, const pg::Dataset& d,
           std::vector<std::size_t> ids, std::uint16_t target,
           const pg::NeutralizeConfig& cfg) {
          return pg::counter_poison_augment(net, d, ids, target, cfg);
        },
        py::arg("net"), py::arg("dataset"), py::arg("poisoned_ids"),
        py::arg("target_class"), py::arg("config"));
  m.def("neutralize",
        [](const pg::Network& net, const pg::Dataset& train_data,
           const pg::NeutralizeConfig& cfg, const pg::Dataset* clean_test,
           const pg::Dataset* poisoned_test) {
          return pg::neutralize(net, train_data, cfg, clean_test,
                                poisoned_test);
        },
        py::arg("net"), py::arg("train_data"), py::arg("config"),
        py::arg("clean_test") = nullptr, py::arg("poisoned_test") = nullptr);

  py::class_<pg::Theorem2Report>(m, "Theorem2Report")
      .def_readonly("alignment", &pg::Theorem2Report::alignment)
      .def_readonly("lambda1", &pg::Theorem2Report::lambda1)
      .def_readonly("lambda2", &pg::Theorem2Report::lambda2)
      .def_readonly("expected_lambda1", &pg::Theorem2Report::expected_lambda1)
      .def_readonly("expected_lambda2", &pg::Theorem2Report::expected_lambda2);

  py::class_<pg::ZModelParams>(m, "ZModelParams")
      .def(py::init<>())
      .def_readwrite("n", &pg::ZModelParams::n)
      .def_readwrite("mu", &pg::ZModelParams::mu)
      .def_readwrite("eta", &pg::ZModelParams::eta)
      .def_readwrite("eps", &pg::ZModelParams::eps)
      .def_readwrite("N", &pg::ZModelParams::N)
      .def_readwrite("seed", &pg::ZModelParams::seed);

  m.def("make_mu", &pg::make_mu);
  m.def("verify_theorem2", &pg::verify_theorem2);
  m.def("clustering_error_rate", &pg::clustering_error_rate);
  m.def("normal_cdf", &pg::normal_cdf);
}
