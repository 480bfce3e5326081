#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "simlearn/errors.hpp"
#include "simlearn/experiment.hpp"
#include "simlearn/group_loss.hpp"
#include "simlearn/interpret.hpp"
#include "simlearn/metrics.hpp"

namespace py = pybind11;
using namespace simlearn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> vec(const Array& a) {
  if (a.ndim() != 1) throw ShapeError("expected a 1-d array");
  return {a.data(), a.data() + a.size()};
}

Tensor matrix(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-d array");
  return Tensor({static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))},
                std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const std::vector<double>& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

ExperimentConfig configured(const std::filesystem::path& path, std::optional<std::uint64_t> seed,
                            std::optional<std::size_t> workers) {
  auto cfg = load_config(path);
  if (seed) cfg.seeds = {*seed};
  if (workers) cfg.workers = *workers;
  cfg.validate();
  return cfg;
}

py::dict sweep_point(const SweepPoint& p) {
  py::dict d;
  d["lambda"] = p.lambda;
  d["mean_val_dacc"] = p.mean_val;
  d["std_val_dacc"] = p.std_val;
  d["mean_test_dacc"] = p.mean_test;
  d["std_test_dacc"] = p.std_test;
  d["mean_final_layer_corr"] = p.mean_corr;
  d["n"] = p.n;
  return d;
}

}  // namespace

PYBIND11_MODULE(_simlearn, m) {
  m.doc() = "Simultaneous learning loss, metrics and experiment runner.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("cce", [](const Array& y, const Array& yhat) { return cce(vec(y), vec(yhat)); }, py::arg("y"),
        py::arg("yhat"));
  m.def(
      "wgcc",
      [](const Array& y, const Array& yhat, std::size_t k, std::size_t mm, double lambda) {
        return wgcc(vec(y), vec(yhat), {k, mm}, lambda);
      },
      py::arg("y"), py::arg("yhat"), py::arg("k"), py::arg("m"), py::arg("lam"));
  m.def(
      "group_penalty",
      [](const Array& y, const Array& yhat, std::size_t k, std::size_t mm, double alpha, double beta) {
        return group_penalty(vec(y), vec(yhat), {k, mm}, alpha, beta);
      },
      py::arg("y"), py::arg("yhat"), py::arg("k"), py::arg("m"), py::arg("alpha") = 1.0, py::arg("beta") = 1.0);
  m.def(
      "sll",
      [](const Array& y, const Array& yhat, std::size_t k, std::size_t mm, double lambda, double alpha, double beta) {
        return sll(vec(y), vec(yhat), {k, mm}, {lambda, alpha, beta});
      },
      py::arg("y"), py::arg("yhat"), py::arg("k"), py::arg("m"), py::arg("lam") = 1.0, py::arg("alpha") = 1.0,
      py::arg("beta") = 1.0);
  m.def(
      "sll_grad_logits",
      [](const Array& y, const Array& z, std::size_t k, std::size_t mm, double lambda, double alpha, double beta) {
        return to_array(sll_grad_logits(vec(y), vec(z), {k, mm}, {lambda, alpha, beta}));
      },
      py::arg("y"), py::arg("logits"), py::arg("k"), py::arg("m"), py::arg("lam") = 1.0, py::arg("alpha") = 1.0,
      py::arg("beta") = 1.0, "Gradient of sll(y, softmax(logits)) with respect to the logits.");

  m.def(
      "dacc",
      [](const Array& probs, const std::vector<std::size_t>& labels, std::size_t k, std::size_t mm) {
        return dacc(matrix(probs), labels, {k, mm});
      },
      py::arg("probs"), py::arg("labels"), py::arg("k"), py::arg("m"),
      "Accuracy with the argmax restricted to the first k outputs; labels are target class indices.");
  m.def(
      "accuracy", [](const Array& probs, const std::vector<std::size_t>& labels) { return accuracy(matrix(probs), labels); },
      py::arg("probs"), py::arg("labels"));
  m.def(
      "roc_auc_ovr",
      [](const Array& scores, const std::vector<std::size_t>& labels) {
        const auto r = roc_auc_ovr(matrix(scores), labels);
        std::vector<std::optional<double>> per_class;
        for (const auto& c : r.per_class) per_class.push_back(c.skipped ? std::nullopt : std::optional(c.auc));
        return py::make_tuple(per_class, r.macro);
      },
      py::arg("scores"), py::arg("labels"), "Returns (per-class AUC or None when skipped, macro AUC).");
  m.def(
      "mean_abs_correlation",
      [](const std::vector<std::vector<double>>& vectors) { return mean_abs_pairwise_correlation(vectors).mean_abs; },
      py::arg("vectors"), "Mean absolute pairwise Pearson correlation of per-class channel vectors.");

  m.def(
      "run_experiment",
      [](const std::filesystem::path& config, const std::filesystem::path& out, std::optional<std::uint64_t> seed,
         std::optional<std::size_t> workers) {
        const auto cfg = configured(config, seed, workers);
        py::gil_scoped_release release;
        return run_experiment(cfg, out).summary_csv;
      },
      py::arg("config"), py::arg("out"), py::arg("seed") = py::none(), py::arg("workers") = py::none(),
      "Runs every configured mode and seed; returns the path of summary.csv.");
  m.def(
      "lambda_sweep",
      [](const std::filesystem::path& config, const std::filesystem::path& out, std::optional<std::uint64_t> seed,
         std::optional<std::size_t> workers) {
        const auto cfg = configured(config, seed, workers);
        SweepResult r;
        {
          py::gil_scoped_release release;
          r = lambda_sweep(cfg, out);
        }
        py::dict d;
        py::list points;
        for (const auto& p : r.points) points.append(sweep_point(p));
        d["points"] = points;
        d["baseline"] = sweep_point(r.baseline);
        d["best_lambda"] = r.best_lambda;
        return d;
      },
      py::arg("config"), py::arg("out"), py::arg("seed") = py::none(), py::arg("workers") = py::none());
}
