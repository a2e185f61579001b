/*
 * Copyright 2026 The Varprop Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "varprop/errors.hpp"
#include "varprop/mc.hpp"
#include "varprop/metrics.hpp"
#include "varprop/moments.hpp"
#include "varprop/network.hpp"
#include "varprop/serialize.hpp"
#include "varprop/training.hpp"

namespace py = pybind11;
using namespace varprop;

namespace {

Tensor tensor_from_array(const py::array_t<double>& array) {
  const py::buffer_info info = array.request();
  std::vector<std::size_t> shape;
  for (py::ssize_t d : info.shape) {
    shape.push_back(static_cast<std::size_t>(d));
  }
  auto contiguous = py::array_t<double, py::array::c_style |
                                            py::array::forcecast>(array);
  const double* data = contiguous.data();
  return Tensor(shape,
                std::vector<double>(data, data + contiguous.size()));
}

py::array_t<double> array_from_tensor(const Tensor& tensor) {
  std::vector<py::ssize_t> shape;
  for (std::size_t d : tensor.shape()) {
    shape.push_back(static_cast<py::ssize_t>(d));
  }
  py::array_t<double> out(shape);
  std::memcpy(out.mutable_data(), tensor.values().data(),
              tensor.size() * sizeof(double));
  return out;
}

CovMode mode_from_string(const std::string& mode) {
  if (mode == "full") return CovMode::kFull;
  if (mode == "diagonal") return CovMode::kDiagonal;
  throw ConfigError("unknown mode \"" + mode +
                    "\" (expected full or diagonal)");
}

ReluRule relu_rule_from_string(const std::string& rule) {
  if (rule == "taylor") return ReluRule::kTaylor;
  if (rule == "exact-gaussian") return ReluRule::kExactGaussian;
  throw ConfigError("unknown relu rule \"" + rule +
                    "\" (expected taylor or exact-gaussian)");
}

py::dict propagate_py(const NetworkSpec& net, const py::array_t<double>& input,
                      const std::string& mode, const std::string& relu_rule) {
  const PropagationResult result =
      propagate_network(net, tensor_from_array(input), mode_from_string(mode),
                        relu_rule_from_string(relu_rule));
  py::dict out;
  out["mean"] = array_from_tensor(result.state.mean);
  out[result.state.mode == CovMode::kFull ? "covariance" : "variance"] =
      array_from_tensor(result.state.cov);
  out["variance_clamps"] =
      static_cast<std::size_t>(result.clamps.count);
  return out;
}

py::dict mc_moments_py(const NetworkSpec& net, const py::array_t<double>& input,
                       std::size_t samples, std::uint64_t seed,
                       const std::string& form, std::size_t workers) {
  const McEstimate est =
      empirical_moments(net, tensor_from_array(input), samples, seed,
                        mode_from_string(form), workers);
  py::dict out;
  out["mean"] = array_from_tensor(est.mean);
  out[est.mode == CovMode::kFull ? "covariance" : "variance"] =
      array_from_tensor(est.cov);
  out["samples"] = est.sample_count;
  return out;
}

}  // namespace

PYBIND11_MODULE(_varprop, m) {
  m.doc() = "Analytic uncertainty propagation for feedforward networks";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError",
                                       PyExc_ArithmeticError);

  py::class_<NetworkSpec>(m, "Network")
      .def_property_readonly("input_shape",
                             [](const NetworkSpec& n) { return n.input_shape; })
      .def_property_readonly("layer_kinds",
                             [](const NetworkSpec& n) {
                               std::vector<std::string> kinds;
                               for (const LayerSpec& layer : n.layers) {
                                 kinds.push_back(layer_kind(layer));
                               }
                               return kinds;
                             })
      .def("__len__",
           [](const NetworkSpec& n) { return n.layers.size(); })
      .def("__repr__", [](const NetworkSpec& n) {
        std::string text = "Network(input=" + shape_string(n.input_shape);
        for (const LayerSpec& layer : n.layers) {
          text += ", ";
          text += layer_kind(layer);
        }
        return text + ")";
      });

  m.def("load_model", &load_model_file, py::arg("path"),
        "Load a model from a JSON file");
  m.def(
      "loads_model",
      [](const std::string& text) { return load_model(text); },
      py::arg("text"), "Load a model from a JSON string");
  m.def("save_model", &save_model_file, py::arg("net"), py::arg("path"),
        "Write a model to a JSON file in canonical form");
  m.def(
      "dumps_model",
      [](const NetworkSpec& net) { return save_model(net); },
      py::arg("net"), "Serialize a model to its canonical JSON string");

  m.def(
      "forward",
      [](const NetworkSpec& net, const py::array_t<double>& input) {
        return array_from_tensor(forward(net, tensor_from_array(input)));
      },
      py::arg("net"), py::arg("input"),
      "Deterministic forward pass (dropout applies its mean scale)");

  m.def("propagate", &propagate_py, py::arg("net"), py::arg("input"),
        py::arg("mode") = "full", py::arg("relu_rule") = "taylor",
        "Analytic output moments under dropout noise; returns a dict with "
        "mean and covariance (full) or variance (diagonal)");

  m.def("mc_moments", &mc_moments_py, py::arg("net"), py::arg("input"),
        py::arg("samples") = 10000, py::arg("seed") = 0,
        py::arg("form") = "diagonal", py::arg("workers") = 0,
        "Empirical output moments over stochastic dropout forward passes");

  m.def(
      "relu_gaussian_moments",
      [](double mean, double variance) {
        const ReluMoments g = relu_gaussian_moments(mean, variance);
        return py::make_tuple(g.mean, g.var);
      },
      py::arg("mean"), py::arg("variance"),
      "Exact mean and variance of max(0, X) for X ~ N(mean, variance)");

  m.def(
      "rmse",
      [](const py::array_t<double>& predictions,
         const py::array_t<double>& targets) {
        return rmse(tensor_from_array(predictions),
                    tensor_from_array(targets));
      },
      py::arg("predictions"), py::arg("targets"));

  m.def(
      "gaussian_tll",
      [](const py::array_t<double>& means,
         const py::array_t<double>& variances,
         const py::array_t<double>& targets, double tau,
         std::size_t likelihood_samples, std::uint64_t seed, bool sampled) {
        const Tensor m_t = tensor_from_array(means);
        const Tensor v_t = tensor_from_array(variances);
        const Tensor y_t = tensor_from_array(targets);
        TllConfig cfg;
        cfg.tau = tau;
        cfg.likelihood_samples = likelihood_samples;
        return sampled ? gaussian_tll_sampled(m_t, v_t, y_t, cfg, seed)
                       : gaussian_tll_closed_form(m_t, v_t, y_t, tau);
      },
      py::arg("means"), py::arg("variances"), py::arg("targets"),
      py::arg("tau") = 1.0, py::arg("likelihood_samples") = 10000,
      py::arg("seed") = 0, py::arg("sampled") = false,
      "Mean per-point Gaussian test log-likelihood with observation "
      "precision tau");

  m.def(
      "make_sine_dataset",
      [](std::size_t n, double lo, double hi, double sigma,
         std::uint64_t seed) {
        const Dataset data = make_sine_dataset(n, lo, hi, sigma, seed);
        return py::make_tuple(array_from_tensor(data.inputs),
                              array_from_tensor(data.targets));
      },
      py::arg("n"), py::arg("lo") = 0.0, py::arg("hi") = 20.0,
      py::arg("sigma") = 0.3, py::arg("seed") = 0,
      "Noisy sine regression data; returns (inputs, targets)");

  m.def("make_mlp", &make_mlp, py::arg("arch"), py::arg("input_dim"),
        py::arg("seed") = 0,
        "Build an MLP from an architecture string such as "
        "\"dense:100,relu,dropout:0.1,dense:1\"");

  m.def(
      "train_mlp",
      [](const NetworkSpec& net, const py::array_t<double>& inputs,
         const py::array_t<double>& targets, std::size_t epochs,
         std::size_t batch_size, double learning_rate, double momentum,
         std::uint64_t seed) {
        Dataset data;
        data.inputs = tensor_from_array(inputs);
        data.targets = tensor_from_array(targets);
        TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.learning_rate = learning_rate;
        cfg.momentum = momentum;
        cfg.seed = seed;
        const TrainResult result = train_mlp(net, data, cfg);
        return py::make_tuple(result.net, result.epoch_loss);
      },
      py::arg("net"), py::arg("inputs"), py::arg("targets"),
      py::arg("epochs") = 400, py::arg("batch_size") = 32,
      py::arg("learning_rate") = 0.01, py::arg("momentum") = 0.9,
      py::arg("seed") = 0,
      "SGD-with-momentum training; returns (trained_net, epoch_loss)");
}
