// Copyright 2026 The trialpack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "trialpack/aggregator.hpp"
#include "trialpack/costmodel.hpp"
#include "trialpack/error.hpp"
#include "trialpack/harness.hpp"
#include "trialpack/sampler.hpp"

namespace py = pybind11;
using namespace trialpack;

namespace {

ExperimentConfig config_from(const std::string& text) {
    if (text.empty()) return default_experiment();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(e.what());
    }
    ExperimentConfig cfg = experiment_from_json(j);
    cfg.validate();
    return cfg;
}

} // namespace

PYBIND11_MODULE(_trialpack, m) {
    m.doc() = "Packed multi-trial decoding core";

    auto error = py::register_exception<Error>(m, "Error");
    py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
    py::register_exception<ContractError>(m, "ContractError", error.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
    py::register_exception<UnsupportedOperation>(m, "UnsupportedOperation", error.ptr());

    m.def("theoretical_costs", [](std::size_t tokens, const std::vector<double>& alphas) {
        const TheoreticalCosts c = theoretical_costs(tokens, alphas);
        py::dict d;
        d["base"] = c.base;
        d["multi"] = c.multi;
        d["speedup"] = c.speedup;
        d["sum_sq"] = c.sum_sq;
        return d;
    }, py::arg("tokens"), py::arg("alphas"));
    m.def("causal_pairs", &causal_pairs, py::arg("length"));
    m.def("retained_count", &retained_count, py::arg("alpha"), py::arg("tokens"));
    m.def("closed_form_coverage", &closed_form_coverage, py::arg("total_frames"), py::arg("frames"),
          py::arg("trials"));

    m.def("mean_logits", [](const TrialLogits& o) {
        const Fused f = mean_logits(o);
        return py::make_tuple(f.logits, f.token);
    }, py::arg("logits"));
    m.def("confidence_weighted", [](const TrialLogits& o, double eps) {
        const Fused f = confidence_weighted(o, eps);
        return py::make_tuple(f.logits, f.token);
    }, py::arg("logits"), py::arg("epsilon") = 1e-8);
    m.def("cross_refine", [](const std::vector<double>& o1, const std::vector<double>& o2, std::size_t k) {
        return cross_refine(o1, o2, k);
    }, py::arg("o1"), py::arg("o2"), py::arg("k") = 2);

    m.def("default_config_json", [] { return to_json(default_experiment()).dump(); });
    m.def("config_hash", [](const std::string& cfg) { return config_hash(config_from(cfg)); },
          py::arg("config_json"));
    m.def("run_json", [](const std::string& cfg) {
        const ExperimentConfig c = config_from(cfg);
        py::gil_scoped_release release;
        return to_json(run_experiment(c)).dump();
    }, py::arg("config_json"));
    m.def("sweep_json", [](const std::string& axis, const std::vector<double>& values, const std::string& cfg) {
        const ExperimentConfig c = config_from(cfg);
        const SweepAxis a = parse_sweep_axis(axis);
        py::gil_scoped_release release;
        return to_json(sweep(a, values, c)).dump();
    }, py::arg("axis"), py::arg("values"), py::arg("config_json"));
    m.def("sweep_csv", [](const std::string& axis, const std::vector<double>& values, const std::string& cfg) {
        const ExperimentConfig c = config_from(cfg);
        const SweepAxis a = parse_sweep_axis(axis);
        py::gil_scoped_release release;
        return to_csv(sweep(a, values, c));
    }, py::arg("axis"), py::arg("values"), py::arg("config_json"));
    m.def("coverage_json", [](std::size_t f, std::size_t n, std::size_t trials, std::size_t draws,
                              std::uint64_t seed) {
        return to_json(coverage_report(f, n, trials, draws, seed)).dump();
    }, py::arg("total_frames"), py::arg("frames"), py::arg("trials"), py::arg("draws") = 10000,
       py::arg("seed") = 0);
}
