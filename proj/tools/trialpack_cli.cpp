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

// trialpack command line: run, sweep, coverage, bench.
//
// Exit codes: 0 success, 2 configuration rejected, 1 runtime failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "trialpack/error.hpp"
#include "trialpack/harness.hpp"
#include "trialpack/plots.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace trialpack;

namespace {

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string format = "json";
    std::string plots = "on";
};

json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path);
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
}

ExperimentConfig resolve(const Common& c, const json& raw) {
    ExperimentConfig cfg = raw.is_null() ? default_experiment() : experiment_from_json(raw);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out_dir.empty()) cfg.out_dir = c.out_dir;
    cfg.validate();
    return cfg;
}

void write_file(const std::string& dir, const std::string& name, const std::string& text) {
    fs::create_directories(dir);
    const fs::path path = fs::path(dir) / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write " + path.string());
    os << text;
    std::cout << "wrote " << path.string() << "\n";
}

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--values: cannot parse '" + item + "'");
        }
    }
    return out;
}

std::vector<double> default_values(SweepAxis axis) {
    switch (axis) {
    case SweepAxis::AlphaGrid: return {0.2, 0.4, 0.6, 0.8, 1.0};
    case SweepAxis::MValues: return {1, 2, 3, 4};
    case SweepAxis::KValues: return {1, 2, 5, 10, 50};
    case SweepAxis::StrategyMatrix: return {};
    }
    return {};
}

void add_common(CLI::App* sub, Common& c, bool with_plots) {
    sub->add_option("--config", c.config_path, "experiment config (JSON)");
    sub->add_option("--seed", c.seed, "override the config seed");
    sub->add_option("--out-dir", c.out_dir, "output directory");
    sub->add_option("--format", c.format, "output format")->check(CLI::IsMember({"json", "csv"}));
    if (with_plots) sub->add_option("--plots", c.plots, "emit SVG plots")->check(CLI::IsMember({"on", "off"}));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-trial packed decoding: experiments, sweeps, coverage and latency bench"};
    app.require_subcommand(1);

    Common run_opts, sweep_opts, cov_opts, bench_opts;
    auto* run = app.add_subcommand("run", "run one experiment");
    add_common(run, run_opts, false);

    auto* sw = app.add_subcommand("sweep", "sweep one axis");
    add_common(sw, sweep_opts, true);
    std::string axis_name;
    std::string values_text;
    sw->add_option("--axis", axis_name, "alpha_grid | m_values | k_values | strategy_matrix");
    sw->add_option("--values", values_text, "comma-separated grid values");

    auto* cov = app.add_subcommand("coverage", "Monte-Carlo key-frame coverage vs closed form");
    add_common(cov, cov_opts, false);
    std::size_t frames = 100, per_trial = 25, trials = 2, draws = 100000;
    cov->add_option("--frames", frames, "total frames F");
    cov->add_option("--per-trial", per_trial, "frames per trial N");
    cov->add_option("--trials", trials, "number of trials m");
    cov->add_option("--draws", draws, "Monte-Carlo draws (>= 10000)");

    auto* bench = app.add_subcommand("bench", "first-token latency, baseline vs packed trials");
    add_common(bench, bench_opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            const json raw = run_opts.config_path.empty() ? json() : read_json_file(run_opts.config_path);
            const ExperimentConfig cfg = resolve(run_opts, raw);
            const Report report = run_experiment(cfg);
            if (run_opts.format == "json") {
                write_file(cfg.out_dir, "report.json", to_json(report).dump(2) + "\n");
            } else {
                write_file(cfg.out_dir, "report.csv", to_csv(report));
            }
            std::cout << "accuracy " << report.accuracy << " over " << cfg.repeats << " instances\n";
        } else if (*sw) {
            const json raw = sweep_opts.config_path.empty() ? json() : read_json_file(sweep_opts.config_path);
            const ExperimentConfig cfg = resolve(sweep_opts, raw);
            std::optional<std::vector<double>> values;
            if (raw.is_object() && raw.contains("sweep")) {
                const json& s = raw["sweep"];
                if (!s.is_object()) throw ConfigError("sweep: expected an object");
                for (auto it = s.begin(); it != s.end(); ++it) {
                    if (it.key() != "axis" && it.key() != "values") {
                        throw ConfigError("sweep: unknown key '" + it.key() + "'");
                    }
                }
                if (axis_name.empty() && s.contains("axis")) axis_name = s["axis"].get<std::string>();
                if (s.contains("values")) values = s["values"].get<std::vector<double>>();
            }
            if (axis_name.empty()) throw ConfigError("sweep: no axis given (--axis or sweep.axis)");
            const SweepAxis axis = parse_sweep_axis(axis_name);
            if (!values_text.empty()) values = parse_values(values_text);
            const SweepTable table = sweep(axis, values.value_or(default_values(axis)), cfg);
            if (sweep_opts.format == "json") {
                write_file(cfg.out_dir, "sweep.json", to_json(table).dump(2) + "\n");
            } else {
                write_file(cfg.out_dir, "sweep.csv", to_csv(table));
            }
            if (sweep_opts.plots == "on") {
                const std::string path = write_sweep_plot(table, cfg.out_dir);
                if (!path.empty()) std::cout << "wrote " << path << "\n";
            }
            std::size_t failed = 0;
            for (const SweepRow& row : table.rows) failed += row.report ? 0 : 1;
            std::cout << table.rows.size() << " points, " << failed << " failed\n";
        } else if (*cov) {
            if (draws < 10000) throw ConfigError("coverage: --draws must be >= 10000");
            if (per_trial == 0 || per_trial > frames || trials == 0) {
                throw ConfigError("coverage: need 1 <= N <= F and m >= 1");
            }
            const std::uint64_t seed = cov_opts.seed.value_or(0);
            const std::string out_dir = cov_opts.out_dir.empty() ? "out" : cov_opts.out_dir;
            const CoverageResult c = coverage_report(frames, per_trial, trials, draws, seed);
            if (cov_opts.format == "json") {
                write_file(out_dir, "coverage.json", to_json(c).dump(2) + "\n");
            } else {
                std::ostringstream os;
                os << "frames,per_trial,trials,draws,hits,empirical,closed_form,z\n"
                   << frames << ',' << per_trial << ',' << trials << ',' << c.draws << ',' << c.hits
                   << ',' << c.empirical << ',' << c.closed_form << ',' << c.z << "\n";
                write_file(out_dir, "coverage.csv", os.str());
            }
            std::cout << "empirical " << c.empirical << " closed form " << c.closed_form << " z "
                      << c.z << "\n";
        } else if (*bench) {
            const json raw = bench_opts.config_path.empty() ? json() : read_json_file(bench_opts.config_path);
            ExperimentConfig cfg = resolve(bench_opts, raw);
            const CostReport cost = run_bench(cfg);
            if (bench_opts.format == "json") {
                json j = json::parse(to_json(cost));
                j["config_hash"] = config_hash(cfg);
                j["latency_window"] = "forward start to first fused token; embedding and sampling excluded";
                write_file(cfg.out_dir, "bench.json", j.dump(2) + "\n");
            } else {
                write_file(cfg.out_dir, "bench.csv", to_csv(cost, config_hash(cfg)));
            }
            std::cout << "tau1 " << cost.tau1 * 1e3 << " ms, tau2 " << cost.tau2 * 1e3
                      << " ms, speedup " << cost.measured_speedup << " (theoretical "
                      << cost.theoretical_speedup << ")\n";
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
