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

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "trialpack/aggregator.hpp"
#include "trialpack/costmodel.hpp"
#include "trialpack/sampler.hpp"
#include "trialpack/toymodel.hpp"

namespace trialpack {

/// Needle-in-a-haystack instance: one or more key frames carry the reserved
/// needle direction and the answer is a single token id.
struct SyntheticTask {
    VideoTokenStream video;
    std::vector<std::size_t> needle_frames; // ascending
    std::vector<double> needle_direction;
    std::vector<TokenId> question;
    TokenId answer = 0;
    std::uint64_t noise_seed = 0;
    double sigma = 0.0;
};

struct TaskParams {
    std::size_t frames = 256;          // F
    std::size_t tokens_per_frame = 16; // M
    std::size_t needle_count = 1;
    double sigma = 0.1; // probe noise scale
    double beta = 1.0;  // probe gain
    std::size_t question_len = 4;
};

SyntheticTask gen_task(const TaskParams& params, std::uint64_t seed, std::size_t model_dim,
                       std::size_t vocab);

enum class BackendChoice { NeedleProbe, SeededTransformer };

struct ExperimentConfig {
    SamplerConfig sampler;
    ModelConfig model;
    AggregationStrategy strategy = AggregationStrategy::cross_refine(2);
    TaskParams task;
    BackendChoice backend = BackendChoice::NeedleProbe;
    std::size_t repeats = 200;
    std::size_t decode_steps = 1;
    std::uint64_t seed = 0;
    /// Wall-clock measurement is opt-in; without it every output is a pure
    /// function of (config, seed).
    bool timing = false;
    std::size_t bench_repeats = 5;
    std::uint64_t memory_budget_bytes = 0;
    std::string out_dir = "out";

    /// Cross-field checks; throws ConfigError.
    void validate() const;
};

/// Desk-scale defaults: F=256, M=16, N=64, one needle, D=64, sigma=0.1 beta,
/// m=2 with alpha=(0.5, 0.3) and cross-refinement k=2.
ExperimentConfig default_experiment();

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Strict parse: unknown keys and type mismatches raise ConfigError.
/// Missing keys keep their defaults.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::string& path);

/// FNV-1a of the canonical config JSON, 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct InstanceRecord {
    std::size_t index = 0;
    TokenId answer = 0;
    std::vector<std::size_t> needle_frames;
    std::vector<bool> trial_covered; // a needle token survived in segment i
    std::vector<TokenId> decoded;
    bool correct = false;
};

struct Report {
    std::string config_hash;
    ExperimentConfig config;
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::optional<double> closed_form_coverage; // single-needle tasks only
    CostReport cost;
    bool timed = false;
    std::vector<InstanceRecord> instances;
};

/// Runs cfg.repeats independent task instances; instance r draws everything
/// from Rng(cfg.seed).split(r). Accuracy is first-token exact match.
Report run_experiment(const ExperimentConfig& cfg);

nlohmann::json to_json(const Report& report);

enum class SweepAxis { AlphaGrid, MValues, KValues, StrategyMatrix };
std::string to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& s);

struct SweepRow {
    std::size_t index = 0;
    std::string axis_value;
    std::vector<double> numeric; // alpha pair, m or k; empty for named settings
    std::optional<Report> report;
    std::string error;
};

struct SweepTable {
    SweepAxis axis = SweepAxis::AlphaGrid;
    std::vector<SweepRow> rows;
};

/// Named rows of the strategy matrix, in emission order.
std::vector<std::string> strategy_matrix_settings();

/// Applies a strategy-matrix setting ("rand-tok-m2", "agg-mean", ...) to cfg.
ExperimentConfig apply_setting(ExperimentConfig cfg, const std::string& setting);

/// One point per grid value (alpha_grid uses values x values). A failing
/// point is recorded in its row and the sweep moves on.
SweepTable sweep(SweepAxis axis, const std::vector<double>& values, const ExperimentConfig& base);

std::vector<std::string> csv_header();
std::string csv_row(const Report& report, const std::string& axis, const std::string& axis_value,
                    const std::string& error = "");
std::string to_csv(const SweepTable& table);
std::string to_csv(const Report& report);
/// Bench row: timing columns filled, accuracy left empty.
std::string to_csv(const CostReport& cost, const std::string& config_hash);
nlohmann::json to_json(const SweepTable& table);

struct CoverageResult {
    std::size_t draws = 0;
    std::size_t hits = 0;
    double empirical = 0.0;
    double closed_form = 0.0;
    double z = 0.0;
};

/// Monte-Carlo hit rate of a uniformly placed key frame against m random
/// N-of-F trials, compared to 1 - (1 - N/F)^m.
CoverageResult coverage_report(std::size_t total_frames, std::size_t frames, std::size_t trials,
                               std::size_t draws, std::uint64_t seed);
nlohmann::json to_json(const CoverageResult& c);

/// Wall-clock comparison of the baseline single sequence against the packed
/// trials of instance 0, on the configured model.
CostReport run_bench(const ExperimentConfig& cfg);

} // namespace trialpack
