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

#include "trialpack/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include "trialpack/error.hpp"

namespace trialpack {

using nlohmann::json;

// ---------------------------------------------------------------- tasks

SyntheticTask gen_task(const TaskParams& params, std::uint64_t seed, std::size_t model_dim,
                       std::size_t vocab) {
    if (params.needle_count > params.frames) {
        throw ContractError("gen_task: needle_count exceeds frame count");
    }
    const Rng root(seed);
    Rng needle_rng = root.split(1);
    Rng answer_rng = root.split(3);
    Rng noise_rng = root.split(4);

    SyntheticTask task;
    task.needle_frames = sample_without_replacement(params.frames, params.needle_count, needle_rng);
    StreamSpec spec{params.frames, params.tokens_per_frame, task.needle_frames};
    const Rng embed_rng = root.split(2);
    task.video = embed_frames(spec, model_dim, embed_rng);
    task.needle_direction = needle_direction(model_dim, embed_rng);
    task.answer = static_cast<TokenId>(answer_rng.below(vocab));
    for (std::size_t i = 0; i < params.question_len; ++i) {
        task.question.push_back(static_cast<TokenId>((7 * i + 3) % vocab));
    }
    task.noise_seed = noise_rng.next_u64();
    task.sigma = params.sigma;
    return task;
}

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
    sampler.validate();
    model.validate();
    if (sampler.total_frames != task.frames || sampler.tokens_per_frame != task.tokens_per_frame) {
        throw ConfigError("sampler frame geometry must match task (F, M)");
    }
    if (task.needle_count > task.frames) throw ConfigError("task: needle_count exceeds frames");
    if (!(task.beta > 0.0)) throw ConfigError("task: beta must be positive");
    if (!(task.sigma >= 0.0) || task.sigma >= task.beta) {
        throw ConfigError("task: sigma must satisfy 0 <= sigma < beta");
    }
    strategy.validate(sampler.trials, model.vocab);
    if (repeats == 0) throw ConfigError("repeats must be >= 1");
    if (decode_steps == 0) throw ConfigError("decode_steps must be >= 1");
    if (bench_repeats < 3) throw ConfigError("bench_repeats must be >= 3");

    const std::size_t tokens = sampler.tokens_per_trial();
    std::size_t longest = 0;
    for (double a : sampler.alphas) longest += retained_count(a, tokens);
    longest += sampler.trials * (task.question_len + decode_steps - 1);
    if (longest > model.max_positions) {
        throw ConfigError("packed length " + std::to_string(longest) + " exceeds max_positions " +
                          std::to_string(model.max_positions));
    }
    if (timing && tokens + task.question_len > model.max_positions) {
        throw ConfigError("baseline sequence exceeds max_positions");
    }
}

ExperimentConfig default_experiment() {
    ExperimentConfig cfg;
    cfg.task = TaskParams{};
    cfg.sampler.total_frames = cfg.task.frames;
    cfg.sampler.tokens_per_frame = cfg.task.tokens_per_frame;
    cfg.sampler.frames_per_trial = 64;
    cfg.sampler.trials = 2;
    cfg.sampler.alphas = {0.5, 0.3};
    cfg.strategy = AggregationStrategy::cross_refine(2);
    return cfg;
}

namespace {

std::string backend_name(BackendChoice b) {
    return b == BackendChoice::NeedleProbe ? "needle_probe" : "seeded_transformer";
}

BackendChoice parse_backend(const std::string& s) {
    if (s == "needle_probe") return BackendChoice::NeedleProbe;
    if (s == "seeded_transformer") return BackendChoice::SeededTransformer;
    throw ConfigError("unknown backend '" + s + "'");
}

/// Reads the keys of one JSON object, rejecting anything not consumed.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
    }
    ~ObjectReader() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.contains(it.key())) {
                throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
            }
        }
    }

    const json* find(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void count(const std::string& key, std::size_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) throw ConfigError(path(key) + ": expected a non-negative integer");
            out = v->get<std::size_t>();
        }
    }
    void u64(const std::string& key, std::uint64_t& out) {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) throw ConfigError(path(key) + ": expected a non-negative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void number(const std::string& key, double& out) {
        if (const json* v = find(key)) {
            if (!v->is_number()) throw ConfigError(path(key) + ": expected a number");
            out = v->get<double>();
        }
    }
    void boolean(const std::string& key, bool& out) {
        if (const json* v = find(key)) {
            if (!v->is_boolean()) throw ConfigError(path(key) + ": expected a boolean");
            out = v->get<bool>();
        }
    }
    void string(const std::string& key, std::string& out) {
        if (const json* v = find(key)) {
            if (!v->is_string()) throw ConfigError(path(key) + ": expected a string");
            out = v->get<std::string>();
        }
    }
    std::string path(const std::string& key) const { return where_ + "." + key; }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

} // namespace

json to_json(const ExperimentConfig& c) {
    return {
        {"sampler",
         {{"total_frames", c.sampler.total_frames},
          {"tokens_per_frame", c.sampler.tokens_per_frame},
          {"frames_per_trial", c.sampler.frames_per_trial},
          {"trials", c.sampler.trials},
          {"alphas", c.sampler.alphas},
          {"frame_method", to_string(c.sampler.frame_method)},
          {"token_strategy", to_string(c.sampler.token_strategy)},
          {"reuse_frames", c.sampler.reuse_frames}}},
        {"model",
         {{"layers", c.model.layers},
          {"model_dim", c.model.model_dim},
          {"heads", c.model.heads},
          {"vocab", c.model.vocab},
          {"max_positions", c.model.max_positions},
          {"init_seed", c.model.init_seed}}},
        {"strategy",
         {{"kind", to_string(c.strategy.kind)}, {"k", c.strategy.k}, {"epsilon", c.strategy.epsilon}}},
        {"task",
         {{"frames", c.task.frames},
          {"tokens_per_frame", c.task.tokens_per_frame},
          {"needle_count", c.task.needle_count},
          {"sigma", c.task.sigma},
          {"beta", c.task.beta},
          {"question_len", c.task.question_len}}},
        {"backend", backend_name(c.backend)},
        {"repeats", c.repeats},
        {"decode_steps", c.decode_steps},
        {"seed", c.seed},
        {"timing", c.timing},
        {"bench_repeats", c.bench_repeats},
        {"memory_budget_bytes", c.memory_budget_bytes},
        {"output", {{"out_dir", c.out_dir}}},
    };
}

ExperimentConfig experiment_from_json(const json& j) {
    ExperimentConfig c = default_experiment();
    try {
        ObjectReader root(j, "config");
        bool sampler_frames_given = false;
        bool sampler_tokens_given = false;
        std::size_t sampler_frames = 0, sampler_tokens = 0;

        if (const json* t = root.find("task")) {
            ObjectReader r(*t, "task");
            r.count("frames", c.task.frames);
            r.count("tokens_per_frame", c.task.tokens_per_frame);
            r.count("needle_count", c.task.needle_count);
            r.number("sigma", c.task.sigma);
            r.number("beta", c.task.beta);
            r.count("question_len", c.task.question_len);
        }
        c.sampler.total_frames = c.task.frames;
        c.sampler.tokens_per_frame = c.task.tokens_per_frame;

        if (const json* s = root.find("sampler")) {
            ObjectReader r(*s, "sampler");
            if (r.find("total_frames")) {
                sampler_frames_given = true;
                r.count("total_frames", sampler_frames);
            }
            if (r.find("tokens_per_frame")) {
                sampler_tokens_given = true;
                r.count("tokens_per_frame", sampler_tokens);
            }
            r.count("frames_per_trial", c.sampler.frames_per_trial);
            r.count("trials", c.sampler.trials);
            if (const json* a = r.find("alphas")) {
                if (!a->is_array()) throw ConfigError("sampler.alphas: expected an array");
                c.sampler.alphas.clear();
                for (const json& v : *a) {
                    if (!v.is_number()) throw ConfigError("sampler.alphas: expected numbers");
                    c.sampler.alphas.push_back(v.get<double>());
                }
            }
            std::string method = to_string(c.sampler.frame_method);
            r.string("frame_method", method);
            c.sampler.frame_method = parse_frame_method(method);
            std::string strat = to_string(c.sampler.token_strategy);
            r.string("token_strategy", strat);
            c.sampler.token_strategy = parse_token_strategy(strat);
            r.boolean("reuse_frames", c.sampler.reuse_frames);
        }
        if (sampler_frames_given && sampler_frames != c.task.frames) {
            throw ConfigError("sampler.total_frames disagrees with task.frames");
        }
        if (sampler_tokens_given && sampler_tokens != c.task.tokens_per_frame) {
            throw ConfigError("sampler.tokens_per_frame disagrees with task.tokens_per_frame");
        }

        if (const json* m = root.find("model")) {
            ObjectReader r(*m, "model");
            r.count("layers", c.model.layers);
            r.count("model_dim", c.model.model_dim);
            r.count("heads", c.model.heads);
            r.count("vocab", c.model.vocab);
            r.count("max_positions", c.model.max_positions);
            r.u64("init_seed", c.model.init_seed);
        }
        if (const json* s = root.find("strategy")) {
            ObjectReader r(*s, "strategy");
            std::string kind = to_string(c.strategy.kind);
            r.string("kind", kind);
            c.strategy.kind = parse_aggregation(kind);
            r.count("k", c.strategy.k);
            r.number("epsilon", c.strategy.epsilon);
        }
        std::string backend = backend_name(c.backend);
        root.string("backend", backend);
        c.backend = parse_backend(backend);
        root.count("repeats", c.repeats);
        root.count("decode_steps", c.decode_steps);
        root.u64("seed", c.seed);
        root.boolean("timing", c.timing);
        root.count("bench_repeats", c.bench_repeats);
        root.u64("memory_budget_bytes", c.memory_budget_bytes);
        if (const json* o = root.find("output")) {
            ObjectReader r(*o, "output");
            r.string("out_dir", c.out_dir);
        }
        root.find("sweep"); // consumed by the CLI
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

ExperimentConfig load_experiment(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return experiment_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
    json j = to_json(cfg);
    j.erase("output");
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// ---------------------------------------------------------------- experiments

namespace {

Backend probe_for(const SyntheticTask& task, const ExperimentConfig& cfg) {
    NeedleProbeConfig probe;
    probe.answer = task.answer;
    probe.gain = cfg.task.beta;
    probe.noise = cfg.task.sigma;
    probe.seed = task.noise_seed;
    probe.needle_direction = task.needle_direction;
    probe.vocab = cfg.model.vocab;
    probe.max_positions = cfg.model.max_positions;
    return Backend::needle_probe(std::move(probe));
}

/// Scores every token of a trial's frames by the attention it receives in a
/// preliminary full forward of <frames, question>.
AttentionScorer make_scorer(const Backend& scorer, const SyntheticTask& task) {
    return [&scorer, &task](const std::vector<std::size_t>& frames) {
        TrialPlan full;
        full.frame_indices = frames;
        const std::size_t tokens = frames.size() * task.video.tokens_per_frame;
        full.token_keep.resize(tokens);
        for (std::size_t i = 0; i < tokens; ++i) full.token_keep[i] = i;
        const PackedSequence seq = pack({full}, task.video, task.question);
        std::vector<double> scores = attention_received_scores(
            scorer, seq, AttentionMaskSpec::block_diagonal_causal(seq));
        scores.resize(tokens);
        return scores;
    };
}

std::vector<bool> covered_trials(const std::vector<TrialPlan>& plans, const SyntheticTask& task) {
    const std::set<std::size_t> needles(task.needle_frames.begin(), task.needle_frames.end());
    const std::size_t m_tokens = task.video.tokens_per_frame;
    std::vector<bool> out;
    for (const TrialPlan& plan : plans) {
        bool hit = false;
        for (std::size_t j : plan.token_keep) {
            if (needles.contains(plan.frame_indices[j / m_tokens])) {
                hit = true;
                break;
            }
        }
        out.push_back(hit);
    }
    return out;
}

std::vector<std::size_t> planned_segment_lengths(const ExperimentConfig& cfg) {
    std::vector<std::size_t> out;
    for (double a : cfg.sampler.alphas) {
        out.push_back(retained_count(a, cfg.sampler.tokens_per_trial()) + cfg.task.question_len);
    }
    return out;
}

void fill_theory(CostReport& cost, const ExperimentConfig& cfg, std::size_t units) {
    const std::size_t tokens = cfg.sampler.tokens_per_trial();
    const TheoreticalCosts t = theoretical_costs(tokens, cfg.sampler.alphas);
    cost.L = tokens;
    cost.alpha = cfg.sampler.alphas;
    cost.theoretical_base = t.base;
    cost.theoretical_multi = t.multi;
    cost.theoretical_speedup = t.speedup;
    const std::vector<std::size_t> base_len{tokens + cfg.task.question_len};
    cost.measured_pairs_base = predicted_pairs(base_len, units);
    cost.measured_pairs_multi = predicted_pairs(planned_segment_lengths(cfg), units);
}

PackedSequence baseline_sequence(const std::vector<TrialPlan>& plans, const SyntheticTask& task) {
    TrialPlan full;
    full.frame_indices = plans.front().frame_indices;
    const std::size_t tokens = full.frame_indices.size() * task.video.tokens_per_frame;
    full.token_keep.resize(tokens);
    for (std::size_t i = 0; i < tokens; ++i) full.token_keep[i] = i;
    return pack({full}, task.video, task.question);
}

CostReport timed_cost(const Backend& backend, const ExperimentConfig& cfg,
                      const SyntheticTask& task, const std::vector<TrialPlan>& plans) {
    MeasureOptions opts;
    opts.repeats = cfg.bench_repeats;
    opts.memory_budget_bytes = cfg.memory_budget_bytes;
    opts.strategy = cfg.strategy;
    return measure(backend, baseline_sequence(plans, task), pack(plans, task.video, task.question),
                   cfg.sampler.tokens_per_trial(), cfg.sampler.alphas, opts);
}

} // namespace

Report run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    Report report;
    report.config = cfg;
    report.config_hash = config_hash(cfg);
    if (cfg.task.needle_count == 1) {
        report.closed_form_coverage = closed_form_coverage(
            cfg.sampler.total_frames, cfg.sampler.frames_per_trial, cfg.sampler.trials);
    }

    std::optional<Backend> transformer;
    if (cfg.backend == BackendChoice::SeededTransformer ||
        cfg.sampler.token_strategy == TokenStrategy::AttnTop) {
        transformer = build_model(cfg.model);
    }
    const std::size_t units =
        cfg.backend == BackendChoice::SeededTransformer ? cfg.model.layers * cfg.model.heads : 1;
    fill_theory(report.cost, cfg, units);

    const Rng root(cfg.seed);
    for (std::size_t r = 0; r < cfg.repeats; ++r) {
        const Rng inst = root.split(r);
        const SyntheticTask task =
            gen_task(cfg.task, inst.split(0).next_u64(), cfg.model.model_dim, cfg.model.vocab);
        AttentionScorer scorer;
        if (cfg.sampler.token_strategy == TokenStrategy::AttnTop) scorer = make_scorer(*transformer, task);
        const std::vector<TrialPlan> plans = build_trial_plans(cfg.sampler, inst.split(1), scorer);

        const Backend backend =
            cfg.backend == BackendChoice::NeedleProbe ? probe_for(task, cfg) : *transformer;
        const DecodeResult out =
            decode(backend, plans, task.video, task.question, cfg.decode_steps, cfg.strategy);

        InstanceRecord rec;
        rec.index = r;
        rec.answer = task.answer;
        rec.needle_frames = task.needle_frames;
        rec.trial_covered = covered_trials(plans, task);
        rec.decoded = out.tokens;
        rec.correct = !out.tokens.empty() && out.tokens.front() == task.answer;
        report.correct += rec.correct ? 1 : 0;
        report.instances.push_back(std::move(rec));

        if (r == 0 && cfg.timing) {
            const CostReport timed = timed_cost(backend, cfg, task, plans);
            report.cost.tau1 = timed.tau1;
            report.cost.tau2 = timed.tau2;
            report.cost.measured_speedup = timed.measured_speedup;
            report.cost.fallback_serial = timed.fallback_serial;
            report.timed = true;
        }
    }
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(cfg.repeats);
    return report;
}

CostReport run_bench(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.timing = true;
    c.validate();
    const Backend model = build_model(c.model);
    const Rng inst = Rng(c.seed).split(0);
    const SyntheticTask task = gen_task(c.task, inst.split(0).next_u64(), c.model.model_dim, c.model.vocab);
    AttentionScorer scorer;
    if (c.sampler.token_strategy == TokenStrategy::AttnTop) scorer = make_scorer(model, task);
    const std::vector<TrialPlan> plans = build_trial_plans(c.sampler, inst.split(1), scorer);
    return timed_cost(model, c, task, plans);
}

namespace {

json cost_json(const CostReport& r, bool timed) {
    auto timing = [&](double v) { return timed ? json(v) : json(nullptr); };
    return {{"L", r.L},
            {"alpha", r.alpha},
            {"theoretical_base", r.theoretical_base},
            {"theoretical_multi", r.theoretical_multi},
            {"theoretical_speedup", r.theoretical_speedup},
            {"measured_pairs_base", r.measured_pairs_base},
            {"measured_pairs_multi", r.measured_pairs_multi},
            {"tau1", timing(r.tau1)},
            {"tau2", timing(r.tau2)},
            {"measured_speedup", timing(r.measured_speedup)},
            {"fallback_serial", r.fallback_serial}};
}

} // namespace

json to_json(const Report& report) {
    json instances = json::array();
    for (const InstanceRecord& rec : report.instances) {
        instances.push_back({{"index", rec.index},
                             {"answer", rec.answer},
                             {"needle_frames", rec.needle_frames},
                             {"trial_covered", rec.trial_covered},
                             {"decoded", rec.decoded},
                             {"correct", rec.correct}});
    }
    return {{"config_hash", report.config_hash},
            {"config", to_json(report.config)},
            {"accuracy", report.accuracy},
            {"correct", report.correct},
            {"repeats", report.config.repeats},
            {"closed_form_coverage", report.closed_form_coverage ? json(*report.closed_form_coverage)
                                                                 : json(nullptr)},
            {"cost", cost_json(report.cost, report.timed)},
            {"latency_window", "forward start to first fused token; embedding and sampling excluded"},
            {"instances", instances}};
}

// ---------------------------------------------------------------- sweeps

std::string to_string(SweepAxis axis) {
    switch (axis) {
    case SweepAxis::AlphaGrid: return "alpha_grid";
    case SweepAxis::MValues: return "m_values";
    case SweepAxis::KValues: return "k_values";
    case SweepAxis::StrategyMatrix: return "strategy_matrix";
    }
    return "?";
}

SweepAxis parse_sweep_axis(const std::string& s) {
    if (s == "alpha_grid") return SweepAxis::AlphaGrid;
    if (s == "m_values") return SweepAxis::MValues;
    if (s == "k_values") return SweepAxis::KValues;
    if (s == "strategy_matrix") return SweepAxis::StrategyMatrix;
    throw ConfigError("unknown sweep axis '" + s + "'");
}

std::vector<std::string> strategy_matrix_settings() {
    return {"rand-tok-m2", "rand-tok-m1", "uni-tok-m2",    "uni-tok-m1",     "rand-frm-m2",
            "rand-attn-m2", "agg-mean",   "agg-confidence", "agg-cross-refine"};
}

ExperimentConfig apply_setting(ExperimentConfig cfg, const std::string& setting) {
    if (setting.rfind("agg-", 0) == 0) {
        cfg.sampler.frame_method = FrameMethod::Random;
        cfg.sampler.token_strategy = TokenStrategy::RandTok;
        cfg.sampler.reuse_frames = false;
        const std::size_t k = cfg.strategy.k;
        if (setting == "agg-mean") {
            cfg.strategy = AggregationStrategy::mean();
        } else if (setting == "agg-confidence") {
            cfg.strategy = AggregationStrategy::confidence();
        } else if (setting == "agg-cross-refine") {
            cfg.strategy = AggregationStrategy::cross_refine(k);
        } else {
            throw ConfigError("unknown setting '" + setting + "'");
        }
        return cfg;
    }
    // <frames>-<tokens>-<reuse>
    std::istringstream is(setting);
    std::string frames, tokens, reuse;
    if (!std::getline(is, frames, '-') || !std::getline(is, tokens, '-') || !std::getline(is, reuse)) {
        throw ConfigError("malformed setting '" + setting + "'");
    }
    if (frames == "rand") cfg.sampler.frame_method = FrameMethod::Random;
    else if (frames == "uni") cfg.sampler.frame_method = FrameMethod::Uniform;
    else throw ConfigError("unknown frame method in '" + setting + "'");
    if (tokens == "tok") cfg.sampler.token_strategy = TokenStrategy::RandTok;
    else if (tokens == "frm") cfg.sampler.token_strategy = TokenStrategy::RandFrm;
    else if (tokens == "attn") cfg.sampler.token_strategy = TokenStrategy::AttnTop;
    else throw ConfigError("unknown token strategy in '" + setting + "'");
    if (reuse == "m1") cfg.sampler.reuse_frames = true;
    else if (reuse == "m2") cfg.sampler.reuse_frames = false;
    else throw ConfigError("unknown reuse mode in '" + setting + "'");
    return cfg;
}

namespace {

std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

SweepRow run_point(std::size_t index, std::string value, std::vector<double> numeric,
                   const std::function<ExperimentConfig()>& make) {
    SweepRow row;
    row.index = index;
    row.axis_value = std::move(value);
    row.numeric = std::move(numeric);
    try {
        row.report = run_experiment(make());
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

} // namespace

SweepTable sweep(SweepAxis axis, const std::vector<double>& values, const ExperimentConfig& base) {
    SweepTable table;
    table.axis = axis;
    std::size_t index = 0;
    switch (axis) {
    case SweepAxis::AlphaGrid:
        for (double a1 : values) {
            for (double a2 : values) {
                table.rows.push_back(run_point(index++, format_number(a1) + ";" + format_number(a2),
                                               {a1, a2}, [&] {
                                                   ExperimentConfig c = base;
                                                   c.sampler.trials = 2;
                                                   c.sampler.alphas = {a1, a2};
                                                   return c;
                                               }));
            }
        }
        break;
    case SweepAxis::MValues:
        for (double mv : values) {
            table.rows.push_back(run_point(index++, format_number(mv), {mv}, [&] {
                if (mv < 1 || mv != std::floor(mv)) throw ConfigError("m must be a positive integer");
                ExperimentConfig c = base;
                c.sampler.trials = static_cast<std::size_t>(mv);
                c.sampler.alphas.assign(c.sampler.trials, base.sampler.alphas.front());
                c.strategy = AggregationStrategy::mean();
                return c;
            }));
        }
        break;
    case SweepAxis::KValues:
        for (double kv : values) {
            table.rows.push_back(run_point(index++, format_number(kv), {kv}, [&] {
                if (kv < 1 || kv != std::floor(kv)) throw ConfigError("k must be a positive integer");
                ExperimentConfig c = base;
                c.strategy = AggregationStrategy::cross_refine(static_cast<std::size_t>(kv));
                return c;
            }));
        }
        break;
    case SweepAxis::StrategyMatrix:
        for (const std::string& s : strategy_matrix_settings()) {
            table.rows.push_back(run_point(index++, s, {}, [&] { return apply_setting(base, s); }));
        }
        break;
    }
    return table;
}

std::vector<std::string> csv_header() {
    return {"config_hash",         "axis",           "axis_value",  "accuracy",
            "theoretical_speedup", "measured_speedup", "pairs_base", "pairs_multi",
            "wall_ms_base",        "wall_ms_t3s",    "fallback_serial", "error"};
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string join_csv(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += csv_escape(cells[i]);
    }
    return out + "\n";
}

} // namespace

std::string csv_row(const Report& report, const std::string& axis, const std::string& axis_value,
                    const std::string& error) {
    const CostReport& c = report.cost;
    auto timed = [&](double v) { return report.timed ? format_number(v) : std::string(); };
    return join_csv({report.config_hash, axis, axis_value, format_number(report.accuracy),
                     format_number(c.theoretical_speedup), timed(c.measured_speedup),
                     std::to_string(c.measured_pairs_base), std::to_string(c.measured_pairs_multi),
                     timed(c.tau1 * 1e3), timed(c.tau2 * 1e3), c.fallback_serial ? "true" : "false",
                     error});
}

std::string to_csv(const CostReport& c, const std::string& hash) {
    return join_csv(csv_header()) +
           join_csv({hash, "bench", "", "", format_number(c.theoretical_speedup),
                     format_number(c.measured_speedup), std::to_string(c.measured_pairs_base),
                     std::to_string(c.measured_pairs_multi), format_number(c.tau1 * 1e3),
                     format_number(c.tau2 * 1e3), c.fallback_serial ? "true" : "false", ""});
}

std::string to_csv(const Report& report) { return join_csv(csv_header()) + csv_row(report, "none", ""); }

std::string to_csv(const SweepTable& table) {
    std::string out = join_csv(csv_header());
    const std::string axis = to_string(table.axis);
    for (const SweepRow& row : table.rows) {
        if (row.report) {
            out += csv_row(*row.report, axis, row.axis_value);
        } else {
            std::vector<std::string> cells(csv_header().size());
            cells[1] = axis;
            cells[2] = row.axis_value;
            cells.back() = row.error;
            out += join_csv(cells);
        }
    }
    return out;
}

json to_json(const SweepTable& table) {
    json rows = json::array();
    for (const SweepRow& row : table.rows) {
        json r = {{"index", row.index}, {"axis_value", row.axis_value}};
        if (row.report) {
            json rep = to_json(*row.report);
            rep.erase("instances");
            r["report"] = rep;
        } else {
            r["error"] = row.error;
        }
        rows.push_back(r);
    }
    return {{"axis", to_string(table.axis)}, {"rows", rows}};
}

// ---------------------------------------------------------------- coverage

CoverageResult coverage_report(std::size_t total_frames, std::size_t frames, std::size_t trials,
                               std::size_t draws, std::uint64_t seed) {
    if (draws < 10000) throw ContractError("coverage_report: draws must be >= 10000");
    SamplerConfig cfg;
    cfg.total_frames = total_frames;
    cfg.tokens_per_frame = 1;
    cfg.frames_per_trial = frames;
    cfg.trials = trials;
    cfg.alphas.assign(trials, 1.0);
    cfg.frame_method = FrameMethod::Random;
    cfg.token_strategy = TokenStrategy::UniTok;
    cfg.validate();

    const Rng root(seed);
    CoverageResult res;
    res.draws = draws;
    for (std::size_t d = 0; d < draws; ++d) {
        const Rng draw = root.split(d);
        Rng key_rng = draw.split(0);
        const std::size_t key = key_rng.below(total_frames);
        bool hit = false;
        for (const TrialPlan& plan : build_trial_plans(cfg, draw.split(1))) {
            if (std::binary_search(plan.frame_indices.begin(), plan.frame_indices.end(), key)) {
                hit = true;
                break;
            }
        }
        res.hits += hit ? 1 : 0;
    }
    res.empirical = static_cast<double>(res.hits) / static_cast<double>(draws);
    res.closed_form = closed_form_coverage(total_frames, frames, trials);
    const double var = res.closed_form * (1.0 - res.closed_form) / static_cast<double>(draws);
    if (var > 0.0) {
        res.z = (res.empirical - res.closed_form) / std::sqrt(var);
    } else {
        res.z = res.empirical == res.closed_form ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return res;
}

json to_json(const CoverageResult& c) {
    return {{"draws", c.draws},
            {"hits", c.hits},
            {"empirical", c.empirical},
            {"closed_form", c.closed_form},
            {"z", c.z}};
}

} // namespace trialpack
