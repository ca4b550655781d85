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

#include "trialpack/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trialpack/error.hpp"

namespace trialpack {

std::string to_string(FrameMethod m) { return m == FrameMethod::Random ? "random" : "uniform"; }

std::string to_string(TokenStrategy s) {
    switch (s) {
    case TokenStrategy::RandTok: return "rand_tok";
    case TokenStrategy::UniTok: return "uni_tok";
    case TokenStrategy::RandFrm: return "rand_frm";
    case TokenStrategy::AttnTop: return "attn_top";
    }
    return "?";
}

FrameMethod parse_frame_method(const std::string& s) {
    if (s == "random") return FrameMethod::Random;
    if (s == "uniform") return FrameMethod::Uniform;
    throw ConfigError("unknown frame_method '" + s + "'");
}

TokenStrategy parse_token_strategy(const std::string& s) {
    if (s == "rand_tok") return TokenStrategy::RandTok;
    if (s == "uni_tok") return TokenStrategy::UniTok;
    if (s == "rand_frm") return TokenStrategy::RandFrm;
    if (s == "attn_top") return TokenStrategy::AttnTop;
    throw ConfigError("unknown token_strategy '" + s + "'");
}

namespace {

bool valid_alpha(double a) { return a > 0.0 && a <= 1.0; }

} // namespace

void SamplerConfig::validate() const {
    if (total_frames == 0) throw ConfigError("sampler: total_frames must be >= 1");
    if (tokens_per_frame == 0) throw ConfigError("sampler: tokens_per_frame must be >= 1");
    if (frames_per_trial == 0 || frames_per_trial > total_frames) {
        throw ConfigError("sampler: frames_per_trial must be in [1, total_frames]");
    }
    if (trials == 0) throw ConfigError("sampler: trials must be >= 1");
    if (alphas.size() != trials) {
        throw ConfigError("sampler: expected " + std::to_string(trials) + " alphas, got " +
                          std::to_string(alphas.size()));
    }
    for (double a : alphas) {
        if (!valid_alpha(a)) throw ConfigError("sampler: every alpha must lie in (0, 1]");
    }
}

std::size_t retained_count(double alpha, std::size_t tokens) {
    return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(tokens) + 1e-9));
}

std::vector<std::size_t> sample_frame_indices(std::size_t total_frames, std::size_t frames,
                                              FrameMethod method, Rng& rng) {
    if (frames > total_frames) {
        throw ContractError("sample_frame_indices: N=" + std::to_string(frames) + " > F=" +
                            std::to_string(total_frames));
    }
    if (method == FrameMethod::Random) return sample_without_replacement(total_frames, frames, rng);
    std::vector<std::size_t> out(frames);
    for (std::size_t j = 0; j < frames; ++j) out[j] = j * total_frames / frames;
    return out;
}

std::vector<std::size_t> subsample_tokens(std::size_t tokens, std::size_t tokens_per_frame,
                                          double alpha, TokenStrategy strategy, Rng& rng,
                                          std::optional<std::span<const double>> attn_scores) {
    if (!valid_alpha(alpha)) throw ContractError("subsample_tokens: alpha must lie in (0, 1]");
    if (tokens_per_frame == 0 || tokens % tokens_per_frame != 0) {
        throw ContractError("subsample_tokens: token count must be a multiple of M");
    }
    const std::size_t count = retained_count(alpha, tokens);

    switch (strategy) {
    case TokenStrategy::RandTok:
        return sample_without_replacement(tokens, count, rng);

    case TokenStrategy::UniTok: {
        std::vector<std::size_t> out(count);
        for (std::size_t j = 0; j < count; ++j) out[j] = j * tokens / count;
        return out;
    }

    case TokenStrategy::RandFrm: {
        const std::size_t frames = tokens / tokens_per_frame;
        const std::size_t needed = (count + tokens_per_frame - 1) / tokens_per_frame;
        std::vector<std::size_t> out;
        out.reserve(needed * tokens_per_frame);
        for (std::size_t f : sample_without_replacement(frames, needed, rng)) {
            for (std::size_t p = 0; p < tokens_per_frame; ++p) out.push_back(f * tokens_per_frame + p);
        }
        out.resize(count); // trims the tail of the last selected block
        return out;
    }

    case TokenStrategy::AttnTop: {
        if (!attn_scores) throw ContractError("subsample_tokens: AttnTop requires attention scores");
        const auto scores = *attn_scores;
        if (scores.size() != tokens) {
            throw ContractError("subsample_tokens: expected " + std::to_string(tokens) +
                                " attention scores, got " + std::to_string(scores.size()));
        }
        std::vector<std::size_t> order(tokens);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count),
                          order.end(), [&](std::size_t a, std::size_t b) {
                              if (scores[a] != scores[b]) return scores[a] > scores[b];
                              return a < b;
                          });
        order.resize(count);
        std::sort(order.begin(), order.end());
        return order;
    }
    }
    throw ContractError("subsample_tokens: unknown strategy");
}

std::vector<TrialPlan> build_trial_plans(const SamplerConfig& cfg, const Rng& rng,
                                         const AttentionScorer& scorer) {
    cfg.validate();
    if (cfg.token_strategy == TokenStrategy::AttnTop && !scorer) {
        throw ContractError("build_trial_plans: AttnTop requires an attention scorer");
    }
    const std::size_t tokens = cfg.tokens_per_trial();
    std::vector<TrialPlan> plans;
    plans.reserve(cfg.trials);
    for (std::size_t i = 0; i < cfg.trials; ++i) {
        const Rng trial = rng.split(i);
        Rng frame_rng = trial.split(0);
        Rng token_rng = trial.split(1);

        TrialPlan plan;
        plan.alpha = cfg.alphas[i];
        if (cfg.reuse_frames && i > 0) {
            plan.frame_indices = plans.front().frame_indices;
        } else {
            plan.frame_indices = sample_frame_indices(cfg.total_frames, cfg.frames_per_trial,
                                                      cfg.frame_method, frame_rng);
        }
        if (cfg.token_strategy == TokenStrategy::AttnTop) {
            const std::vector<double> scores = scorer(plan.frame_indices);
            plan.token_keep = subsample_tokens(tokens, cfg.tokens_per_frame, plan.alpha,
                                               cfg.token_strategy, token_rng,
                                               std::span<const double>(scores));
        } else {
            plan.token_keep = subsample_tokens(tokens, cfg.tokens_per_frame, plan.alpha,
                                               cfg.token_strategy, token_rng);
        }
        plans.push_back(std::move(plan));
    }
    return plans;
}

double closed_form_coverage(std::size_t total_frames, std::size_t frames, std::size_t trials) {
    if (frames >= total_frames) return 1.0;
    const double miss = 1.0 - static_cast<double>(frames) / static_cast<double>(total_frames);
    return 1.0 - std::pow(miss, static_cast<double>(trials));
}

} // namespace trialpack
