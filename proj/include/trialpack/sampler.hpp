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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trialpack/numkernel.hpp"

namespace trialpack {

enum class FrameMethod { Random, Uniform };

/// How a trial's visual tokens are thinned to a retention ratio.
enum class TokenStrategy {
    RandTok, // uniform random subset of token positions
    UniTok,  // deterministic stride over token positions
    RandFrm, // whole frames kept or dropped together
    AttnTop, // highest caller-supplied attention scores
};

std::string to_string(FrameMethod m);
std::string to_string(TokenStrategy s);
FrameMethod parse_frame_method(const std::string& s);
TokenStrategy parse_token_strategy(const std::string& s);

struct SamplerConfig {
    std::size_t total_frames = 256;     // F
    std::size_t tokens_per_frame = 16;  // M
    std::size_t frames_per_trial = 64;  // N
    std::size_t trials = 2;             // m
    std::vector<double> alphas{0.5, 0.3};
    FrameMethod frame_method = FrameMethod::Random;
    TokenStrategy token_strategy = TokenStrategy::RandTok;
    /// When set every trial sees the first trial's frames; token draws stay independent.
    bool reuse_frames = false;

    std::size_t tokens_per_trial() const { return frames_per_trial * tokens_per_frame; }
    /// Throws ConfigError describing the first violated invariant.
    void validate() const;
};

struct TrialPlan {
    std::vector<std::size_t> frame_indices; // ascending, distinct, in [0, F)
    std::vector<std::size_t> token_keep;    // ascending, distinct, in [0, N*M)
    double alpha = 1.0;
};

/// floor(alpha * L), guarded against products like 0.3 * 10 landing a hair
/// below an integer.
std::size_t retained_count(double alpha, std::size_t tokens);

std::vector<std::size_t> sample_frame_indices(std::size_t total_frames, std::size_t frames,
                                              FrameMethod method, Rng& rng);

/// Keeps floor(alpha * tokens) ascending indices out of `tokens = N * M`.
/// RandFrm picks ceil(count / M) whole frames and trims the tail of the last
/// one when count is not frame-aligned.
std::vector<std::size_t> subsample_tokens(std::size_t tokens, std::size_t tokens_per_frame,
                                          double alpha, TokenStrategy strategy, Rng& rng,
                                          std::optional<std::span<const double>> attn_scores = {});

/// Produces attention scores (length N*M) for a trial's frames; needed only
/// by TokenStrategy::AttnTop.
using AttentionScorer = std::function<std::vector<double>(const std::vector<std::size_t>&)>;

/// One plan per trial. Trial i draws frames from rng.split(i).split(0) and
/// tokens from rng.split(i).split(1), so trial i is the same whatever m is.
std::vector<TrialPlan> build_trial_plans(const SamplerConfig& cfg, const Rng& rng,
                                         const AttentionScorer& scorer = {});

/// Probability that at least one of m independent N-of-F draws contains a
/// fixed frame: 1 - (1 - N/F)^m.
double closed_form_coverage(std::size_t total_frames, std::size_t frames, std::size_t trials);

} // namespace trialpack
