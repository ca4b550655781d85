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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trialpack/packer.hpp"
#include "trialpack/sampler.hpp"
#include "trialpack/toymodel.hpp"

namespace trialpack {

/// One logit vector of length D per trial.
using TrialLogits = std::vector<std::vector<double>>;

struct AggregationStrategy {
    enum class Kind { MeanLogits, ConfidenceWeighted, CrossRefine };

    Kind kind = Kind::MeanLogits;
    double epsilon = 1e-8; // entropy floor, ConfidenceWeighted only
    std::size_t k = 2;     // candidate count, CrossRefine only

    static AggregationStrategy mean() { return {}; }
    static AggregationStrategy confidence(double eps = 1e-8) {
        return {Kind::ConfidenceWeighted, eps, 2};
    }
    static AggregationStrategy cross_refine(std::size_t k = 2) { return {Kind::CrossRefine, 1e-8, k}; }
    /// Cross-refinement for two trials, mean logits otherwise.
    static AggregationStrategy default_for(std::size_t trials, std::size_t k = 2);

    /// Throws ConfigError when the strategy cannot run on m trials over D tokens.
    void validate(std::size_t trials, std::size_t vocab) const;
};

std::string to_string(AggregationStrategy::Kind k);
AggregationStrategy::Kind parse_aggregation(const std::string& s);

struct Fused {
    std::vector<double> logits;
    std::size_t token = 0;
};

/// Element-wise average, argmax with lowest-id tie-break.
Fused mean_logits(const TrialLogits& o);

/// Weights 1/max(H_i, eps) normalized to sum 1, with H_i the entropy of
/// softmax(o_i).
Fused confidence_weighted(const TrialLogits& o, double eps = 1e-8);

/// Top-k of o1 (larger value first, then lower id), re-ranked by o2.
std::size_t cross_refine(std::span<const double> o1, std::span<const double> o2, std::size_t k);

/// Indices of the k largest entries, ordered by value then id.
std::vector<std::size_t> top_k(std::span<const double> v, std::size_t k);

std::size_t aggregate(const AggregationStrategy& strategy, const TrialLogits& o);

/// Rows of `logits` at each segment's final position.
TrialLogits segment_final_logits(const Matrix& logits, const PackedSequence& packed);

struct DecodeResult {
    std::vector<TokenId> tokens;
    std::uint64_t pairs = 0; // summed over every forward of the session
};

/// Packs once, then per step: forward under the block-diagonal mask, fuse
/// the m segment-final logit rows, append the fused token to every segment.
/// The stop token is emitted before the loop ends.
DecodeResult decode(const Backend& backend, const std::vector<TrialPlan>& plans,
                    const VideoTokenStream& video, std::span<const TokenId> text,
                    std::size_t steps, const AggregationStrategy& strategy,
                    std::optional<TokenId> stop_token = {});

/// Same loop from an already packed state.
DecodeResult decode_packed(const Backend& backend, PackedSequence packed, std::size_t steps,
                           const AggregationStrategy& strategy,
                           std::optional<TokenId> stop_token = {});

/// Plain greedy decoding of one sequence: argmax of the last row, append,
/// repeat. Shares nothing with the multi-trial path beyond the forward.
std::vector<TokenId> greedy_decode(const Backend& backend, PackedSequence sequence,
                                   std::size_t steps, std::optional<TokenId> stop_token = {});

} // namespace trialpack
