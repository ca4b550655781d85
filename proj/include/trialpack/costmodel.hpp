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
#include <span>
#include <string>
#include <vector>

#include "trialpack/aggregator.hpp"
#include "trialpack/packer.hpp"
#include "trialpack/toymodel.hpp"

namespace trialpack {

struct TheoreticalCosts {
    double base = 0.0;    // L^2
    double multi = 0.0;   // L^2 * sum alpha_i^2
    double speedup = 0.0; // 1 / sum alpha_i^2
    double sum_sq = 0.0;  // sum alpha_i^2
};

TheoreticalCosts theoretical_costs(std::size_t tokens, std::span<const double> alphas);

/// l (l + 1) / 2 score entries for a causal segment of length l.
std::uint64_t causal_pairs(std::uint64_t length);

/// Exact score entries for a block-diagonal causal forward over the given
/// segment lengths, per attention unit (layer x head) times `units`.
std::uint64_t predicted_pairs(std::span<const std::size_t> segment_lengths, std::size_t units = 1);

/// Bytes a packed forward of `length` positions is budgeted at: residual
/// stream, q/k/v, attention output, 4x feed-forward activations, logits,
/// and one score row of the longest segment.
std::uint64_t packed_forward_bytes(std::size_t length, std::size_t longest_segment,
                                   std::size_t model_dim, std::size_t vocab);

struct CostReport {
    std::size_t L = 0;
    std::vector<double> alpha;
    double theoretical_base = 0.0;
    double theoretical_multi = 0.0;
    double theoretical_speedup = 0.0;
    std::uint64_t measured_pairs_base = 0;
    std::uint64_t measured_pairs_multi = 0;
    double tau1 = 0.0; // seconds, baseline first-token latency (median)
    double tau2 = 0.0; // seconds, multi-trial first-token latency (median)
    double measured_speedup = 0.0;
    bool fallback_serial = false;
};

struct MeasureOptions {
    std::size_t repeats = 5;
    /// A packed forward budgeted above this many bytes runs as serial
    /// per-segment forwards instead. 0 disables the fallback.
    std::uint64_t memory_budget_bytes = 0;
    AggregationStrategy strategy = AggregationStrategy::mean();
};

/// Times forward start to first fused token for both sequences. Embedding
/// and sampling happen before the clock starts.
CostReport measure(const Backend& backend, const PackedSequence& baseline,
                   const PackedSequence& multi, std::size_t tokens, std::span<const double> alphas,
                   const MeasureOptions& options = {});

/// Median of a non-empty sample (mean of the middle pair for even sizes).
double median(std::vector<double> samples);

std::string to_json(const CostReport& report);

} // namespace trialpack
