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

#include "trialpack/aggregator.hpp"

#include <algorithm>
#include <numeric>

#include "trialpack/error.hpp"

namespace trialpack {

AggregationStrategy AggregationStrategy::default_for(std::size_t trials, std::size_t k) {
    return trials == 2 ? cross_refine(k) : mean();
}

void AggregationStrategy::validate(std::size_t trials, std::size_t vocab) const {
    if (trials == 0) throw ConfigError("aggregation: need at least one trial");
    switch (kind) {
    case Kind::MeanLogits: return;
    case Kind::ConfidenceWeighted:
        if (!(epsilon > 0.0)) throw ConfigError("aggregation: epsilon must be positive");
        return;
    case Kind::CrossRefine:
        if (trials != 2) {
            throw ConfigError("aggregation: cross_refine needs exactly 2 trials, got " +
                              std::to_string(trials));
        }
        if (k < 1 || k > vocab) throw ConfigError("aggregation: k must lie in [1, D]");
        return;
    }
}

std::string to_string(AggregationStrategy::Kind k) {
    switch (k) {
    case AggregationStrategy::Kind::MeanLogits: return "mean_logits";
    case AggregationStrategy::Kind::ConfidenceWeighted: return "confidence_weighted";
    case AggregationStrategy::Kind::CrossRefine: return "cross_refine";
    }
    return "?";
}

AggregationStrategy::Kind parse_aggregation(const std::string& s) {
    if (s == "mean_logits") return AggregationStrategy::Kind::MeanLogits;
    if (s == "confidence_weighted") return AggregationStrategy::Kind::ConfidenceWeighted;
    if (s == "cross_refine") return AggregationStrategy::Kind::CrossRefine;
    throw ConfigError("unknown aggregation '" + s + "'");
}

namespace {

std::size_t check_shape(const TrialLogits& o) {
    if (o.empty()) throw ContractError("aggregation: no trial logits");
    const std::size_t d = o.front().size();
    if (d == 0) throw ContractError("aggregation: empty logit vector");
    for (const auto& v : o) {
        if (v.size() != d) throw ShapeError("aggregation: trial logits differ in length");
    }
    return d;
}

// Sums in ascending order so the result does not depend on trial order.
double ordered_sum(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end());
    double total = 0.0;
    for (double x : terms) total += x;
    return total;
}

} // namespace

Fused mean_logits(const TrialLogits& o) {
    const std::size_t d = check_shape(o);
    Fused f;
    f.logits.assign(d, 0.0);
    std::vector<double> terms(o.size());
    const double m = static_cast<double>(o.size());
    for (std::size_t t = 0; t < d; ++t) {
        for (std::size_t i = 0; i < o.size(); ++i) terms[i] = o[i][t];
        f.logits[t] = ordered_sum(terms) / m;
    }
    f.token = argmax(f.logits);
    return f;
}

Fused confidence_weighted(const TrialLogits& o, double eps) {
    const std::size_t d = check_shape(o);
    std::vector<double> w(o.size());
    for (std::size_t i = 0; i < o.size(); ++i) {
        std::vector<double> p = o[i];
        softmax_inplace(p);
        w[i] = 1.0 / std::max(entropy(p), eps);
    }
    std::vector<double> terms = w;
    const double total = ordered_sum(terms);
    for (double& x : w) x /= total;

    Fused f;
    f.logits.assign(d, 0.0);
    for (std::size_t t = 0; t < d; ++t) {
        for (std::size_t i = 0; i < o.size(); ++i) terms[i] = w[i] * o[i][t];
        f.logits[t] = ordered_sum(terms);
    }
    f.token = argmax(f.logits);
    return f;
}

std::vector<std::size_t> top_k(std::span<const double> v, std::size_t k) {
    if (k < 1 || k > v.size()) throw ContractError("top_k: k must lie in [1, D]");
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (v[a] != v[b]) return v[a] > v[b];
                          return a < b;
                      });
    idx.resize(k);
    return idx;
}

std::size_t cross_refine(std::span<const double> o1, std::span<const double> o2, std::size_t k) {
    if (o1.size() != o2.size()) throw ShapeError("cross_refine: logit vectors differ in length");
    if (k < 1 || k > o1.size()) {
        throw ContractError("cross_refine: k=" + std::to_string(k) + " outside [1, " +
                            std::to_string(o1.size()) + "]");
    }
    std::size_t best = o1.size();
    for (std::size_t t : top_k(o1, k)) {
        if (best == o1.size() || o2[t] > o2[best] || (o2[t] == o2[best] && t < best)) best = t;
    }
    return best;
}

std::size_t aggregate(const AggregationStrategy& strategy, const TrialLogits& o) {
    switch (strategy.kind) {
    case AggregationStrategy::Kind::MeanLogits: return mean_logits(o).token;
    case AggregationStrategy::Kind::ConfidenceWeighted:
        return confidence_weighted(o, strategy.epsilon).token;
    case AggregationStrategy::Kind::CrossRefine:
        if (o.size() != 2) throw ContractError("cross_refine needs exactly 2 trials");
        return cross_refine(o[0], o[1], strategy.k);
    }
    throw ContractError("aggregate: unknown strategy");
}

TrialLogits segment_final_logits(const Matrix& logits, const PackedSequence& packed) {
    TrialLogits out;
    for (std::size_t p : last_positions(packed)) {
        const auto row = logits.row(p);
        out.emplace_back(row.begin(), row.end());
    }
    return out;
}

DecodeResult decode_packed(const Backend& backend, PackedSequence packed, std::size_t steps,
                           const AggregationStrategy& strategy,
                           std::optional<TokenId> stop_token) {
    if (steps == 0) throw ContractError("decode: steps must be >= 1");
    strategy.validate(packed.trials(), backend.vocab());
    DecodeResult result;
    for (std::size_t step = 0; step < steps; ++step) {
        const ForwardResult fr = backend.forward(packed, AttentionMaskSpec::block_diagonal_causal(packed));
        result.pairs += fr.pairs;
        const auto token = static_cast<TokenId>(aggregate(strategy, segment_final_logits(fr.logits, packed)));
        result.tokens.push_back(token);
        if (stop_token && token == *stop_token) break;
        if (step + 1 < steps) packed = append_token(packed, token, backend.max_positions());
    }
    return result;
}

DecodeResult decode(const Backend& backend, const std::vector<TrialPlan>& plans,
                    const VideoTokenStream& video, std::span<const TokenId> text,
                    std::size_t steps, const AggregationStrategy& strategy,
                    std::optional<TokenId> stop_token) {
    return decode_packed(backend, pack(plans, video, text), steps, strategy, stop_token);
}

std::vector<TokenId> greedy_decode(const Backend& backend, PackedSequence sequence,
                                   std::size_t steps, std::optional<TokenId> stop_token) {
    std::vector<TokenId> out;
    for (std::size_t step = 0; step < steps; ++step) {
        const ForwardResult fr = backend.forward(sequence, AttentionMaskSpec::causal(sequence));
        const auto token = static_cast<TokenId>(argmax(fr.logits.row(sequence.length() - 1)));
        out.push_back(token);
        if (stop_token && token == *stop_token) break;
        if (step + 1 < steps) sequence = append_token(sequence, token, backend.max_positions());
    }
    return out;
}

} // namespace trialpack
