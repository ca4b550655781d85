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

#include "trialpack/costmodel.hpp"

#include <algorithm>
#include <chrono>

#include <nlohmann/json.hpp>

#include "trialpack/error.hpp"

namespace trialpack {

TheoreticalCosts theoretical_costs(std::size_t tokens, std::span<const double> alphas) {
    if (tokens == 0) throw ContractError("theoretical_costs: L must be >= 1");
    if (alphas.empty()) throw ContractError("theoretical_costs: need at least one ratio");
    TheoreticalCosts c;
    for (double a : alphas) {
        if (!(a > 0.0 && a <= 1.0)) throw ContractError("theoretical_costs: alpha outside (0, 1]");
        c.sum_sq += a * a;
    }
    const double l = static_cast<double>(tokens);
    c.base = l * l;
    c.multi = c.base * c.sum_sq;
    c.speedup = 1.0 / c.sum_sq;
    return c;
}

std::uint64_t causal_pairs(std::uint64_t length) { return length * (length + 1) / 2; }

std::uint64_t predicted_pairs(std::span<const std::size_t> segment_lengths, std::size_t units) {
    std::uint64_t total = 0;
    for (std::size_t l : segment_lengths) total += causal_pairs(l);
    return total * units;
}

std::uint64_t packed_forward_bytes(std::size_t length, std::size_t longest_segment,
                                   std::size_t model_dim, std::size_t vocab) {
    const std::uint64_t n = length;
    const std::uint64_t per_row = 6 * model_dim + 4 * model_dim + vocab;
    return 8 * (n * per_row + longest_segment);
}

double median(std::vector<double> samples) {
    if (samples.empty()) throw ContractError("median of an empty sample");
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    return n % 2 == 1 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<std::size_t> lengths_of(const PackedSequence& packed) {
    std::vector<std::size_t> out;
    for (const Segment& s : packed.segments()) out.push_back(s.length);
    return out;
}

} // namespace

CostReport measure(const Backend& backend, const PackedSequence& baseline,
                   const PackedSequence& multi, std::size_t tokens, std::span<const double> alphas,
                   const MeasureOptions& options) {
    if (options.repeats < 3) throw ContractError("measure: repeats must be >= 3");
    if (baseline.trials() != 1) throw ContractError("measure: baseline must be a single segment");
    options.strategy.validate(multi.trials(), backend.vocab());

    CostReport r;
    r.L = tokens;
    r.alpha.assign(alphas.begin(), alphas.end());
    const TheoreticalCosts theory = theoretical_costs(tokens, alphas);
    r.theoretical_base = theory.base;
    r.theoretical_multi = theory.multi;
    r.theoretical_speedup = theory.speedup;

    const auto lengths = lengths_of(multi);
    const std::size_t longest = *std::max_element(lengths.begin(), lengths.end());
    r.fallback_serial = options.memory_budget_bytes > 0 &&
                        packed_forward_bytes(multi.length(), longest, multi.model_dim(),
                                             backend.vocab()) > options.memory_budget_bytes;

    std::vector<PackedSequence> serial;
    if (r.fallback_serial) {
        for (std::size_t i = 0; i < multi.trials(); ++i) serial.push_back(multi.extract_segment(i));
    }
    const auto base_mask = AttentionMaskSpec::block_diagonal_causal(baseline);
    const auto multi_mask = AttentionMaskSpec::block_diagonal_causal(multi);

    std::vector<double> t_base, t_multi;
    for (std::size_t rep = 0; rep < options.repeats; ++rep) {
        {
            const auto t0 = Clock::now();
            const ForwardResult fr = backend.forward(baseline, base_mask);
            volatile std::size_t token = argmax(fr.logits.row(baseline.length() - 1));
            (void)token;
            t_base.push_back(seconds_since(t0));
            r.measured_pairs_base = fr.pairs;
        }
        {
            const auto t0 = Clock::now();
            TrialLogits trial_logits;
            std::uint64_t pairs = 0;
            if (r.fallback_serial) {
                for (const PackedSequence& seg : serial) {
                    const ForwardResult fr =
                        backend.forward(seg, AttentionMaskSpec::block_diagonal_causal(seg));
                    pairs += fr.pairs;
                    const auto row = fr.logits.row(seg.length() - 1);
                    trial_logits.emplace_back(row.begin(), row.end());
                }
            } else {
                const ForwardResult fr = backend.forward(multi, multi_mask);
                pairs = fr.pairs;
                trial_logits = segment_final_logits(fr.logits, multi);
            }
            volatile std::size_t token = aggregate(options.strategy, trial_logits);
            (void)token;
            t_multi.push_back(seconds_since(t0));
            r.measured_pairs_multi = pairs;
        }
    }
    r.tau1 = median(t_base);
    r.tau2 = median(t_multi);
    r.measured_speedup = r.tau1 / r.tau2;
    return r;
}

std::string to_json(const CostReport& r) {
    const nlohmann::json j = {{"L", r.L},
                              {"alpha", r.alpha},
                              {"theoretical_base", r.theoretical_base},
                              {"theoretical_multi", r.theoretical_multi},
                              {"theoretical_speedup", r.theoretical_speedup},
                              {"measured_pairs_base", r.measured_pairs_base},
                              {"measured_pairs_multi", r.measured_pairs_multi},
                              {"tau1", r.tau1},
                              {"tau2", r.tau2},
                              {"measured_speedup", r.measured_speedup},
                              {"fallback_serial", r.fallback_serial}};
    return j.dump(2);
}

} // namespace trialpack
