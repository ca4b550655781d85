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

#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "trialpack/costmodel.hpp"
#include "trialpack/error.hpp"

using namespace trialpack;

TEST_CASE("theoretical costs") {
    const std::vector<double> a66{0.6, 0.6};
    const TheoreticalCosts c = theoretical_costs(1000, a66);
    CHECK(c.sum_sq == 0.72);
    CHECK(std::abs(c.speedup - 1.0 / 0.72) <= 1e-12);
    CHECK(c.speedup == doctest::Approx(1.389).epsilon(1e-3));
    CHECK(c.base == 1e6);
    CHECK(c.multi == doctest::Approx(720000.0).epsilon(1e-15));

    const std::vector<double> one{1.0};
    const TheoreticalCosts u = theoretical_costs(37, one);
    CHECK(u.multi == u.base);
    CHECK(u.speedup == 1.0);

    const std::vector<double> a53{0.5, 0.3};
    const TheoreticalCosts d = theoretical_costs(2048, a53);
    CHECK(d.sum_sq == doctest::Approx(0.34).epsilon(1e-15));
    CHECK(d.speedup == doctest::Approx(2.94).epsilon(1e-3));
    CHECK((d.multi < d.base) == (d.sum_sq < 1.0));

    const std::vector<double> big{0.9, 0.8};
    const TheoreticalCosts e = theoretical_costs(10, big);
    CHECK(e.multi > e.base);

    const std::vector<double> zero{0.0};
    CHECK_THROWS_AS(theoretical_costs(10, zero), ContractError);
    CHECK_THROWS_AS(theoretical_costs(0, one), ContractError);
}

TEST_CASE("speedup surface is strictly decreasing in each ratio") {
    std::vector<double> grid;
    for (int i = 1; i <= 10; ++i) grid.push_back(0.1 * i);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t j = 0; j < grid.size(); ++j) {
            const std::vector<double> here{grid[i], grid[j]};
            const double s = theoretical_costs(100, here).speedup;
            if (i + 1 < grid.size()) {
                const std::vector<double> up{grid[i + 1], grid[j]};
                CHECK(theoretical_costs(100, up).speedup < s);
            }
            if (j + 1 < grid.size()) {
                const std::vector<double> up{grid[i], grid[j + 1]};
                CHECK(theoretical_costs(100, up).speedup < s);
            }
            if (i == j) CHECK(s == doctest::Approx(1.0 / (2 * grid[i] * grid[i])).epsilon(1e-14));
        }
    }
    const double cross = 1.0 / std::sqrt(2.0);
    const std::vector<double> diag{cross, cross};
    CHECK(theoretical_costs(100, diag).speedup == doctest::Approx(1.0).epsilon(1e-14));
    const std::vector<double> below{0.70, 0.70}, above{0.71, 0.71};
    CHECK(theoretical_costs(100, below).speedup > 1.0);
    CHECK(theoretical_costs(100, above).speedup < 1.0);
}

TEST_CASE("pair counting") {
    CHECK(causal_pairs(1) == 1);
    CHECK(causal_pairs(4) == 10);
    const std::vector<std::size_t> lens{9, 4, 30};
    const std::vector<std::size_t> reordered{30, 9, 4};
    CHECK(predicted_pairs(lens, 8) == 8 * (45 + 10 + 465));
    CHECK(predicted_pairs(lens) == predicted_pairs(reordered));
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK_THROWS_AS(median({}), ContractError);
}

namespace {

struct Setup {
    Backend model;
    PackedSequence base;
    PackedSequence multi;
    std::vector<double> alphas{0.5, 0.25};
};

Setup make_setup() {
    ModelConfig cfg;
    cfg.layers = 2;
    cfg.model_dim = 16;
    cfg.heads = 2;
    cfg.vocab = 16;
    cfg.max_positions = 256;
    const VideoTokenStream video = embed_frames(StreamSpec{8, 4, {}}, 16, Rng(1));
    SamplerConfig sc;
    sc.total_frames = 8;
    sc.tokens_per_frame = 4;
    sc.frames_per_trial = 8;
    sc.alphas = {0.5, 0.25};
    const auto plans = build_trial_plans(sc, Rng(2));
    const std::vector<TokenId> empty;
    return Setup{build_model(cfg), make_single_sequence(video.embeddings, empty), pack(plans, video, empty)};
}

} // namespace

TEST_CASE("measure reports exact pair counts") {
    const Setup s = make_setup();
    MeasureOptions opt;
    opt.repeats = 3;
    const CostReport r = measure(s.model, s.base, s.multi, 32, s.alphas, opt);
    CHECK(r.L == 32);
    CHECK(r.measured_pairs_base == 4 * 32 * 33 / 2);
    CHECK(r.measured_pairs_multi == 4 * (16 * 17 / 2 + 8 * 9 / 2));
    // Ratio against the rounded-length formula, in integers.
    CHECK(r.measured_pairs_multi * 32 * 33 == r.measured_pairs_base * (16 * 17 + 8 * 9));
    CHECK(r.theoretical_speedup == doctest::Approx(1.0 / 0.3125));
    CHECK(r.tau1 > 0.0);
    CHECK(r.tau2 > 0.0);
    CHECK_FALSE(r.fallback_serial);

    opt.memory_budget_bytes = 1;
    const CostReport f = measure(s.model, s.base, s.multi, 32, s.alphas, opt);
    CHECK(f.fallback_serial);
    CHECK(f.measured_pairs_multi == r.measured_pairs_multi);

    opt.repeats = 2;
    CHECK_THROWS_AS(measure(s.model, s.base, s.multi, 32, s.alphas, opt), ContractError);
    opt.repeats = 3;
    CHECK_THROWS_AS(measure(s.model, s.multi, s.multi, 32, s.alphas, opt), ContractError);

    const auto j = nlohmann::json::parse(to_json(r));
    for (const char* key : {"L", "alpha", "theoretical_base", "theoretical_multi", "theoretical_speedup",
                            "measured_pairs_base", "measured_pairs_multi", "tau1", "tau2",
                            "measured_speedup", "fallback_serial"}) {
        CHECK(j.contains(key));
    }
}
