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

#include <fstream>
#include <sstream>

#include "trialpack/error.hpp"
#include "trialpack/packer.hpp"
#include "trialpack/toymodel.hpp"

using namespace trialpack;

namespace {

VideoTokenStream ramp_video(std::size_t frames, std::size_t m, std::size_t dim) {
    // Row r holds r in every column, so gathered rows identify their source.
    VideoTokenStream v{frames, m, Matrix(frames * m, dim)};
    for (std::size_t r = 0; r < frames * m; ++r) {
        for (double& x : v.embeddings.row(r)) x = static_cast<double>(r);
    }
    return v;
}

// Checks every structural invariant of a packed sequence from scratch.
void check_structure(const PackedSequence& p, std::size_t text_len, std::size_t generated) {
    std::size_t cursor = 0;
    REQUIRE(p.visual_counts().size() == p.trials());
    for (std::size_t i = 0; i < p.trials(); ++i) {
        const Segment s = p.segments()[i];
        REQUIRE(s.start == cursor);
        REQUIRE(s.length == p.visual_counts()[i] + text_len + generated);
        for (std::size_t k = 0; k < s.length; ++k) {
            const std::size_t pos = s.start + k;
            REQUIRE(p.segment_of(pos) == i);
            REQUIRE(p.pos_in_segment(pos) == k);
            const TokenKind want = k < p.visual_counts()[i]            ? TokenKind::Visual
                                   : k < p.visual_counts()[i] + text_len ? TokenKind::Text
                                                                         : TokenKind::Generated;
            REQUIRE(p.kind(pos) == want);
        }
        cursor = s.end();
    }
    REQUIRE(cursor == p.length());
    REQUIRE(p.text_len() == text_len);
    REQUIRE(p.generated() == generated);
}

} // namespace

TEST_CASE("pack lays out segments in trial order") {
    const VideoTokenStream video = ramp_video(4, 3, 2); // L = 12
    Rng rng(8);
    SamplerConfig cfg;
    cfg.total_frames = 4;
    cfg.tokens_per_frame = 3;
    cfg.frames_per_trial = 4;
    cfg.alphas = {0.5, 0.5};
    const auto plans = build_trial_plans(cfg, rng);
    const std::vector<TokenId> text{1, 2, 3};
    const PackedSequence packed = pack(plans, video, text);
    CHECK(packed.length() == 18);
    CHECK(packed.segments()[0] == Segment{0, 9});
    CHECK(packed.segments()[1] == Segment{9, 9});
    CHECK(last_positions(packed) == std::vector<std::size_t>{8, 17});
    check_structure(packed, 3, 0);

    CHECK_THROWS_AS(pack({}, video, text), ContractError);
    CHECK_THROWS_AS(pack({TrialPlan{{0}, {3}, 1.0}}, video, text), ContractError);
    CHECK_THROWS_AS(pack({TrialPlan{{4}, {0}, 1.0}}, video, text), ContractError);
}

TEST_CASE("single full plan equals the baseline sequence") {
    const VideoTokenStream video = ramp_video(4, 3, 2);
    std::vector<std::size_t> all(12);
    for (std::size_t i = 0; i < 12; ++i) all[i] = i;
    const std::vector<TokenId> text{4, 5};
    const PackedSequence packed = pack({TrialPlan{{0, 1, 2, 3}, all, 1.0}}, video, text);
    CHECK(packed == make_single_sequence(video.embeddings, text));
    CHECK(last_positions(packed) == std::vector<std::size_t>{13});
}

TEST_CASE("gather matches a frame-major oracle") {
    Rng rng(31);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t frames = 2 + rng.below(10), m = 1 + rng.below(5);
        const VideoTokenStream video = ramp_video(frames, m, 3);
        SamplerConfig cfg;
        cfg.total_frames = frames;
        cfg.tokens_per_frame = m;
        cfg.frames_per_trial = 1 + rng.below(frames);
        cfg.trials = 1 + rng.below(4);
        cfg.alphas.assign(cfg.trials, 0.0);
        for (double& a : cfg.alphas) a = 0.1 + 0.9 * rng.uniform();
        cfg.token_strategy = static_cast<TokenStrategy>(rng.below(3));
        const auto plans = build_trial_plans(cfg, rng.split(trial));
        const std::vector<TokenId> text{9};
        const PackedSequence packed = pack(plans, video, text);
        check_structure(packed, 1, 0);

        std::size_t expected_len = 0;
        for (std::size_t i = 0; i < plans.size(); ++i) {
            // Materialize the trial's token list frame-major, then keep.
            std::vector<std::size_t> order;
            for (std::size_t f : plans[i].frame_indices) {
                for (std::size_t p = 0; p < m; ++p) order.push_back(f * m + p);
            }
            const Segment s = packed.segments()[i];
            REQUIRE(packed.visual_counts()[i] == plans[i].token_keep.size());
            for (std::size_t v = 0; v < plans[i].token_keep.size(); ++v) {
                const std::size_t src = order[plans[i].token_keep[v]];
                CHECK(packed.id(s.start + v) == static_cast<TokenId>(src));
                CHECK(packed.embedding(s.start + v)[0] == static_cast<double>(src));
                if (v > 0) CHECK(packed.id(s.start + v - 1) < packed.id(s.start + v));
            }
            CHECK(packed.id(s.start + plans[i].token_keep.size()) == 9);
            expected_len += retained_count(plans[i].alpha, cfg.tokens_per_trial()) + 1;

            // Linear scan for the last position of segment i.
            std::size_t last = 0;
            for (std::size_t p = 0; p < packed.length(); ++p) {
                if (packed.segment_of(p) == i) last = p;
            }
            CHECK(last_positions(packed)[i] == last);
        }
        CHECK(packed.length() == expected_len);
    }
}

TEST_CASE("append_token grows every segment") {
    const VideoTokenStream video = ramp_video(4, 3, 2);
    const std::vector<TrialPlan> plans{TrialPlan{{0, 2}, {0, 1, 4}, 0.5}, TrialPlan{{1, 3}, {2, 5}, 0.3}};
    const std::vector<TokenId> text{7, 8};
    PackedSequence packed = pack(plans, video, text);
    const std::size_t base = packed.length();

    const PackedSequence twice = append_token(append_token(packed, 11), 12);
    CHECK(twice.length() == base + 4);
    CHECK(twice.segments()[0].length == packed.segments()[0].length + 2);
    CHECK(twice.id(twice.segments()[0].end() - 1) == 12);
    CHECK(twice.id(twice.segments()[1].end() - 2) == 11);

    for (int g = 0; g < 16; ++g) {
        packed = append_token(packed, g);
        check_structure(packed, 2, static_cast<std::size_t>(g) + 1);
    }
    CHECK(packed.length() == base + 32);
    for (const Segment& s : packed.segments()) {
        for (int g = 0; g < 16; ++g) CHECK(packed.id(s.end() - 16 + g) == g);
    }

    CHECK_THROWS_AS(append_token(packed, 1, packed.length() + 1), ContractError);
    CHECK_NOTHROW(append_token(packed, 1, packed.length() + 2));

    const PackedSequence single = make_single_sequence(Matrix(2, 2), text);
    const PackedSequence grown = append_token(single, 3);
    CHECK(grown.length() == 5);
    CHECK(grown.kind(4) == TokenKind::Generated);
}

TEST_CASE("block-diagonal mask forbids every cross-segment pair") {
    const VideoTokenStream video = ramp_video(6, 2, 2);
    const std::vector<TrialPlan> plans{TrialPlan{{0, 1}, {0, 1, 3}, 0.75}, TrialPlan{{2, 5}, {1, 2}, 0.5},
                                       TrialPlan{{3, 4}, {0, 1, 2, 3}, 1.0}};
    const PackedSequence packed = append_token(pack(plans, video, std::vector<TokenId>{1}), 2);
    const auto mask = AttentionMaskSpec::block_diagonal_causal(packed);
    for (std::size_t p = 0; p < packed.length(); ++p) {
        for (std::size_t q = 0; q < packed.length(); ++q) {
            const bool want = packed.segment_of(p) == packed.segment_of(q) && q <= p;
            CHECK(mask.allows(p, q) == want);
        }
    }
    const auto causal = AttentionMaskSpec::causal(packed);
    for (std::size_t p = 0; p < packed.length(); ++p) CHECK(causal.key_begin(p) == 0);
}

TEST_CASE("debug JSON matches the golden file") {
    const VideoTokenStream video = ramp_video(4, 3, 2);
    const std::vector<TrialPlan> plans{TrialPlan{{0, 2}, {0, 1, 4}, 0.5}, TrialPlan{{1, 3}, {2, 5}, 0.3}};
    const PackedSequence packed = append_token(pack(plans, video, std::vector<TokenId>{7, 8}), 11);
    std::ifstream in(std::string(TRIALPACK_GOLDEN_DIR) + "/packed_debug.json");
    REQUIRE(in.good());
    std::stringstream golden;
    golden << in.rdbuf();
    std::string text = golden.str();
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    CHECK(to_debug_json(packed) == text);
}
