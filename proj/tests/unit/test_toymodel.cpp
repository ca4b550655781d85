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
#include <cstdio>
#include <filesystem>

#include "reference_model.hpp"
#include "trialpack/costmodel.hpp"
#include "trialpack/error.hpp"
#include "trialpack/toymodel.hpp"

using namespace trialpack;

namespace {

ModelConfig small_config(std::uint64_t seed = 3) {
    ModelConfig cfg;
    cfg.layers = 2;
    cfg.model_dim = 16;
    cfg.heads = 4;
    cfg.vocab = 16;
    cfg.max_positions = 512;
    cfg.init_seed = seed;
    return cfg;
}

VideoTokenStream small_video(std::size_t dim, std::vector<std::size_t> needles = {}) {
    return embed_frames(StreamSpec{8, 3, std::move(needles)}, dim, Rng(21));
}

TrialPlan plan_of(std::vector<std::size_t> frames, std::vector<std::size_t> keep, double alpha = 1.0) {
    return TrialPlan{std::move(frames), std::move(keep), alpha};
}

std::vector<TokenId> text_ids() { return {1, 5, 2}; }

std::vector<std::size_t> iota_n(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

} // namespace

TEST_CASE("model construction") {
    const ModelConfig cfg = small_config();
    CHECK(init_weights(cfg).checksum() == init_weights(cfg).checksum());
    CHECK(init_weights(cfg).checksum() != init_weights(small_config(4)).checksum());

    ModelConfig bad = cfg;
    bad.heads = 3;
    CHECK_THROWS_AS(build_model(bad), ShapeError);
    bad = cfg;
    bad.vocab = 3;
    CHECK_THROWS_AS(build_model(bad), ConfigError);

    const Backend model = build_model(cfg);
    const PackedSequence one = make_single_sequence(Matrix(0, cfg.model_dim), std::vector<TokenId>{7});
    const ForwardResult fr = model.forward(one, AttentionMaskSpec::block_diagonal_causal(one));
    REQUIRE(fr.logits.rows() == 1);
    REQUIRE(fr.logits.cols() == cfg.vocab);
    for (double v : fr.logits.data()) CHECK(std::isfinite(v));
    CHECK(fr.pairs == cfg.layers * cfg.heads);
}

TEST_CASE("video embedding") {
    const std::size_t dim = 16;
    const VideoTokenStream a = embed_frames(StreamSpec{2, 3, {1}}, dim, Rng(5));
    const VideoTokenStream b = embed_frames(StreamSpec{2, 3, {1}}, dim, Rng(5));
    CHECK(a.embeddings == b.embeddings);
    CHECK(a.embeddings.rows() == 6);
    CHECK(a.model_dim() == dim);

    const auto dir = needle_direction(dim, Rng(5));
    auto cosine = [&](std::span<const double> e) {
        double dot = 0, ee = 0, dd = 0;
        for (std::size_t i = 0; i < dim; ++i) {
            dot += e[i] * dir[i];
            ee += e[i] * e[i];
            dd += dir[i] * dir[i];
        }
        return dot / std::sqrt(ee * dd);
    };
    for (std::size_t p = 0; p < 3; ++p) {
        CHECK(cosine(a.token(1, p)) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(cosine(a.token(0, p))) < 1e-12);
    }
    CHECK_THROWS_AS(embed_frames(StreamSpec{2, 3, {2}}, dim, Rng(5)), ContractError);
    CHECK_THROWS_AS(embed_frames(StreamSpec{0, 3, {}}, dim, Rng(5)), ContractError);
}

TEST_CASE("pair counts are causal triangles, additive over segments") {
    const ModelConfig cfg = small_config();
    const Backend model = build_model(cfg);
    const VideoTokenStream video = small_video(cfg.model_dim);
    const std::size_t units = cfg.layers * cfg.heads;

    const auto single = pack({plan_of({0, 1}, iota_n(6))}, video, text_ids());
    const std::uint64_t l = single.length();
    CHECK(model.forward(single, AttentionMaskSpec::block_diagonal_causal(single)).pairs ==
          units * l * (l + 1) / 2);

    const auto two = pack({plan_of({0, 1}, iota_n(6)), plan_of({2, 5, 6}, {0, 4, 8})}, video, text_ids());
    const std::uint64_t a = two.segments()[0].length, b = two.segments()[1].length;
    CHECK(model.forward(two, AttentionMaskSpec::block_diagonal_causal(two)).pairs ==
          units * (a * (a + 1) / 2 + b * (b + 1) / 2));
}

TEST_CASE("fast forward matches the materialized reference") {
    const ModelConfig cfg = small_config(9);
    const Backend model = build_model(cfg);
    const VideoTokenStream video = small_video(cfg.model_dim);
    const auto packed = pack({plan_of({0, 3}, {0, 2, 3, 5}), plan_of({1, 4, 7}, iota_n(9)),
                              plan_of({6}, {1})},
                             video, text_ids());
    const auto mask = AttentionMaskSpec::block_diagonal_causal(packed);
    const ForwardResult fast = model.forward(packed, mask);
    const auto ref = testing::reference_forward(model.weights(), packed);
    for (std::size_t i = 0; i < fast.logits.size(); ++i) {
        CHECK(std::abs(fast.logits.data()[i] - ref.logits.data()[i]) <= 1e-9);
    }

    const auto scores = attention_received_scores(model, packed, mask);
    const double units = static_cast<double>(cfg.layers * cfg.heads);
    for (std::size_t p = 0; p < packed.length(); ++p) {
        const double len = static_cast<double>(packed.segments()[packed.segment_of(p)].length);
        CHECK(std::abs(scores[p] - ref.received[p] / (units * len)) <= 1e-12);
        CHECK(scores[p] >= 0.0);
    }
    // Every query row sums to one, so each segment's scores sum to one.
    for (std::size_t s = 0; s < packed.trials(); ++s) {
        double total = 0;
        const Segment seg = packed.segments()[s];
        for (std::size_t p = seg.start; p < seg.end(); ++p) total += scores[p];
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("equal attention weights give harmonic-tail scores") {
    // Zero query weights make every visible key equally weighted. Under a
    // causal mask key q then receives sum_{p >= q} 1 / (p + 1), averaged over
    // the l queries of its segment.
    TransformerWeights w = init_weights(small_config(2));
    for (LayerWeights& layer : w.layers) std::fill(layer.wq.data().begin(), layer.wq.data().end(), 0.0);
    const Backend model = Backend::transformer(w);
    const VideoTokenStream video = small_video(16);
    const auto packed = pack({plan_of({0, 1}, iota_n(6)), plan_of({2}, iota_n(3))}, video, text_ids());
    const auto scores =
        attention_received_scores(model, packed, AttentionMaskSpec::block_diagonal_causal(packed));
    for (const Segment& seg : packed.segments()) {
        for (std::size_t q = 0; q < seg.length; ++q) {
            double want = 0;
            for (std::size_t p = q; p < seg.length; ++p) want += 1.0 / static_cast<double>(p + 1);
            want /= static_cast<double>(seg.length);
            CHECK(scores[seg.start + q] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("packed logits equal independent per-segment forwards") {
    const ModelConfig cfg = small_config(13);
    const Backend model = build_model(cfg);
    const VideoTokenStream video = small_video(cfg.model_dim);
    const auto packed = pack({plan_of({0, 3}, {0, 2, 3, 5}), plan_of({1, 4, 7}, iota_n(9)),
                              plan_of({2, 6}, {1, 4})},
                             video, text_ids());
    const ForwardResult together =
        model.forward(packed, AttentionMaskSpec::block_diagonal_causal(packed));
    for (std::size_t i = 0; i < packed.trials(); ++i) {
        const PackedSequence solo = packed.extract_segment(i);
        const ForwardResult alone = model.forward(solo, AttentionMaskSpec::block_diagonal_causal(solo));
        const Segment seg = packed.segments()[i];
        for (std::size_t p = 0; p < seg.length; ++p) {
            for (std::size_t t = 0; t < cfg.vocab; ++t) {
                CHECK(std::abs(together.logits(seg.start + p, t) - alone.logits(p, t)) <= 1e-9);
            }
        }
    }
}

TEST_CASE("mask isolates segments") {
    const ModelConfig cfg = small_config(17);
    const Backend model = build_model(cfg);
    VideoTokenStream video = small_video(cfg.model_dim);
    const std::vector<TrialPlan> plans{plan_of({0, 1}, iota_n(6)), plan_of({5, 6}, iota_n(6))};
    const auto before = pack(plans, video, text_ids());

    // Perturb frames only segment 1 sees. Layer norm removes constant
    // offsets, so the perturbation varies across components.
    auto perturb = [](std::span<double> row) {
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += c % 2 ? 0.5 : -0.3;
    };
    for (std::size_t p = 0; p < 3; ++p) perturb(video.embeddings.row(5 * 3 + p));
    const auto after = pack(plans, video, text_ids());

    const auto r0 = model.forward(before, AttentionMaskSpec::block_diagonal_causal(before));
    const auto r1 = model.forward(after, AttentionMaskSpec::block_diagonal_causal(after));
    const Segment s0 = before.segments()[0], s1 = before.segments()[1];
    for (std::size_t p = s0.start; p < s0.end(); ++p) {
        for (std::size_t t = 0; t < cfg.vocab; ++t) CHECK(std::abs(r0.logits(p, t) - r1.logits(p, t)) <= 1e-12);
    }
    double moved = 0;
    for (std::size_t t = 0; t < cfg.vocab; ++t) moved += std::abs(r0.logits(s1.end() - 1, t) - r1.logits(s1.end() - 1, t));
    CHECK(moved > 1e-6);

    // Without segment isolation, perturbing segment 0 leaks into segment 1.
    VideoTokenStream video2 = small_video(cfg.model_dim);
    perturb(video2.embeddings.row(0));
    const auto leaked = pack(plans, video2, text_ids());
    const auto c0 = model.forward(before, AttentionMaskSpec::causal(before));
    const auto c1 = model.forward(leaked, AttentionMaskSpec::causal(leaked));
    double leak = 0;
    for (std::size_t t = 0; t < cfg.vocab; ++t) leak += std::abs(c0.logits(s1.end() - 1, t) - c1.logits(s1.end() - 1, t));
    CHECK(leak > 1e-6);
    CHECK(AttentionMaskSpec::causal(before).allows(s1.start, 0));
    CHECK_FALSE(AttentionMaskSpec::block_diagonal_causal(before).allows(s1.start, 0));
}

TEST_CASE("forward is deterministic and checks its inputs") {
    const ModelConfig cfg = small_config();
    const Backend model = build_model(cfg);
    const VideoTokenStream video = small_video(cfg.model_dim);
    const auto packed = pack({plan_of({0, 1}, iota_n(6))}, video, text_ids());
    const auto mask = AttentionMaskSpec::block_diagonal_causal(packed);
    CHECK(model.forward(packed, mask).logits == build_model(cfg).forward(packed, mask).logits);

    ModelConfig tight = cfg;
    tight.max_positions = packed.length() - 1;
    CHECK_THROWS_AS(build_model(tight).forward(packed, mask), ContractError);

    const auto bad_text = pack({plan_of({0}, {0})}, video, std::vector<TokenId>{99});
    CHECK_THROWS_AS(model.forward(bad_text, AttentionMaskSpec::block_diagonal_causal(bad_text)),
                    ContractError);
    CHECK_THROWS_AS(model.probe(), UnsupportedOperation);
}

TEST_CASE("needle probe") {
    const std::size_t dim = 16;
    const VideoTokenStream video = embed_frames(StreamSpec{8, 3, {2}}, dim, Rng(21));
    NeedleProbeConfig cfg;
    cfg.answer = 5;
    cfg.gain = 1.0;
    cfg.noise = 0.0;
    cfg.seed = 4;
    cfg.needle_direction = needle_direction(dim, Rng(21));
    cfg.vocab = 16;
    const Backend probe = Backend::needle_probe(cfg);

    SUBCASE("no surviving needle, no noise") {
        const auto packed = pack({plan_of({0, 1}, iota_n(6))}, video, text_ids());
        const Matrix last = needle_probe_forward(probe, packed, AttentionMaskSpec::block_diagonal_causal(packed));
        for (double v : last.data()) CHECK(v == 0.0);
        CHECK(argmax(last.row(0)) == 0);
    }
    SUBCASE("logit counts surviving needle tokens per segment") {
        const auto packed = pack({plan_of({1, 2}, iota_n(6)), plan_of({2, 3}, {0, 3})}, video, text_ids());
        const Matrix last = needle_probe_forward(probe, packed, AttentionMaskSpec::block_diagonal_causal(packed));
        CHECK(last(0, 5) == 3.0);
        CHECK(last(1, 5) == 1.0);
    }
    SUBCASE("noise stays within sigma and depends only on segment content") {
        cfg.noise = 0.3;
        const Backend noisy = Backend::needle_probe(cfg);
        const auto packed = pack({plan_of({0, 1}, iota_n(6)), plan_of({4}, iota_n(3))}, video, text_ids());
        const auto r = noisy.forward(packed, AttentionMaskSpec::block_diagonal_causal(packed));
        for (double v : r.logits.data()) CHECK(std::abs(v) <= 0.3);
        const auto solo = packed.extract_segment(1);
        const auto rs = noisy.forward(solo, AttentionMaskSpec::block_diagonal_causal(solo));
        for (std::size_t t = 0; t < cfg.vocab; ++t) {
            CHECK(rs.logits(solo.length() - 1, t) == r.logits(packed.length() - 1, t));
        }
        CHECK(r.pairs == predicted_pairs(std::vector<std::size_t>{9, 6}));
    }
    SUBCASE("configuration errors") {
        cfg.noise = 1.0;
        CHECK_THROWS_AS(Backend::needle_probe(cfg), ConfigError);
        cfg.noise = 0.0;
        cfg.gain = 0.0;
        CHECK_THROWS_AS(Backend::needle_probe(cfg), ConfigError);
        cfg.gain = 1.0;
        cfg.answer = 16;
        CHECK_THROWS_AS(Backend::needle_probe(cfg), ConfigError);
    }
    SUBCASE("attention scores are transformer-only") {
        const auto packed = pack({plan_of({0}, iota_n(3))}, video, text_ids());
        CHECK_THROWS_AS(attention_received_scores(probe, packed, AttentionMaskSpec::block_diagonal_causal(packed)),
                        UnsupportedOperation);
    }
}

TEST_CASE("weights round-trip through the flat dump") {
    const ModelConfig cfg = small_config(77);
    const TransformerWeights w = init_weights(cfg);
    const auto path = (std::filesystem::temp_directory_path() / "trialpack_weights_test.bin").string();
    save_weights(w, path);
    const TransformerWeights back = load_weights(path);
    CHECK(back.config == cfg);
    CHECK(back.checksum() == w.checksum());

    // Size: 8-byte magic, 8-byte length, header, then every double.
    std::size_t doubles = 0;
    w.for_each_tensor([&](const std::string&, const Matrix& m) { doubles += m.size(); });
    const auto size = std::filesystem::file_size(path);
    CHECK(size > 16 + 8 * doubles);
    std::filesystem::remove(path);
    CHECK_THROWS(load_weights(path));
}
