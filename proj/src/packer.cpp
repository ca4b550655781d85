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

#include "trialpack/packer.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "trialpack/error.hpp"

namespace trialpack {

PackedSequence PackedSequence::from_segments(std::size_t model_dim,
                                             const std::vector<SegmentContents>& segments) {
    if (segments.empty()) throw ContractError("packed sequence needs at least one segment");
    PackedSequence out;
    out.text_ = segments.front().text;
    out.generated_ = segments.front().generated;

    std::size_t total = 0;
    for (const auto& seg : segments) {
        if (seg.text != out.text_ || seg.generated != out.generated_) {
            throw ContractError("segments must share the text prompt and generated suffix");
        }
        if (seg.visual.rows() != seg.visual_ids.size()) {
            throw ShapeError("segment visual rows do not match visual ids");
        }
        if (seg.visual.rows() > 0 && seg.visual.cols() != model_dim) {
            throw ShapeError("segment embedding width does not match model_dim");
        }
        total += seg.visual_ids.size() + seg.text.size() + seg.generated.size();
    }

    out.kinds_.reserve(total);
    out.ids_.reserve(total);
    out.segment_of_.reserve(total);
    out.pos_in_segment_.reserve(total);
    out.embeddings_ = Matrix(total, model_dim);

    std::size_t p = 0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& seg = segments[i];
        out.segments_.push_back(
            {p, seg.visual_ids.size() + seg.text.size() + seg.generated.size()});
        out.visual_counts_.push_back(seg.visual_ids.size());
        std::uint32_t local = 0;
        auto emit = [&](TokenKind kind, TokenId id) {
            out.kinds_.push_back(kind);
            out.ids_.push_back(id);
            out.segment_of_.push_back(static_cast<std::uint32_t>(i));
            out.pos_in_segment_.push_back(local++);
            ++p;
        };
        for (std::size_t v = 0; v < seg.visual_ids.size(); ++v) {
            std::copy_n(seg.visual.row(v).begin(), model_dim, out.embeddings_.row(p).begin());
            emit(TokenKind::Visual, seg.visual_ids[v]);
        }
        for (TokenId t : seg.text) emit(TokenKind::Text, t);
        for (TokenId t : seg.generated) emit(TokenKind::Generated, t);
    }
    return out;
}

SegmentContents PackedSequence::contents(std::size_t i) const {
    const Segment& seg = segments_.at(i);
    const std::size_t nv = visual_counts_[i];
    SegmentContents c;
    c.visual = Matrix(nv, model_dim());
    for (std::size_t v = 0; v < nv; ++v) {
        c.visual_ids.push_back(ids_[seg.start + v]);
        std::copy_n(embeddings_.row(seg.start + v).begin(), model_dim(), c.visual.row(v).begin());
    }
    c.text = text_;
    c.generated = generated_;
    return c;
}

PackedSequence PackedSequence::extract_segment(std::size_t i) const {
    return from_segments(model_dim(), {contents(i)});
}

PackedSequence pack(const std::vector<TrialPlan>& plans, const VideoTokenStream& video,
                    std::span<const TokenId> text) {
    if (plans.empty()) throw ContractError("pack: no trial plans");
    const std::size_t m_tokens = video.tokens_per_frame;
    const std::size_t dim = video.model_dim();

    std::vector<SegmentContents> segments;
    segments.reserve(plans.size());
    for (const TrialPlan& plan : plans) {
        const std::size_t trial_tokens = plan.frame_indices.size() * m_tokens;
        SegmentContents seg;
        seg.visual = Matrix(plan.token_keep.size(), dim);
        for (std::size_t v = 0; v < plan.token_keep.size(); ++v) {
            const std::size_t j = plan.token_keep[v];
            if (j >= trial_tokens) throw ContractError("pack: token index outside trial");
            const std::size_t frame = plan.frame_indices[j / m_tokens];
            if (frame >= video.frames) throw ContractError("pack: frame index outside video");
            const std::size_t patch = j % m_tokens;
            seg.visual_ids.push_back(static_cast<TokenId>(frame * m_tokens + patch));
            const auto src = video.token(frame, patch);
            std::copy(src.begin(), src.end(), seg.visual.row(v).begin());
        }
        seg.text.assign(text.begin(), text.end());
        segments.push_back(std::move(seg));
    }
    return PackedSequence::from_segments(dim, segments);
}

PackedSequence make_single_sequence(const Matrix& visual, std::span<const TokenId> text,
                                    std::span<const TokenId> visual_ids) {
    SegmentContents seg;
    seg.visual = visual;
    if (visual_ids.empty()) {
        seg.visual_ids.resize(visual.rows());
        for (std::size_t v = 0; v < visual.rows(); ++v) seg.visual_ids[v] = static_cast<TokenId>(v);
    } else {
        seg.visual_ids.assign(visual_ids.begin(), visual_ids.end());
    }
    seg.text.assign(text.begin(), text.end());
    return PackedSequence::from_segments(visual.cols(), {seg});
}

PackedSequence append_token(const PackedSequence& packed, TokenId token,
                            std::size_t max_positions) {
    if (packed.length() + packed.trials() > max_positions) {
        throw ContractError("append_token: packed length would exceed " +
                            std::to_string(max_positions) + " positions");
    }
    std::vector<SegmentContents> segments;
    segments.reserve(packed.trials());
    for (std::size_t i = 0; i < packed.trials(); ++i) {
        segments.push_back(packed.contents(i));
        segments.back().generated.push_back(token);
    }
    return PackedSequence::from_segments(packed.model_dim(), segments);
}

std::vector<std::size_t> last_positions(const PackedSequence& packed) {
    std::vector<std::size_t> out;
    out.reserve(packed.trials());
    for (const Segment& s : packed.segments()) out.push_back(s.end() - 1);
    return out;
}

AttentionMaskSpec AttentionMaskSpec::block_diagonal_causal(const PackedSequence& packed) {
    AttentionMaskSpec spec;
    spec.rule_ = Rule::BlockDiagonalCausal;
    spec.key_begin_.resize(packed.length());
    for (std::size_t p = 0; p < packed.length(); ++p) {
        spec.key_begin_[p] = packed.segments()[packed.segment_of(p)].start;
    }
    return spec;
}

AttentionMaskSpec AttentionMaskSpec::causal(const PackedSequence& packed) {
    AttentionMaskSpec spec;
    spec.rule_ = Rule::Causal;
    spec.key_begin_.assign(packed.length(), 0);
    return spec;
}

std::string to_debug_json(const PackedSequence& packed) {
    using nlohmann::json;
    json segs = json::array();
    for (std::size_t i = 0; i < packed.trials(); ++i) {
        const Segment& s = packed.segments()[i];
        segs.push_back({{"start", s.start}, {"length", s.length}, {"visual", packed.visual_counts()[i]}});
    }
    std::string kinds;
    json ids = json::array();
    for (std::size_t p = 0; p < packed.length(); ++p) {
        switch (packed.kind(p)) {
        case TokenKind::Visual: kinds += 'V'; break;
        case TokenKind::Text: kinds += 'T'; break;
        case TokenKind::Generated: kinds += 'G'; break;
        }
        ids.push_back(packed.id(p));
    }
    json doc = {{"segments", segs},
                {"text_len", packed.text_len()},
                {"generated", packed.generated()},
                {"kinds", kinds},
                {"ids", ids}};
    return doc.dump(1);
}

} // namespace trialpack
