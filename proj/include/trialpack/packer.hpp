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
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "trialpack/numkernel.hpp"
#include "trialpack/sampler.hpp"
#include "trialpack/video.hpp"

namespace trialpack {

using TokenId = std::int64_t;

enum class TokenKind : std::uint8_t { Visual, Text, Generated };

struct Segment {
    std::size_t start = 0;
    std::size_t length = 0;

    std::size_t end() const { return start + length; }
    bool operator==(const Segment&) const = default;
};

/// Contents of one segment before layout.
struct SegmentContents {
    std::vector<TokenId> visual_ids; // flat source index f*M + patch per visual token
    Matrix visual;                   // one embedding row per visual token
    std::vector<TokenId> text;
    std::vector<TokenId> generated;
};

/// m trial segments laid out back to back. Each segment holds its retained
/// visual tokens, then a private copy of the text prompt, then the tokens
/// generated so far. Immutable once built; append_token returns a new value.
class PackedSequence {
public:
    PackedSequence() = default;

    /// Lays segments out contiguously in the given order. All segments must
    /// share one text prompt and one generated suffix.
    static PackedSequence from_segments(std::size_t model_dim,
                                        const std::vector<SegmentContents>& segments);

    std::size_t length() const { return kinds_.size(); }
    std::size_t trials() const { return segments_.size(); }
    std::size_t text_len() const { return text_.size(); }
    std::size_t generated() const { return generated_.size(); }
    std::size_t model_dim() const { return embeddings_.cols(); }

    const std::vector<Segment>& segments() const { return segments_; }
    const std::vector<std::size_t>& visual_counts() const { return visual_counts_; }
    const std::vector<TokenId>& text() const { return text_; }
    const std::vector<TokenId>& generated_tokens() const { return generated_; }

    TokenKind kind(std::size_t p) const { return kinds_[p]; }
    /// Text/generated: the token id. Visual: the flat source index f*M + patch.
    TokenId id(std::size_t p) const { return ids_[p]; }
    std::size_t segment_of(std::size_t p) const { return segment_of_[p]; }
    std::size_t pos_in_segment(std::size_t p) const { return pos_in_segment_[p]; }
    /// Embedding for a visual position; zero row for text positions.
    std::span<const double> embedding(std::size_t p) const { return embeddings_.row(p); }

    SegmentContents contents(std::size_t i) const;
    /// Segment i in isolation, as its own single-segment sequence.
    PackedSequence extract_segment(std::size_t i) const;

    bool operator==(const PackedSequence&) const = default;

private:
    std::vector<Segment> segments_;
    std::vector<std::size_t> visual_counts_;
    std::vector<TokenId> text_;
    std::vector<TokenId> generated_;
    std::vector<TokenKind> kinds_;
    std::vector<TokenId> ids_;
    std::vector<std::uint32_t> segment_of_;
    std::vector<std::uint32_t> pos_in_segment_;
    Matrix embeddings_;
};

/// Position p may attend q iff both lie in one segment and q <= p.
/// `Causal` ignores segment boundaries; it exists as a contrast case.
class AttentionMaskSpec {
public:
    enum class Rule { BlockDiagonalCausal, Causal };

    static AttentionMaskSpec block_diagonal_causal(const PackedSequence& packed);
    static AttentionMaskSpec causal(const PackedSequence& packed);

    Rule rule() const { return rule_; }
    bool allows(std::size_t p, std::size_t q) const { return q <= p && q >= key_begin_[p]; }
    /// First key visible from p; keys are the contiguous range [key_begin(p), p].
    std::size_t key_begin(std::size_t p) const { return key_begin_[p]; }
    std::size_t length() const { return key_begin_.size(); }

private:
    Rule rule_ = Rule::BlockDiagonalCausal;
    std::vector<std::size_t> key_begin_;
};

/// Gathers each plan's kept tokens in ascending order and appends a copy of
/// `text` per segment. Throws ContractError on an empty plan list or a plan
/// that does not fit the video.
PackedSequence pack(const std::vector<TrialPlan>& plans, const VideoTokenStream& video,
                    std::span<const TokenId> text);

/// Baseline <v, t> sequence built directly from visual rows, no plans involved.
/// Visual ids default to the row index.
PackedSequence make_single_sequence(const Matrix& visual, std::span<const TokenId> text,
                                    std::span<const TokenId> visual_ids = {});

/// Appends `token` to the end of every segment.
PackedSequence append_token(const PackedSequence& packed, TokenId token,
                            std::size_t max_positions = std::numeric_limits<std::size_t>::max());

/// Final position of each segment, in trial order.
std::vector<std::size_t> last_positions(const PackedSequence& packed);

/// Debug dump: segment table plus per-position kind and id.
std::string to_debug_json(const PackedSequence& packed);

} // namespace trialpack
