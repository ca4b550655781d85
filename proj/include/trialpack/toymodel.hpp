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
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "trialpack/numkernel.hpp"
#include "trialpack/packer.hpp"
#include "trialpack/video.hpp"

namespace trialpack {

struct ModelConfig {
    std::size_t layers = 4;
    std::size_t model_dim = 64;
    std::size_t heads = 4;
    std::size_t vocab = 64; // D
    std::size_t max_positions = 8192;
    std::uint64_t init_seed = 0;

    std::size_t head_dim() const { return model_dim / heads; }
    /// Throws ShapeError for heads not dividing model_dim, ConfigError otherwise.
    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct LayerWeights {
    Matrix ln1_gain, ln1_bias; // 1 x d
    Matrix wq, wk, wv, wo;     // d x d
    Matrix ln2_gain, ln2_bias; // 1 x d
    Matrix w1, b1;             // d x 4d, 1 x 4d
    Matrix w2, b2;             // 4d x d, 1 x d
};

/// Pre-norm decoder weights. Tensor order (see for_each_tensor) is the
/// serialization order and the order in which init draws its streams.
struct TransformerWeights {
    ModelConfig config;
    Matrix token_embedding; // D x d
    std::vector<LayerWeights> layers;
    Matrix lnf_gain, lnf_bias; // 1 x d
    Matrix w_out;              // d x D

    void for_each_tensor(const std::function<void(const std::string&, Matrix&)>& fn);
    void for_each_tensor(const std::function<void(const std::string&, const Matrix&)>& fn) const;
    /// FNV-1a over the raw bytes of every tensor.
    std::uint64_t checksum() const;
};

/// Hand-built stand-in whose answer logit counts visible needle tokens.
struct NeedleProbeConfig {
    TokenId answer = 0;      // a*
    double gain = 1.0;       // beta
    double noise = 0.0;      // sigma, must satisfy 0 <= sigma < beta
    std::uint64_t seed = 0;
    std::vector<double> needle_direction; // unit vector, length model_dim
    std::size_t vocab = 64;
    std::size_t max_positions = 8192;

    void validate() const;
};

struct ForwardResult {
    Matrix logits;            // length x D
    std::uint64_t pairs = 0;  // (query, key) score entries evaluated, summed over layers and heads
    std::size_t attention_units = 1; // layers * heads for the transformer, 1 for the probe
};

class Backend {
public:
    enum class Kind { SeededTransformer, NeedleProbe };

    static Backend transformer(TransformerWeights weights);
    static Backend needle_probe(NeedleProbeConfig probe);

    Kind kind() const;
    std::size_t vocab() const;
    std::size_t max_positions() const;
    std::size_t attention_units() const;

    /// Throws UnsupportedOperation when the backend is of the other kind.
    const TransformerWeights& weights() const;
    const NeedleProbeConfig& probe() const;

    /// Per-position logits under `mask`. Throws ContractError when the
    /// sequence exceeds max_positions or holds an out-of-vocabulary id.
    ForwardResult forward(const PackedSequence& packed, const AttentionMaskSpec& mask) const;

private:
    std::variant<std::shared_ptr<const TransformerWeights>, std::shared_ptr<const NeedleProbeConfig>>
        impl_;
};

/// Draws every tensor from Rng(init_seed): tensor t uses stream split(t),
/// matrices are normal / sqrt(model_dim), gains 1, biases 0.
Backend build_model(const ModelConfig& cfg);
TransformerWeights init_weights(const ModelConfig& cfg);

/// Mean attention each position receives over every query of its segment,
/// every layer and every head. Queries before the position contribute 0.
std::vector<double> attention_received_scores(const Backend& backend, const PackedSequence& packed,
                                              const AttentionMaskSpec& mask);

/// Segment-final logits of the probe, one row per segment.
Matrix needle_probe_forward(const Backend& probe, const PackedSequence& packed,
                            const AttentionMaskSpec& mask);

/// Sinusoidal code for an in-segment position, scaled by 1/sqrt(d).
void add_position_code(std::span<double> row, std::size_t position);

struct StreamSpec {
    std::size_t frames = 0;           // F
    std::size_t tokens_per_frame = 0; // M
    std::vector<std::size_t> needle_frames;
};

/// Unit direction reserved for needle patches under `rng`.
std::vector<double> needle_direction(std::size_t model_dim, const Rng& rng);

/// Distractor patches are normal / sqrt(d) per (frame, patch) stream with the
/// needle direction projected out; every patch of a needle frame is exactly
/// the needle direction.
VideoTokenStream embed_frames(const StreamSpec& spec, std::size_t model_dim, const Rng& rng);

/// Flat little-endian f64 dump behind a JSON header:
/// "TPWGHT01" | u64 header length | header JSON | tensors in manifest order.
void save_weights(const TransformerWeights& weights, const std::string& path);
TransformerWeights load_weights(const std::string& path);

} // namespace trialpack
