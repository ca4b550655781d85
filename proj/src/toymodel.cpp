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

#include "trialpack/toymodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "trialpack/error.hpp"

namespace trialpack {

void ModelConfig::validate() const {
    if (heads == 0 || model_dim == 0 || model_dim % heads != 0) {
        throw ShapeError("model: heads (" + std::to_string(heads) + ") must divide model_dim (" +
                         std::to_string(model_dim) + ")");
    }
    if (layers == 0) throw ConfigError("model: layers must be >= 1");
    if (vocab < 4) throw ConfigError("model: vocab must be >= 4");
    if (max_positions == 0) throw ConfigError("model: max_positions must be >= 1");
}

void NeedleProbeConfig::validate() const {
    if (!(gain > 0.0)) throw ConfigError("needle probe: gain must be positive");
    if (!(noise >= 0.0) || noise >= gain) {
        throw ConfigError("needle probe: noise must satisfy 0 <= sigma < beta");
    }
    if (vocab < 4) throw ConfigError("needle probe: vocab must be >= 4");
    if (answer < 0 || static_cast<std::size_t>(answer) >= vocab) {
        throw ConfigError("needle probe: answer token outside vocabulary");
    }
    if (needle_direction.empty()) throw ConfigError("needle probe: missing needle direction");
}

void TransformerWeights::for_each_tensor(
    const std::function<void(const std::string&, Matrix&)>& fn) {
    fn("token_embedding", token_embedding);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        LayerWeights& w = layers[l];
        const std::string p = "layers." + std::to_string(l) + ".";
        fn(p + "ln1_gain", w.ln1_gain);
        fn(p + "ln1_bias", w.ln1_bias);
        fn(p + "wq", w.wq);
        fn(p + "wk", w.wk);
        fn(p + "wv", w.wv);
        fn(p + "wo", w.wo);
        fn(p + "ln2_gain", w.ln2_gain);
        fn(p + "ln2_bias", w.ln2_bias);
        fn(p + "w1", w.w1);
        fn(p + "b1", w.b1);
        fn(p + "w2", w.w2);
        fn(p + "b2", w.b2);
    }
    fn("lnf_gain", lnf_gain);
    fn("lnf_bias", lnf_bias);
    fn("w_out", w_out);
}

void TransformerWeights::for_each_tensor(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
    const_cast<TransformerWeights*>(this)->for_each_tensor(
        [&](const std::string& name, Matrix& m) { fn(name, m); });
}

std::uint64_t TransformerWeights::checksum() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for_each_tensor([&](const std::string&, const Matrix& m) {
        for (double v : m.data()) {
            unsigned char bytes[sizeof(double)];
            std::memcpy(bytes, &v, sizeof(double));
            for (unsigned char b : bytes) {
                h ^= b;
                h *= 0x100000001b3ULL;
            }
        }
    });
    return h;
}

namespace {

enum class Init { Normal, Ones, Zeros };

Init init_for(const std::string& name) {
    auto ends_with = [&](const char* suffix) {
        const std::size_t n = std::strlen(suffix);
        return name.size() >= n && name.compare(name.size() - n, n, suffix) == 0;
    };
    if (ends_with("_gain")) return Init::Ones;
    if (ends_with("_bias") || ends_with(".b1") || ends_with(".b2")) return Init::Zeros;
    return Init::Normal;
}

TransformerWeights shaped_weights(const ModelConfig& cfg) {
    const std::size_t d = cfg.model_dim;
    const std::size_t ff = 4 * d;
    TransformerWeights w;
    w.config = cfg;
    w.token_embedding = Matrix(cfg.vocab, d);
    w.layers.resize(cfg.layers);
    for (LayerWeights& l : w.layers) {
        l.ln1_gain = Matrix(1, d);
        l.ln1_bias = Matrix(1, d);
        l.wq = Matrix(d, d);
        l.wk = Matrix(d, d);
        l.wv = Matrix(d, d);
        l.wo = Matrix(d, d);
        l.ln2_gain = Matrix(1, d);
        l.ln2_bias = Matrix(1, d);
        l.w1 = Matrix(d, ff);
        l.b1 = Matrix(1, ff);
        l.w2 = Matrix(ff, d);
        l.b2 = Matrix(1, d);
    }
    w.lnf_gain = Matrix(1, d);
    w.lnf_bias = Matrix(1, d);
    w.w_out = Matrix(d, cfg.vocab);
    return w;
}

void add_row_bias(Matrix& m, const Matrix& bias) {
    const auto b = bias.row(0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = m.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
    }
}

void add_into(Matrix& x, const Matrix& delta) {
    auto dst = x.data();
    const auto src = delta.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void check_positions(const PackedSequence& packed, const AttentionMaskSpec& mask,
                     std::size_t max_positions) {
    if (packed.length() > max_positions) {
        throw ContractError("forward: sequence of " + std::to_string(packed.length()) +
                            " positions exceeds max_positions " + std::to_string(max_positions));
    }
    if (mask.length() != packed.length()) {
        throw ContractError("forward: mask length does not match the sequence");
    }
}

ForwardResult transformer_forward(const TransformerWeights& w, const PackedSequence& packed,
                                  const AttentionMaskSpec& mask, std::vector<double>* received) {
    const ModelConfig& cfg = w.config;
    check_positions(packed, mask, cfg.max_positions);
    const std::size_t n = packed.length();
    const std::size_t d = cfg.model_dim;
    const std::size_t dh = cfg.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    Matrix x(n, d);
    for (std::size_t p = 0; p < n; ++p) {
        auto row = x.row(p);
        if (packed.kind(p) == TokenKind::Visual) {
            const auto e = packed.embedding(p);
            std::copy(e.begin(), e.end(), row.begin());
        } else {
            const TokenId id = packed.id(p);
            if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab) {
                throw ContractError("forward: token id " + std::to_string(id) +
                                    " outside vocabulary");
            }
            const auto e = w.token_embedding.row(static_cast<std::size_t>(id));
            std::copy(e.begin(), e.end(), row.begin());
        }
        add_position_code(row, packed.pos_in_segment(p));
    }

    if (received) received->assign(n, 0.0);
    ForwardResult result;
    result.attention_units = cfg.layers * cfg.heads;
    std::vector<double> scores;
    std::vector<double> acc(dh);

    for (const LayerWeights& layer : w.layers) {
        Matrix h = x;
        layer_norm_rows(h, layer.ln1_gain.row(0), layer.ln1_bias.row(0));
        const Matrix q = matmul(h, layer.wq);
        const Matrix k = matmul(h, layer.wk);
        const Matrix v = matmul(h, layer.wv);
        Matrix attn(n, d);

        for (std::size_t head = 0; head < cfg.heads; ++head) {
            const std::size_t off = head * dh;
            for (std::size_t p = 0; p < n; ++p) {
                const std::size_t kb = mask.key_begin(p);
                const std::size_t count = p - kb + 1;
                scores.resize(count);
                const double* qp = q.row(p).data() + off;
                for (std::size_t j = 0; j < count; ++j) {
                    const double* kq = k.row(kb + j).data() + off;
                    double s = 0.0;
                    for (std::size_t c = 0; c < dh; ++c) s += qp[c] * kq[c];
                    scores[j] = s * scale;
                }
                softmax_inplace(scores);
                result.pairs += count;

                std::fill(acc.begin(), acc.end(), 0.0);
                for (std::size_t j = 0; j < count; ++j) {
                    const double a = scores[j];
                    const double* vq = v.row(kb + j).data() + off;
                    for (std::size_t c = 0; c < dh; ++c) acc[c] += a * vq[c];
                }
                if (received) {
                    for (std::size_t j = 0; j < count; ++j) (*received)[kb + j] += scores[j];
                }
                std::copy(acc.begin(), acc.end(), attn.row(p).begin() + static_cast<std::ptrdiff_t>(off));
            }
        }
        add_into(x, matmul(attn, layer.wo));

        Matrix h2 = x;
        layer_norm_rows(h2, layer.ln2_gain.row(0), layer.ln2_bias.row(0));
        Matrix f = matmul(h2, layer.w1);
        add_row_bias(f, layer.b1);
        for (double& val : f.data()) val = gelu(val);
        Matrix out = matmul(f, layer.w2);
        add_row_bias(out, layer.b2);
        add_into(x, out);
    }

    layer_norm_rows(x, w.lnf_gain.row(0), w.lnf_bias.row(0));
    result.logits = matmul(x, w.w_out);
    return result;
}

constexpr double kNeedleCosine = 1.0 - 1e-9;

bool is_needle(std::span<const double> e, std::span<const double> dir) {
    double dot = 0.0, ee = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        dot += e[i] * dir[i];
        ee += e[i] * e[i];
    }
    if (ee == 0.0) return false;
    return dot / std::sqrt(ee) >= kNeedleCosine;
}

std::uint64_t token_descriptor(const PackedSequence& packed, std::size_t p) {
    const auto kind = static_cast<std::uint64_t>(packed.kind(p) == TokenKind::Visual ? 1 : 2);
    return mix64((kind << 56) ^ static_cast<std::uint64_t>(packed.id(p)));
}

ForwardResult probe_forward(const NeedleProbeConfig& probe, const PackedSequence& packed,
                            const AttentionMaskSpec& mask) {
    check_positions(packed, mask, probe.max_positions);
    if (packed.model_dim() != probe.needle_direction.size()) {
        throw ShapeError("needle probe: embedding width does not match needle direction");
    }
    const std::size_t n = packed.length();
    const std::size_t vocab = probe.vocab;
    const auto answer = static_cast<std::size_t>(probe.answer);

    std::vector<char> needle(n, 0);
    std::vector<std::uint64_t> desc(n);
    for (std::size_t p = 0; p < n; ++p) {
        if (packed.kind(p) == TokenKind::Visual) {
            needle[p] = is_needle(packed.embedding(p), probe.needle_direction) ? 1 : 0;
        } else if (packed.id(p) < 0 || static_cast<std::size_t>(packed.id(p)) >= vocab) {
            throw ContractError("needle probe: token id outside vocabulary");
        }
        desc[p] = token_descriptor(packed, p);
    }

    ForwardResult result;
    result.attention_units = 1;
    result.logits = Matrix(n, vocab);
    std::size_t count = 0;
    std::uint64_t hash = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const std::size_t kb = mask.key_begin(p);
        if (p > 0 && kb == mask.key_begin(p - 1)) {
            count += static_cast<std::size_t>(needle[p]);
            hash = mix64(hash ^ desc[p]);
        } else {
            count = 0;
            hash = 0;
            for (std::size_t q = kb; q <= p; ++q) {
                count += static_cast<std::size_t>(needle[q]);
                hash = mix64(hash ^ desc[q]);
            }
        }
        result.pairs += p - kb + 1;

        auto row = result.logits.row(p);
        Rng noise(probe.seed, hash);
        for (std::size_t t = 0; t < vocab; ++t) row[t] = probe.noise * noise.uniform(-1.0, 1.0);
        if (count > 0) row[answer] = probe.gain * static_cast<double>(count);
    }
    return result;
}

} // namespace

void add_position_code(std::span<double> row, std::size_t position) {
    const std::size_t d = row.size();
    const double inv = 1.0 / std::sqrt(static_cast<double>(d));
    const double pos = static_cast<double>(position);
    for (std::size_t i = 0; i + 1 < d; i += 2) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
        row[i] += inv * std::sin(pos * freq);
        row[i + 1] += inv * std::cos(pos * freq);
    }
}

TransformerWeights init_weights(const ModelConfig& cfg) {
    cfg.validate();
    TransformerWeights w = shaped_weights(cfg);
    const Rng root(cfg.init_seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.model_dim));
    std::uint64_t index = 0;
    w.for_each_tensor([&](const std::string& name, Matrix& m) {
        Rng rng = root.split(index++);
        switch (init_for(name)) {
        case Init::Ones: std::fill(m.data().begin(), m.data().end(), 1.0); break;
        case Init::Zeros: std::fill(m.data().begin(), m.data().end(), 0.0); break;
        case Init::Normal:
            for (double& v : m.data()) v = scale * rng.normal();
            break;
        }
    });
    return w;
}

Backend build_model(const ModelConfig& cfg) { return Backend::transformer(init_weights(cfg)); }

Backend Backend::transformer(TransformerWeights weights) {
    weights.config.validate();
    Backend b;
    b.impl_ = std::make_shared<const TransformerWeights>(std::move(weights));
    return b;
}

Backend Backend::needle_probe(NeedleProbeConfig probe) {
    probe.validate();
    Backend b;
    b.impl_ = std::make_shared<const NeedleProbeConfig>(std::move(probe));
    return b;
}

Backend::Kind Backend::kind() const {
    return impl_.index() == 0 ? Kind::SeededTransformer : Kind::NeedleProbe;
}

std::size_t Backend::vocab() const {
    return kind() == Kind::SeededTransformer ? weights().config.vocab : probe().vocab;
}

std::size_t Backend::max_positions() const {
    return kind() == Kind::SeededTransformer ? weights().config.max_positions
                                             : probe().max_positions;
}

std::size_t Backend::attention_units() const {
    if (kind() == Kind::NeedleProbe) return 1;
    return weights().config.layers * weights().config.heads;
}

const TransformerWeights& Backend::weights() const {
    if (kind() != Kind::SeededTransformer) {
        throw UnsupportedOperation("backend is a needle probe, not a transformer");
    }
    return *std::get<0>(impl_);
}

const NeedleProbeConfig& Backend::probe() const {
    if (kind() != Kind::NeedleProbe) throw UnsupportedOperation("backend is not a needle probe");
    return *std::get<1>(impl_);
}

ForwardResult Backend::forward(const PackedSequence& packed, const AttentionMaskSpec& mask) const {
    if (kind() == Kind::SeededTransformer) return transformer_forward(weights(), packed, mask, nullptr);
    return probe_forward(probe(), packed, mask);
}

std::vector<double> attention_received_scores(const Backend& backend, const PackedSequence& packed,
                                              const AttentionMaskSpec& mask) {
    if (backend.kind() != Backend::Kind::SeededTransformer) {
        throw UnsupportedOperation("attention scores need a transformer backend");
    }
    const TransformerWeights& w = backend.weights();
    std::vector<double> received;
    transformer_forward(w, packed, mask, &received);
    const double units = static_cast<double>(w.config.layers * w.config.heads);
    for (std::size_t p = 0; p < packed.length(); ++p) {
        const double queries = static_cast<double>(packed.segments()[packed.segment_of(p)].length);
        received[p] /= units * queries;
    }
    return received;
}

Matrix needle_probe_forward(const Backend& probe, const PackedSequence& packed,
                            const AttentionMaskSpec& mask) {
    const ForwardResult r = probe_forward(probe.probe(), packed, mask);
    const auto last = last_positions(packed);
    Matrix out(last.size(), r.logits.cols());
    for (std::size_t i = 0; i < last.size(); ++i) {
        const auto src = r.logits.row(last[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

namespace {
constexpr std::uint64_t kNeedleStream = 0x4E45454450524F42ULL;
}

std::vector<double> needle_direction(std::size_t model_dim, const Rng& rng) {
    Rng r = rng.split(kNeedleStream);
    std::vector<double> dir(model_dim);
    double norm = 0.0;
    for (double& v : dir) {
        v = r.normal();
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : dir) v /= norm;
    return dir;
}

VideoTokenStream embed_frames(const StreamSpec& spec, std::size_t model_dim, const Rng& rng) {
    if (spec.frames == 0 || spec.tokens_per_frame == 0) {
        throw ContractError("embed_frames: F and M must be >= 1");
    }
    const std::unordered_set<std::size_t> needles(spec.needle_frames.begin(),
                                                  spec.needle_frames.end());
    for (std::size_t f : needles) {
        if (f >= spec.frames) throw ContractError("embed_frames: needle frame outside video");
    }
    const std::vector<double> dir = needle_direction(model_dim, rng);
    const double scale = 1.0 / std::sqrt(static_cast<double>(model_dim));

    VideoTokenStream video;
    video.frames = spec.frames;
    video.tokens_per_frame = spec.tokens_per_frame;
    video.embeddings = Matrix(spec.frames * spec.tokens_per_frame, model_dim);
    for (std::size_t f = 0; f < spec.frames; ++f) {
        const bool is_needle_frame = needles.contains(f);
        for (std::size_t p = 0; p < spec.tokens_per_frame; ++p) {
            const std::size_t flat = f * spec.tokens_per_frame + p;
            auto row = video.embeddings.row(flat);
            if (is_needle_frame) {
                std::copy(dir.begin(), dir.end(), row.begin());
                continue;
            }
            Rng r = rng.split(flat);
            double along = 0.0;
            for (std::size_t i = 0; i < model_dim; ++i) {
                row[i] = scale * r.normal();
                along += row[i] * dir[i];
            }
            for (std::size_t i = 0; i < model_dim; ++i) row[i] -= along * dir[i];
        }
    }
    return video;
}

namespace {

constexpr char kMagic[8] = {'T', 'P', 'W', 'G', 'H', 'T', '0', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    os.write(b, 8);
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw Error("load_weights: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

nlohmann::json config_json(const ModelConfig& c) {
    return {{"layers", c.layers},       {"model_dim", c.model_dim},
            {"heads", c.heads},         {"vocab", c.vocab},
            {"max_positions", c.max_positions}, {"init_seed", c.init_seed}};
}

} // namespace

void save_weights(const TransformerWeights& weights, const std::string& path) {
    nlohmann::json manifest = nlohmann::json::array();
    weights.for_each_tensor([&](const std::string& name, const Matrix& m) {
        manifest.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}});
    });
    const nlohmann::json header = {{"format", "trialpack-weights"},
                                   {"version", 1},
                                   {"dtype", "f64le"},
                                   {"config", config_json(weights.config)},
                                   {"tensors", manifest}};
    const std::string text = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("save_weights: cannot open " + path);
    os.write(kMagic, sizeof(kMagic));
    put_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    weights.for_each_tensor([&](const std::string&, const Matrix& m) {
        for (double v : m.data()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            put_u64(os, bits);
        }
    });
    if (!os) throw Error("save_weights: write failed for " + path);
}

TransformerWeights load_weights(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("load_weights: cannot open " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) throw Error("load_weights: bad magic");
    const std::uint64_t len = get_u64(is);
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    if (!is) throw Error("load_weights: truncated header");
    const auto header = nlohmann::json::parse(text);

    ModelConfig cfg;
    const auto& c = header.at("config");
    cfg.layers = c.at("layers");
    cfg.model_dim = c.at("model_dim");
    cfg.heads = c.at("heads");
    cfg.vocab = c.at("vocab");
    cfg.max_positions = c.at("max_positions");
    cfg.init_seed = c.at("init_seed");
    cfg.validate();

    TransformerWeights w = shaped_weights(cfg);
    const auto& manifest = header.at("tensors");
    std::size_t t = 0;
    w.for_each_tensor([&](const std::string& name, Matrix& m) {
        if (t >= manifest.size() || manifest[t].at("name") != name ||
            manifest[t].at("shape")[0] != m.rows() || manifest[t].at("shape")[1] != m.cols()) {
            throw Error("load_weights: manifest mismatch at tensor " + name);
        }
        ++t;
        for (double& v : m.data()) {
            const std::uint64_t bits = get_u64(is);
            std::memcpy(&v, &bits, sizeof(v));
        }
    });
    return w;
}

} // namespace trialpack
