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
#include <vector>

namespace trialpack {

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Standard product. For every output element the k-sum runs left to right,
/// so results are bit-stable regardless of blocking.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Row-wise softmax with per-row max subtraction. Entries equal to -inf are
/// treated as masked and receive probability 0.
Matrix softmax_rows(const Matrix& m);
void softmax_inplace(std::span<double> row);

/// Shannon entropy in nats with 0 ln 0 = 0. Throws ContractError unless the
/// input is non-negative and sums to 1 within 1e-9.
double entropy(std::span<const double> dist);

/// Row-wise layer normalization with learned gain and bias of length cols.
void layer_norm_rows(Matrix& m, std::span<const double> gain, std::span<const double> bias,
                     double eps = 1e-5);

/// tanh approximation of GELU.
double gelu(double x);

/// Lowest index attaining the maximum.
std::size_t argmax(std::span<const double> v);

/// SplitMix64 finalizer. A bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

/// Counter-based generator keyed by (seed, stream).
///
/// Output n (0-based) is mix64(key + (n + 1) * 0x9E3779B97F4A7C15) with
/// key = mix64(seed) ^ mix64(stream ^ 0xD1B54A32D192ED03). The algorithm is
/// pinned: sequences are identical on every platform for a given pair.
/// split(child) derives stream mix64(stream ^ mix64(child + 1)), so distinct
/// children of one parent always get distinct stream ids.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    std::uint64_t next_u64();
    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);
    /// Unbiased integer in [0, bound) by rejection; bound must be positive.
    std::uint64_t below(std::uint64_t bound);
    /// Standard normal via Box-Muller (one variate per call).
    double normal();

    Rng split(std::uint64_t child) const;

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// `take` distinct indices from [0, population), ascending. Partial
/// Fisher-Yates shuffle followed by a sort; every subset is equiprobable.
std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t take,
                                                    Rng& rng);

} // namespace trialpack
