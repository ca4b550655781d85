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
#include <span>
#include <vector>

#include "trialpack/numkernel.hpp"

namespace trialpack {

/// F frames of M patch embeddings each, stored frame-major: row f*M + p.
struct VideoTokenStream {
    std::size_t frames = 0;           // F
    std::size_t tokens_per_frame = 0; // M
    Matrix embeddings;                // (F*M) x model_dim

    std::size_t model_dim() const { return embeddings.cols(); }
    std::span<const double> token(std::size_t frame, std::size_t patch) const {
        return embeddings.row(frame * tokens_per_frame + patch);
    }
};

} // namespace trialpack
