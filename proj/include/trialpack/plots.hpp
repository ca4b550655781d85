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

#include <string>
#include <vector>

#include "trialpack/harness.hpp"

namespace trialpack {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

/// Cell (r, c) of `values` is drawn at row r, column c; NaN cells are blank.
std::string heatmap_svg(const std::string& title, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels,
                        const std::vector<std::vector<double>>& values);

std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<Series>& series);

/// Writes the plot belonging to the sweep axis into `out_dir`
/// (speedup_heatmap.svg, m_scaling.svg or topk_sweep.svg). Returns the path
/// written, or an empty string when the axis has no plot.
std::string write_sweep_plot(const SweepTable& table, const std::string& out_dir);

} // namespace trialpack
