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

#include "trialpack/plots.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "trialpack/error.hpp"

namespace trialpack {

namespace {

std::string num(double v, int precision = 3) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += c;
        }
    }
    return out;
}

// Blue (low) to red (high).
std::string color_for(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const int r = static_cast<int>(std::lround(40 + 200 * t));
    const int g = static_cast<int>(std::lround(90 + 80 * (1.0 - std::abs(2 * t - 1))));
    const int b = static_cast<int>(std::lround(220 - 180 * t));
    std::ostringstream os;
    os << "rgb(" << r << "," << g << "," << b << ")";
    return os.str();
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

} // namespace

std::string heatmap_svg(const std::string& title, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels,
                        const std::vector<std::vector<double>>& values) {
    const int cell = 48, left = 70, top = 50;
    const int width = left + cell * static_cast<int>(col_labels.size()) + 20;
    const int height = top + cell * static_cast<int>(row_labels.size()) + 50;

    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& row : values) {
        for (double v : row) {
            if (std::isnan(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    const double span = hi > lo ? hi - lo : 1.0;

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
       << escape(title) << "</text>\n";
    for (std::size_t r = 0; r < row_labels.size(); ++r) {
        const int y = top + cell * static_cast<int>(r);
        os << "<text x=\"" << left - 6 << "\" y=\"" << y + cell / 2 + 4
           << "\" text-anchor=\"end\">" << escape(row_labels[r]) << "</text>\n";
        for (std::size_t c = 0; c < col_labels.size(); ++c) {
            const int x = left + cell * static_cast<int>(c);
            const double v = r < values.size() && c < values[r].size()
                                 ? values[r][c]
                                 : std::numeric_limits<double>::quiet_NaN();
            const std::string fill = std::isnan(v) ? "#eeeeee" : color_for((v - lo) / span);
            os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\""
               << cell << "\" fill=\"" << fill << "\" stroke=\"white\"/>\n";
            if (!std::isnan(v)) {
                os << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
                   << "\" text-anchor=\"middle\">" << num(v, 2) << "</text>\n";
            }
        }
    }
    const int label_y = top + cell * static_cast<int>(row_labels.size()) + 16;
    for (std::size_t c = 0; c < col_labels.size(); ++c) {
        os << "<text x=\"" << left + cell * static_cast<int>(c) + cell / 2 << "\" y=\"" << label_y
           << "\" text-anchor=\"middle\">" << escape(col_labels[c]) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string line_plot_svg(const std::string& title, const std::string& x_label,
                          const std::string& y_label, const std::vector<Series>& series) {
    const double width = 520, height = 340, left = 60, right = 20, top = 40, bottom = 50;
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
    double ylo = xlo, yhi = -xlo;
    for (const Series& s : series) {
        for (double v : s.x) { xlo = std::min(xlo, v); xhi = std::max(xhi, v); }
        for (double v : s.y) { ylo = std::min(ylo, v); yhi = std::max(yhi, v); }
    }
    if (!(xhi > xlo)) { xlo -= 1; xhi += 1; }
    if (!(yhi > ylo)) { ylo -= 0.5; yhi += 0.5; }
    const double pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;
    auto px = [&](double x) { return left + (x - xlo) / (xhi - xlo) * (width - left - right); };
    auto py = [&](double y) { return height - bottom - (y - ylo) / (yhi - ylo) * (height - top - bottom); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
       << escape(title) << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right
       << "\" y2=\"" << height - bottom << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
       << height - bottom << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = ylo + (yhi - ylo) * i / 4.0;
        os << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
           << num(yv) << "</text>\n";
        const double xv = xlo + (xhi - xlo) * i / 4.0;
        os << "<text x=\"" << px(xv) << "\" y=\"" << height - bottom + 16
           << "\" text-anchor=\"middle\">" << num(xv, 2) << "</text>\n";
    }
    os << "<text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 12
       << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
    os << "<text x=\"14\" y=\"" << (top + height - bottom) / 2
       << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " << (top + height - bottom) / 2
       << ")\">" << escape(y_label) << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % std::size(kPalette)];
        const Series& ser = series[s];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
            if (i) os << ' ';
            os << num(px(ser.x[i]), 2) << ',' << num(py(ser.y[i]), 2);
        }
        os << "\"/>\n";
        for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
            os << "<circle cx=\"" << num(px(ser.x[i]), 2) << "\" cy=\"" << num(py(ser.y[i]), 2)
               << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        os << "<text x=\"" << width - right - 4 << "\" y=\"" << top + 14 * (s + 1)
           << "\" text-anchor=\"end\" fill=\"" << color << "\">" << escape(ser.name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string write_sweep_plot(const SweepTable& table, const std::string& out_dir) {
    std::string name;
    std::string svg;
    switch (table.axis) {
    case SweepAxis::AlphaGrid: {
        std::vector<double> axis_values;
        for (const SweepRow& row : table.rows) {
            if (row.numeric.size() == 2 &&
                std::find(axis_values.begin(), axis_values.end(), row.numeric[0]) == axis_values.end()) {
                axis_values.push_back(row.numeric[0]);
            }
        }
        std::sort(axis_values.begin(), axis_values.end());
        auto pos = [&](double v) {
            return static_cast<std::size_t>(std::find(axis_values.begin(), axis_values.end(), v) -
                                            axis_values.begin());
        };
        const bool timed = std::any_of(table.rows.begin(), table.rows.end(),
                                       [](const SweepRow& r) { return r.report && r.report->timed; });
        std::vector<std::vector<double>> values(
            axis_values.size(),
            std::vector<double>(axis_values.size(), std::numeric_limits<double>::quiet_NaN()));
        for (const SweepRow& row : table.rows) {
            if (!row.report || row.numeric.size() != 2) continue;
            const CostReport& c = row.report->cost;
            values[pos(row.numeric[0])][pos(row.numeric[1])] =
                timed ? c.measured_speedup : c.theoretical_speedup;
        }
        std::vector<std::string> labels;
        for (double v : axis_values) labels.push_back(num(v, 2));
        name = "speedup_heatmap.svg";
        svg = heatmap_svg(timed ? "Measured speedup (rows alpha1, cols alpha2)"
                                : "Theoretical speedup (rows alpha1, cols alpha2)",
                          labels, labels, values);
        break;
    }
    case SweepAxis::MValues:
    case SweepAxis::KValues: {
        Series acc{"accuracy", {}, {}};
        Series theory{"closed-form coverage", {}, {}};
        for (const SweepRow& row : table.rows) {
            if (!row.report || row.numeric.empty()) continue;
            acc.x.push_back(row.numeric[0]);
            acc.y.push_back(row.report->accuracy);
            if (table.axis == SweepAxis::MValues && row.report->closed_form_coverage) {
                theory.x.push_back(row.numeric[0]);
                theory.y.push_back(*row.report->closed_form_coverage);
            }
        }
        std::vector<Series> series{acc};
        if (!theory.x.empty()) series.push_back(theory);
        if (table.axis == SweepAxis::MValues) {
            name = "m_scaling.svg";
            svg = line_plot_svg("Accuracy vs number of trials", "m", "accuracy", series);
        } else {
            name = "topk_sweep.svg";
            svg = line_plot_svg("Accuracy vs top-k", "k", "accuracy", series);
        }
        break;
    }
    case SweepAxis::StrategyMatrix: return {};
    }
    std::filesystem::create_directories(out_dir);
    const std::string path = (std::filesystem::path(out_dir) / name).string();
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path);
    os << svg;
    return path;
}

} // namespace trialpack
