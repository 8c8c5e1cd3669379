// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/charts.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

#include "saeaudit/error.hpp"

namespace saeaudit {
namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 50.0;
constexpr double kBottom = 60.0;

constexpr std::array<const char*, 6> kPalette = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Fixed-precision numbers keep the file independent of locale and of
// last-bit noise in the inputs.
std::string num(double v) {
    std::string s = fmt::format("{:.2f}", v);
    return s == "-0.00" ? "0.00" : s;
}

}  // namespace

std::string render_grouped_bars(const BarChart& chart) {
    require(!chart.categories.empty() && !chart.series.empty(), ErrorCode::invalid_argument,
            "bar chart needs categories and series");
    double lo = 0.0, hi = 0.0;
    for (const auto& s : chart.series) {
        require(s.values.size() == chart.categories.size(), ErrorCode::dimension_mismatch,
                fmt::format("series '{}' has {} values for {} categories", s.name, s.values.size(),
                            chart.categories.size()));
        for (double v : s.values) {
            require(std::isfinite(v), ErrorCode::non_finite, fmt::format("series '{}' holds a non-finite value", s.name));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const double pad = 0.1 * (hi - lo);
    hi += hi > 0.0 ? pad : 0.0;
    lo -= lo < 0.0 ? pad : 0.0;

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const auto y_of = [&](double v) { return kTop + (hi - v) / (hi - lo) * plot_h; };

    std::string svg;
    svg += fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n",
        kWidth, kHeight);
    svg += fmt::format("<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kWidth, kHeight);
    svg += fmt::format("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                       num(kLeft + plot_w / 2), escape(chart.title));
    svg += fmt::format("<text transform=\"translate(18 {}) rotate(-90)\" text-anchor=\"middle\">{}</text>\n",
                       num(kTop + plot_h / 2), escape(chart.y_label));

    constexpr int kTicks = 5;
    for (int k = 0; k <= kTicks; ++k) {
        const double v = lo + (hi - lo) * k / kTicks;
        const double y = y_of(v);
        svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\"/>\n", num(kLeft), num(y),
                           num(kLeft + plot_w), num(y));
        svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", num(kLeft - 6), num(y + 4),
                           num(v));
    }
    svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", num(kLeft),
                       num(y_of(0.0)), num(kLeft + plot_w), num(y_of(0.0)));

    const double group_w = plot_w / static_cast<double>(chart.categories.size());
    const double bar_w = 0.8 * group_w / static_cast<double>(chart.series.size());
    for (std::size_t c = 0; c < chart.categories.size(); ++c) {
        const double x0 = kLeft + group_w * static_cast<double>(c) + 0.1 * group_w;
        for (std::size_t s = 0; s < chart.series.size(); ++s) {
            const double v = chart.series[s].values[c];
            const double x = x0 + bar_w * static_cast<double>(s);
            const double top = std::min(y_of(v), y_of(0.0));
            const double h = std::abs(y_of(v) - y_of(0.0));
            svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n", num(x), num(top),
                               num(bar_w), num(h), kPalette[s % kPalette.size()]);
            const double label_y = v >= 0.0 ? y_of(v) - 4.0 : y_of(v) + 13.0;
            svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"10\">{}</text>\n",
                               num(x + bar_w / 2), num(label_y), fmt::format("{:.3f}", v));
        }
        svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", num(x0 + 0.4 * group_w),
                           num(kTop + plot_h + 20), escape(chart.categories[c]));
    }

    for (std::size_t s = 0; s < chart.series.size(); ++s) {
        const double y = kTop + 20.0 * static_cast<double>(s);
        svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
                           num(kWidth - kRight + 16), num(y), kPalette[s % kPalette.size()]);
        svg += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", num(kWidth - kRight + 34), num(y + 10),
                           escape(chart.series[s].name));
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace saeaudit
