// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace saeaudit {

struct BarSeries {
    std::string name;
    std::vector<double> values;  // one per category
};

struct BarChart {
    std::string title;
    std::string y_label;
    std::vector<std::string> categories;
    std::vector<BarSeries> series;
};

// Grouped bar chart as a standalone SVG document. Output depends only on the
// chart contents, so identical inputs render byte-identical files.
std::string render_grouped_bars(const BarChart& chart);

}  // namespace saeaudit
