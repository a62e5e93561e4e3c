#pragma once

// Minimal standalone SVG charts for bench and dataset reports.

#include <string>
#include <vector>

namespace grip {

struct Series {
    std::string name;
    std::vector<double> x, y;
};

std::string svg_line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                           const std::vector<Series>& series, bool log_x = false);

/// Histogram with `bins` equal-width bins over [lo, hi] (data range if lo >= hi).
std::string svg_histogram(const std::string& title, const std::string& xlabel, const std::vector<double>& values,
                          int bins = 20, double lo = 0.0, double hi = 0.0);

/// Grouped bars: one group per category, one bar per series value.
std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<Series>& series);

}  // namespace grip
