#pragma once

#include <string>
#include <vector>

namespace deepcontrast {

/// One line with optional symmetric confidence band.
struct LineSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> ci;  // half-widths; empty or NaN entries draw no band
};

/// Deterministic standalone SVG line plot (axes, ticks, legend, CI bands).
std::string render_line_plot_svg(const std::string& title, const std::string& x_label,
                                 const std::string& y_label,
                                 const std::vector<LineSeries>& series);

/// Violin-style distribution plot: one mirrored kernel-density outline per
/// group, plus median tick.
std::string render_violin_svg(const std::string& title, const std::string& y_label,
                              const std::vector<std::string>& group_labels,
                              const std::vector<std::vector<double>>& distributions);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace deepcontrast
