#pragma once

#include <string>
#include <utility>
#include <vector>

#include "feplab/core.hpp"

namespace feplab {

// 17 significant digits; enough to round-trip an IEEE double exactly.
std::string format_double(double value);

// One quantity,value row per entry; header row mandatory.
std::string rows_to_csv(const std::vector<std::pair<std::string, double>>& rows);

// Matrix blocks with `#block <name>` header lines, values comma separated.
std::string matrix_blocks_to_csv(const std::vector<std::pair<std::string, Mat>>& blocks);

// Grid density with `#axis lower,upper,step` metadata lines then flat values.
std::string grid_to_csv(const GridDensity& grid);

std::string curve_to_csv(const std::string& x_name, const std::string& y_name,
                         const std::vector<std::pair<double, double>>& points);

// Small deterministic SVG builders (static markup, no external references).
std::string svg_line_chart(const std::string& title,
                           const std::vector<std::pair<double, double>>& points);
std::string svg_heatmap(const std::string& title, const Mat& field);
std::string svg_scatter(const std::string& title,
                        const std::vector<std::pair<double, double>>& points,
                        const std::string& x_label, const std::string& y_label);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace feplab
