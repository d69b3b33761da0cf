#include "feplab/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace feplab {

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::string rows_to_csv(const std::vector<std::pair<std::string, double>>& rows) {
    std::ostringstream out;
    out << "quantity,value\n";
    for (const auto& [name, value] : rows) out << name << "," << format_double(value) << "\n";
    return out.str();
}

std::string matrix_blocks_to_csv(const std::vector<std::pair<std::string, Mat>>& blocks) {
    std::ostringstream out;
    for (const auto& [name, m] : blocks) {
        out << "#block " << name << "\n";
        for (Index r = 0; r < m.rows(); ++r) {
            for (Index c = 0; c < m.cols(); ++c) {
                if (c > 0) out << ",";
                out << format_double(m(r, c));
            }
            out << "\n";
        }
    }
    return out.str();
}

std::string grid_to_csv(const GridDensity& grid) {
    std::ostringstream out;
    for (const auto& ax : grid.axes())
        out << "#axis " << format_double(ax.lower) << "," << format_double(ax.upper) << ","
            << format_double(ax.step) << "\n";
    out << "value\n";
    for (Index i = 0; i < grid.values().size(); ++i)
        out << format_double(grid.values()(i)) << "\n";
    return out.str();
}

std::string curve_to_csv(const std::string& x_name, const std::string& y_name,
                         const std::vector<std::pair<double, double>>& points) {
    std::ostringstream out;
    out << x_name << "," << y_name << "\n";
    for (const auto& [x, y] : points) out << format_double(x) << "," << format_double(y) << "\n";
    return out.str();
}

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 420;
constexpr int kMargin = 50;

std::string svg_open(const std::string& title) {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"14\">"
        << title << "</text>\n";
    return out.str();
}

std::string fmt_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

Range padded_range(double lo, double hi) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

double map_x(double v, const Range& r) {
    return kMargin + (v - r.lo) / (r.hi - r.lo) * (kWidth - 2 * kMargin);
}

double map_y(double v, const Range& r) {
    return kHeight - kMargin - (v - r.lo) / (r.hi - r.lo) * (kHeight - 2 * kMargin);
}

std::string axes_markup(const Range& rx, const Range& ry) {
    std::ostringstream out;
    out << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
        << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
        << kHeight - kMargin << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out << "<text x=\"" << kMargin << "\" y=\"" << kHeight - kMargin + 18
        << "\" font-family=\"monospace\" font-size=\"10\">" << fmt_coord(rx.lo) << "</text>\n";
    out << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kHeight - kMargin + 18
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"10\">" << fmt_coord(rx.hi)
        << "</text>\n";
    out << "<text x=\"" << kMargin - 4 << "\" y=\"" << kHeight - kMargin
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"10\">" << fmt_coord(ry.lo)
        << "</text>\n";
    out << "<text x=\"" << kMargin - 4 << "\" y=\"" << kMargin + 4
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"10\">" << fmt_coord(ry.hi)
        << "</text>\n";
    return out.str();
}

}  // namespace

std::string svg_line_chart(const std::string& title,
                           const std::vector<std::pair<double, double>>& points) {
    std::ostringstream out;
    out << svg_open(title);
    if (!points.empty()) {
        double xlo = points.front().first, xhi = points.front().first;
        double ylo = points.front().second, yhi = points.front().second;
        for (const auto& [x, y] : points) {
            xlo = std::min(xlo, x);
            xhi = std::max(xhi, x);
            ylo = std::min(ylo, y);
            yhi = std::max(yhi, y);
        }
        const Range rx = padded_range(xlo, xhi), ry = padded_range(ylo, yhi);
        out << axes_markup(rx, ry);
        out << "<polyline fill=\"none\" stroke=\"#1f6fb2\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : points)
            out << fmt_coord(map_x(x, rx)) << "," << fmt_coord(map_y(y, ry)) << " ";
        out << "\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string svg_heatmap(const std::string& title, const Mat& field) {
    std::ostringstream out;
    out << svg_open(title);
    const Index rows = field.rows(), cols = field.cols();
    if (rows > 0 && cols > 0) {
        const double lo = field.minCoeff(), hi = field.maxCoeff();
        const double span = (hi > lo) ? hi - lo : 1.0;
        const double cw = static_cast<double>(kWidth - 2 * kMargin) / static_cast<double>(cols);
        const double ch = static_cast<double>(kHeight - 2 * kMargin) / static_cast<double>(rows);
        for (Index r = 0; r < rows; ++r) {
            for (Index c = 0; c < cols; ++c) {
                const double t = (field(r, c) - lo) / span;
                const int shade = static_cast<int>(std::lround(255.0 * (1.0 - t)));
                out << "<rect x=\"" << fmt_coord(kMargin + static_cast<double>(c) * cw) << "\" y=\""
                    << fmt_coord(kMargin + static_cast<double>(r) * ch) << "\" width=\""
                    << fmt_coord(cw + 0.5) << "\" height=\"" << fmt_coord(ch + 0.5)
                    << "\" fill=\"rgb(" << shade << "," << shade << ",255)\"/>\n";
            }
        }
    }
    out << "</svg>\n";
    return out.str();
}

std::string svg_scatter(const std::string& title,
                        const std::vector<std::pair<double, double>>& points,
                        const std::string& x_label, const std::string& y_label) {
    std::ostringstream out;
    out << svg_open(title);
    if (!points.empty()) {
        double xlo = points.front().first, xhi = points.front().first;
        double ylo = points.front().second, yhi = points.front().second;
        for (const auto& [x, y] : points) {
            xlo = std::min(xlo, x);
            xhi = std::max(xhi, x);
            ylo = std::min(ylo, y);
            yhi = std::max(yhi, y);
        }
        const Range rx = padded_range(xlo, xhi), ry = padded_range(ylo, yhi);
        out << axes_markup(rx, ry);
        for (const auto& [x, y] : points)
            out << "<circle cx=\"" << fmt_coord(map_x(x, rx)) << "\" cy=\""
                << fmt_coord(map_y(y, ry)) << "\" r=\"2.5\" fill=\"#b23a1f\"/>\n";
        out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12
            << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">" << x_label
            << "</text>\n";
        out << "<text x=\"16\" y=\"" << kHeight / 2
            << "\" font-family=\"monospace\" font-size=\"11\" transform=\"rotate(-90 16 "
            << kHeight / 2 << ")\">" << y_label << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::ConfigParse, "cannot open file for writing: " + path);
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ConfigParse, "cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace feplab
