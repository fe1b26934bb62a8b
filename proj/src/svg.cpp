#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "errors.hpp"

namespace scfm {

namespace {

std::string fmt2(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
}

std::string fmt_tick(double v) {
    std::ostringstream os;
    os << std::setprecision(4) << v;
    return os.str();
}

struct Bounds {
    double lo_x = 0.0, hi_x = 1.0, lo_y = 0.0, hi_y = 1.0;

    void include(double x, double y) {
        lo_x = std::min(lo_x, x);
        hi_x = std::max(hi_x, x);
        lo_y = std::min(lo_y, y);
        hi_y = std::max(hi_y, y);
    }

    void pad(double frac) {
        double sx = std::max(hi_x - lo_x, 1e-9);
        double sy = std::max(hi_y - lo_y, 1e-9);
        lo_x -= frac * sx;
        hi_x += frac * sx;
        lo_y -= frac * sy;
        hi_y += frac * sy;
    }
};

void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path);
    f << body;
    if (!f) throw ConfigError("failed writing " + path);
}

}  // namespace

std::string render_scatter_svg(const std::vector<ScatterGroup>& groups, const std::string& title) {
    const double size = 640.0;
    const double margin = 40.0;

    bool any = false;
    Bounds b;
    for (const auto& g : groups) {
        if (!g.points) throw ConfigError("scatter group without points");
        for (int i = 0; i < g.points->rows(); ++i) {
            double x = g.points->at(i, 0);
            double y = g.points->at(i, 1);
            if (!any) {
                b = {x, x, y, y};
                any = true;
            } else {
                b.include(x, y);
            }
        }
    }
    if (!any) b = {-1.0, 1.0, -1.0, 1.0};
    b.pad(0.05);

    double span_x = std::max(b.hi_x - b.lo_x, 1e-9);
    double span_y = std::max(b.hi_y - b.lo_y, 1e-9);
    auto px = [&](double x) { return margin + (x - b.lo_x) / span_x * (size - 2 * margin); };
    auto py = [&](double y) { return size - margin - (y - b.lo_y) / span_y * (size - 2 * margin); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << (int)size << "\" height=\""
       << (int)size << "\" viewBox=\"0 0 " << (int)size << " " << (int)size << "\">\n";
    os << "<rect width=\"" << (int)size << "\" height=\"" << (int)size << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << (int)(size / 2) << "\" y=\"24\" text-anchor=\"middle\" "
       << "font-family=\"monospace\" font-size=\"16\">" << title << "</text>\n";
    for (const auto& g : groups) {
        os << "<g fill=\"" << g.color << "\" fill-opacity=\"0.5\">\n";
        for (int i = 0; i < g.points->rows(); ++i)
            os << "<circle cx=\"" << fmt2(px(g.points->at(i, 0))) << "\" cy=\""
               << fmt2(py(g.points->at(i, 1))) << "\" r=\"2\"/>\n";
        os << "</g>\n";
    }
    double legend_y = 44.0;
    for (const auto& g : groups) {
        if (g.label.empty()) continue;
        os << "<circle cx=\"" << fmt2(size - margin - 120.0) << "\" cy=\"" << fmt2(legend_y - 4.0)
           << "\" r=\"4\" fill=\"" << g.color << "\"/>\n";
        os << "<text x=\"" << fmt2(size - margin - 110.0) << "\" y=\"" << fmt2(legend_y)
           << "\" font-family=\"monospace\" font-size=\"12\">" << g.label << "</text>\n";
        legend_y += 16.0;
    }
    os << "</svg>\n";
    return os.str();
}

std::string render_curves_svg(const std::vector<CurveSeries>& series, const std::string& title,
                              const std::string& x_label, const std::string& y_label) {
    const double width = 800.0;
    const double height = 500.0;
    const double margin = 56.0;

    bool any = false;
    Bounds b;
    for (const auto& s : series) {
        if (s.xs.size() != s.ys.size()) throw ConfigError("curve series size mismatch");
        for (size_t i = 0; i < s.xs.size(); ++i) {
            if (!std::isfinite(s.ys[i])) continue;
            if (!any) {
                b = {s.xs[i], s.xs[i], s.ys[i], s.ys[i]};
                any = true;
            } else {
                b.include(s.xs[i], s.ys[i]);
            }
        }
    }
    if (!any) b = {0.0, 1.0, 0.0, 1.0};
    b.pad(0.05);

    double span_x = std::max(b.hi_x - b.lo_x, 1e-9);
    double span_y = std::max(b.hi_y - b.lo_y, 1e-9);
    auto px = [&](double x) { return margin + (x - b.lo_x) / span_x * (width - 2 * margin); };
    auto py = [&](double y) { return height - margin - (y - b.lo_y) / span_y * (height - 2 * margin); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << (int)width << "\" height=\""
       << (int)height << "\" viewBox=\"0 0 " << (int)width << " " << (int)height << "\">\n";
    os << "<rect width=\"" << (int)width << "\" height=\"" << (int)height
       << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << (int)(width / 2) << "\" y=\"24\" text-anchor=\"middle\" "
       << "font-family=\"monospace\" font-size=\"16\">" << title << "</text>\n";
    os << "<line x1=\"" << fmt2(margin) << "\" y1=\"" << fmt2(height - margin) << "\" x2=\""
       << fmt2(width - margin) << "\" y2=\"" << fmt2(height - margin)
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << fmt2(margin) << "\" y1=\"" << fmt2(margin) << "\" x2=\"" << fmt2(margin)
       << "\" y2=\"" << fmt2(height - margin) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << (int)(width / 2) << "\" y=\"" << fmt2(height - 12.0)
       << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\">" << x_label
       << "</text>\n";
    os << "<text x=\"16\" y=\"" << (int)(height / 2)
       << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\" transform=\"rotate(-90 16 "
       << (int)(height / 2) << ")\">" << y_label << "</text>\n";
    os << "<text x=\"" << fmt2(margin) << "\" y=\"" << fmt2(height - margin + 16.0)
       << "\" font-family=\"monospace\" font-size=\"10\">" << fmt_tick(b.lo_x) << "</text>\n";
    os << "<text x=\"" << fmt2(width - margin) << "\" y=\"" << fmt2(height - margin + 16.0)
       << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"10\">" << fmt_tick(b.hi_x)
       << "</text>\n";
    os << "<text x=\"" << fmt2(margin - 4.0) << "\" y=\"" << fmt2(height - margin)
       << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"10\">" << fmt_tick(b.lo_y)
       << "</text>\n";
    os << "<text x=\"" << fmt2(margin - 4.0) << "\" y=\"" << fmt2(margin + 4.0)
       << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"10\">" << fmt_tick(b.hi_y)
       << "</text>\n";
    for (const auto& s : series) {
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (size_t i = 0; i < s.xs.size(); ++i) {
            if (!std::isfinite(s.ys[i])) continue;
            if (!first) os << " ";
            os << fmt2(px(s.xs[i])) << "," << fmt2(py(s.ys[i]));
            first = false;
        }
        os << "\"/>\n";
    }
    double legend_y = 44.0;
    for (const auto& s : series) {
        if (s.label.empty()) continue;
        os << "<line x1=\"" << fmt2(width - margin - 150.0) << "\" y1=\"" << fmt2(legend_y - 4.0)
           << "\" x2=\"" << fmt2(width - margin - 126.0) << "\" y2=\"" << fmt2(legend_y - 4.0)
           << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << fmt2(width - margin - 120.0) << "\" y=\"" << fmt2(legend_y)
           << "\" font-family=\"monospace\" font-size=\"12\">" << s.label << "</text>\n";
        legend_y += 16.0;
    }
    os << "</svg>\n";
    return os.str();
}

void write_scatter_svg(const std::string& path, const std::vector<ScatterGroup>& groups,
                       const std::string& title) {
    write_text_file(path, render_scatter_svg(groups, title));
}

void write_curves_svg(const std::string& path, const std::vector<CurveSeries>& series,
                      const std::string& title, const std::string& x_label,
                      const std::string& y_label) {
    write_text_file(path, render_curves_svg(series, title, x_label, y_label));
}

}  // namespace scfm
