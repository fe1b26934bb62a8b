#pragma once

#include <string>
#include <vector>

#include "tensor.hpp"

namespace scfm {

struct ScatterGroup {
    const Tensor* points = nullptr;  // [n, 2]
    std::string color = "#000000";
    std::string label;
};

struct CurveSeries {
    std::vector<double> xs;
    std::vector<double> ys;
    std::string color = "#000000";
    std::string label;
};

// Fixed canvas and two decimals per coordinate, so repeated runs emit
// byte-identical files.
std::string render_scatter_svg(const std::vector<ScatterGroup>& groups, const std::string& title);
std::string render_curves_svg(const std::vector<CurveSeries>& series, const std::string& title,
                              const std::string& x_label, const std::string& y_label);

void write_scatter_svg(const std::string& path, const std::vector<ScatterGroup>& groups,
                       const std::string& title);
void write_curves_svg(const std::string& path, const std::vector<CurveSeries>& series,
                      const std::string& title, const std::string& x_label,
                      const std::string& y_label);

}  // namespace scfm
