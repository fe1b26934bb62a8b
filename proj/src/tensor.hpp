#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace scfm {

// Shape-tagged, row-major array of 64-bit floats. The unit of all numerics.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> shape_, std::vector<double> data_);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double v);
    static Tensor scalar(double v);
    static Tensor row2(double x, double y);  // [1,2] convenience

    int64_t numel() const;
    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    std::string shape_str() const;

    // 2-D accessors; shape checks are the caller's business on hot paths.
    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() < 2 ? (shape.empty() ? 0 : 1) : shape[1]; }
    double& at(int i, int j) { return data[static_cast<size_t>(i) * cols() + j]; }
    double at(int i, int j) const { return data[static_cast<size_t>(i) * cols() + j]; }
    const double* row_ptr(int i) const { return data.data() + static_cast<size_t>(i) * cols(); }
    double* row_ptr(int i) { return data.data() + static_cast<size_t>(i) * cols(); }

    bool all_finite() const;
    // Throws DivergenceError naming `what` if any element is NaN/Inf.
    void check_finite(const std::string& what) const;
};

int64_t shape_numel(const std::vector<int>& shape);

// ---- shared numeric kernels ----
// One implementation backs both the tape ops and the frozen-parameter
// evaluation path, so the two can never drift.

// y[i,j] = sum_k x[i,k] * w[j,k] + b[j]   (w stored [out,in]; b optional)
void affine_forward(const Tensor& x, const Tensor& w, const Tensor* b, Tensor& y);
// gx[i,k] += sum_j gy[i,j] * w[j,k]
void affine_backward_x(const Tensor& gy, const Tensor& w, Tensor& gx);
// gw[j,k] += sum_i gy[i,j] * x[i,k];  gb[j] += sum_i gy[i,j]
void affine_backward_w(const Tensor& gy, const Tensor& x, Tensor& gw);
void affine_backward_b(const Tensor& gy, Tensor& gb);

void tanh_forward(const Tensor& x, Tensor& y);
// gx += gy * (1 - y^2), y being the forward output
void tanh_backward(const Tensor& gy, const Tensor& y, Tensor& gx);

double mse_value(const Tensor& a, const Tensor& b);

}  // namespace scfm
