#include "tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace scfm {

Tensor::Tensor(std::vector<int> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    if (static_cast<int64_t>(data.size()) != shape_numel(shape))
        throw ShapeError("tensor data size " + std::to_string(data.size()) +
                         " does not match shape " + shape_str());
}

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    int64_t n = shape_numel(shape);
    t.shape = std::move(shape);
    t.data.assign(static_cast<size_t>(n), 0.0);
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t = zeros(std::move(shape));
    for (double& x : t.data) x = v;
    return t;
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::row2(double x, double y) { return Tensor({1, 2}, {x, y}); }

int64_t Tensor::numel() const { return shape_numel(shape); }

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw ShapeError("negative dimension");
        n *= d;
    }
    return n;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::check_finite(const std::string& what) const {
    if (!all_finite()) throw DivergenceError("non-finite values in " + what);
}

void affine_forward(const Tensor& x, const Tensor& w, const Tensor* b, Tensor& y) {
    int n = x.rows(), in = x.cols(), out = w.rows();
    if (w.cols() != in) throw ShapeError("affine: x " + x.shape_str() + " vs w " + w.shape_str());
    if (b && (b->numel() != out)) throw ShapeError("affine: bias " + b->shape_str());
    y = Tensor::zeros({n, out});
    for (int i = 0; i < n; ++i) {
        const double* xi = x.row_ptr(i);
        double* yi = y.row_ptr(i);
        if (b)
            for (int j = 0; j < out; ++j) yi[j] = b->data[j];
        for (int j = 0; j < out; ++j) {
            const double* wj = w.row_ptr(j);
            double acc = 0.0;
            for (int k = 0; k < in; ++k) acc += xi[k] * wj[k];
            yi[j] += acc;
        }
    }
}

void affine_backward_x(const Tensor& gy, const Tensor& w, Tensor& gx) {
    int n = gy.rows(), out = gy.cols(), in = w.cols();
    for (int i = 0; i < n; ++i) {
        const double* gyi = gy.row_ptr(i);
        double* gxi = gx.row_ptr(i);
        for (int j = 0; j < out; ++j) {
            const double g = gyi[j];
            if (g == 0.0) continue;
            const double* wj = w.row_ptr(j);
            for (int k = 0; k < in; ++k) gxi[k] += g * wj[k];
        }
    }
}

void affine_backward_w(const Tensor& gy, const Tensor& x, Tensor& gw) {
    int n = gy.rows(), out = gy.cols(), in = x.cols();
    for (int i = 0; i < n; ++i) {
        const double* gyi = gy.row_ptr(i);
        const double* xi = x.row_ptr(i);
        for (int j = 0; j < out; ++j) {
            const double g = gyi[j];
            if (g == 0.0) continue;
            double* gwj = gw.row_ptr(j);
            for (int k = 0; k < in; ++k) gwj[k] += g * xi[k];
        }
    }
}

void affine_backward_b(const Tensor& gy, Tensor& gb) {
    int n = gy.rows(), out = gy.cols();
    for (int i = 0; i < n; ++i) {
        const double* gyi = gy.row_ptr(i);
        for (int j = 0; j < out; ++j) gb.data[j] += gyi[j];
    }
}

void tanh_forward(const Tensor& x, Tensor& y) {
    y.shape = x.shape;
    y.data.resize(x.data.size());
    for (size_t i = 0; i < x.data.size(); ++i) y.data[i] = std::tanh(x.data[i]);
}

void tanh_backward(const Tensor& gy, const Tensor& y, Tensor& gx) {
    for (size_t i = 0; i < gy.data.size(); ++i) gx.data[i] += gy.data[i] * (1.0 - y.data[i] * y.data[i]);
}

double mse_value(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("mse: " + a.shape_str() + " vs " + b.shape_str());
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return a.data.empty() ? 0.0 : acc / static_cast<double>(a.data.size());
}

}  // namespace scfm
