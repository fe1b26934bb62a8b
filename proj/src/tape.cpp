#include "tape.hpp"

#include <cmath>

namespace scfm {

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_id(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) throw Error("node not on tape");
}

Tape::Node& Tape::at(int id) {
    check_id(id);
    return nodes_[id];
}

const Tape::Node& Tape::at(int id) const {
    check_id(id);
    return nodes_[id];
}

const Tensor& Tape::value(int id) const { return at(id).val; }

int Tape::leaf(Tensor v) {
    Node n;
    n.op = Op::Leaf;
    n.val = std::move(v);
    return push(std::move(n));
}

int Tape::param(Tensor v) {
    Node n;
    n.op = Op::Leaf;
    n.val = std::move(v);
    n.needs_grad = true;
    return push(std::move(n));
}

int Tape::affine(int x, int w, int b) {
    const Tensor& xv = at(x).val;
    const Tensor& wv = at(w).val;
    Node n;
    n.op = Op::Affine;
    n.in[0] = x;
    n.in[1] = w;
    n.bias = b;
    affine_forward(xv, wv, b >= 0 ? &at(b).val : nullptr, n.val);
    n.needs_grad = at(x).needs_grad || at(w).needs_grad || (b >= 0 && at(b).needs_grad);
    return push(std::move(n));
}

int Tape::tanh_(int x) {
    Node n;
    n.op = Op::Tanh;
    n.in[0] = x;
    tanh_forward(at(x).val, n.val);
    n.needs_grad = at(x).needs_grad;
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    const Tensor& av = at(a).val;
    const Tensor& bv = at(b).val;
    if (!av.same_shape(bv)) throw ShapeError("add: " + av.shape_str() + " vs " + bv.shape_str());
    Node n;
    n.op = Op::Add;
    n.in[0] = a;
    n.in[1] = b;
    n.val = av;
    for (size_t i = 0; i < n.val.data.size(); ++i) n.val.data[i] += bv.data[i];
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    return push(std::move(n));
}

int Tape::scale(int x, double c) {
    Node n;
    n.op = Op::Scale;
    n.in[0] = x;
    n.c = c;
    n.val = at(x).val;
    for (double& v : n.val.data) v *= c;
    n.needs_grad = at(x).needs_grad;
    return push(std::move(n));
}

int Tape::row_scale(int x, std::vector<double> c) {
    const Tensor& xv = at(x).val;
    if (static_cast<int>(c.size()) != xv.rows()) throw ShapeError("row_scale: factor count vs rows");
    Node n;
    n.op = Op::RowScale;
    n.in[0] = x;
    n.val = xv;
    for (int i = 0; i < xv.rows(); ++i) {
        double* p = n.val.row_ptr(i);
        for (int j = 0; j < xv.cols(); ++j) p[j] *= c[i];
    }
    n.row_c = std::move(c);
    n.needs_grad = at(x).needs_grad;
    return push(std::move(n));
}

int Tape::concat(const std::vector<int>& parts) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    int rows = at(parts[0]).val.rows();
    int cols = 0;
    bool ng = false;
    for (int p : parts) {
        const Tensor& v = at(p).val;
        if (v.rows() != rows) throw ShapeError("concat: row mismatch");
        cols += v.cols();
        ng = ng || at(p).needs_grad;
    }
    Node n;
    n.op = Op::Concat;
    n.multi = parts;
    n.val = Tensor::zeros({rows, cols});
    for (int i = 0; i < rows; ++i) {
        double* dst = n.val.row_ptr(i);
        for (int p : parts) {
            const Tensor& v = at(p).val;
            const double* src = v.row_ptr(i);
            for (int j = 0; j < v.cols(); ++j) *dst++ = src[j];
        }
    }
    n.needs_grad = ng;
    return push(std::move(n));
}

int Tape::rows_select(int table, std::vector<int> idx) {
    const Tensor& tv = at(table).val;
    Node n;
    n.op = Op::RowsSelect;
    n.in[0] = table;
    n.val = Tensor::zeros({static_cast<int>(idx.size()), tv.cols()});
    for (size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= tv.rows()) throw ShapeError("rows_select: index out of range");
        const double* src = tv.row_ptr(idx[i]);
        double* dst = n.val.row_ptr(static_cast<int>(i));
        for (int j = 0; j < tv.cols(); ++j) dst[j] = src[j];
    }
    n.idx = std::move(idx);
    n.needs_grad = at(table).needs_grad;
    return push(std::move(n));
}

int Tape::transpose(int x) {
    const Tensor& xv = at(x).val;
    Node n;
    n.op = Op::Transpose;
    n.in[0] = x;
    n.val = Tensor::zeros({xv.cols(), xv.rows()});
    for (int i = 0; i < xv.rows(); ++i)
        for (int j = 0; j < xv.cols(); ++j) n.val.at(j, i) = xv.at(i, j);
    n.needs_grad = at(x).needs_grad;
    return push(std::move(n));
}

int Tape::mse(int a, int b) {
    Node n;
    n.op = Op::Mse;
    n.in[0] = a;
    n.in[1] = b;
    n.val = Tensor::scalar(mse_value(at(a).val, at(b).val));
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;
    return push(std::move(n));
}

std::vector<Tensor> Tape::backward(int loss, const std::vector<int>& params) {
    check_id(loss);
    for (int p : params) check_id(p);
    if (at(loss).val.numel() != 1) throw ShapeError("backward: loss is not scalar");

    for (Node& n : nodes_)
        if (n.needs_grad) n.grad = Tensor::zeros(n.val.shape);
    Node& ln = nodes_[loss];
    if (ln.needs_grad) ln.grad.data[0] = 1.0;

    for (int id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.needs_grad) continue;
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Affine: {
                Node& x = nodes_[n.in[0]];
                Node& w = nodes_[n.in[1]];
                if (x.needs_grad) affine_backward_x(g, w.val, x.grad);
                if (w.needs_grad) affine_backward_w(g, x.val, w.grad);
                if (n.bias >= 0 && nodes_[n.bias].needs_grad) affine_backward_b(g, nodes_[n.bias].grad);
                break;
            }
            case Op::Tanh: {
                Node& x = nodes_[n.in[0]];
                if (x.needs_grad) tanh_backward(g, n.val, x.grad);
                break;
            }
            case Op::Add:
                for (int s = 0; s < 2; ++s) {
                    Node& x = nodes_[n.in[s]];
                    if (!x.needs_grad) continue;
                    for (size_t i = 0; i < g.data.size(); ++i) x.grad.data[i] += g.data[i];
                }
                break;
            case Op::Scale: {
                Node& x = nodes_[n.in[0]];
                if (x.needs_grad)
                    for (size_t i = 0; i < g.data.size(); ++i) x.grad.data[i] += n.c * g.data[i];
                break;
            }
            case Op::RowScale: {
                Node& x = nodes_[n.in[0]];
                if (x.needs_grad)
                    for (int i = 0; i < g.rows(); ++i) {
                        const double* gr = g.row_ptr(i);
                        double* xr = x.grad.row_ptr(i);
                        for (int j = 0; j < g.cols(); ++j) xr[j] += n.row_c[i] * gr[j];
                    }
                break;
            }
            case Op::Concat: {
                for (int i = 0; i < g.rows(); ++i) {
                    const double* src = g.row_ptr(i);
                    for (int p : n.multi) {
                        Node& x = nodes_[p];
                        int pc = x.val.cols();
                        if (x.needs_grad) {
                            double* dst = x.grad.row_ptr(i);
                            for (int j = 0; j < pc; ++j) dst[j] += src[j];
                        }
                        src += pc;
                    }
                }
                break;
            }
            case Op::RowsSelect: {
                Node& t = nodes_[n.in[0]];
                if (t.needs_grad)
                    for (size_t i = 0; i < n.idx.size(); ++i) {
                        const double* src = g.row_ptr(static_cast<int>(i));
                        double* dst = t.grad.row_ptr(n.idx[i]);
                        for (int j = 0; j < g.cols(); ++j) dst[j] += src[j];
                    }
                break;
            }
            case Op::Transpose: {
                Node& x = nodes_[n.in[0]];
                if (x.needs_grad)
                    for (int i = 0; i < g.rows(); ++i)
                        for (int j = 0; j < g.cols(); ++j) x.grad.at(j, i) += g.at(i, j);
                break;
            }
            case Op::Mse: {
                Node& a = nodes_[n.in[0]];
                Node& b = nodes_[n.in[1]];
                double gs = g.data[0] * 2.0 / static_cast<double>(a.val.numel());
                for (size_t i = 0; i < a.val.data.size(); ++i) {
                    double d = gs * (a.val.data[i] - b.val.data[i]);
                    if (a.needs_grad) a.grad.data[i] += d;
                    if (b.needs_grad) b.grad.data[i] -= d;
                }
                break;
            }
        }
    }

    std::vector<Tensor> out;
    out.reserve(params.size());
    for (int p : params) {
        Node& n = nodes_[p];
        out.push_back(n.needs_grad ? std::move(n.grad) : Tensor::zeros(n.val.shape));
    }
    clear();
    return out;
}

double finite_diff_check(const std::function<double(const Tensor&)>& value_fn, const Tensor& x,
                         const Tensor& analytic_grad, double eps) {
    if (eps <= 0.0) throw Error("finite_diff_check: eps must be positive");
    if (!x.same_shape(analytic_grad))
        throw ShapeError("finite_diff_check: grad shape " + analytic_grad.shape_str());
    Tensor probe = x;
    double worst = 0.0;
    for (size_t i = 0; i < probe.data.size(); ++i) {
        double keep = probe.data[i];
        probe.data[i] = keep + eps;
        double up = value_fn(probe);
        probe.data[i] = keep - eps;
        double dn = value_fn(probe);
        probe.data[i] = keep;
        if (!std::isfinite(up) || !std::isfinite(dn))
            throw DivergenceError("finite_diff_check: non-finite probe value");
        double central = (up - dn) / (2.0 * eps);
        double a = analytic_grad.data[i];
        double rel = std::abs(a - central) / (std::abs(a) + 1e-12);
        if (rel > worst) worst = rel;
    }
    return worst;
}

}  // namespace scfm
