#pragma once

#include <functional>
#include <vector>

#include "tensor.hpp"

namespace scfm {

// Reverse-mode tape. Node ids are indices into the construction-ordered node
// list, so construction order is already topological and backward walks it in
// reverse. backward() clears the tape; a fresh graph is built every step.
class Tape {
  public:
    enum class Op { Leaf, Affine, Tanh, Add, Scale, RowScale, Concat, RowsSelect, Transpose, Mse };

    int leaf(Tensor v);   // constant input, receives no gradient
    int param(Tensor v);  // tracked parameter, gradient collected by backward

    // y[i,j] = sum_k x[i,k]*w[j,k] + b[j]; pass b = -1 for no bias
    int affine(int x, int w, int b);
    int tanh_(int x);
    int add(int a, int b);
    int scale(int x, double c);
    // y[i,:] = c[i] * x[i,:]
    int row_scale(int x, std::vector<double> c);
    // column-wise concat of 2-D values with equal row counts
    int concat(const std::vector<int>& parts);
    // y[i,:] = table[idx[i],:] (embedding gather)
    int rows_select(int table, std::vector<int> idx);
    int transpose(int x);
    // scalar mean over elements of (a-b)^2
    int mse(int a, int b);

    const Tensor& value(int id) const;
    size_t size() const { return nodes_.size(); }

    // Accumulates d(loss)/d(param) for each requested param node, in order.
    // The tape is cleared afterward.
    std::vector<Tensor> backward(int loss, const std::vector<int>& params);
    void clear() { nodes_.clear(); }

  private:
    struct Node {
        Op op;
        int in[2] = {-1, -1};
        int bias = -1;                 // Affine only
        std::vector<int> multi;        // Concat inputs
        double c = 0.0;                // Scale factor
        std::vector<double> row_c;     // RowScale factors
        std::vector<int> idx;          // RowsSelect indices
        Tensor val;
        Tensor grad;
        bool needs_grad = false;
    };

    int push(Node n);
    Node& at(int id);
    const Node& at(int id) const;
    void check_id(int id) const;

    std::vector<Node> nodes_;
};

// Max over coordinates of |analytic - central difference| / (|analytic| + 1e-12),
// the central difference of value_fn taken at step eps around x.
double finite_diff_check(const std::function<double(const Tensor&)>& value_fn, const Tensor& x,
                         const Tensor& analytic_grad, double eps);

}  // namespace scfm
