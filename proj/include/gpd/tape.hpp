#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "gpd/matrix.hpp"
#include "gpd/params.hpp"

namespace gpd {

// Reverse-mode autodiff over matrices. A tape is built per forward pass and
// discarded; node creation order is a topological order, so backward() just
// replays the recorded closures in reverse. Leaf nodes reference Params and
// accumulate into Param::grad.
class Tape {
  public:
    using NodeId = int;

    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    NodeId input(Matrix value);          // constant, no gradient
    NodeId leaf(Param& p);               // trainable

    NodeId matmul(NodeId a, NodeId b);   // A*B
    NodeId matmul_nt(NodeId a, NodeId b);  // A*B^T (B stored row-major NxK)
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);      // elementwise
    NodeId scale(NodeId a, double c);
    NodeId add_rowvec(NodeId a, NodeId v);   // v is 1xC, broadcast over rows
    NodeId mul_rowvec(NodeId a, NodeId v);
    NodeId tanh_act(NodeId a);
    NodeId gelu(NodeId a);               // exact erf form
    NodeId sigmoid(NodeId a);
    NodeId softmax_rows(NodeId a);
    NodeId layer_norm_rows(NodeId a, double eps = 1e-5);  // per-row, no affine
    NodeId slice_cols(NodeId a, int c0, int n);
    NodeId slice_rows(NodeId a, int r0, int n);
    NodeId concat_cols(const std::vector<NodeId>& parts);
    NodeId mean_rows(NodeId a);          // 1xC column means

    // Scalar (1x1) losses. Means are taken per coordinate.
    NodeId mse(NodeId pred, const Matrix& target);
    // Mean squared error over the selected rows only.
    NodeId mse_rows(NodeId pred, const Matrix& target, const std::vector<uint8_t>& row_mask);

    const Matrix& value(NodeId id) const { return nodes_[id].value; }
    int rows(NodeId id) const { return nodes_[id].value.rows; }
    int cols(NodeId id) const { return nodes_[id].value.cols; }

    // Seeds d(loss)=1 and propagates. loss must be 1x1. Param gradients
    // accumulate (callers zero_grad between optimizer steps).
    void backward(NodeId loss);

    bool grad_enabled() const { return grad_enabled_; }

  private:
    struct Node {
        Matrix value;
        Matrix grad;            // allocated lazily
        bool requires_grad = false;
        Param* param = nullptr;
    };

    NodeId push(Matrix value, bool requires_grad);
    Matrix& grad_of(NodeId id);
    void record_for(NodeId out, std::function<void()> fn) {
        if (grad_enabled_ && nodes_[out].requires_grad)
            backward_ops_.push_back(std::move(fn));
    }

    std::vector<Node> nodes_;
    std::vector<std::function<void()>> backward_ops_;
    bool grad_enabled_;
};

}  // namespace gpd
