#include "gpd/tape.hpp"

#include <cmath>

#include "gpd/common.hpp"
#include "gpd/kernels.hpp"

namespace gpd {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

Tape::NodeId Tape::push(Matrix value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad && grad_enabled_;
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Matrix& Tape::grad_of(NodeId id) {
    Node& n = nodes_[id];
    if (!n.grad.same_shape(n.value)) n.grad = Matrix(n.value.rows, n.value.cols);
    return n.grad;
}

Tape::NodeId Tape::input(Matrix value) { return push(std::move(value), false); }

Tape::NodeId Tape::leaf(Param& p) {
    NodeId id = push(p.value, true);
    nodes_[id].param = &p;
    return id;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
    Matrix c;
    gpd::matmul(nodes_[a].value, nodes_[b].value, c);
    NodeId out = push(std::move(c), nodes_[a].requires_grad || nodes_[b].requires_grad);
    record_for(out, [this, a, b, out] {
        const Matrix& dc = nodes_[out].grad;
        if (nodes_[a].requires_grad) gpd::matmul_nt(dc, nodes_[b].value, grad_of(a), true);
        if (nodes_[b].requires_grad) gpd::matmul_tn(nodes_[a].value, dc, grad_of(b), true);
    });
    return out;
}

Tape::NodeId Tape::matmul_nt(NodeId a, NodeId b) {
    Matrix c;
    gpd::matmul_nt(nodes_[a].value, nodes_[b].value, c);
    NodeId out = push(std::move(c), nodes_[a].requires_grad || nodes_[b].requires_grad);
    record_for(out, [this, a, b, out] {
        const Matrix& dc = nodes_[out].grad;
        if (nodes_[a].requires_grad) gpd::matmul(dc, nodes_[b].value, grad_of(a), true);
        if (nodes_[b].requires_grad) gpd::matmul_tn(dc, nodes_[a].value, grad_of(b), true);
    });
    return out;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    const Matrix& A = nodes_[a].value;
    const Matrix& B = nodes_[b].value;
    if (!A.same_shape(B)) throw ValidationError("tape add: shape mismatch");
    Matrix c(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) c.a[i] = A.a[i] + B.a[i];
    NodeId out = push(std::move(c), nodes_[a].requires_grad || nodes_[b].requires_grad);
    record_for(out, [this, a, b, out] {
        const Matrix& dc = nodes_[out].grad;
        if (nodes_[a].requires_grad) {
            Matrix& da = grad_of(a);
            for (size_t i = 0; i < dc.size(); ++i) da.a[i] += dc.a[i];
        }
        if (nodes_[b].requires_grad) {
            Matrix& db = grad_of(b);
            for (size_t i = 0; i < dc.size(); ++i) db.a[i] += dc.a[i];
        }
    });
    return out;
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
    const Matrix& A = nodes_[a].value;
    const Matrix& B = nodes_[b].value;
    if (!A.same_shape(B)) throw ValidationError("tape sub: shape mismatch");
    Matrix c(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) c.a[i] = A.a[i] - B.a[i];
    NodeId out = push(std::move(c), nodes_[a].requires_grad || nodes_[b].requires_grad);
    record_for(out, [this, a, b, out] {
        const Matrix& dc = nodes_[out].grad;
        if (nodes_[a].requires_grad) {
            Matrix& da = grad_of(a);
            for (size_t i = 0; i < dc.size(); ++i) da.a[i] += dc.a[i];
        }
        if (nodes_[b].requires_grad) {
            Matrix& db = grad_of(b);
            for (size_t i = 0; i < dc.size(); ++i) db.a[i] -= dc.a[i];
        }
    });
    return out;
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    const Matrix& A = nodes_[a].value;
    const Matrix& B = nodes_[b].value;
    if (!A.same_shape(B)) throw ValidationError("tape mul: shape mismatch");
    Matrix c(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) c.a[i] = A.a[i] * B.a[i];
    NodeId out = push(std::move(c), nodes_[a].requires_grad || nodes_[b].requires_grad);
    record_for(out, [this, a, b, out] {
        const Matrix& dc = nodes_[out].grad;
        if (nodes_[a].requires_grad) {
            Matrix& da = grad_of(a);
            const Matrix& bv = nodes_[b].value;
            for (size_t i = 0; i < dc.size(); ++i) da.a[i] += dc.a[i] * bv.a[i];
        }
        if (nodes_[b].requires_grad) {
            Matrix& db = grad_of(b);
            const Matrix& av = nodes_[a].value;
            for (size_t i = 0; i < dc.size(); ++i) db.a[i] += dc.a[i] * av.a[i];
        }
    });
    return out;
}

Tape::NodeId Tape::scale(NodeId a, double cfac) {
    const Matrix& A = nodes_[a].value;
    Matrix c(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) c.a[i] = A.a[i] * cfac;
    NodeId out = push(std::move(c), nodes_[a].requires_grad);
    record_for(out, [this, a, out, cfac] {
        if (!nodes_[a].requires_grad) return;
        const Matrix& dc = nodes_[out].grad;
        Matrix& da = grad_of(a);
        for (size_t i = 0; i < dc.size(); ++i) da.a[i] += dc.a[i] * cfac;
    });
    return out;
}

Tape::NodeId Tape::add_rowvec(NodeId a, NodeId v) {
    const Matrix& A = nodes_[a].value;
    const Matrix& V = nodes_[v].value;
    if (V.rows != 1 || V.cols != A.cols) throw ValidationError("tape add_rowvec: bad vector shape");
    Matrix c(A.rows, A.cols);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) c(i, j) = A(i, j) + V(0, j);
    NodeId out = push(std::move(c), nodes_[a].requires_grad || nodes_[v].requires_grad);
    record_for(out, [this, a, v, out] {
        const Matrix& dc = nodes_[out].grad;
        if (nodes_[a].requires_grad) {
            Matrix& da = grad_of(a);
            for (size_t i = 0; i < dc.size(); ++i) da.a[i] += dc.a[i];
        }
        if (nodes_[v].requires_grad) {
            Matrix& dv = grad_of(v);
            for (int i = 0; i < dc.rows; ++i)
                for (int j = 0; j < dc.cols; ++j) dv(0, j) += dc(i, j);
        }
    });
    return out;
}

Tape::NodeId Tape::mul_rowvec(NodeId a, NodeId v) {
    const Matrix& A = nodes_[a].value;
    const Matrix& V = nodes_[v].value;
    if (V.rows != 1 || V.cols != A.cols) throw ValidationError("tape mul_rowvec: bad vector shape");
    Matrix c(A.rows, A.cols);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < A.cols; ++j) c(i, j) = A(i, j) * V(0, j);
    NodeId out = push(std::move(c), nodes_[a].requires_grad || nodes_[v].requires_grad);
    record_for(out, [this, a, v, out] {
        const Matrix& dc = nodes_[out].grad;
        if (nodes_[a].requires_grad) {
            Matrix& da = grad_of(a);
            const Matrix& V2 = nodes_[v].value;
            for (int i = 0; i < dc.rows; ++i)
                for (int j = 0; j < dc.cols; ++j) da(i, j) += dc(i, j) * V2(0, j);
        }
        if (nodes_[v].requires_grad) {
            Matrix& dv = grad_of(v);
            const Matrix& A2 = nodes_[a].value;
            for (int i = 0; i < dc.rows; ++i)
                for (int j = 0; j < dc.cols; ++j) dv(0, j) += dc(i, j) * A2(i, j);
        }
    });
    return out;
}

Tape::NodeId Tape::tanh_act(NodeId a) {
    const Matrix& A = nodes_[a].value;
    Matrix c(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) c.a[i] = std::tanh(A.a[i]);
    NodeId out = push(std::move(c), nodes_[a].requires_grad);
    record_for(out, [this, a, out] {
        if (!nodes_[a].requires_grad) return;
        const Matrix& dc = nodes_[out].grad;
        const Matrix& y = nodes_[out].value;
        Matrix& da = grad_of(a);
        for (size_t i = 0; i < dc.size(); ++i) da.a[i] += dc.a[i] * (1.0 - y.a[i] * y.a[i]);
    });
    return out;
}

Tape::NodeId Tape::gelu(NodeId a) {
    const Matrix& A = nodes_[a].value;
    Matrix c(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) {
        const double x = A.a[i];
        c.a[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
    NodeId out = push(std::move(c), nodes_[a].requires_grad);
    record_for(out, [this, a, out] {
        if (!nodes_[a].requires_grad) return;
        const Matrix& dc = nodes_[out].grad;
        const Matrix& x = nodes_[a].value;
        Matrix& da = grad_of(a);
        for (size_t i = 0; i < dc.size(); ++i) {
            const double xi = x.a[i];
            const double cdf = 0.5 * (1.0 + std::erf(xi * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
            da.a[i] += dc.a[i] * (cdf + xi * pdf);
        }
    });
    return out;
}

Tape::NodeId Tape::sigmoid(NodeId a) {
    const Matrix& A = nodes_[a].value;
    Matrix c(A.rows, A.cols);
    for (size_t i = 0; i < A.size(); ++i) c.a[i] = 1.0 / (1.0 + std::exp(-A.a[i]));
    NodeId out = push(std::move(c), nodes_[a].requires_grad);
    record_for(out, [this, a, out] {
        if (!nodes_[a].requires_grad) return;
        const Matrix& dc = nodes_[out].grad;
        const Matrix& y = nodes_[out].value;
        Matrix& da = grad_of(a);
        for (size_t i = 0; i < dc.size(); ++i) da.a[i] += dc.a[i] * y.a[i] * (1.0 - y.a[i]);
    });
    return out;
}

Tape::NodeId Tape::softmax_rows(NodeId a) {
    Matrix c;
    gpd::softmax_rows(nodes_[a].value, c);
    NodeId out = push(std::move(c), nodes_[a].requires_grad);
    record_for(out, [this, a, out] {
        if (!nodes_[a].requires_grad) return;
        const Matrix& dc = nodes_[out].grad;
        const Matrix& y = nodes_[out].value;
        Matrix& da = grad_of(a);
        for (int i = 0; i < y.rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < y.cols; ++j) s += dc(i, j) * y(i, j);
            for (int j = 0; j < y.cols; ++j) da(i, j) += y(i, j) * (dc(i, j) - s);
        }
    });
    return out;
}

Tape::NodeId Tape::layer_norm_rows(NodeId a, double eps) {
    const Matrix& A = nodes_[a].value;
    Matrix c(A.rows, A.cols);
    std::vector<double> inv_std(A.rows);
    const double invc = 1.0 / A.cols;
    for (int i = 0; i < A.rows; ++i) {
        double mu = 0.0;
        for (int j = 0; j < A.cols; ++j) mu += A(i, j);
        mu *= invc;
        double var = 0.0;
        for (int j = 0; j < A.cols; ++j) {
            const double d = A(i, j) - mu;
            var += d * d;
        }
        var *= invc;
        const double s = 1.0 / std::sqrt(var + eps);
        inv_std[i] = s;
        for (int j = 0; j < A.cols; ++j) c(i, j) = (A(i, j) - mu) * s;
    }
    NodeId out = push(std::move(c), nodes_[a].requires_grad);
    record_for(out, [this, a, out, inv_std = std::move(inv_std)] {
        if (!nodes_[a].requires_grad) return;
        const Matrix& dc = nodes_[out].grad;
        const Matrix& y = nodes_[out].value;
        Matrix& da = grad_of(a);
        const double invc = 1.0 / y.cols;
        for (int i = 0; i < y.rows; ++i) {
            double mean_d = 0.0, mean_dy = 0.0;
            for (int j = 0; j < y.cols; ++j) {
                mean_d += dc(i, j);
                mean_dy += dc(i, j) * y(i, j);
            }
            mean_d *= invc;
            mean_dy *= invc;
            for (int j = 0; j < y.cols; ++j)
                da(i, j) += inv_std[i] * (dc(i, j) - mean_d - y(i, j) * mean_dy);
        }
    });
    return out;
}

Tape::NodeId Tape::slice_cols(NodeId a, int c0, int n) {
    const Matrix& A = nodes_[a].value;
    if (c0 < 0 || c0 + n > A.cols) throw ValidationError("tape slice_cols: out of range");
    Matrix c(A.rows, n);
    for (int i = 0; i < A.rows; ++i)
        for (int j = 0; j < n; ++j) c(i, j) = A(i, c0 + j);
    NodeId out = push(std::move(c), nodes_[a].requires_grad);
    record_for(out, [this, a, out, c0] {
        if (!nodes_[a].requires_grad) return;
        const Matrix& dc = nodes_[out].grad;
        Matrix& da = grad_of(a);
        for (int i = 0; i < dc.rows; ++i)
            for (int j = 0; j < dc.cols; ++j) da(i, c0 + j) += dc(i, j);
    });
    return out;
}

Tape::NodeId Tape::slice_rows(NodeId a, int r0, int n) {
    const Matrix& A = nodes_[a].value;
    if (r0 < 0 || r0 + n > A.rows) throw ValidationError("tape slice_rows: out of range");
    Matrix c(n, A.cols);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < A.cols; ++j) c(i, j) = A(r0 + i, j);
    NodeId out = push(std::move(c), nodes_[a].requires_grad);
    record_for(out, [this, a, out, r0] {
        if (!nodes_[a].requires_grad) return;
        const Matrix& dc = nodes_[out].grad;
        Matrix& da = grad_of(a);
        for (int i = 0; i < dc.rows; ++i)
            for (int j = 0; j < dc.cols; ++j) da(r0 + i, j) += dc(i, j);
    });
    return out;
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw ValidationError("tape concat_cols: empty");
    int total = 0;
    bool rg = false;
    const int rows_n = nodes_[parts[0]].value.rows;
    for (NodeId p : parts) {
        if (nodes_[p].value.rows != rows_n) throw ValidationError("tape concat_cols: row mismatch");
        total += nodes_[p].value.cols;
        rg = rg || nodes_[p].requires_grad;
    }
    Matrix c(rows_n, total);
    int off = 0;
    for (NodeId p : parts) {
        const Matrix& P = nodes_[p].value;
        for (int i = 0; i < rows_n; ++i)
            for (int j = 0; j < P.cols; ++j) c(i, off + j) = P(i, j);
        off += P.cols;
    }
    NodeId out = push(std::move(c), rg);
    record_for(out, [this, parts, out] {
        const Matrix& dc = nodes_[out].grad;
        int off2 = 0;
        for (NodeId p : parts) {
            const int w = nodes_[p].value.cols;
            if (nodes_[p].requires_grad) {
                Matrix& dp = grad_of(p);
                for (int i = 0; i < dc.rows; ++i)
                    for (int j = 0; j < w; ++j) dp(i, j) += dc(i, off2 + j);
            }
            off2 += w;
        }
    });
    return out;
}

Tape::NodeId Tape::mean_rows(NodeId a) {
    const Matrix& A = nodes_[a].value;
    Matrix c(1, A.cols);
    for (int j = 0; j < A.cols; ++j) {
        double s = 0.0;
        for (int i = 0; i < A.rows; ++i) s += A(i, j);
        c(0, j) = s / A.rows;
    }
    NodeId out = push(std::move(c), nodes_[a].requires_grad);
    record_for(out, [this, a, out] {
        if (!nodes_[a].requires_grad) return;
        const Matrix& dc = nodes_[out].grad;
        Matrix& da = grad_of(a);
        const double inv = 1.0 / nodes_[a].value.rows;
        for (int i = 0; i < da.rows; ++i)
            for (int j = 0; j < da.cols; ++j) da(i, j) += dc(0, j) * inv;
    });
    return out;
}

Tape::NodeId Tape::mse(NodeId pred, const Matrix& target) {
    const Matrix& P = nodes_[pred].value;
    if (!P.same_shape(target)) throw ValidationError("tape mse: shape mismatch");
    Matrix diff(P.rows, P.cols);
    double s = 0.0;
    for (size_t i = 0; i < P.size(); ++i) {
        diff.a[i] = P.a[i] - target.a[i];
        s += diff.a[i] * diff.a[i];
    }
    Matrix c(1, 1);
    c(0, 0) = s / static_cast<double>(P.size());
    NodeId out = push(std::move(c), nodes_[pred].requires_grad);
    record_for(out, [this, pred, out, diff = std::move(diff)] {
        if (!nodes_[pred].requires_grad) return;
        const double d = nodes_[out].grad(0, 0) * 2.0 / static_cast<double>(diff.size());
        Matrix& dp = grad_of(pred);
        for (size_t i = 0; i < diff.size(); ++i) dp.a[i] += d * diff.a[i];
    });
    return out;
}

Tape::NodeId Tape::mse_rows(NodeId pred, const Matrix& target,
                            const std::vector<uint8_t>& row_mask) {
    const Matrix& P = nodes_[pred].value;
    if (!P.same_shape(target)) throw ValidationError("tape mse_rows: shape mismatch");
    if (static_cast<int>(row_mask.size()) != P.rows)
        throw ValidationError("tape mse_rows: mask length mismatch");
    int k = 0;
    for (uint8_t m : row_mask) k += m ? 1 : 0;
    if (k == 0) throw ValidationError("tape mse_rows: empty row selection");
    Matrix diff(P.rows, P.cols);
    double s = 0.0;
    for (int i = 0; i < P.rows; ++i) {
        if (!row_mask[i]) continue;
        for (int j = 0; j < P.cols; ++j) {
            const double d = P(i, j) - target(i, j);
            diff(i, j) = d;
            s += d * d;
        }
    }
    const double denom = static_cast<double>(k) * P.cols;
    Matrix c(1, 1);
    c(0, 0) = s / denom;
    NodeId out = push(std::move(c), nodes_[pred].requires_grad);
    record_for(out, [this, pred, out, diff = std::move(diff), row_mask, denom] {
        if (!nodes_[pred].requires_grad) return;
        const double d = nodes_[out].grad(0, 0) * 2.0 / denom;
        Matrix& dp = grad_of(pred);
        for (int i = 0; i < diff.rows; ++i) {
            if (!row_mask[i]) continue;
            for (int j = 0; j < diff.cols; ++j) dp(i, j) += d * diff(i, j);
        }
    });
    return out;
}

void Tape::backward(NodeId loss) {
    if (!grad_enabled_) throw ValidationError("tape: backward on a no-grad tape");
    const Matrix& L = nodes_[loss].value;
    if (L.rows != 1 || L.cols != 1) throw ValidationError("tape: loss must be a scalar node");
    for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id)
        if (nodes_[id].requires_grad) grad_of(id);
    grad_of(loss)(0, 0) = 1.0;
    for (auto it = backward_ops_.rbegin(); it != backward_ops_.rend(); ++it) (*it)();
    for (auto& n : nodes_) {
        if (n.param != nullptr && n.grad.same_shape(n.value)) {
            Matrix& g = n.param->grad;
            for (size_t i = 0; i < g.size(); ++i) g.a[i] += n.grad.a[i];
        }
    }
}

}  // namespace gpd
