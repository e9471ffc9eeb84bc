#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gps::ad {

/// Dense row-major matrix of 64-bit reals. Vectors are n x 1 or 1 x d,
/// scalars 1 x 1.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), v_(rows * cols, fill) {}
    static Tensor scalar(double x) {
        Tensor t(1, 1);
        t.v_[0] = x;
        return t;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return v_.size(); }
    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    double& operator()(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }
    double& operator[](std::size_t i) { return v_[i]; }
    double operator[](std::size_t i) const { return v_[i]; }
    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    double scalar_value() const { return v_[0]; }

    bool all_finite() const;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> v_;
};

/// Non-owning view of a canonical undirected edge list (u < v). Weights over
/// such a view are shared by both directions of each edge.
struct EdgeListView {
    const std::array<int, 2>* edges = nullptr;
    std::size_t count = 0;
    int node_count = 0;
};

using VarId = std::int32_t;

/// Define-by-run reverse-mode tape. Creation order is a topological order,
/// so backward is a single reverse sweep. Every op validates that its output
/// is finite and throws NumericError otherwise.
class Tape {
public:
    VarId constant(Tensor t);
    VarId param(Tensor t);  // leaf that accumulates gradient

    const Tensor& val(VarId id) const { return nodes_[id].value; }
    const Tensor& grad(VarId id) const;
    bool requires_grad(VarId id) const { return nodes_[id].requires_grad; }

    /// Seeds d(root)=1 (root must be scalar) and sweeps in reverse creation
    /// order. Grads are reset first, so repeated backward calls on one tape
    /// are independent.
    void backward(VarId root);

    std::size_t node_count() const { return nodes_.size(); }

    // -- elementwise / shape ops ------------------------------------------
    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId add_scaled(VarId a, VarId b, double alpha);  // a + alpha*b
    VarId scale(VarId a, double c);
    VarId hadamard(VarId a, VarId b);
    VarId relu(VarId a);
    VarId sigmoid(VarId a);
    VarId log_clamped(VarId a, double floor);  // log(max(a, floor)); zero grad when clamped
    VarId abs_val(VarId a);
    VarId clamp(VarId a, double lo, double hi);
    VarId matmul(VarId a, VarId b);
    VarId add_row_broadcast(VarId a, VarId bias);       // a[n,d] + bias[1,d]
    VarId concat_cols(VarId a, VarId b);
    VarId gather_rows(VarId a, std::vector<int> rows);
    VarId stack_rows(const std::vector<VarId>& rows);   // each 1 x d
    VarId mean_rows(VarId a, std::vector<int> rows);    // 1 x d
    VarId sum_all(VarId a);
    VarId mean_all(VarId a);
    VarId mul_rows(VarId a, VarId col);                           // a[n,d] * col[n,1]
    VarId div_rows_guarded(VarId a, VarId den, double min_den,
                           std::vector<std::uint8_t>* active_out = nullptr);

    // -- losses ------------------------------------------------------------
    VarId softmax_rows(VarId a);
    /// -(1/|rows|) sum_i log softmax(logits_i)[target_i]; numerically fused.
    VarId softmax_cross_entropy(VarId logits, std::vector<int> targets, std::vector<int> rows);
    /// Same loss but over probability rows (e.g. routed mixtures).
    VarId cross_entropy_probs(VarId probs, std::vector<int> targets, std::vector<int> rows,
                              double floor = 1e-12);

    // -- graph ops ----------------------------------------------------------
    /// out_u += w_e * h_v and out_v += w_e * h_u per canonical edge.
    VarId weighted_neighbor_sum(VarId h, VarId w, EdgeListView ev);
    /// deg_u += w_e, deg_v += w_e per canonical edge; n x 1.
    VarId weighted_degree(VarId w, EdgeListView ev);

    // -- sampling ------------------------------------------------------------
    /// Binary-concrete relaxation sigma((logit(u) + logit(t)) / eps) with
    /// u_logit = log u - log(1-u) precomputed as a constant.
    VarId gumbel_relax(VarId t, const Tensor& u_logit, double eps);

    /// Differentiable structure-role ratio from soft degrees. For counted i:
    /// role_i = sum_{j != i} kappa_ij * same(i,j) / sum_{j != i} kappa_ij with
    /// kappa_ij = sigma((theta + 1/2 - |d_i - d_j|) / s). The half shift makes
    /// the s->0 limit reproduce the hard |d_i-d_j| <= theta rule on integer
    /// degrees. Rows with denominator < min_den (and uncounted rows) emit 0
    /// and are reported inactive.
    VarId soft_role_ratio(VarId soft_deg, const std::vector<std::uint8_t>& same_pairs,
                          const std::vector<int>& counted, int theta, double smoothing,
                          double min_den, std::vector<std::uint8_t>* active_out);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&)> back;  // empty for leaves
    };

    VarId push(Tensor value, bool requires_grad, std::function<void(Tape&)> back,
               const char* op_name);
    Tensor& grad_mut(VarId id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
};

}  // namespace gps::ad
