#include "gps/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "gps/errors.hpp"

namespace gps::ad {

bool Tensor::all_finite() const {
    for (double x : v_)
        if (!std::isfinite(x)) return false;
    return true;
}

namespace {

double sigmoid_scalar(double x) {
    if (x >= 0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

VarId Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> back,
                 const char* op_name) {
    if (!value.all_finite())
        throw NumericError(std::string("non-finite value produced by op '") + op_name + "'");
    Node node;
    node.grad = requires_grad ? Tensor(value.rows(), value.cols()) : Tensor();
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    node.back = std::move(back);
    nodes_.push_back(std::move(node));
    return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::constant(Tensor t) { return push(std::move(t), false, {}, "constant"); }
VarId Tape::param(Tensor t) { return push(std::move(t), true, {}, "param"); }

const Tensor& Tape::grad(VarId id) const {
    if (!nodes_[id].requires_grad) throw ContractError("grad requested for non-grad node");
    return nodes_[id].grad;
}

void Tape::backward(VarId root) {
    const Tensor& rv = nodes_[root].value;
    if (rv.size() != 1) throw ContractError("backward root must be scalar");
    if (!nodes_[root].requires_grad) throw ContractError("backward root does not require grad");
    for (auto& n : nodes_)
        if (n.requires_grad) std::fill(n.grad.data(), n.grad.data() + n.grad.size(), 0.0);
    nodes_[root].grad[0] = 1.0;
    for (VarId id = root; id >= 0; --id) {
        auto& n = nodes_[id];
        if (n.requires_grad && n.back) n.back(*this);
    }
}

// helper macros for concise closures
namespace {
inline void axpy(Tensor& dst, const Tensor& src, double a = 1.0) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
}
}  // namespace

VarId Tape::add(VarId a, VarId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) throw ContractError("add: shape mismatch");
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
    bool rg = requires_grad(a) || requires_grad(b);
    VarId id = push(std::move(out), rg, {}, "add");
    nodes_[id].back = [a, b, id](Tape& t) {
        const Tensor& g = t.grad(id);
        if (t.requires_grad(a)) axpy(t.grad_mut(a), g);
        if (t.requires_grad(b)) axpy(t.grad_mut(b), g);
    };
    return id;
}

VarId Tape::sub(VarId a, VarId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) throw ContractError("sub: shape mismatch");
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= B[i];
    bool rg = requires_grad(a) || requires_grad(b);
    VarId id = push(std::move(out), rg, {}, "sub");
    nodes_[id].back = [a, b, id](Tape& t) {
        const Tensor& g = t.grad(id);
        if (t.requires_grad(a)) axpy(t.grad_mut(a), g);
        if (t.requires_grad(b)) axpy(t.grad_mut(b), g, -1.0);
    };
    return id;
}

VarId Tape::add_scaled(VarId a, VarId b, double alpha) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) throw ContractError("add_scaled: shape mismatch");
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += alpha * B[i];
    bool rg = requires_grad(a) || requires_grad(b);
    VarId id = push(std::move(out), rg, {}, "add_scaled");
    nodes_[id].back = [a, b, alpha, id](Tape& t) {
        const Tensor& g = t.grad(id);
        if (t.requires_grad(a)) axpy(t.grad_mut(a), g);
        if (t.requires_grad(b)) axpy(t.grad_mut(b), g, alpha);
    };
    return id;
}

VarId Tape::scale(VarId a, double c) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    VarId id = push(std::move(out), requires_grad(a), {}, "scale");
    nodes_[id].back = [a, c, id](Tape& t) {
        if (t.requires_grad(a)) axpy(t.grad_mut(a), t.grad(id), c);
    };
    return id;
}

VarId Tape::hadamard(VarId a, VarId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) throw ContractError("hadamard: shape mismatch");
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= B[i];
    bool rg = requires_grad(a) || requires_grad(b);
    VarId id = push(std::move(out), rg, {}, "hadamard");
    nodes_[id].back = [a, b, id](Tape& t) {
        const Tensor& g = t.grad(id);
        if (t.requires_grad(a)) {
            const Tensor& B2 = t.val(b);
            Tensor& ga = t.grad_mut(a);
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * B2[i];
        }
        if (t.requires_grad(b)) {
            const Tensor& A2 = t.val(a);
            Tensor& gb = t.grad_mut(b);
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * A2[i];
        }
    };
    return id;
}

VarId Tape::relu(VarId a) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0 ? out[i] : 0.0;
    VarId id = push(std::move(out), requires_grad(a), {}, "relu");
    nodes_[id].back = [a, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.grad(id);
        const Tensor& A = t.val(a);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < ga.size(); ++i)
            if (A[i] > 0) ga[i] += g[i];
    };
    return id;
}

VarId Tape::sigmoid(VarId a) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(out[i]);
    VarId id = push(std::move(out), requires_grad(a), {}, "sigmoid");
    nodes_[id].back = [a, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.grad(id);
        const Tensor& s = t.val(id);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * s[i] * (1.0 - s[i]);
    };
    return id;
}

VarId Tape::log_clamped(VarId a, double floor) {
    const Tensor& A = val(a);
    Tensor out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(out[i], floor));
    VarId id = push(std::move(out), requires_grad(a), {}, "log_clamped");
    nodes_[id].back = [a, floor, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.grad(id);
        const Tensor& A2 = t.val(a);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < ga.size(); ++i)
            if (A2[i] > floor) ga[i] += g[i] / A2[i];
    };
    return id;
}

VarId Tape::abs_val(VarId a) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::fabs(out[i]);
    VarId id = push(std::move(out), requires_grad(a), {}, "abs");
    nodes_[id].back = [a, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.grad(id);
        const Tensor& A = t.val(a);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < ga.size(); ++i) {
            if (A[i] > 0) ga[i] += g[i];
            else if (A[i] < 0) ga[i] -= g[i];
        }
    };
    return id;
}

VarId Tape::clamp(VarId a, double lo, double hi) {
    Tensor out = val(a);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(std::max(out[i], lo), hi);
    VarId id = push(std::move(out), requires_grad(a), {}, "clamp");
    nodes_[id].back = [a, lo, hi, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.grad(id);
        const Tensor& A = t.val(a);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < ga.size(); ++i)
            if (A[i] > lo && A[i] < hi) ga[i] += g[i];
    };
    return id;
}

VarId Tape::matmul(VarId a, VarId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.cols() != B.rows()) throw ContractError("matmul: inner dimension mismatch");
    Tensor out(A.rows(), B.cols());
    // i-k-j order vectorizes over the output row
    for (std::size_t i = 0; i < A.rows(); ++i) {
        double* orow = out.data() + i * B.cols();
        const double* arow = A.data() + i * A.cols();
        for (std::size_t k = 0; k < A.cols(); ++k) {
            double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = B.data() + k * B.cols();
            for (std::size_t j = 0; j < B.cols(); ++j) orow[j] += av * brow[j];
        }
    }
    bool rg = requires_grad(a) || requires_grad(b);
    VarId id = push(std::move(out), rg, {}, "matmul");
    nodes_[id].back = [a, b, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& A2 = t.val(a);
        const Tensor& B2 = t.val(b);
        if (t.requires_grad(a)) {  // gA += g * B^T
            Tensor& ga = t.grad_mut(a);
            for (std::size_t i = 0; i < A2.rows(); ++i)
                for (std::size_t k = 0; k < A2.cols(); ++k) {
                    double acc = 0.0;
                    const double* grow = g.data() + i * g.cols();
                    const double* brow = B2.data() + k * B2.cols();
                    for (std::size_t j = 0; j < g.cols(); ++j) acc += grow[j] * brow[j];
                    ga(i, k) += acc;
                }
        }
        if (t.requires_grad(b)) {  // gB += A^T * g
            Tensor& gb = t.grad_mut(b);
            for (std::size_t i = 0; i < A2.rows(); ++i) {
                const double* arow = A2.data() + i * A2.cols();
                const double* grow = g.data() + i * g.cols();
                for (std::size_t k = 0; k < A2.cols(); ++k) {
                    double av = arow[k];
                    if (av == 0.0) continue;
                    double* gbrow = gb.data() + k * gb.cols();
                    for (std::size_t j = 0; j < g.cols(); ++j) gbrow[j] += av * grow[j];
                }
            }
        }
    };
    return id;
}

VarId Tape::add_row_broadcast(VarId a, VarId bias) {
    const Tensor& A = val(a);
    const Tensor& B = val(bias);
    if (B.rows() != 1 || B.cols() != A.cols()) throw ContractError("add_row_broadcast: bias shape");
    Tensor out = A;
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) += B[j];
    bool rg = requires_grad(a) || requires_grad(bias);
    VarId id = push(std::move(out), rg, {}, "add_row_broadcast");
    nodes_[id].back = [a, bias, id](Tape& t) {
        const Tensor& g = t.grad(id);
        if (t.requires_grad(a)) axpy(t.grad_mut(a), g);
        if (t.requires_grad(bias)) {
            Tensor& gb = t.grad_mut(bias);
            for (std::size_t i = 0; i < g.rows(); ++i)
                for (std::size_t j = 0; j < g.cols(); ++j) gb[j] += g(i, j);
        }
    };
    return id;
}

VarId Tape::concat_cols(VarId a, VarId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rows() != B.rows()) throw ContractError("concat_cols: row mismatch");
    Tensor out(A.rows(), A.cols() + B.cols());
    for (std::size_t i = 0; i < A.rows(); ++i) {
        for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) = A(i, j);
        for (std::size_t j = 0; j < B.cols(); ++j) out(i, A.cols() + j) = B(i, j);
    }
    bool rg = requires_grad(a) || requires_grad(b);
    VarId id = push(std::move(out), rg, {}, "concat_cols");
    nodes_[id].back = [a, b, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const std::size_t ac = t.val(a).cols();
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad_mut(a);
            for (std::size_t i = 0; i < ga.rows(); ++i)
                for (std::size_t j = 0; j < ac; ++j) ga(i, j) += g(i, j);
        }
        if (t.requires_grad(b)) {
            Tensor& gb = t.grad_mut(b);
            for (std::size_t i = 0; i < gb.rows(); ++i)
                for (std::size_t j = 0; j < gb.cols(); ++j) gb(i, j) += g(i, ac + j);
        }
    };
    return id;
}

VarId Tape::gather_rows(VarId a, std::vector<int> rows) {
    const Tensor& A = val(a);
    Tensor out(rows.size(), A.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) = A(rows[i], j);
    VarId id = push(std::move(out), requires_grad(a), {}, "gather_rows");
    nodes_[id].back = [a, rows = std::move(rows), id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.grad(id);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) ga(rows[i], j) += g(i, j);
    };
    return id;
}

VarId Tape::stack_rows(const std::vector<VarId>& rows) {
    if (rows.empty()) throw ContractError("stack_rows: empty");
    std::size_t d = val(rows[0]).cols();
    Tensor out(rows.size(), d);
    bool rg = false;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Tensor& r = val(rows[i]);
        if (r.rows() != 1 || r.cols() != d) throw ContractError("stack_rows: row shape");
        for (std::size_t j = 0; j < d; ++j) out(i, j) = r(0, j);
        rg = rg || requires_grad(rows[i]);
    }
    VarId id = push(std::move(out), rg, {}, "stack_rows");
    nodes_[id].back = [rows, id](Tape& t) {
        const Tensor& g = t.grad(id);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!t.requires_grad(rows[i])) continue;
            Tensor& gr = t.grad_mut(rows[i]);
            for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
        }
    };
    return id;
}

VarId Tape::mean_rows(VarId a, std::vector<int> rows) {
    if (rows.empty()) throw ContractError("mean_rows: empty node set");
    const Tensor& A = val(a);
    Tensor out(1, A.cols());
    for (int r : rows)
        for (std::size_t j = 0; j < A.cols(); ++j) out(0, j) += A(r, j);
    double inv = 1.0 / static_cast<double>(rows.size());
    for (std::size_t j = 0; j < A.cols(); ++j) out(0, j) *= inv;
    VarId id = push(std::move(out), requires_grad(a), {}, "mean_rows");
    nodes_[id].back = [a, rows = std::move(rows), inv, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.grad(id);
        Tensor& ga = t.grad_mut(a);
        for (int r : rows)
            for (std::size_t j = 0; j < g.cols(); ++j) ga(r, j) += inv * g(0, j);
    };
    return id;
}

VarId Tape::sum_all(VarId a) {
    const Tensor& A = val(a);
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
    VarId id = push(Tensor::scalar(s), requires_grad(a), {}, "sum_all");
    nodes_[id].back = [a, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        double g = t.grad(id)[0];
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    };
    return id;
}

VarId Tape::mean_all(VarId a) {
    const Tensor& A = val(a);
    if (A.size() == 0) throw ContractError("mean_all: empty");
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) s += A[i];
    double inv = 1.0 / static_cast<double>(A.size());
    VarId id = push(Tensor::scalar(s * inv), requires_grad(a), {}, "mean_all");
    nodes_[id].back = [a, inv, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        double g = t.grad(id)[0] * inv;
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    };
    return id;
}

VarId Tape::mul_rows(VarId a, VarId col) {
    const Tensor& A = val(a);
    const Tensor& C = val(col);
    if (C.rows() != A.rows() || C.cols() != 1) throw ContractError("mul_rows: column shape");
    Tensor out = A;
    for (std::size_t i = 0; i < A.rows(); ++i)
        for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) *= C[i];
    bool rg = requires_grad(a) || requires_grad(col);
    VarId id = push(std::move(out), rg, {}, "mul_rows");
    nodes_[id].back = [a, col, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& A2 = t.val(a);
        const Tensor& C2 = t.val(col);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad_mut(a);
            for (std::size_t i = 0; i < A2.rows(); ++i)
                for (std::size_t j = 0; j < A2.cols(); ++j) ga(i, j) += g(i, j) * C2[i];
        }
        if (t.requires_grad(col)) {
            Tensor& gc = t.grad_mut(col);
            for (std::size_t i = 0; i < A2.rows(); ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < A2.cols(); ++j) acc += g(i, j) * A2(i, j);
                gc[i] += acc;
            }
        }
    };
    return id;
}

VarId Tape::div_rows_guarded(VarId a, VarId den, double min_den,
                             std::vector<std::uint8_t>* active_out) {
    const Tensor& A = val(a);
    const Tensor& D = val(den);
    if (D.rows() != A.rows() || D.cols() != 1) throw ContractError("div_rows_guarded: den shape");
    auto active = std::make_shared<std::vector<std::uint8_t>>(A.rows(), 0);
    Tensor out(A.rows(), A.cols());
    for (std::size_t i = 0; i < A.rows(); ++i) {
        if (D[i] >= min_den) {
            (*active)[i] = 1;
            for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) = A(i, j) / D[i];
        }
    }
    if (active_out) *active_out = *active;
    bool rg = requires_grad(a) || requires_grad(den);
    VarId id = push(std::move(out), rg, {}, "div_rows_guarded");
    nodes_[id].back = [a, den, active, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& D2 = t.val(den);
        const Tensor& O = t.val(id);
        if (t.requires_grad(a)) {
            Tensor& ga = t.grad_mut(a);
            for (std::size_t i = 0; i < ga.rows(); ++i) {
                if (!(*active)[i]) continue;
                for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, j) / D2[i];
            }
        }
        if (t.requires_grad(den)) {
            Tensor& gd = t.grad_mut(den);
            for (std::size_t i = 0; i < gd.rows(); ++i) {
                if (!(*active)[i]) continue;
                double acc = 0.0;
                for (std::size_t j = 0; j < g.cols(); ++j) acc += g(i, j) * O(i, j);
                gd[i] -= acc / D2[i];
            }
        }
    };
    return id;
}

VarId Tape::softmax_rows(VarId a) {
    const Tensor& A = val(a);
    Tensor out(A.rows(), A.cols());
    for (std::size_t i = 0; i < A.rows(); ++i) {
        double m = A(i, 0);
        for (std::size_t j = 1; j < A.cols(); ++j) m = std::max(m, A(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < A.cols(); ++j) {
            out(i, j) = std::exp(A(i, j) - m);
            z += out(i, j);
        }
        for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) /= z;
    }
    VarId id = push(std::move(out), requires_grad(a), {}, "softmax_rows");
    nodes_[id].back = [a, id](Tape& t) {
        if (!t.requires_grad(a)) return;
        const Tensor& g = t.grad(id);
        const Tensor& s = t.val(id);
        Tensor& ga = t.grad_mut(a);
        for (std::size_t i = 0; i < s.rows(); ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < s.cols(); ++j) dot += g(i, j) * s(i, j);
            for (std::size_t j = 0; j < s.cols(); ++j) ga(i, j) += s(i, j) * (g(i, j) - dot);
        }
    };
    return id;
}

VarId Tape::softmax_cross_entropy(VarId logits, std::vector<int> targets, std::vector<int> rows) {
    if (rows.empty()) throw ContractError("softmax_cross_entropy: empty mask");
    const Tensor& L = val(logits);
    double loss = 0.0;
    for (int r : rows) {
        if (targets[r] < 0 || targets[r] >= static_cast<int>(L.cols()))
            throw ContractError("softmax_cross_entropy: target out of range");
        double m = L(r, 0);
        for (std::size_t j = 1; j < L.cols(); ++j) m = std::max(m, L(r, j));
        double z = 0.0;
        for (std::size_t j = 0; j < L.cols(); ++j) z += std::exp(L(r, j) - m);
        loss += std::log(z) - (L(r, targets[r]) - m);
    }
    loss /= static_cast<double>(rows.size());
    VarId id = push(Tensor::scalar(loss), requires_grad(logits), {}, "softmax_cross_entropy");
    nodes_[id].back = [logits, targets = std::move(targets), rows = std::move(rows), id](Tape& t) {
        if (!t.requires_grad(logits)) return;
        double g = t.grad(id)[0] / static_cast<double>(rows.size());
        const Tensor& L2 = t.val(logits);
        Tensor& gl = t.grad_mut(logits);
        for (int r : rows) {
            double m = L2(r, 0);
            for (std::size_t j = 1; j < L2.cols(); ++j) m = std::max(m, L2(r, j));
            double z = 0.0;
            for (std::size_t j = 0; j < L2.cols(); ++j) z += std::exp(L2(r, j) - m);
            for (std::size_t j = 0; j < L2.cols(); ++j) {
                double p = std::exp(L2(r, j) - m) / z;
                gl(r, j) += g * (p - (static_cast<int>(j) == targets[r] ? 1.0 : 0.0));
            }
        }
    };
    return id;
}

VarId Tape::cross_entropy_probs(VarId probs, std::vector<int> targets, std::vector<int> rows,
                                double floor) {
    if (rows.empty()) throw ContractError("cross_entropy_probs: empty mask");
    const Tensor& P = val(probs);
    double loss = 0.0;
    for (int r : rows) {
        if (targets[r] < 0 || targets[r] >= static_cast<int>(P.cols()))
            throw ContractError("cross_entropy_probs: target out of range");
        loss -= std::log(std::max(P(r, targets[r]), floor));
    }
    loss /= static_cast<double>(rows.size());
    VarId id = push(Tensor::scalar(loss), requires_grad(probs), {}, "cross_entropy_probs");
    nodes_[id].back = [probs, targets = std::move(targets), rows = std::move(rows), floor,
                       id](Tape& t) {
        if (!t.requires_grad(probs)) return;
        double g = t.grad(id)[0] / static_cast<double>(rows.size());
        const Tensor& P2 = t.val(probs);
        Tensor& gp = t.grad_mut(probs);
        for (int r : rows) {
            double p = P2(r, targets[r]);
            if (p > floor) gp(r, targets[r]) -= g / p;
        }
    };
    return id;
}

VarId Tape::weighted_neighbor_sum(VarId h, VarId w, EdgeListView ev) {
    const Tensor& H = val(h);
    const Tensor& W = val(w);
    if (H.rows() != static_cast<std::size_t>(ev.node_count))
        throw ContractError("weighted_neighbor_sum: feature rows != node count");
    if (W.rows() != ev.count || W.cols() != 1)
        throw ContractError("weighted_neighbor_sum: weight vector misaligned with edges");
    Tensor out(H.rows(), H.cols());
    std::size_t d = H.cols();
    for (std::size_t e = 0; e < ev.count; ++e) {
        int u = ev.edges[e][0], v = ev.edges[e][1];
        double we = W[e];
        if (we == 0.0) continue;
        double* ou = out.data() + u * d;
        double* ov = out.data() + v * d;
        const double* hu = H.data() + u * d;
        const double* hv = H.data() + v * d;
        for (std::size_t j = 0; j < d; ++j) {
            ou[j] += we * hv[j];
            ov[j] += we * hu[j];
        }
    }
    bool rg = requires_grad(h) || requires_grad(w);
    VarId id = push(std::move(out), rg, {}, "weighted_neighbor_sum");
    nodes_[id].back = [h, w, ev, id](Tape& t) {
        const Tensor& g = t.grad(id);
        const Tensor& H2 = t.val(h);
        const Tensor& W2 = t.val(w);
        std::size_t d = H2.cols();
        if (t.requires_grad(h)) {
            Tensor& gh = t.grad_mut(h);
            for (std::size_t e = 0; e < ev.count; ++e) {
                int u = ev.edges[e][0], v = ev.edges[e][1];
                double we = W2[e];
                if (we == 0.0) continue;
                double* gu = gh.data() + u * d;
                double* gv = gh.data() + v * d;
                const double* pgu = g.data() + u * d;
                const double* pgv = g.data() + v * d;
                for (std::size_t j = 0; j < d; ++j) {
                    gv[j] += we * pgu[j];
                    gu[j] += we * pgv[j];
                }
            }
        }
        if (t.requires_grad(w)) {
            Tensor& gw = t.grad_mut(w);
            for (std::size_t e = 0; e < ev.count; ++e) {
                int u = ev.edges[e][0], v = ev.edges[e][1];
                const double* hu = H2.data() + u * d;
                const double* hv = H2.data() + v * d;
                const double* pgu = g.data() + u * d;
                const double* pgv = g.data() + v * d;
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) acc += pgu[j] * hv[j] + pgv[j] * hu[j];
                gw[e] += acc;
            }
        }
    };
    return id;
}

VarId Tape::weighted_degree(VarId w, EdgeListView ev) {
    const Tensor& W = val(w);
    if (W.rows() != ev.count || W.cols() != 1)
        throw ContractError("weighted_degree: weight vector misaligned with edges");
    Tensor out(ev.node_count, 1);
    for (std::size_t e = 0; e < ev.count; ++e) {
        out[ev.edges[e][0]] += W[e];
        out[ev.edges[e][1]] += W[e];
    }
    VarId id = push(std::move(out), requires_grad(w), {}, "weighted_degree");
    nodes_[id].back = [w, ev, id](Tape& t) {
        if (!t.requires_grad(w)) return;
        const Tensor& g = t.grad(id);
        Tensor& gw = t.grad_mut(w);
        for (std::size_t e = 0; e < ev.count; ++e)
            gw[e] += g[ev.edges[e][0]] + g[ev.edges[e][1]];
    };
    return id;
}

VarId Tape::gumbel_relax(VarId t_var, const Tensor& u_logit, double eps) {
    if (eps <= 0) throw ContractError("gumbel_relax: temperature must be positive");
    const Tensor& T = val(t_var);
    if (!T.same_shape(u_logit)) throw ContractError("gumbel_relax: shape mismatch");
    Tensor out(T.rows(), T.cols());
    for (std::size_t i = 0; i < T.size(); ++i) {
        double ti = T[i];
        if (ti <= 0.0 || ti >= 1.0) throw ContractError("gumbel_relax: T must lie in (0,1)");
        out[i] = sigmoid_scalar((u_logit[i] + std::log(ti) - std::log1p(-ti)) / eps);
    }
    VarId id = push(std::move(out), requires_grad(t_var), {}, "gumbel_relax");
    nodes_[id].back = [t_var, eps, id](Tape& t) {
        if (!t.requires_grad(t_var)) return;
        const Tensor& g = t.grad(id);
        const Tensor& T2 = t.val(t_var);
        const Tensor& O = t.val(id);
        Tensor& gt = t.grad_mut(t_var);
        for (std::size_t i = 0; i < gt.size(); ++i)
            gt[i] += g[i] * O[i] * (1.0 - O[i]) / (eps * T2[i] * (1.0 - T2[i]));
    };
    return id;
}

VarId Tape::soft_role_ratio(VarId soft_deg, const std::vector<std::uint8_t>& same_pairs,
                            const std::vector<int>& counted, int theta, double smoothing,
                            double min_den, std::vector<std::uint8_t>* active_out) {
    const Tensor& D = val(soft_deg);
    if (D.cols() != 1) throw ContractError("soft_role_ratio: soft degrees must be a column");
    std::size_t n = D.rows();
    if (same_pairs.size() != n * n) throw ContractError("soft_role_ratio: same matrix shape");
    if (smoothing <= 0) throw ContractError("soft_role_ratio: smoothing must be positive");

    auto num = std::make_shared<std::vector<double>>(n, 0.0);
    auto den = std::make_shared<std::vector<double>>(n, 0.0);
    auto active = std::make_shared<std::vector<std::uint8_t>>(n, 0);
    auto same = std::make_shared<std::vector<std::uint8_t>>(same_pairs);
    double shift = theta + 0.5;
    for (std::size_t a = 0; a < counted.size(); ++a) {
        int i = counted[a];
        for (std::size_t b = 0; b < counted.size(); ++b) {
            if (a == b) continue;
            int j = counted[b];
            double kappa = sigmoid_scalar((shift - std::fabs(D[i] - D[j])) / smoothing);
            (*den)[i] += kappa;
            if (same_pairs[static_cast<std::size_t>(i) * n + j]) (*num)[i] += kappa;
        }
    }
    Tensor out(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        if ((*den)[i] >= min_den) {
            (*active)[i] = 1;
            out[i] = (*num)[i] / (*den)[i];
        }
    }
    if (active_out) *active_out = *active;
    VarId id = push(std::move(out), requires_grad(soft_deg), {}, "soft_role_ratio");
    nodes_[id].back = [soft_deg, same, counted, theta, smoothing, num, den, active, id](Tape& t) {
        if (!t.requires_grad(soft_deg)) return;
        const Tensor& g = t.grad(id);
        const Tensor& D2 = t.val(soft_deg);
        Tensor& gd = t.grad_mut(soft_deg);
        std::size_t n = D2.rows();
        double shift = theta + 0.5;
        for (std::size_t a = 0; a < counted.size(); ++a) {
            int i = counted[a];
            if (!(*active)[i] || g[i] == 0.0) continue;
            double ratio = (*num)[i] / (*den)[i];
            for (std::size_t b = 0; b < counted.size(); ++b) {
                if (a == b) continue;
                int j = counted[b];
                double diff = D2[i] - D2[j];
                double kappa = sigmoid_scalar((shift - std::fabs(diff)) / smoothing);
                double same_ij = (*same)[static_cast<std::size_t>(i) * n + j] ? 1.0 : 0.0;
                double dratio_dkappa = (same_ij - ratio) / (*den)[i];
                double sgn = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
                double dkappa = kappa * (1.0 - kappa) / smoothing;  // w.r.t. its argument
                // d|diff|/d d_i = sgn, d/d d_j = -sgn; argument carries a minus sign
                double common = g[i] * dratio_dkappa * dkappa * (-sgn);
                gd[i] += common;
                gd[j] -= common;
            }
        }
    };
    return id;
}

}  // namespace gps::ad
