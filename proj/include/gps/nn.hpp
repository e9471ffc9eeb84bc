#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "gps/autodiff.hpp"
#include "gps/graph.hpp"
#include "gps/rng.hpp"

namespace gps {

/// Named parameter tensors with deterministic (sorted) iteration order.
struct ParamSet {
    std::map<std::string, ad::Tensor> tensors;

    std::size_t coordinate_count() const;
    std::string to_json() const;  // lossless, carries a format_version field
    static ParamSet from_json(const std::string& text);
};

using GradMap = std::map<std::string, ad::Tensor>;

/// Per-tape handles for every tensor of a ParamSet.
struct TapeParams {
    std::map<std::string, ad::VarId> ids;
    ad::VarId at(const std::string& name) const;
};

TapeParams bind(ad::Tape& tape, const ParamSet& params);
GradMap collect_grads(const ad::Tape& tape, const TapeParams& bound);

inline ad::EdgeListView edge_view(const Graph& g) {
    return {g.edges().data(), g.edges().size(), g.node_count()};
}
inline ad::EdgeListView edge_view(const Subgraph& s) {
    return {s.local_edges.data(), s.local_edges.size(), s.node_count()};
}

/// Glorot-uniform W[fan_in x fan_out] plus zero bias, registered as
/// prefix + ".W" / ".b".
void add_linear(ParamSet& params, const std::string& prefix, int fan_in, int fan_out, Rng& rng);

/// x * W + b
ad::VarId linear(ad::Tape& tape, const TapeParams& p, const std::string& prefix, ad::VarId x);

/// GIN layer with a 2-layer inner MLP and ReLU output activation:
///   relu(mlp((1 + eps0) h_i + sum_j w_ij h_j))
/// Parameters: prefix.m1.{W,b}, prefix.m2.{W,b}.
ad::VarId gin_layer(ad::Tape& tape, const TapeParams& p, const std::string& prefix, ad::VarId h,
                    ad::VarId w, ad::EdgeListView ev, double eps0);
void add_gin_layer(ParamSet& params, const std::string& prefix, int d_in, int d_out, Rng& rng);

/// GraphSAGE mean layer: relu([h_i (+) mean_j(w_ij h_j / sum_j w_ij)] W + b).
/// Nodes whose weighted degree is zero aggregate a zero vector.
ad::VarId sage_mean_layer(ad::Tape& tape, const TapeParams& p, const std::string& prefix,
                          ad::VarId h, ad::VarId w, ad::EdgeListView ev);
void add_sage_layer(ParamSet& params, const std::string& prefix, int d_in, int d_out, Rng& rng);

// ---------------------------------------------------------------------------

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 5e-4;
};

struct OptimizerState {
    AdamWConfig cfg;
    long long step = 0;
    std::map<std::string, std::pair<ad::Tensor, ad::Tensor>> moments;  // (m, v)
};

/// Decoupled weight decay Adam. Gradient names must match the parameter set.
void adamw_step(ParamSet& params, const GradMap& grads, OptimizerState& state);

// ---------------------------------------------------------------------------

struct GradCheckResult {
    double max_rel_err = 0.0;
    int coords_checked = 0;
};

/// Central-difference check of `analytic` against the scalar function `f`.
/// Checks every coordinate when there are at most `max_coords`, otherwise a
/// seeded sample of max_coords (never fewer than 64 when available).
GradCheckResult grad_check(const std::function<double(const ParamSet&)>& f, const ParamSet& at,
                           const GradMap& analytic, double h = 1e-5, int max_coords = 256,
                           std::uint64_t seed = 0);

}  // namespace gps
