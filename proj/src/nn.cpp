#include "gps/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "gps/errors.hpp"

namespace gps {

std::size_t ParamSet::coordinate_count() const {
    std::size_t c = 0;
    for (const auto& [name, t] : tensors) c += t.size();
    return c;
}

std::string ParamSet::to_json() const {
    nlohmann::ordered_json j;
    j["format_version"] = 1;
    j["params"] = nlohmann::ordered_json::array();
    for (const auto& [name, t] : tensors) {
        nlohmann::ordered_json p;
        p["name"] = name;
        p["shape"] = {t.rows(), t.cols()};
        std::vector<double> values(t.data(), t.data() + t.size());
        p["values"] = values;
        j["params"].push_back(std::move(p));
    }
    return j.dump() + "\n";
}

ParamSet ParamSet::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("param set parse error: ") + e.what());
    }
    if (!j.contains("format_version") || j["format_version"].get<int>() != 1)
        throw DataError("param set: unsupported format_version");
    ParamSet out;
    for (const auto& p : j.at("params")) {
        std::string name = p.at("name").get<std::string>();
        auto shape = p.at("shape").get<std::vector<std::size_t>>();
        auto values = p.at("values").get<std::vector<double>>();
        if (shape.size() != 2 || shape[0] * shape[1] != values.size())
            throw DataError("param set: shape/value mismatch for " + name);
        ad::Tensor t(shape[0], shape[1]);
        std::copy(values.begin(), values.end(), t.data());
        if (!out.tensors.emplace(std::move(name), std::move(t)).second)
            throw DataError("param set: duplicate parameter name");
    }
    return out;
}

ad::VarId TapeParams::at(const std::string& name) const {
    auto it = ids.find(name);
    if (it == ids.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
}

TapeParams bind(ad::Tape& tape, const ParamSet& params) {
    TapeParams out;
    for (const auto& [name, t] : params.tensors) out.ids.emplace(name, tape.param(t));
    return out;
}

GradMap collect_grads(const ad::Tape& tape, const TapeParams& bound) {
    GradMap out;
    for (const auto& [name, id] : bound.ids) out.emplace(name, tape.grad(id));
    return out;
}

void add_linear(ParamSet& params, const std::string& prefix, int fan_in, int fan_out, Rng& rng) {
    double a = std::sqrt(6.0 / (fan_in + fan_out));
    ad::Tensor W(fan_in, fan_out);
    for (std::size_t i = 0; i < W.size(); ++i) W[i] = rng.uniform_range(-a, a);
    ad::Tensor b(1, fan_out);
    if (!params.tensors.emplace(prefix + ".W", std::move(W)).second ||
        !params.tensors.emplace(prefix + ".b", std::move(b)).second)
        throw ContractError("duplicate parameter prefix: " + prefix);
}

ad::VarId linear(ad::Tape& tape, const TapeParams& p, const std::string& prefix, ad::VarId x) {
    return tape.add_row_broadcast(tape.matmul(x, p.at(prefix + ".W")), p.at(prefix + ".b"));
}

void add_gin_layer(ParamSet& params, const std::string& prefix, int d_in, int d_out, Rng& rng) {
    add_linear(params, prefix + ".m1", d_in, d_out, rng);
    add_linear(params, prefix + ".m2", d_out, d_out, rng);
}

ad::VarId gin_layer(ad::Tape& tape, const TapeParams& p, const std::string& prefix, ad::VarId h,
                    ad::VarId w, ad::EdgeListView ev, double eps0) {
    ad::VarId agg = tape.weighted_neighbor_sum(h, w, ev);
    ad::VarId combined = eps0 == 0.0 ? tape.add(h, agg)
                                     : tape.add_scaled(agg, h, 1.0 + eps0);
    ad::VarId hidden = tape.relu(linear(tape, p, prefix + ".m1", combined));
    return tape.relu(linear(tape, p, prefix + ".m2", hidden));
}

void add_sage_layer(ParamSet& params, const std::string& prefix, int d_in, int d_out, Rng& rng) {
    add_linear(params, prefix, 2 * d_in, d_out, rng);
}

ad::VarId sage_mean_layer(ad::Tape& tape, const TapeParams& p, const std::string& prefix,
                          ad::VarId h, ad::VarId w, ad::EdgeListView ev) {
    ad::VarId sum = tape.weighted_neighbor_sum(h, w, ev);
    ad::VarId deg = tape.weighted_degree(w, ev);
    ad::VarId mean = tape.div_rows_guarded(sum, deg, 1e-12);
    return tape.relu(linear(tape, p, prefix, tape.concat_cols(h, mean)));
}

void adamw_step(ParamSet& params, const GradMap& grads, OptimizerState& state) {
    if (grads.size() != params.tensors.size())
        throw ContractError("adamw_step: gradient names misaligned with parameters");
    ++state.step;
    const auto& cfg = state.cfg;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (auto& [name, t] : params.tensors) {
        auto git = grads.find(name);
        if (git == grads.end())
            throw ContractError("adamw_step: missing gradient for " + name);
        const ad::Tensor& g = git->second;
        if (!g.same_shape(t)) throw ContractError("adamw_step: gradient shape mismatch for " + name);
        auto [mit, inserted] = state.moments.try_emplace(
            name, std::make_pair(ad::Tensor(t.rows(), t.cols()), ad::Tensor(t.rows(), t.cols())));
        auto& [m, v] = mit->second;
        for (std::size_t i = 0; i < t.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            t[i] -= cfg.lr * (mhat / (std::sqrt(vhat) + cfg.eps) + cfg.weight_decay * t[i]);
            if (!std::isfinite(t[i])) throw NumericError("adamw_step: non-finite parameter " + name);
        }
    }
}

GradCheckResult grad_check(const std::function<double(const ParamSet&)>& f, const ParamSet& at,
                           const GradMap& analytic, double h, int max_coords, std::uint64_t seed) {
    if (h <= 0) throw ContractError("grad_check: h must be positive");
    struct Coord {
        std::string name;
        std::size_t idx;
    };
    std::vector<Coord> coords;
    for (const auto& [name, t] : at.tensors)
        for (std::size_t i = 0; i < t.size(); ++i) coords.push_back({name, i});

    if (static_cast<int>(coords.size()) > max_coords) {
        std::vector<std::size_t> order(coords.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(seed, "grad_check"));
        for (std::size_t i = order.size() - 1; i > 0; --i)
            std::swap(order[i], order[rng.index(i + 1)]);
        std::vector<Coord> sampled;
        sampled.reserve(max_coords);
        for (int i = 0; i < max_coords; ++i) sampled.push_back(coords[order[i]]);
        coords = std::move(sampled);
    }

    GradCheckResult res;
    ParamSet work = at;
    for (const auto& c : coords) {
        ad::Tensor& t = work.tensors.at(c.name);
        double orig = t[c.idx];
        t[c.idx] = orig + h;
        double fp = f(work);
        t[c.idx] = orig - h;
        double fm = f(work);
        t[c.idx] = orig;
        double numeric = (fp - fm) / (2.0 * h);
        double ana = analytic.at(c.name)[c.idx];
        double rel = std::fabs(numeric - ana) /
                     std::max({std::fabs(numeric), std::fabs(ana), 1e-6});
        res.max_rel_err = std::max(res.max_rel_err, rel);
        ++res.coords_checked;
    }
    return res;
}

}  // namespace gps
