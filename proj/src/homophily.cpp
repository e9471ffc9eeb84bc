#include "gps/homophily.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "gps/errors.hpp"

namespace gps {

namespace {

bool counted(const NodeLabels& labels, int node, LabelMode mode) {
    if (mode == LabelMode::KnownOnly) return labels.is_known(node);
    return labels.label[node] >= 0;
}

int own_label(const NodeLabels& labels, int node, LabelMode mode) {
    if (!counted(labels, node, mode))
        throw ContractError("node " + std::to_string(node) + " has no counted label in this mode");
    return labels.label[node];
}

RatioSummary summarize(const std::vector<std::optional<double>>& values) {
    std::vector<double> present;
    for (const auto& v : values)
        if (v) present.push_back(*v);
    RatioSummary s;
    s.present = static_cast<int>(present.size());
    if (present.empty()) return s;
    std::sort(present.begin(), present.end());
    double sum = 0.0;
    for (double v : present) sum += v;
    s.mean = sum / present.size();
    auto quantile = [&](double p) {  // linear interpolation between order stats
        double h = p * (present.size() - 1);
        std::size_t lo = static_cast<std::size_t>(h);
        if (lo + 1 >= present.size()) return present.back();
        return present[lo] + (h - lo) * (present[lo + 1] - present[lo]);
    };
    s.q1 = quantile(0.25);
    s.median = quantile(0.5);
    s.q3 = quantile(0.75);
    return s;
}

}  // namespace

std::optional<double> prox_ghratio(const Graph& g, const NodeLabels& labels, int node,
                                   const HomophilyConfig& cfg) {
    int z = own_label(labels, node, cfg.label_mode);
    long long same = 0, total = 0;
    for (int j : g.neighbors(node)) {
        if (!counted(labels, j, cfg.label_mode)) continue;
        ++total;
        if (labels.label[j] == z) ++same;
    }
    if (total == 0) return std::nullopt;
    return static_cast<double>(same) / static_cast<double>(total);
}

std::optional<double> role_ghratio(const Graph& g, const NodeLabels& labels, int node,
                                   const HomophilyConfig& cfg) {
    int z = own_label(labels, node, cfg.label_mode);
    int di = g.degree(node);
    long long same = 0, total = 0;
    for (int j = 0; j < g.node_count(); ++j) {
        if (j == node || !counted(labels, j, cfg.label_mode)) continue;
        if (std::abs(g.degree(j) - di) > cfg.theta) continue;
        ++total;
        if (labels.label[j] == z) ++same;
    }
    if (total == 0) return std::nullopt;
    return static_cast<double>(same) / static_cast<double>(total);
}

double prior_baseline(const NodeLabels& labels, int node) {
    if (labels.label[node] < 0) throw ContractError("prior_baseline: node has no label");
    long long same = 0, total = 0;
    for (std::size_t j = 0; j < labels.label.size(); ++j) {
        if (!labels.known[j]) continue;
        ++total;
        if (labels.label[j] == labels.label[node]) ++same;
    }
    if (total == 0) throw ContractError("prior_baseline: no known labels");
    return static_cast<double>(same) / static_cast<double>(total);
}

HomophilyReport audit(const Graph& g, const NodeLabels& labels, const HomophilyConfig& cfg) {
    labels.validate(g.node_count());
    int n = g.node_count();
    HomophilyReport rep;
    rep.theta = cfg.theta;
    rep.label_mode = cfg.label_mode;
    rep.prox.assign(n, std::nullopt);
    rep.role.assign(n, std::nullopt);
    rep.prior.assign(n, std::nullopt);

    // degree-bucketed per-class counts make role ratios O(n + maxdeg*C)
    int maxdeg = 0;
    for (int i = 0; i < n; ++i) maxdeg = std::max(maxdeg, g.degree(i));
    int c_count = std::max(labels.class_count, 1);
    std::vector<long long> by_deg_class(static_cast<std::size_t>(maxdeg + 1) * c_count, 0);
    std::vector<long long> by_deg(maxdeg + 1, 0);
    for (int i = 0; i < n; ++i) {
        if (!counted(labels, i, cfg.label_mode)) continue;
        ++by_deg[g.degree(i)];
        ++by_deg_class[static_cast<std::size_t>(g.degree(i)) * c_count + labels.label[i]];
    }
    // prefix sums over degree
    std::vector<long long> pre_deg(maxdeg + 2, 0);
    std::vector<long long> pre_deg_class(static_cast<std::size_t>(maxdeg + 2) * c_count, 0);
    for (int d = 0; d <= maxdeg; ++d) {
        pre_deg[d + 1] = pre_deg[d] + by_deg[d];
        for (int c = 0; c < c_count; ++c)
            pre_deg_class[static_cast<std::size_t>(d + 1) * c_count + c] =
                pre_deg_class[static_cast<std::size_t>(d) * c_count + c] +
                by_deg_class[static_cast<std::size_t>(d) * c_count + c];
    }

    long long known_total = 0;
    std::vector<long long> known_per_class(c_count, 0);
    for (int i = 0; i < n; ++i) {
        if (!labels.known[i]) continue;
        ++known_total;
        ++known_per_class[labels.label[i]];
    }
    rep.class_frequency.assign(c_count, 0.0);
    if (known_total > 0)
        for (int c = 0; c < c_count; ++c)
            rep.class_frequency[c] = static_cast<double>(known_per_class[c]) / known_total;

    for (int i = 0; i < n; ++i) {
        if (!counted(labels, i, cfg.label_mode)) continue;
        int z = labels.label[i];
        rep.prox[i] = prox_ghratio(g, labels, i, cfg);
        int lo = std::max(0, g.degree(i) - cfg.theta);
        int hi = std::min(maxdeg, g.degree(i) + cfg.theta);
        long long total = 0, same = 0;
        if (lo <= hi) {
            total = pre_deg[hi + 1] - pre_deg[lo];
            same = pre_deg_class[static_cast<std::size_t>(hi + 1) * c_count + z] -
                   pre_deg_class[static_cast<std::size_t>(lo) * c_count + z];
        }
        --total;  // exclude self (always within its own window)
        --same;
        if (total > 0) rep.role[i] = static_cast<double>(same) / static_cast<double>(total);
        if (known_total > 0) rep.prior[i] = rep.class_frequency[z];
    }
    rep.prox_summary = summarize(rep.prox);
    rep.role_summary = summarize(rep.role);
    return rep;
}

NodeLabels augment_with_pseudo(const NodeLabels& labels, const std::vector<int>& pseudo) {
    if (pseudo.size() != labels.label.size())
        throw ContractError("augment_with_pseudo: size mismatch");
    NodeLabels out = labels;
    for (std::size_t i = 0; i < out.label.size(); ++i) {
        if (!out.known[i]) {
            out.label[i] = pseudo[i];
            out.class_count = std::max(out.class_count, pseudo[i] + 1);
        }
    }
    return out;
}

const char* label_mode_name(LabelMode mode) {
    return mode == LabelMode::KnownOnly ? "known-only" : "pseudo-augmented";
}

std::string HomophilyReport::to_json() const {
    nlohmann::ordered_json j;
    j["theta"] = theta;
    j["label_mode"] = label_mode_name(label_mode);
    j["nodes"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < prox.size(); ++i) {
        nlohmann::ordered_json node;
        node["id"] = i;
        node["prox"] = prox[i] ? nlohmann::ordered_json(*prox[i]) : nlohmann::ordered_json(nullptr);
        node["role"] = role[i] ? nlohmann::ordered_json(*role[i]) : nlohmann::ordered_json(nullptr);
        node["prior"] = prior[i] ? nlohmann::ordered_json(*prior[i]) : nlohmann::ordered_json(nullptr);
        j["nodes"].push_back(std::move(node));
    }
    auto summary = [](const RatioSummary& s) {
        nlohmann::ordered_json o;
        o["present"] = s.present;
        if (s.present > 0) {
            o["mean"] = s.mean;
            o["q1"] = s.q1;
            o["median"] = s.median;
            o["q3"] = s.q3;
        }
        return o;
    };
    j["summary"]["prox"] = summary(prox_summary);
    j["summary"]["role"] = summary(role_summary);
    j["summary"]["class_frequency"] = class_frequency;
    return j.dump(2) + "\n";
}

std::string HomophilyReport::to_csv() const {
    std::ostringstream out;
    out << "node,prox,role,prior\n";
    auto cell = [&](const std::optional<double>& v) {
        if (v) out << *v;
    };
    for (std::size_t i = 0; i < prox.size(); ++i) {
        out << i << ',';
        cell(prox[i]);
        out << ',';
        cell(role[i]);
        out << ',';
        cell(prior[i]);
        out << '\n';
    }
    return out.str();
}

}  // namespace gps
