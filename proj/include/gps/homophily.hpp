#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gps/graph.hpp"

namespace gps {

// Which labels participate in ratio counting. KnownOnly restricts numerator
// and denominator to nodes with known labels; PseudoAugmented counts every
// node carrying a label, known or pseudo (the attack and publisher fill
// pseudo-labels for unknown nodes before calling).
enum class LabelMode { KnownOnly, PseudoAugmented };

struct HomophilyConfig {
    int theta = 5;  // degree similarity threshold
    LabelMode label_mode = LabelMode::KnownOnly;
};

struct RatioSummary {
    int present = 0;
    double mean = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0;
};

struct HomophilyReport {
    int theta = 0;
    LabelMode label_mode = LabelMode::KnownOnly;
    std::vector<std::optional<double>> prox;   // absent iff denominator empty
    std::vector<std::optional<double>> role;
    std::vector<std::optional<double>> prior;  // absent iff node label not counted
    std::vector<double> class_frequency;       // sums to 1 over known labels
    RatioSummary prox_summary, role_summary;

    std::string to_json() const;
    std::string to_csv() const;
};

/// Fraction of label-counted neighbors sharing the node's label.
std::optional<double> prox_ghratio(const Graph& g, const NodeLabels& labels, int node,
                                   const HomophilyConfig& cfg);

/// Over all j != i with |deg(j)-deg(i)| <= theta and label counted: the
/// fraction sharing the node's label. Degrees are taken in `g` itself.
std::optional<double> role_ghratio(const Graph& g, const NodeLabels& labels, int node,
                                   const HomophilyConfig& cfg);

/// Empirical frequency of the node's class among known labels.
double prior_baseline(const NodeLabels& labels, int node);

/// Per-node report of both ratios plus the prior, with summary statistics.
HomophilyReport audit(const Graph& g, const NodeLabels& labels, const HomophilyConfig& cfg);

/// Copy of `labels` with every unknown node's label replaced by pseudo[i];
/// known flags are preserved (the result is meant for PseudoAugmented mode).
NodeLabels augment_with_pseudo(const NodeLabels& labels, const std::vector<int>& pseudo);

const char* label_mode_name(LabelMode mode);

}  // namespace gps
