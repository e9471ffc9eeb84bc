#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gps {

/// Immutable undirected graph in CSR form with node features.
///
/// Neighbor lists are sorted ascending; `edges` is the canonical undirected
/// edge list (u < v, sorted lexicographically). All per-edge vectors in the
/// project (masks, keep probabilities, relaxed weights) index this list.
class Graph {
public:
    Graph() = default;

    // Builds from raw (possibly duplicated / self-looped / unordered) pairs.
    // Self-loops are dropped, duplicates collapsed, adjacency symmetrized.
    static Graph build(int node_count, std::vector<std::array<int, 2>> raw_edges);

    int node_count() const { return n_; }
    int edge_count() const { return static_cast<int>(edges_.size()); }

    std::span<const int> neighbors(int u) const {
        return {col_idx_.data() + row_ptr_[u], col_idx_.data() + row_ptr_[u + 1]};
    }
    int degree(int u) const { return row_ptr_[u + 1] - row_ptr_[u]; }
    bool has_edge(int u, int v) const;
    const std::vector<std::array<int, 2>>& edges() const { return edges_; }
    // Canonical edge index of (u,v), or -1.
    int edge_index(int u, int v) const;

    // Per-node feature matrix, row-major n x feature_dim.
    const std::vector<double>& features() const { return features_; }
    int feature_dim() const { return feature_dim_; }
    double feature(int u, int d) const { return features_[static_cast<std::size_t>(u) * feature_dim_ + d]; }
    void set_features(std::vector<double> values, int dim);

    std::vector<int> degrees() const;

private:
    int n_ = 0;
    std::vector<int> row_ptr_;   // n+1
    std::vector<int> col_idx_;   // 2m, sorted within each row
    std::vector<std::array<int, 2>> edges_;  // canonical, u < v
    std::vector<double> features_;           // defaults to all-ones, dim 1
    int feature_dim_ = 1;
};

/// Partially observed private (or utility) labels.
struct NodeLabels {
    std::vector<int> label;          // -1 when absent
    std::vector<std::uint8_t> known; // known[i] != 0 implies label[i] >= 0
    int class_count = 0;

    bool is_known(int u) const { return known[u] != 0; }
    int known_count() const;
    void validate(int node_count) const;  // throws ContractError on inconsistency
};

/// Induced k-hop ego network. Local node ids index `local_nodes`, which is
/// sorted by original id; `parent_edge_index` maps each local edge back to
/// the parent's canonical edge list.
struct Subgraph {
    int center_global = 0;
    int center_local = 0;
    int hop_count = 0;
    std::vector<int> local_nodes;                    // sorted original ids
    std::vector<std::array<int, 2>> local_edges;     // canonical over local ids
    std::vector<int> parent_edge_index;              // aligned to local_edges

    int node_count() const { return static_cast<int>(local_nodes.size()); }
};

struct LoadedDataset {
    Graph graph;
    std::optional<NodeLabels> labels;
};

/// Reads an edge-list file ("u v" per line, '#' comments, LF or CRLF) plus
/// optional features/labels CSVs (see file format docs in README). Without a
/// feature file every node gets the all-ones vector of dimension 1.
LoadedDataset load_graph(const std::string& edge_path,
                         const std::string& feature_path = "",
                         const std::string& label_path = "");

/// Labels CSV reader ("node,label,known"); usable for utility labels too.
NodeLabels load_labels(const std::string& label_path, int node_count);

void write_edge_list(const Graph& g, const std::string& path);
void write_features_csv(const Graph& g, const std::string& path);
void write_labels_csv(const NodeLabels& labels, const std::string& path);

/// BFS-induced k-hop ego network around `node` (center included).
Subgraph ego_network(const Graph& g, int node, int k);

/// L = I - D^{-1/2} A D^{-1/2}; rows/cols of degree-0 nodes are all-zero.
Eigen::MatrixXd normalized_laplacian(const Subgraph& sub);

/// 2*t / (d*(d-1)); zero when degree < 2.
double clustering_coefficient(const Graph& g, int node);

enum class MotifKind { Triangle, FourCycle, ChordalFourCycle, FourClique };
constexpr std::array<MotifKind, 4> kMotifCatalog{MotifKind::Triangle, MotifKind::FourCycle,
                                                 MotifKind::ChordalFourCycle, MotifKind::FourClique};
const char* motif_name(MotifKind kind);

/// One motif instance = the canonical edge indices of its edges.
/// Semantics (subgraph, not induced, instances):
///   triangle          3 mutually adjacent nodes; 3 edges
///   4-cycle           a cycle a-b-c-d, chords ignored; the 4 cycle edges
///   chordal 4-cycle   a 4-cycle with at least one chord present; cycle
///                     edges plus every present chord
///   4-clique          4 mutually adjacent nodes; 6 edges
struct MotifInstances {
    std::array<std::vector<std::vector<int>>, 4> by_kind;  // indexed by MotifKind

    const std::vector<std::vector<int>>& of(MotifKind k) const {
        return by_kind[static_cast<int>(k)];
    }
};

/// Exact enumeration; refuses (ResourceError) when n * avg_degree^3 exceeds
/// `budget`.
MotifInstances enumerate_motifs(const Graph& g, double budget = 1e8);

/// New graph keeping exactly the edges with keep[i] true; nodes and features
/// unchanged. Mask is aligned to the canonical edge list.
Graph apply_edge_mask(const Graph& g, const std::vector<std::uint8_t>& keep);

}  // namespace gps
