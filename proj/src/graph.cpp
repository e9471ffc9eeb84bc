#include "gps/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "gps/errors.hpp"

namespace gps {

Graph Graph::build(int node_count, std::vector<std::array<int, 2>> raw_edges) {
    if (node_count < 0) throw ContractError("node_count must be non-negative");
    std::vector<std::array<int, 2>> canon;
    canon.reserve(raw_edges.size());
    for (auto [u, v] : raw_edges) {
        if (u < 0 || v < 0 || u >= node_count || v >= node_count)
            throw DataError("edge endpoint out of range: (" + std::to_string(u) + "," +
                            std::to_string(v) + ") with node_count " + std::to_string(node_count));
        if (u == v) continue;  // self-loops dropped
        if (u > v) std::swap(u, v);
        canon.push_back({u, v});
    }
    std::sort(canon.begin(), canon.end());
    canon.erase(std::unique(canon.begin(), canon.end()), canon.end());

    Graph g;
    g.n_ = node_count;
    g.edges_ = std::move(canon);
    g.row_ptr_.assign(node_count + 1, 0);
    for (auto [u, v] : g.edges_) {
        ++g.row_ptr_[u + 1];
        ++g.row_ptr_[v + 1];
    }
    for (int i = 0; i < node_count; ++i) g.row_ptr_[i + 1] += g.row_ptr_[i];
    g.col_idx_.resize(g.row_ptr_[node_count]);
    std::vector<int> cursor(g.row_ptr_.begin(), g.row_ptr_.end() - 1);
    for (auto [u, v] : g.edges_) {  // edges sorted, so rows come out sorted
        g.col_idx_[cursor[u]++] = v;
        g.col_idx_[cursor[v]++] = u;
    }
    for (int i = 0; i < node_count; ++i)
        std::sort(g.col_idx_.begin() + g.row_ptr_[i], g.col_idx_.begin() + g.row_ptr_[i + 1]);
    g.features_.assign(static_cast<std::size_t>(node_count), 1.0);
    g.feature_dim_ = 1;
    return g;
}

bool Graph::has_edge(int u, int v) const {
    auto nb = neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
}

int Graph::edge_index(int u, int v) const {
    if (u > v) std::swap(u, v);
    auto it = std::lower_bound(edges_.begin(), edges_.end(), std::array<int, 2>{u, v});
    if (it == edges_.end() || (*it)[0] != u || (*it)[1] != v) return -1;
    return static_cast<int>(it - edges_.begin());
}

void Graph::set_features(std::vector<double> values, int dim) {
    if (dim <= 0 || values.size() != static_cast<std::size_t>(n_) * dim)
        throw ContractError("feature matrix shape mismatch");
    features_ = std::move(values);
    feature_dim_ = dim;
}

std::vector<int> Graph::degrees() const {
    std::vector<int> d(n_);
    for (int i = 0; i < n_; ++i) d[i] = degree(i);
    return d;
}

int NodeLabels::known_count() const {
    int c = 0;
    for (auto k : known) c += (k != 0);
    return c;
}

void NodeLabels::validate(int node_count) const {
    if (static_cast<int>(label.size()) != node_count || static_cast<int>(known.size()) != node_count)
        throw ContractError("labels sized differently from graph");
    for (int i = 0; i < node_count; ++i) {
        if (known[i] && label[i] < 0) throw ContractError("known node without a label");
        if (label[i] >= class_count) throw ContractError("label id exceeds class_count");
    }
}

// ---------------------------------------------------------------------------
// File ingestion

namespace {

int parse_int(std::string_view tok, int line_no, const std::string& path) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw DataError(path + ":" + std::to_string(line_no) + ": expected integer, got '" +
                        std::string(tok) + "'");
    return value;
}

double parse_double(std::string_view tok, int line_no, const std::string& path) {
    try {
        std::size_t pos = 0;
        double v = std::stod(std::string(tok), &pos);
        if (pos != tok.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(line_no) + ": expected number, got '" +
                        std::string(tok) + "'");
    }
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

}  // namespace

LoadedDataset load_graph(const std::string& edge_path, const std::string& feature_path,
                         const std::string& label_path) {
    std::ifstream in(edge_path);
    if (!in) throw DataError("cannot open edge list: " + edge_path);

    std::vector<std::array<int, 2>> raw;
    int max_id = -1;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        std::size_t first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        std::string a, b, extra;
        if (!(ss >> a >> b) || (ss >> extra))
            throw DataError(edge_path + ":" + std::to_string(line_no) +
                            ": expected 'u v', got '" + line + "'");
        int u = parse_int(a, line_no, edge_path);
        int v = parse_int(b, line_no, edge_path);
        if (u < 0 || v < 0)
            throw DataError(edge_path + ":" + std::to_string(line_no) + ": negative node id");
        max_id = std::max({max_id, u, v});
        raw.push_back({u, v});
    }
    int n = max_id + 1;
    LoadedDataset ds;
    ds.graph = Graph::build(n, std::move(raw));

    if (!feature_path.empty()) {
        std::ifstream fin(feature_path);
        if (!fin) throw DataError("cannot open features: " + feature_path);
        int fline = 0;
        if (!std::getline(fin, line)) throw DataError(feature_path + ": empty file");
        ++fline;
        line = strip_cr(line);
        auto header = split_csv(line);
        if (header.size() < 2 || header[0] != "node")
            throw DataError(feature_path + ":1: header must be 'node,f0,...'");
        int dim = static_cast<int>(header.size()) - 1;
        std::vector<double> feats(static_cast<std::size_t>(n) * dim, 0.0);  // missing nodes: zeros
        while (std::getline(fin, line)) {
            ++fline;
            line = strip_cr(line);
            if (line.empty()) continue;
            auto f = split_csv(line);
            if (static_cast<int>(f.size()) != dim + 1)
                throw DataError(feature_path + ":" + std::to_string(fline) + ": expected " +
                                std::to_string(dim + 1) + " fields");
            int node = parse_int(f[0], fline, feature_path);
            if (node < 0 || node >= n)
                throw DataError(feature_path + ":" + std::to_string(fline) + ": node id " +
                                std::to_string(node) + " out of range [0," + std::to_string(n) + ")");
            for (int d = 0; d < dim; ++d)
                feats[static_cast<std::size_t>(node) * dim + d] = parse_double(f[d + 1], fline, feature_path);
        }
        ds.graph.set_features(std::move(feats), dim);
    }

    if (!label_path.empty()) ds.labels = load_labels(label_path, n);
    return ds;
}

NodeLabels load_labels(const std::string& label_path, int node_count) {
    std::ifstream in(label_path);
    if (!in) throw DataError("cannot open labels: " + label_path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(label_path + ": empty file");
    line = strip_cr(line);
    if (split_csv(line) != std::vector<std::string_view>{"node", "label", "known"})
        throw DataError(label_path + ":1: header must be 'node,label,known'");

    NodeLabels labels;
    labels.label.assign(node_count, -1);
    labels.known.assign(node_count, 0);
    int line_no = 1;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto f = split_csv(line);
        if (f.size() != 3)
            throw DataError(label_path + ":" + std::to_string(line_no) + ": expected 3 fields");
        int node = parse_int(f[0], line_no, label_path);
        if (node < 0 || node >= node_count)
            throw DataError(label_path + ":" + std::to_string(line_no) + ": node id " +
                            std::to_string(node) + " out of range [0," + std::to_string(node_count) + ")");
        int lab = parse_int(f[1], line_no, label_path);
        int known = parse_int(f[2], line_no, label_path);
        if (lab < 0) throw DataError(label_path + ":" + std::to_string(line_no) + ": negative label");
        if (known != 0 && known != 1)
            throw DataError(label_path + ":" + std::to_string(line_no) + ": known must be 0 or 1");
        labels.label[node] = lab;
        labels.known[node] = static_cast<std::uint8_t>(known);
        max_label = std::max(max_label, lab);
    }
    labels.class_count = max_label + 1;
    return labels;
}

void write_edge_list(const Graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write: " + path);
    for (auto [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

void write_features_csv(const Graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write: " + path);
    out << "node";
    for (int d = 0; d < g.feature_dim(); ++d) out << ",f" << d;
    out << '\n';
    char buf[32];
    for (int i = 0; i < g.node_count(); ++i) {
        out << i;
        for (int d = 0; d < g.feature_dim(); ++d) {
            std::snprintf(buf, sizeof buf, "%.17g", g.feature(i, d));
            out << ',' << buf;
        }
        out << '\n';
    }
}

void write_labels_csv(const NodeLabels& labels, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write: " + path);
    out << "node,label,known\n";
    for (std::size_t i = 0; i < labels.label.size(); ++i) {
        if (labels.label[i] < 0) continue;
        out << i << ',' << labels.label[i] << ',' << int(labels.known[i]) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Structure operations

Subgraph ego_network(const Graph& g, int node, int k) {
    if (node < 0 || node >= g.node_count()) throw ContractError("ego_network: node out of range");
    if (k < 1) throw ContractError("ego_network: k must be >= 1");

    std::vector<int> dist(g.node_count(), -1);
    std::queue<int> q;
    dist[node] = 0;
    q.push(node);
    std::vector<int> members{node};
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        if (dist[u] == k) continue;
        for (int v : g.neighbors(u)) {
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                members.push_back(v);
                q.push(v);
            }
        }
    }
    std::sort(members.begin(), members.end());

    Subgraph sub;
    sub.center_global = node;
    sub.hop_count = k;
    sub.local_nodes = std::move(members);
    sub.center_local = static_cast<int>(
        std::lower_bound(sub.local_nodes.begin(), sub.local_nodes.end(), node) - sub.local_nodes.begin());

    // induced edges: all parent edges with both endpoints inside
    std::vector<int> local_of(g.node_count(), -1);
    for (int li = 0; li < sub.node_count(); ++li) local_of[sub.local_nodes[li]] = li;
    for (int li = 0; li < sub.node_count(); ++li) {
        int u = sub.local_nodes[li];
        for (int v : g.neighbors(u)) {
            if (v <= u) continue;  // canonical direction only
            int lv = local_of[v];
            if (lv < 0) continue;
            sub.local_edges.push_back({li, lv});
            sub.parent_edge_index.push_back(g.edge_index(u, v));
        }
    }
    return sub;
}

Eigen::MatrixXd normalized_laplacian(const Subgraph& sub) {
    int n = sub.node_count();
    std::vector<int> deg(n, 0);
    for (auto [a, b] : sub.local_edges) {
        ++deg[a];
        ++deg[b];
    }
    Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        if (deg[i] > 0) lap(i, i) = 1.0;
    for (auto [a, b] : sub.local_edges) {
        double w = -1.0 / std::sqrt(static_cast<double>(deg[a]) * deg[b]);
        lap(a, b) = w;
        lap(b, a) = w;
    }
    return lap;
}

double clustering_coefficient(const Graph& g, int node) {
    if (node < 0 || node >= g.node_count()) throw ContractError("clustering_coefficient: node out of range");
    int d = g.degree(node);
    if (d < 2) return 0.0;
    auto nb = g.neighbors(node);
    long long tri = 0;
    for (std::size_t i = 0; i < nb.size(); ++i)
        for (std::size_t j = i + 1; j < nb.size(); ++j)
            if (g.has_edge(nb[i], nb[j])) ++tri;
    return 2.0 * static_cast<double>(tri) / (static_cast<double>(d) * (d - 1));
}

const char* motif_name(MotifKind kind) {
    switch (kind) {
        case MotifKind::Triangle: return "triangle";
        case MotifKind::FourCycle: return "4-cycle";
        case MotifKind::ChordalFourCycle: return "chordal-4-cycle";
        case MotifKind::FourClique: return "4-clique";
    }
    return "?";
}

MotifInstances enumerate_motifs(const Graph& g, double budget) {
    int n = g.node_count();
    double avg_deg = n > 0 ? 2.0 * g.edge_count() / n : 0.0;
    double cost = n * avg_deg * avg_deg * avg_deg;
    if (cost > budget)
        throw ResourceError("motif enumeration budget exceeded: n*d^3 = " + std::to_string(cost) +
                            " > " + std::to_string(budget));

    MotifInstances out;
    auto& tris = out.by_kind[static_cast<int>(MotifKind::Triangle)];
    auto& cycles = out.by_kind[static_cast<int>(MotifKind::FourCycle)];
    auto& chordal = out.by_kind[static_cast<int>(MotifKind::ChordalFourCycle)];
    auto& cliques = out.by_kind[static_cast<int>(MotifKind::FourClique)];

    // triangles: per canonical edge (u,v), common neighbors w > v
    for (int e = 0; e < g.edge_count(); ++e) {
        auto [u, v] = g.edges()[e];
        for (int w : g.neighbors(u)) {
            if (w <= v) continue;
            if (!g.has_edge(v, w)) continue;
            tris.push_back({e, g.edge_index(u, w), g.edge_index(v, w)});
        }
    }

    // 4-cliques: extend each triangle u<v<w with x>w adjacent to all three
    for (const auto& t : tris) {
        int u = g.edges()[t[0]][0], v = g.edges()[t[0]][1];
        int w = g.edges()[t[2]][1];  // (v,w) with w>v
        for (int x : g.neighbors(w)) {
            if (x <= w) continue;
            if (g.has_edge(u, x) && g.has_edge(v, x)) {
                std::vector<int> inst{t[0], t[1], t[2], g.edge_index(u, x), g.edge_index(v, x),
                                      g.edge_index(w, x)};
                std::sort(inst.begin(), inst.end());
                cliques.push_back(std::move(inst));
            }
        }
    }

    // 4-cycles: a cycle u-x-w-y is identified by its diagonal pairs {u,w},{x,y}.
    // Enumerate per diagonal pair (u<w) over pairs of common neighbors; emit
    // once by requiring u < min(x,y). Chordal instances add present diagonals.
    for (int u = 0; u < n; ++u) {
        for (int w = u + 1; w < n; ++w) {
            auto nu = g.neighbors(u);
            auto nw = g.neighbors(w);
            std::vector<int> common;
            std::set_intersection(nu.begin(), nu.end(), nw.begin(), nw.end(),
                                  std::back_inserter(common));
            if (common.size() < 2) continue;
            for (std::size_t a = 0; a < common.size(); ++a) {
                if (common[a] < u) continue;  // u must be the smallest diagonal endpoint seen twice
                for (std::size_t b = a + 1; b < common.size(); ++b) {
                    int x = common[a], y = common[b];
                    if (u > x) continue;
                    std::vector<int> cyc{g.edge_index(u, x), g.edge_index(x, w),
                                         g.edge_index(w, y), g.edge_index(y, u)};
                    std::sort(cyc.begin(), cyc.end());
                    cycles.push_back(cyc);
                    std::vector<int> chords;
                    if (g.has_edge(u, w)) chords.push_back(g.edge_index(u, w));
                    if (g.has_edge(x, y)) chords.push_back(g.edge_index(x, y));
                    if (!chords.empty()) {
                        auto inst = cyc;
                        inst.insert(inst.end(), chords.begin(), chords.end());
                        std::sort(inst.begin(), inst.end());
                        chordal.push_back(inst);
                    }
                }
            }
        }
    }
    for (auto& v : out.by_kind) std::sort(v.begin(), v.end());
    return out;
}

Graph apply_edge_mask(const Graph& g, const std::vector<std::uint8_t>& keep) {
    if (keep.size() != static_cast<std::size_t>(g.edge_count()))
        throw ContractError("apply_edge_mask: mask length " + std::to_string(keep.size()) +
                            " != edge count " + std::to_string(g.edge_count()));
    std::vector<std::array<int, 2>> kept;
    for (int e = 0; e < g.edge_count(); ++e)
        if (keep[e]) kept.push_back(g.edges()[e]);
    Graph out = Graph::build(g.node_count(), std::move(kept));
    out.set_features(g.features(), g.feature_dim());
    return out;
}

}  // namespace gps
