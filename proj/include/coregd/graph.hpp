#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "coregd/error.hpp"

namespace coregd {

using NodeId = std::int32_t;
using Edge = std::pair<NodeId, NodeId>;

/**
 * Undirected graph in compressed adjacency form.
 *
 * Neighbor lists are sorted ascending, symmetric, free of self-loops and
 * duplicates. Edge weights are only present on coarsened graphs; when present
 * they are stored alongside the adjacency and are strictly positive.
 */
class Graph {
public:
    Graph() = default;

    [[nodiscard]] NodeId num_nodes() const { return static_cast<NodeId>(offsets_.empty() ? 0 : offsets_.size() - 1); }
    [[nodiscard]] std::size_t num_edges() const { return adjacency_.size() / 2; }
    [[nodiscard]] bool has_weights() const { return !weights_.empty(); }

    [[nodiscard]] std::span<const NodeId> neighbors(NodeId v) const {
        return {adjacency_.data() + offsets_[v], adjacency_.data() + offsets_[v + 1]};
    }
    /// Weights aligned with neighbors(v); unit weights when the graph is unweighted.
    [[nodiscard]] double weight(NodeId v, std::size_t slot) const {
        return weights_.empty() ? 1.0 : weights_[offsets_[v] + slot];
    }
    [[nodiscard]] std::size_t degree(NodeId v) const { return offsets_[v + 1] - offsets_[v]; }

    /// Undirected edge list with u < v, sorted lexicographically.
    [[nodiscard]] std::vector<Edge> edges() const {
        std::vector<Edge> out;
        out.reserve(num_edges());
        for (NodeId u = 0; u < num_nodes(); ++u)
            for (NodeId v : neighbors(u))
                if (u < v) out.emplace_back(u, v);
        return out;
    }

    /// Weighted undirected edges (u < v, weight), sorted by (u, v).
    [[nodiscard]] std::vector<std::tuple<NodeId, NodeId, double>> weighted_edges() const {
        std::vector<std::tuple<NodeId, NodeId, double>> out;
        out.reserve(num_edges());
        for (NodeId u = 0; u < num_nodes(); ++u) {
            auto nb = neighbors(u);
            for (std::size_t i = 0; i < nb.size(); ++i)
                if (u < nb[i]) out.emplace_back(u, nb[i], weight(u, i));
        }
        return out;
    }

    /// Both directions of every undirected edge as (source, target) arrays.
    [[nodiscard]] std::pair<std::vector<NodeId>, std::vector<NodeId>> directed_edges() const {
        std::vector<NodeId> src, dst;
        src.reserve(adjacency_.size());
        dst.reserve(adjacency_.size());
        for (NodeId v = 0; v < num_nodes(); ++v)
            for (NodeId w : neighbors(v)) {
                src.push_back(w);
                dst.push_back(v);
            }
        return {std::move(src), std::move(dst)};
    }

    friend Graph build_graph(NodeId n, std::span<const Edge> edges);
    friend Graph build_weighted_graph(NodeId n, std::span<const std::tuple<NodeId, NodeId, double>> edges);

private:
    std::vector<std::size_t> offsets_;
    std::vector<NodeId> adjacency_;
    std::vector<double> weights_;
};

namespace detail {

inline void check_node(NodeId n, NodeId u) {
    if (u < 0 || u >= n)
        throw InputError("node index " + std::to_string(u) + " out of range [0, " + std::to_string(n) + ")");
}

} // namespace detail

/// Builds an unweighted graph: self-loops dropped, duplicates merged, symmetrized.
inline Graph build_graph(NodeId n, std::span<const Edge> edges) {
    if (n < 1) throw InputError("graph needs at least one node");
    std::vector<Edge> arcs;
    arcs.reserve(edges.size() * 2);
    for (auto [u, v] : edges) {
        detail::check_node(n, u);
        detail::check_node(n, v);
        if (u == v) continue;
        arcs.emplace_back(u, v);
        arcs.emplace_back(v, u);
    }
    std::sort(arcs.begin(), arcs.end());
    arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());

    Graph g;
    g.offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (auto [u, v] : arcs) ++g.offsets_[u + 1];
    std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
    g.adjacency_.reserve(arcs.size());
    for (auto [u, v] : arcs) g.adjacency_.push_back(v);
    return g;
}

inline Graph build_graph(NodeId n, const std::vector<Edge>& edges) {
    return build_graph(n, std::span<const Edge>(edges));
}

/// Builds a weighted graph; parallel edges are merged by summing their weights.
inline Graph build_weighted_graph(NodeId n, std::span<const std::tuple<NodeId, NodeId, double>> edges) {
    if (n < 1) throw InputError("graph needs at least one node");
    std::vector<std::tuple<NodeId, NodeId, double>> arcs;
    arcs.reserve(edges.size() * 2);
    for (auto [u, v, w] : edges) {
        detail::check_node(n, u);
        detail::check_node(n, v);
        if (!(w > 0.0)) throw InputError("edge weights must be positive");
        if (u == v) continue;
        arcs.emplace_back(u, v, w);
        arcs.emplace_back(v, u, w);
    }
    std::sort(arcs.begin(), arcs.end(), [](const auto& a, const auto& b) {
        return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });

    Graph g;
    g.offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::size_t i = 0; i < arcs.size();) {
        auto [u, v, w] = arcs[i];
        double total = 0.0;
        std::size_t j = i;
        for (; j < arcs.size() && std::get<0>(arcs[j]) == u && std::get<1>(arcs[j]) == v; ++j)
            total += std::get<2>(arcs[j]);
        ++g.offsets_[u + 1];
        g.adjacency_.push_back(v);
        g.weights_.push_back(total);
        i = j;
    }
    std::partial_sum(g.offsets_.begin(), g.offsets_.end(), g.offsets_.begin());
    return g;
}

inline Graph build_weighted_graph(NodeId n, const std::vector<std::tuple<NodeId, NodeId, double>>& edges) {
    return build_weighted_graph(n, std::span<const std::tuple<NodeId, NodeId, double>>(edges));
}

inline constexpr std::int32_t kUnreachable = -1;

namespace detail {

inline std::vector<std::int32_t> bfs_unchecked(const Graph& g, NodeId source) {
    std::vector<std::int32_t> dist(static_cast<std::size_t>(g.num_nodes()), kUnreachable);
    std::vector<NodeId> queue;
    queue.reserve(dist.size());
    dist[source] = 0;
    queue.push_back(source);
    for (std::size_t head = 0; head < queue.size(); ++head) {
        NodeId u = queue[head];
        for (NodeId v : g.neighbors(u)) {
            if (dist[v] == kUnreachable) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

} // namespace detail

inline bool is_connected(const Graph& g) {
    if (g.num_nodes() == 0) return false;
    auto dist = detail::bfs_unchecked(g, 0);
    return std::none_of(dist.begin(), dist.end(), [](auto d) { return d == kUnreachable; });
}

/// Hop distances from `source`; throws if any node is unreachable.
inline std::vector<std::int32_t> bfs_distances(const Graph& g, NodeId source) {
    detail::check_node(g.num_nodes(), source);
    auto dist = detail::bfs_unchecked(g, source);
    for (auto d : dist)
        if (d == kUnreachable) throw DisconnectedGraphError("graph is not connected");
    return dist;
}

/// Component label per node, labels numbered in order of smallest member.
inline std::vector<NodeId> connected_components(const Graph& g, NodeId* count = nullptr) {
    std::vector<NodeId> label(static_cast<std::size_t>(g.num_nodes()), -1);
    NodeId next = 0;
    std::vector<NodeId> stack;
    for (NodeId s = 0; s < g.num_nodes(); ++s) {
        if (label[s] != -1) continue;
        label[s] = next;
        stack.push_back(s);
        while (!stack.empty()) {
            NodeId u = stack.back();
            stack.pop_back();
            for (NodeId v : g.neighbors(u))
                if (label[v] == -1) {
                    label[v] = next;
                    stack.push_back(v);
                }
        }
        ++next;
    }
    if (count) *count = next;
    return label;
}

/// Dense symmetric matrix of hop counts.
class DistanceMatrix {
public:
    static constexpr NodeId kMaxNodes = 20000;

    DistanceMatrix() = default;
    explicit DistanceMatrix(NodeId n) : n_(n), data_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0) {}

    [[nodiscard]] NodeId size() const { return n_; }
    [[nodiscard]] std::int32_t operator()(NodeId u, NodeId v) const { return data_[index(u, v)]; }
    std::int32_t& operator()(NodeId u, NodeId v) { return data_[index(u, v)]; }
    [[nodiscard]] std::span<const std::int32_t> row(NodeId u) const {
        return {data_.data() + index(u, 0), static_cast<std::size_t>(n_)};
    }
    [[nodiscard]] std::int32_t max() const {
        return data_.empty() ? 0 : *std::max_element(data_.begin(), data_.end());
    }

    bool operator==(const DistanceMatrix&) const = default;

private:
    [[nodiscard]] std::size_t index(NodeId u, NodeId v) const {
        return static_cast<std::size_t>(u) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(v);
    }
    NodeId n_ = 0;
    std::vector<std::int32_t> data_;
};

/// All-pairs hop distances via one BFS per source. Dense; refuses n > 20000.
inline DistanceMatrix all_pairs_distances(const Graph& g) {
    const NodeId n = g.num_nodes();
    if (n > DistanceMatrix::kMaxNodes)
        throw InputError("all-pairs distances limited to " + std::to_string(DistanceMatrix::kMaxNodes) + " nodes");
    DistanceMatrix out(n);
    for (NodeId s = 0; s < n; ++s) {
        auto dist = bfs_distances(g, s);
        for (NodeId t = 0; t < n; ++t) out(s, t) = dist[t];
    }
    return out;
}

/// Subgraph induced by `nodes` (relabelled 0..k-1 in the given order).
inline Graph induced_subgraph(const Graph& g, std::span<const NodeId> nodes) {
    std::vector<NodeId> local(static_cast<std::size_t>(g.num_nodes()), -1);
    for (std::size_t i = 0; i < nodes.size(); ++i) local[nodes[i]] = static_cast<NodeId>(i);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (NodeId w : g.neighbors(nodes[i]))
            if (local[w] > static_cast<NodeId>(i)) edges.emplace_back(static_cast<NodeId>(i), local[w]);
    return build_graph(static_cast<NodeId>(nodes.size()), edges);
}

} // namespace coregd
