#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <tuple>
#include <vector>

#include "coregd/error.hpp"
#include "coregd/graph.hpp"
#include "coregd/layout.hpp"
#include "coregd/random.hpp"

namespace coregd {

struct CoarsenConfig {
    double rho = 0.8;
    NodeId n_min = 20;
    double noise_sigma = 0.01;

    void validate() const {
        if (!(rho > 0.0 && rho < 1.0)) throw InputError("coarsening rho must lie in (0, 1)");
        if (n_min < 1) throw InputError("coarsening n_min must be >= 1");
        if (!(noise_sigma >= 0.0)) throw InputError("noise sigma must be >= 0");
    }
};

struct CoarsenStep {
    Graph coarse;
    /// parent[v] = supernode of fine node v.
    std::vector<NodeId> parent;
};

/**
 * One round of greedy heavy-edge matching.
 *
 * Edges are visited by descending weight, ties by (min endpoint, max endpoint).
 * Matched pairs are contracted until the node count reaches max(ceil(rho * n), 1);
 * at least one pair is contracted whenever the graph has an edge. Parallel
 * coarse edges are merged with summed weights.
 */
inline CoarsenStep coarsen_once(const Graph& g, double rho) {
    const NodeId n = g.num_nodes();
    if (n <= 1) throw InputError("cannot coarsen a single-node graph");
    const auto target = std::max<NodeId>(static_cast<NodeId>(std::ceil(rho * n - 1e-12)), 1);

    auto edges = g.weighted_edges();
    std::stable_sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
        if (std::get<2>(a) != std::get<2>(b)) return std::get<2>(a) > std::get<2>(b);
        return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });

    std::vector<NodeId> mate(static_cast<std::size_t>(n), -1);
    NodeId count = n;
    bool merged_any = false;
    for (const auto& [u, v, w] : edges) {
        if (merged_any && count <= target) break;
        if (mate[u] != -1 || mate[v] != -1) continue;
        mate[u] = v;
        mate[v] = u;
        --count;
        merged_any = true;
    }

    CoarsenStep step;
    step.parent.assign(static_cast<std::size_t>(n), -1);
    NodeId next = 0;
    for (NodeId v = 0; v < n; ++v) {
        if (step.parent[v] != -1) continue;
        step.parent[v] = next;
        if (mate[v] != -1) step.parent[mate[v]] = next;
        ++next;
    }

    std::vector<std::tuple<NodeId, NodeId, double>> coarse_edges;
    coarse_edges.reserve(edges.size());
    for (const auto& [u, v, w] : edges) {
        NodeId pu = step.parent[u], pv = step.parent[v];
        if (pu != pv) coarse_edges.emplace_back(std::min(pu, pv), std::max(pu, pv), w);
    }
    step.coarse = build_weighted_graph(next, coarse_edges);
    return step;
}

/// Coarsest-first sequence of graphs; graphs.back() is the input graph.
struct Hierarchy {
    std::vector<Graph> graphs;
    /// parents[l][v]: supernode in graphs[l] of node v in graphs[l + 1].
    std::vector<std::vector<NodeId>> parents;

    [[nodiscard]] std::size_t levels() const { return graphs.size(); }
    [[nodiscard]] const Graph& finest() const { return graphs.back(); }
    [[nodiscard]] const Graph& coarsest() const { return graphs.front(); }
};

inline Hierarchy single_level_hierarchy(const Graph& g) {
    Hierarchy h;
    h.graphs.push_back(g);
    return h;
}

inline Hierarchy build_hierarchy(const Graph& g, const CoarsenConfig& cfg) {
    cfg.validate();
    std::vector<Graph> fine_to_coarse{g};
    std::vector<std::vector<NodeId>> maps;
    while (fine_to_coarse.back().num_nodes() > cfg.n_min && fine_to_coarse.back().num_edges() > 0) {
        const NodeId n = fine_to_coarse.back().num_nodes();
        auto step = coarsen_once(fine_to_coarse.back(), cfg.rho);
        // Pair matching stalls on star-like supernode graphs; keep the level but stop there.
        const bool stalled = step.coarse.num_nodes() > static_cast<NodeId>(std::ceil(cfg.rho * n - 1e-12));
        maps.push_back(std::move(step.parent));
        fine_to_coarse.push_back(std::move(step.coarse));
        if (stalled) break;
    }
    Hierarchy h;
    h.graphs.assign(std::make_move_iterator(fine_to_coarse.rbegin()), std::make_move_iterator(fine_to_coarse.rend()));
    h.parents.assign(std::make_move_iterator(maps.rbegin()), std::make_move_iterator(maps.rend()));
    return h;
}

/// rows x cols matrix of i.i.d. N(0, sigma^2) entries; all zero when sigma == 0.
inline RowMatrix gaussian_noise(Eigen::Index rows, Eigen::Index cols, double sigma, std::uint64_t seed) {
    RowMatrix noise = RowMatrix::Zero(rows, cols);
    if (sigma > 0.0) {
        Rng rng(seed);
        for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = sigma * standard_normal(rng);
    }
    return noise;
}

/// Copies each supernode row to its members and adds N(0, sigma^2) noise.
inline RowMatrix lift_embeddings(const RowMatrix& coarse, const std::vector<NodeId>& parent, double noise_sigma,
                                 std::uint64_t seed) {
    RowMatrix fine(static_cast<Eigen::Index>(parent.size()), coarse.cols());
    for (std::size_t v = 0; v < parent.size(); ++v) {
        if (parent[v] < 0 || parent[v] >= coarse.rows()) throw InputError("mapping does not match coarse embedding rows");
        fine.row(static_cast<Eigen::Index>(v)) = coarse.row(parent[v]);
    }
    return fine + gaussian_noise(fine.rows(), fine.cols(), noise_sigma, seed);
}

} // namespace coregd
