#pragma once

#include <string>
#include <vector>

#include "coregd/delaunay.hpp"
#include "coregd/error.hpp"
#include "coregd/graph.hpp"
#include "coregd/random.hpp"

namespace coregd {

enum class GraphKind { path, cycle, grid, delaunay };

inline GraphKind parse_graph_kind(const std::string& s) {
    if (s == "path") return GraphKind::path;
    if (s == "cycle") return GraphKind::cycle;
    if (s == "grid") return GraphKind::grid;
    if (s == "delaunay") return GraphKind::delaunay;
    throw InputError("unknown graph kind '" + s + "'");
}

inline Graph make_path(NodeId n) {
    if (n < 1) throw InputError("path needs at least one node");
    std::vector<Edge> edges;
    for (NodeId i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
    return build_graph(n, edges);
}

inline Graph make_cycle(NodeId n) {
    if (n < 3) throw InputError("cycle needs at least three nodes");
    std::vector<Edge> edges;
    for (NodeId i = 0; i < n; ++i) edges.emplace_back(i, (i + 1) % n);
    return build_graph(n, edges);
}

/// rows x cols lattice, nodes numbered row-major.
inline Graph make_grid(NodeId rows, NodeId cols) {
    if (rows < 1 || cols < 1) throw InputError("grid dimensions must be >= 1");
    std::vector<Edge> edges;
    for (NodeId r = 0; r < rows; ++r)
        for (NodeId c = 0; c < cols; ++c) {
            NodeId v = r * cols + c;
            if (c + 1 < cols) edges.emplace_back(v, v + 1);
            if (r + 1 < rows) edges.emplace_back(v, v + cols);
        }
    return build_graph(rows * cols, edges);
}

inline std::vector<Point2> random_unit_square_points(NodeId n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Point2> pts(static_cast<std::size_t>(n));
    for (auto& p : pts) {
        p.x = uniform01(rng);
        p.y = uniform01(rng);
    }
    return pts;
}

/// Delaunay triangulation of n uniform points in the unit square.
inline Graph make_delaunay(NodeId n, std::uint64_t seed) {
    if (n < 3) throw InputError("Delaunay graph needs at least three points");
    DelaunayTriangulation tri(random_unit_square_points(n, seed));
    return build_graph(n, tri.edges());
}

struct GenerateParams {
    GraphKind kind = GraphKind::delaunay;
    NodeId n = 100;
    NodeId rows = 0;
    NodeId cols = 0;
};

inline Graph generate(const GenerateParams& p, std::uint64_t seed) {
    switch (p.kind) {
    case GraphKind::path: return make_path(p.n);
    case GraphKind::cycle: return make_cycle(p.n);
    case GraphKind::grid: return make_grid(p.rows, p.cols);
    case GraphKind::delaunay: return make_delaunay(p.n, seed);
    }
    throw InputError("unknown graph kind");
}

} // namespace coregd
