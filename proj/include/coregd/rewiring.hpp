#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "coregd/delaunay.hpp"
#include "coregd/error.hpp"
#include "coregd/graph.hpp"
#include "coregd/kdtree.hpp"
#include "coregd/layout.hpp"

namespace coregd {

/// Directed edge list; messages travel src -> dst.
struct RewiredEdges {
    std::vector<NodeId> src;
    std::vector<NodeId> dst;
    bool symmetric = false;

    [[nodiscard]] std::size_t size() const { return src.size(); }
    void add(NodeId from, NodeId to) {
        src.push_back(from);
        dst.push_back(to);
    }
};

enum class RewiringMethod { knn, delaunay, radius, none };

inline std::string to_string(RewiringMethod m) {
    switch (m) {
    case RewiringMethod::knn: return "knn";
    case RewiringMethod::delaunay: return "delaunay";
    case RewiringMethod::radius: return "radius";
    case RewiringMethod::none: return "none";
    }
    return "none";
}

inline RewiringMethod parse_rewiring_method(const std::string& s) {
    if (s == "knn") return RewiringMethod::knn;
    if (s == "delaunay") return RewiringMethod::delaunay;
    if (s == "radius") return RewiringMethod::radius;
    if (s == "none") return RewiringMethod::none;
    throw InputError("unknown rewiring method '" + s + "'");
}

struct RewiringConfig {
    RewiringMethod method = RewiringMethod::knn;
    int k = 8;
    double radius = 0.05;

    void validate() const {
        if (k < 1) throw InputError("rewiring K must be >= 1");
        if (!(radius > 0.0)) throw InputError("rewiring radius must be > 0");
    }
};

/// Each node receives edges from its K nearest points (ties to the smaller index).
inline RewiredEdges knn_rewire(const RowMatrix& positions, int k) {
    RewiredEdges out;
    const auto n = static_cast<NodeId>(positions.rows());
    if (n < 2 || k < 1) return out;
    const auto kk = static_cast<std::size_t>(std::min<NodeId>(k, n - 1));
    out.src.reserve(kk * n);
    out.dst.reserve(kk * n);
    KdTree tree(positions);
    for (NodeId v = 0; v < n; ++v)
        for (NodeId u : tree.nearest(v, kk)) out.add(u, v);
    return out;
}

namespace detail {

inline RewiredEdges symmetric_from(const std::vector<Edge>& undirected) {
    RewiredEdges out;
    out.symmetric = true;
    for (auto [u, v] : undirected) {
        out.add(u, v);
        out.add(v, u);
    }
    return out;
}

} // namespace detail

inline RewiredEdges delaunay_rewire(const RowMatrix& positions) {
    if (positions.cols() != 2) throw InputError("Delaunay rewiring needs 2-D positions");
    std::vector<Point2> pts(static_cast<std::size_t>(positions.rows()));
    for (Eigen::Index i = 0; i < positions.rows(); ++i) pts[i] = {positions(i, 0), positions(i, 1)};
    DelaunayTriangulation tri(std::move(pts));
    return detail::symmetric_from(tri.edges());
}

/// All pairs at distance <= r, found with a uniform-grid spatial hash.
inline RewiredEdges radius_rewire(const RowMatrix& positions, double r) {
    if (!(r > 0.0)) throw InputError("radius must be > 0");
    const auto n = static_cast<NodeId>(positions.rows());
    const auto dims = static_cast<int>(positions.cols());
    const double r2 = r * r;

    auto cell_of = [&](NodeId i) {
        std::vector<std::int64_t> c(static_cast<std::size_t>(dims));
        for (int d = 0; d < dims; ++d) c[d] = static_cast<std::int64_t>(std::floor(positions(i, d) / r));
        return c;
    };
    struct CellHash {
        std::size_t operator()(const std::vector<std::int64_t>& c) const {
            std::uint64_t h = 1469598103934665603ull;
            for (auto x : c) h = (h ^ static_cast<std::uint64_t>(x)) * 1099511628211ull;
            return static_cast<std::size_t>(h);
        }
    };
    std::unordered_map<std::vector<std::int64_t>, std::vector<NodeId>, CellHash> grid;
    for (NodeId i = 0; i < n; ++i) grid[cell_of(i)].push_back(i);

    std::vector<Edge> pairs;
    std::vector<std::int64_t> probe(static_cast<std::size_t>(dims));
    for (NodeId i = 0; i < n; ++i) {
        auto base = cell_of(i);
        std::int64_t combos = 1;
        for (int d = 0; d < dims; ++d) combos *= 3;
        for (std::int64_t code = 0; code < combos; ++code) {
            std::int64_t rest = code;
            for (int d = 0; d < dims; ++d) {
                probe[d] = base[d] + (rest % 3) - 1;
                rest /= 3;
            }
            auto it = grid.find(probe);
            if (it == grid.end()) continue;
            for (NodeId j : it->second)
                if (j > i && (positions.row(i) - positions.row(j)).squaredNorm() <= r2) pairs.emplace_back(i, j);
        }
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    return detail::symmetric_from(pairs);
}

inline RewiredEdges rewire(const RowMatrix& positions, const RewiringConfig& cfg) {
    switch (cfg.method) {
    case RewiringMethod::knn: return knn_rewire(positions, cfg.k);
    case RewiringMethod::delaunay: return delaunay_rewire(positions);
    case RewiringMethod::radius: return radius_rewire(positions, cfg.radius);
    case RewiringMethod::none: return {};
    }
    return {};
}

} // namespace coregd
