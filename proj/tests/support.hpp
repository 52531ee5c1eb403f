#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "coregd/coregd.hpp"

namespace testing_support {

using namespace coregd;

/// Floyd-Warshall hop distances; -1 for unreachable pairs.
inline std::vector<std::vector<int>> floyd_warshall(const Graph& g) {
    const int n = g.num_nodes();
    const int inf = std::numeric_limits<int>::max() / 4;
    std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
    for (int v = 0; v < n; ++v) {
        d[v][v] = 0;
        for (NodeId w : g.neighbors(v)) d[v][w] = 1;
    }
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    for (auto& row : d)
        for (int& x : row)
            if (x >= inf) x = -1;
    return d;
}

/// Random connected graph: random spanning tree plus extra edges.
inline Graph random_connected_graph(NodeId n, int extra, Rng& rng) {
    std::vector<Edge> edges;
    for (NodeId v = 1; v < n; ++v) edges.emplace_back(static_cast<NodeId>(uniform_below(rng, v)), v);
    for (int i = 0; i < extra && n > 1; ++i) {
        auto u = static_cast<NodeId>(uniform_below(rng, n));
        auto v = static_cast<NodeId>(uniform_below(rng, n));
        edges.emplace_back(u, v);
    }
    return build_graph(n, edges);
}

inline RowMatrix random_points(NodeId n, int d, Rng& rng) {
    RowMatrix p(n, d);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = uniform01(rng);
    return p;
}

/// Central difference of f at x along every coordinate.
inline RowMatrix numeric_gradient(const std::function<double(const RowMatrix&)>& f, RowMatrix x, double h = 1e-6) {
    RowMatrix g(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        double keep = x.data()[i];
        x.data()[i] = keep + h;
        double up = f(x);
        x.data()[i] = keep - h;
        double down = f(x);
        x.data()[i] = keep;
        g.data()[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// max |a - b| / max(|b|_max, floor).
inline double relative_error(const RowMatrix& a, const RowMatrix& b, double floor = 1e-8) {
    double scale = std::max(b.cwiseAbs().maxCoeff(), floor);
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Golden-section minimum of a unimodal function on [lo, hi].
inline double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-12) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

} // namespace testing_support
