#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "coregd/error.hpp"
#include "coregd/graph.hpp"
#include "coregd/layout.hpp"
#include "coregd/random.hpp"

namespace coregd {

struct FeatureConfig {
    int n_lap = 8;
    int n_beacons = 2;
    int enc_per_beacon = 8;
    int n_random = 1;
    /// Drop the eigenvalue-0 eigenvector of the normalized Laplacian.
    bool exclude_trivial_eigenvector = true;

    [[nodiscard]] int width() const { return n_lap + n_beacons * enc_per_beacon + n_random; }

    void validate() const {
        if (n_lap < 0 || n_beacons < 0 || enc_per_beacon < 0 || n_random < 0)
            throw InputError("feature counts must be >= 0");
        if (enc_per_beacon % 2 != 0) throw InputError("encoding width per beacon must be even");
        if (width() == 0) throw InputError("feature configuration yields an empty feature vector");
    }
};

namespace detail {

inline void flip_signs(RowMatrix& m, std::uint64_t seed) {
    Rng rng(seed);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        if (uniform01(rng) < 0.5) m.col(c) *= -1.0;
}

/// y = (I - D^-1/2 A D^-1/2) x for every column of x.
inline Eigen::MatrixXd apply_normalized_laplacian(const Graph& g, const std::vector<double>& inv_sqrt_deg,
                                                  const Eigen::MatrixXd& x) {
    Eigen::MatrixXd y = x;
    for (NodeId v = 0; v < g.num_nodes(); ++v)
        for (NodeId w : g.neighbors(v)) y.row(v) -= inv_sqrt_deg[v] * inv_sqrt_deg[w] * x.row(w);
    return y;
}

} // namespace detail

struct LaplacianSpectrum {
    Eigen::VectorXd values;  // ascending
    Eigen::MatrixXd vectors; // unit-norm columns
};

/// Smallest `count` eigenpairs of the symmetric normalized Laplacian.
/// Dense solve up to 512 nodes; block subspace iteration with Rayleigh-Ritz beyond.
inline LaplacianSpectrum smallest_laplacian_eigenpairs(const Graph& g, int count, std::uint64_t seed = 0) {
    const NodeId n = g.num_nodes();
    count = std::min<int>(count, n);
    std::vector<double> inv_sqrt_deg(static_cast<std::size_t>(n));
    for (NodeId v = 0; v < n; ++v) {
        if (g.degree(v) == 0) throw InputError("normalized Laplacian undefined for isolated node " + std::to_string(v));
        inv_sqrt_deg[v] = 1.0 / std::sqrt(static_cast<double>(g.degree(v)));
    }
    LaplacianSpectrum out;
    if (count <= 0) return out;

    if (n <= 512) {
        Eigen::MatrixXd lap = Eigen::MatrixXd::Identity(n, n);
        for (NodeId v = 0; v < n; ++v)
            for (NodeId w : g.neighbors(v)) lap(v, w) -= inv_sqrt_deg[v] * inv_sqrt_deg[w];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
        out.values = solver.eigenvalues().head(count);
        out.vectors = solver.eigenvectors().leftCols(count);
        return out;
    }

    // Largest eigenpairs of 2I - L are the smallest of L.
    const int block = std::min<int>(n, count + 8);
    Rng rng(seed);
    Eigen::MatrixXd q(n, block);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = standard_normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(q);
    q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
    Eigen::VectorXd ritz_values;
    Eigen::MatrixXd ritz_vectors;
    for (int iter = 0; iter < 2000; ++iter) {
        Eigen::MatrixXd z = 2.0 * q - detail::apply_normalized_laplacian(g, inv_sqrt_deg, q);
        Eigen::HouseholderQR<Eigen::MatrixXd> step(z);
        q = step.householderQ() * Eigen::MatrixXd::Identity(n, block);
        if (iter % 20 != 19) continue;
        Eigen::MatrixXd lq = detail::apply_normalized_laplacian(g, inv_sqrt_deg, q);
        Eigen::MatrixXd small = q.transpose() * lq;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (small + small.transpose()));
        ritz_values = solver.eigenvalues();
        ritz_vectors = q * solver.eigenvectors();
        q = ritz_vectors;
        Eigen::MatrixXd resid = detail::apply_normalized_laplacian(g, inv_sqrt_deg, ritz_vectors.leftCols(count)) -
                                ritz_vectors.leftCols(count) * ritz_values.head(count).asDiagonal();
        if (resid.colwise().norm().maxCoeff() < 1e-6) break;
    }
    out.values = ritz_values.head(count);
    out.vectors = ritz_vectors.leftCols(count);
    for (Eigen::Index c = 0; c < out.vectors.cols(); ++c) out.vectors.col(c).normalize();
    return out;
}

/// Laplacian positional encodings: n x k, ascending eigenvalue, zero-padded, random column signs.
inline RowMatrix laplacian_pe(const Graph& g, int k, std::uint64_t seed, bool exclude_trivial = true) {
    const NodeId n = g.num_nodes();
    RowMatrix out = RowMatrix::Zero(n, k);
    if (k <= 0 || n == 1) return out;
    const int skip = exclude_trivial ? 1 : 0;
    const int available = std::min<int>(k, n - skip);
    if (available <= 0) return out;
    auto spectrum = smallest_laplacian_eigenpairs(g, available + skip, derive_seed(seed, 17));
    out.leftCols(available) = spectrum.vectors.middleCols(skip, available);
    detail::flip_signs(out, seed);
    return out;
}

/// n_b distinct nodes drawn uniformly without replacement.
inline std::vector<NodeId> choose_beacons(const Graph& g, int n_b, std::uint64_t seed) {
    if (n_b < 0 || n_b > g.num_nodes()) throw InputError("beacon count must lie in [0, n]");
    std::vector<NodeId> nodes(static_cast<std::size_t>(g.num_nodes()));
    std::iota(nodes.begin(), nodes.end(), NodeId{0});
    Rng rng(seed);
    for (int i = 0; i < n_b; ++i) {
        auto j = static_cast<std::size_t>(i) + uniform_below(rng, nodes.size() - static_cast<std::size_t>(i));
        std::swap(nodes[i], nodes[j]);
    }
    nodes.resize(static_cast<std::size_t>(n_b));
    return nodes;
}

/// Sinusoidal encoding of one distance into `width` entries: (sin, cos) per frequency.
inline void encode_distance(double d, int width, double* out) {
    for (int i = 0; i < width / 2; ++i) {
        double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(width));
        out[2 * i] = std::sin(d * freq);
        out[2 * i + 1] = std::cos(d * freq);
    }
}

inline RowMatrix beacon_features(const Graph& g, const std::vector<NodeId>& beacons, int enc_per_beacon) {
    if (enc_per_beacon % 2 != 0) throw InputError("encoding width per beacon must be even");
    const NodeId n = g.num_nodes();
    RowMatrix out = RowMatrix::Zero(n, static_cast<Eigen::Index>(beacons.size()) * enc_per_beacon);
    std::vector<double> block(static_cast<std::size_t>(enc_per_beacon));
    for (std::size_t b = 0; b < beacons.size(); ++b) {
        auto dist = bfs_distances(g, beacons[b]);
        for (NodeId u = 0; u < n; ++u) {
            encode_distance(dist[u], enc_per_beacon, block.data());
            for (int j = 0; j < enc_per_beacon; ++j)
                out(u, static_cast<Eigen::Index>(b) * enc_per_beacon + j) = block[j];
        }
    }
    return out;
}

inline RowMatrix random_features(NodeId n, int count, std::uint64_t seed) {
    RowMatrix out(n, count);
    Rng rng(seed);
    for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = uniform01(rng);
    return out;
}

/// [laplacian | beacons | random]; beacon count is clamped to n with zero padding.
inline RowMatrix assemble_initial_features(const Graph& g, const FeatureConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (!is_connected(g)) throw DisconnectedGraphError("features need a connected graph");
    const NodeId n = g.num_nodes();
    RowMatrix out(n, cfg.width());
    out.leftCols(cfg.n_lap) = laplacian_pe(g, cfg.n_lap, derive_seed(seed, 1), cfg.exclude_trivial_eigenvector);

    const int usable = std::min<int>(cfg.n_beacons, n);
    auto beacons = choose_beacons(g, usable, derive_seed(seed, 2));
    RowMatrix enc = RowMatrix::Zero(n, static_cast<Eigen::Index>(cfg.n_beacons) * cfg.enc_per_beacon);
    if (usable > 0) enc.leftCols(static_cast<Eigen::Index>(usable) * cfg.enc_per_beacon) = beacon_features(g, beacons, cfg.enc_per_beacon);
    out.middleCols(cfg.n_lap, enc.cols()) = enc;

    out.rightCols(cfg.n_random) = random_features(n, cfg.n_random, derive_seed(seed, 3));
    return out;
}

} // namespace coregd
