#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coregd/error.hpp"
#include "coregd/features.hpp"
#include "coregd/graph.hpp"
#include "coregd/layout.hpp"
#include "coregd/random.hpp"

namespace coregd {

/**
 * PivotMDS: hop distances to random pivots, double-centred squared distances C
 * (n x p), coordinates from the top-d left singular vectors of C scaled by the
 * singular values. Orthogonal iteration on C C^T without forming it.
 */
inline Layout pivot_mds(const Graph& g, int n_pivots, int d, std::uint64_t seed) {
    const NodeId n = g.num_nodes();
    if (d < 1) throw InputError("dimension must be >= 1");
    if (n_pivots < d) throw InputError("PivotMDS needs at least d pivots");
    if (n_pivots > n) throw InputError("more pivots than nodes");
    if (!is_connected(g)) throw DisconnectedGraphError("PivotMDS needs a connected graph");

    auto pivots = choose_beacons(g, n_pivots, seed);
    Eigen::MatrixXd c(n, n_pivots);
    for (int j = 0; j < n_pivots; ++j) {
        auto dist = bfs_distances(g, pivots[j]);
        for (NodeId i = 0; i < n; ++i) c(i, j) = static_cast<double>(dist[i]) * dist[i];
    }
    Eigen::VectorXd row_mean = c.rowwise().mean();
    Eigen::RowVectorXd col_mean = c.colwise().mean();
    double grand = c.mean();
    c = (-0.5 * ((c.colwise() - row_mean).rowwise() - col_mean).array() - 0.5 * grand).matrix();

    Rng rng(derive_seed(seed, 9));
    Eigen::MatrixXd q(n, d);
    for (Eigen::Index i = 0; i < q.size(); ++i) q.data()[i] = standard_normal(rng);
    for (int iter = 0; iter < 1000; ++iter) {
        Eigen::MatrixXd z = c * (c.transpose() * q);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
        Eigen::MatrixXd next = qr.householderQ() * Eigen::MatrixXd::Identity(n, d);
        // Fix column signs so convergence can be measured.
        for (int k = 0; k < d; ++k)
            if (next.col(k).dot(q.col(k)) < 0.0) next.col(k) *= -1.0;
        double change = (next - q).norm();
        q = std::move(next);
        if (change < 1e-10) break;
    }
    Eigen::MatrixXd ct_q = c.transpose() * q;
    Eigen::MatrixXd small = ct_q.transpose() * ct_q;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(small);
    // Rayleigh-Ritz within span(q); eigenvalues ascending, so reverse.
    RowMatrix coords(n, d);
    for (int k = 0; k < d; ++k) {
        int src = d - 1 - k;
        double s = std::sqrt(std::max(0.0, solver.eigenvalues()(src)));
        coords.col(k) = q * solver.eigenvectors().col(src) * s;
    }
    return fit_unit_box(Layout(std::move(coords)));
}

inline Layout pivot_mds(const Graph& g, int d, std::uint64_t seed) {
    return pivot_mds(g, std::min<int>(g.num_nodes(), 50), d, seed);
}

struct SgdSchedule {
    int iterations = 60;
    /// 0 selects the square of the largest graph distance.
    double eta_max = 0.0;
    double eta_min = 0.1;

    void validate() const {
        if (iterations < 1) throw InputError("SGD iterations must be >= 1");
        if (!(eta_min > 0.0)) throw InputError("eta_min must be > 0");
        if (eta_max != 0.0 && !(eta_max >= eta_min)) throw InputError("eta_max must be >= eta_min");
    }
};

/// Step size of iteration t: exponential decay from eta_max to eta_min.
inline double sgd_step_size(const SgdSchedule& s, double eta_max, int t) {
    if (s.iterations == 1) return eta_max;
    double lambda = std::log(eta_max / s.eta_min) / static_cast<double>(s.iterations - 1);
    return eta_max * std::exp(-lambda * t);
}

/// Called after each iteration with (iteration index from 0, current positions).
using SgdObserver = std::function<void(int, const RowMatrix&)>;

/**
 * Stochastic pairwise stress descent: every iteration visits all unordered
 * pairs in random order and moves both endpoints toward the target distance
 * with step mu = min(1, eta / d^2).
 */
inline Layout stress_sgd(const Graph& g, const DistanceMatrix& dist, const SgdSchedule& schedule, std::uint64_t seed,
                         int d = 2, const SgdObserver& observer = {}) {
    schedule.validate();
    const NodeId n = g.num_nodes();
    if (dist.size() != n) throw InputError("distance matrix does not match graph");
    if (!is_connected(g)) throw DisconnectedGraphError("stress SGD needs a connected graph");
    if (d < 1) throw InputError("dimension must be >= 1");

    Rng rng(seed);
    RowMatrix pos(n, d);
    for (Eigen::Index i = 0; i < pos.size(); ++i) pos.data()[i] = uniform01(rng);
    if (n < 2) return Layout(std::move(pos));

    std::vector<std::pair<NodeId, NodeId>> pairs;
    pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v) pairs.emplace_back(u, v);

    const double d_max = dist.max();
    const double eta_max = schedule.eta_max > 0.0 ? schedule.eta_max : std::max(d_max * d_max, schedule.eta_min);
    Eigen::RowVectorXd delta(d);
    for (int t = 0; t < schedule.iterations; ++t) {
        const double eta = sgd_step_size(schedule, eta_max, t);
        shuffle_in_place(pairs, rng);
        for (const auto& [u, v] : pairs) {
            double target = dist(u, v);
            double w = 1.0 / (target * target);
            double mu = std::min(1.0, w * eta);
            delta = pos.row(u) - pos.row(v);
            double len = delta.norm();
            if (len == 0.0) {
                delta.setZero();
                delta(0) = 1e-9;
                len = 1e-9;
            }
            Eigen::RowVectorXd move = (mu * 0.5 * (len - target) / len) * delta;
            pos.row(u) -= move;
            pos.row(v) += move;
        }
        if (observer) observer(t, pos);
    }
    return fit_unit_box(Layout(std::move(pos)));
}

inline Layout stress_sgd(const Graph& g, const SgdSchedule& schedule, std::uint64_t seed, int d = 2) {
    return stress_sgd(g, all_pairs_distances(g), schedule, seed, d);
}

} // namespace coregd
