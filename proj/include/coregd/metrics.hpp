#pragma once

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "coregd/graph.hpp"
#include "coregd/layout.hpp"

namespace coregd {

/// Neumaier-compensated accumulator.
class CompensatedSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct StressReport {
    double raw_stress = 0.0;
    double alpha = 1.0;
    double scale_invariant_stress = 0.0;
    double normalized_stress = 0.0;
};

namespace detail {

inline void check_layout(const Layout& layout, const DistanceMatrix& dist) {
    if (layout.size() != dist.size()) throw InputError("layout and distance matrix sizes differ");
    if (!layout.finite()) throw InputError("layout has non-finite coordinates");
}

inline double euclidean(const Layout& layout, NodeId u, NodeId v) {
    return (layout.coords.row(u) - layout.coords.row(v)).norm();
}

} // namespace detail

/// Stress over ordered pairs u != v with weights d_uv^-2 (each unordered pair counted twice).
inline double stress(const Layout& layout, const DistanceMatrix& dist, double scale = 1.0) {
    detail::check_layout(layout, dist);
    const NodeId n = layout.size();
    CompensatedSum acc;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v) {
            double d = dist(u, v);
            double diff = scale * detail::euclidean(layout, u, v) - d;
            acc.add(diff * diff / (d * d));
        }
    return 2.0 * acc.value();
}

inline double stress(const Graph& g, const Layout& layout, const DistanceMatrix& dist) {
    if (g.num_nodes() != layout.size()) throw InputError("layout size does not match graph");
    return stress(layout, dist);
}

/// Numerator and denominator of the closed-form scale, over unordered pairs.
inline std::pair<double, double> scale_terms(const Layout& layout, const DistanceMatrix& dist) {
    detail::check_layout(layout, dist);
    const NodeId n = layout.size();
    CompensatedSum num, den;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v) {
            double d = dist(u, v);
            double e = detail::euclidean(layout, u, v);
            num.add(e / d);
            den.add(e * e / (d * d));
        }
    return {num.value(), den.value()};
}

/// Scale factor minimizing stress(alpha * layout); throws on an all-coincident layout.
inline double optimal_scale(const Layout& layout, const DistanceMatrix& dist) {
    auto [num, den] = scale_terms(layout, dist);
    if (!(den > 0.0)) throw DegenerateLayoutError("all layout points coincide");
    return num / den;
}

inline double optimal_scale(const Graph& g, const Layout& layout, const DistanceMatrix& dist) {
    if (g.num_nodes() != layout.size()) throw InputError("layout size does not match graph");
    return optimal_scale(layout, dist);
}

inline StressReport scale_invariant_stress(const Layout& layout, const DistanceMatrix& dist) {
    detail::check_layout(layout, dist);
    const NodeId n = layout.size();
    StressReport report;
    if (n < 2) return report;
    report.raw_stress = stress(layout, dist);
    report.alpha = optimal_scale(layout, dist);
    report.scale_invariant_stress = stress(layout, dist, report.alpha);
    report.normalized_stress = report.scale_invariant_stress / (static_cast<double>(n) * n);
    return report;
}

inline StressReport scale_invariant_stress(const Graph& g, const Layout& layout, const DistanceMatrix& dist) {
    if (g.num_nodes() != layout.size()) throw InputError("layout size does not match graph");
    return scale_invariant_stress(layout, dist);
}

struct DatasetMetrics {
    double mean_scale_invariant_stress = 0.0;
    double mean_normalized_stress = 0.0;
};

inline DatasetMetrics dataset_metrics(std::span<const StressReport> reports) {
    if (reports.empty()) throw InputError("dataset is empty");
    DatasetMetrics out;
    for (const auto& r : reports) {
        out.mean_scale_invariant_stress += r.scale_invariant_stress;
        out.mean_normalized_stress += r.normalized_stress;
    }
    out.mean_scale_invariant_stress /= static_cast<double>(reports.size());
    out.mean_normalized_stress /= static_cast<double>(reports.size());
    return out;
}

inline DatasetMetrics dataset_metrics(std::span<const Graph> graphs, std::span<const Layout> layouts) {
    if (graphs.size() != layouts.size()) throw InputError("graph and layout counts differ");
    std::vector<StressReport> reports;
    reports.reserve(graphs.size());
    for (std::size_t i = 0; i < graphs.size(); ++i)
        reports.push_back(scale_invariant_stress(graphs[i], layouts[i], all_pairs_distances(graphs[i])));
    return dataset_metrics(reports);
}

} // namespace coregd
