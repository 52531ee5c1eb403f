#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "coregd/error.hpp"
#include "coregd/graph.hpp"

namespace coregd {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Node coordinates, one row per node.
struct Layout {
    RowMatrix coords;

    Layout() = default;
    explicit Layout(RowMatrix c) : coords(std::move(c)) {}
    Layout(NodeId n, int dim) : coords(RowMatrix::Zero(n, dim)) {}

    [[nodiscard]] NodeId size() const { return static_cast<NodeId>(coords.rows()); }
    [[nodiscard]] int dim() const { return static_cast<int>(coords.cols()); }
    [[nodiscard]] bool finite() const { return coords.allFinite(); }

    [[nodiscard]] Layout scaled(double c) const { return Layout(RowMatrix(coords * c)); }

    bool operator==(const Layout& other) const {
        return coords.rows() == other.coords.rows() && coords.cols() == other.coords.cols() &&
               coords == other.coords;
    }
};

/// Uniformly rescales and translates so the layout fits [0,1]^d (aspect preserved).
inline Layout fit_unit_box(const Layout& layout) {
    if (layout.size() == 0) return layout;
    Eigen::RowVectorXd lo = layout.coords.colwise().minCoeff();
    Eigen::RowVectorXd hi = layout.coords.colwise().maxCoeff();
    double extent = (hi - lo).maxCoeff();
    RowMatrix out = layout.coords.rowwise() - lo;
    if (extent > 0.0) out /= extent;
    return Layout(std::move(out));
}

} // namespace coregd
