#pragma once

#include <algorithm>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

#include "coregd/graph.hpp"
#include "coregd/layout.hpp"

namespace coregd {

/// Static k-d tree over the rows of a point matrix.
class KdTree {
public:
    explicit KdTree(const RowMatrix& points, int leaf_size = 8)
        : points_(points), leaf_size_(std::max(1, leaf_size)) {
        index_.resize(static_cast<std::size_t>(points.rows()));
        std::iota(index_.begin(), index_.end(), NodeId{0});
        if (!index_.empty()) build(0, index_.size());
    }

    /// The k nearest rows to row `query` (excluding itself), ordered by
    /// (squared distance, index). Equal distances resolve to the smaller index.
    [[nodiscard]] std::vector<NodeId> nearest(NodeId query, std::size_t k) const {
        Heap heap;
        if (k > 0 && !nodes_.empty()) search(0, query, k, heap);
        std::vector<NodeId> out(heap.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            out[i] = heap.top().second;
            heap.pop();
        }
        return out;
    }

private:
    struct Node {
        std::size_t begin, end;
        int split_dim = -1;
        double split = 0.0;
        int left = -1, right = -1;
    };
    using Candidate = std::pair<double, NodeId>;
    using Heap = std::priority_queue<Candidate>;

    int build(std::size_t begin, std::size_t end) {
        int id = static_cast<int>(nodes_.size());
        nodes_.push_back({begin, end});
        if (end - begin <= static_cast<std::size_t>(leaf_size_)) return id;

        const auto dims = points_.cols();
        int best_dim = 0;
        double best_spread = -1.0;
        for (Eigen::Index d = 0; d < dims; ++d) {
            double lo = points_(index_[begin], d), hi = lo;
            for (std::size_t i = begin; i < end; ++i) {
                lo = std::min(lo, points_(index_[i], d));
                hi = std::max(hi, points_(index_[i], d));
            }
            if (hi - lo > best_spread) {
                best_spread = hi - lo;
                best_dim = static_cast<int>(d);
            }
        }
        std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(index_.begin() + static_cast<std::ptrdiff_t>(begin),
                         index_.begin() + static_cast<std::ptrdiff_t>(mid),
                         index_.begin() + static_cast<std::ptrdiff_t>(end),
                         [&](NodeId a, NodeId b) { return points_(a, best_dim) < points_(b, best_dim); });
        nodes_[id].split_dim = best_dim;
        nodes_[id].split = points_(index_[mid], best_dim);
        int left = build(begin, mid);
        int right = build(mid, end);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void search(int id, NodeId query, std::size_t k, Heap& heap) const {
        const Node& node = nodes_[id];
        if (node.split_dim < 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                NodeId cand = index_[i];
                if (cand == query) continue;
                Candidate c{(points_.row(cand) - points_.row(query)).squaredNorm(), cand};
                if (heap.size() < k) {
                    heap.push(c);
                } else if (c < heap.top()) {
                    heap.pop();
                    heap.push(c);
                }
            }
            return;
        }
        double diff = points_(query, node.split_dim) - node.split;
        int near = diff < 0.0 ? node.left : node.right;
        int far = diff < 0.0 ? node.right : node.left;
        search(near, query, k, heap);
        // Points on the splitting plane may sit in either child, so ties are explored.
        if (heap.size() < k || diff * diff <= heap.top().first) search(far, query, k, heap);
    }

    const RowMatrix& points_;
    int leaf_size_;
    std::vector<NodeId> index_;
    std::vector<Node> nodes_;
};

} // namespace coregd
