#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "coregd/graph.hpp"

namespace coregd {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point2&) const = default;
};

/// Twice the signed area of (a, b, c); positive when counter-clockwise.
inline double orient2d(Point2 a, Point2 b, Point2 c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

/// Positive when d lies strictly inside the circumcircle of counter-clockwise (a, b, c).
inline double incircle(Point2 a, Point2 b, Point2 c, Point2 d) {
    double adx = a.x - d.x, ady = a.y - d.y;
    double bdx = b.x - d.x, bdy = b.y - d.y;
    double cdx = c.x - d.x, cdy = c.y - d.y;
    double ad = adx * adx + ady * ady;
    double bd = bdx * bdx + bdy * bdy;
    double cd = cdx * cdx + cdy * cdy;
    return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

/**
 * Incremental Bowyer-Watson triangulation.
 *
 * Hull edges carry "ghost" triangles joined to a vertex at infinity, so no
 * bounding super-triangle is needed and the convex hull comes out complete.
 * Points are inserted in Hilbert order with a visibility walk for location.
 * Exact duplicates are separated by 1e-9 offsets; fully collinear input
 * degrades to a chain through the points in sorted order.
 */
class DelaunayTriangulation {
public:
    explicit DelaunayTriangulation(std::vector<Point2> points) : points_(std::move(points)) {
        separate_duplicates();
        triangulate();
    }

    [[nodiscard]] const std::vector<Point2>& points() const { return points_; }
    [[nodiscard]] bool collinear_fallback() const { return collinear_; }

    /// Finite triangles, counter-clockwise.
    [[nodiscard]] std::vector<std::array<NodeId, 3>> triangles() const {
        std::vector<std::array<NodeId, 3>> out;
        for (const auto& t : tris_)
            if (t.alive && !is_ghost(t)) out.push_back({t.v[0], t.v[1], t.v[2]});
        return out;
    }

    /// Undirected edges (u < v), sorted.
    [[nodiscard]] std::vector<Edge> edges() const {
        std::vector<Edge> out = chain_;
        for (const auto& t : tris_) {
            if (!t.alive || is_ghost(t)) continue;
            for (int i = 0; i < 3; ++i) {
                NodeId a = t.v[i], b = t.v[(i + 1) % 3];
                out.emplace_back(std::min(a, b), std::max(a, b));
            }
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

private:
    static constexpr NodeId kGhost = -1;

    struct Tri {
        std::array<NodeId, 3> v;
        std::array<int, 3> nb{-1, -1, -1}; // nb[i] lies across the edge opposite v[i]
        bool alive = true;
    };

    static bool is_ghost(const Tri& t) { return t.v[0] == kGhost || t.v[1] == kGhost || t.v[2] == kGhost; }

    void separate_duplicates() {
        std::vector<NodeId> order(points_.size());
        std::iota(order.begin(), order.end(), NodeId{0});
        auto key = [&](NodeId i) { return std::make_pair(points_[i].x, points_[i].y); };
        std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) { return std::make_pair(key(a), a) < std::make_pair(key(b), b); });
        const std::vector<Point2> original = points_;
        std::size_t run = 0;
        for (std::size_t i = 1; i < order.size(); ++i) {
            if (original[order[i]] == original[order[i - 1]]) {
                ++run;
                points_[order[i]].x += 1e-9 * static_cast<double>(run);
                points_[order[i]].y += 0.5e-9 * static_cast<double>(run);
            } else {
                run = 0;
            }
        }
    }

    static std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y, int bits) {
        const std::uint32_t side = 1u << bits;
        std::uint64_t d = 0;
        for (std::uint32_t s = side >> 1; s > 0; s >>= 1) {
            std::uint32_t rx = (x & s) ? 1u : 0u;
            std::uint32_t ry = (y & s) ? 1u : 0u;
            d += static_cast<std::uint64_t>(s) * s * ((3u * rx) ^ ry);
            if (ry == 0) {
                if (rx == 1) {
                    x = side - 1 - x;
                    y = side - 1 - y;
                }
                std::swap(x, y);
            }
        }
        return d;
    }

    std::vector<NodeId> insertion_order() const {
        const std::size_t n = points_.size();
        double minx = points_[0].x, maxx = minx, miny = points_[0].y, maxy = miny;
        for (auto p : points_) {
            minx = std::min(minx, p.x);
            maxx = std::max(maxx, p.x);
            miny = std::min(miny, p.y);
            maxy = std::max(maxy, p.y);
        }
        double span = std::max({maxx - minx, maxy - miny, 1e-300});
        constexpr int kBits = 16;
        const double cells = static_cast<double>((1u << kBits) - 1);
        std::vector<std::pair<std::uint64_t, NodeId>> keyed(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto qx = static_cast<std::uint32_t>((points_[i].x - minx) / span * cells);
            auto qy = static_cast<std::uint32_t>((points_[i].y - miny) / span * cells);
            keyed[i] = {hilbert_index(qx, qy, kBits), static_cast<NodeId>(i)};
        }
        std::sort(keyed.begin(), keyed.end());
        std::vector<NodeId> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = keyed[i].second;
        return order;
    }

    void chain_fallback() {
        collinear_ = true;
        std::vector<NodeId> order(points_.size());
        std::iota(order.begin(), order.end(), NodeId{0});
        std::sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
            return std::make_pair(points_[a].x, points_[a].y) < std::make_pair(points_[b].x, points_[b].y);
        });
        for (std::size_t i = 1; i < order.size(); ++i)
            chain_.emplace_back(std::min(order[i - 1], order[i]), std::max(order[i - 1], order[i]));
    }

    bool in_circle(const Tri& t, Point2 p) const {
        for (int k = 0; k < 3; ++k) {
            if (t.v[k] != kGhost) continue;
            Point2 a = points_[t.v[(k + 1) % 3]];
            Point2 b = points_[t.v[(k + 2) % 3]];
            double o = orient2d(a, b, p);
            if (o > 0.0) return true;
            if (o < 0.0) return false;
            double dot = (p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y);
            double len2 = (b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y);
            return dot > 0.0 && dot < len2;
        }
        return incircle(points_[t.v[0]], points_[t.v[1]], points_[t.v[2]], p) > 0.0;
    }

    int new_tri(NodeId a, NodeId b, NodeId c) {
        Tri t;
        t.v = {a, b, c};
        if (!free_.empty()) {
            int id = free_.back();
            free_.pop_back();
            tris_[id] = t;
            return id;
        }
        tris_.push_back(t);
        return static_cast<int>(tris_.size()) - 1;
    }

    static std::uint64_t edge_key(NodeId a, NodeId b) {
        auto lo = static_cast<std::uint32_t>(std::min(a, b) + 1);
        auto hi = static_cast<std::uint32_t>(std::max(a, b) + 1);
        return (static_cast<std::uint64_t>(lo) << 32) | hi;
    }

    void link_all() {
        std::unordered_map<std::uint64_t, std::pair<int, int>> open;
        for (int id = 0; id < static_cast<int>(tris_.size()); ++id) {
            if (!tris_[id].alive) continue;
            for (int i = 0; i < 3; ++i) {
                auto key = edge_key(tris_[id].v[(i + 1) % 3], tris_[id].v[(i + 2) % 3]);
                auto it = open.find(key);
                if (it == open.end()) {
                    open.emplace(key, std::make_pair(id, i));
                } else {
                    tris_[id].nb[i] = it->second.first;
                    tris_[it->second.first].nb[it->second.second] = id;
                    open.erase(it);
                }
            }
        }
    }

    int locate(Point2 p) const {
        int t = last_;
        const std::size_t limit = 4 * tris_.size() + 16;
        for (std::size_t step = 0; step < limit; ++step) {
            const Tri& tri = tris_[t];
            if (is_ghost(tri)) {
                if (in_circle(tri, p)) return t;
                for (int k = 0; k < 3; ++k)
                    if (tri.v[k] == kGhost) t = tri.nb[k];
                continue;
            }
            int moved = -1;
            for (int j = 0; j < 3; ++j) {
                int i = static_cast<int>((j + step) % 3);
                Point2 a = points_[tri.v[(i + 1) % 3]];
                Point2 b = points_[tri.v[(i + 2) % 3]];
                if (orient2d(a, b, p) < 0.0) {
                    moved = tri.nb[i];
                    break;
                }
            }
            if (moved < 0) return t;
            t = moved;
        }
        return -1;
    }

    bool insert(NodeId pi) {
        const Point2 p = points_[pi];
        int start = locate(p);
        if (start < 0 || !in_circle(tris_[start], p)) {
            start = -1;
            for (int id = 0; id < static_cast<int>(tris_.size()); ++id)
                if (tris_[id].alive && in_circle(tris_[id], p)) {
                    start = id;
                    break;
                }
            if (start < 0) return false;
        }

        std::vector<int> cavity{start};
        std::vector<char>& mark = mark_;
        mark.resize(tris_.size(), 0);
        mark[start] = 1;
        for (std::size_t head = 0; head < cavity.size(); ++head) {
            const Tri& t = tris_[cavity[head]];
            for (int i = 0; i < 3; ++i) {
                int nb = t.nb[i];
                if (nb < 0 || mark[nb]) continue;
                if (in_circle(tris_[nb], p)) {
                    mark[nb] = 1;
                    cavity.push_back(nb);
                }
            }
        }

        struct Boundary {
            NodeId a, b;
            int outside;
        };
        std::vector<Boundary> boundary;
        for (int id : cavity) {
            const Tri& t = tris_[id];
            for (int i = 0; i < 3; ++i) {
                int nb = t.nb[i];
                if (nb >= 0 && mark[nb]) continue;
                boundary.push_back({t.v[(i + 1) % 3], t.v[(i + 2) % 3], nb});
            }
        }
        for (int id : cavity) {
            mark[id] = 0;
            tris_[id].alive = false;
        }
        std::vector<int> dead = cavity;

        std::unordered_map<NodeId, int> by_start;
        std::vector<int> created;
        created.reserve(boundary.size());
        for (const auto& e : boundary) {
            int id = new_tri(e.a, e.b, pi);
            if (static_cast<std::size_t>(id) >= mark.size()) mark.resize(tris_.size(), 0);
            created.push_back(id);
            tris_[id].nb[2] = e.outside;
            if (e.outside >= 0) {
                Tri& o = tris_[e.outside];
                for (int k = 0; k < 3; ++k) {
                    NodeId x = o.v[(k + 1) % 3], y = o.v[(k + 2) % 3];
                    if ((x == e.b && y == e.a) || (x == e.a && y == e.b)) o.nb[k] = id;
                }
            }
            by_start[e.a] = id;
        }
        for (int id : created) {
            Tri& t = tris_[id];
            int next = by_start.at(t.v[1]);
            t.nb[0] = next;
            tris_[next].nb[1] = id;
        }
        for (int id : dead) free_.push_back(id);
        for (int id : created)
            if (!is_ghost(tris_[id])) last_ = id;
        if (!tris_[last_].alive) last_ = created.front();
        return true;
    }

    void triangulate() {
        const std::size_t n = points_.size();
        if (n < 3) {
            if (n == 2) chain_.emplace_back(0, 1);
            return;
        }
        auto order = insertion_order();
        NodeId a = order[0], b = order[1], c = -1;
        std::size_t ci = 0;
        for (std::size_t i = 2; i < n; ++i)
            if (orient2d(points_[a], points_[b], points_[order[i]]) != 0.0) {
                c = order[i];
                ci = i;
                break;
            }
        if (c < 0) {
            chain_fallback();
            return;
        }
        if (orient2d(points_[a], points_[b], points_[c]) < 0.0) std::swap(b, c);
        new_tri(a, b, c);
        new_tri(c, b, kGhost);
        new_tri(a, c, kGhost);
        new_tri(b, a, kGhost);
        link_all();
        last_ = 0;

        for (std::size_t i = 2; i < n; ++i) {
            if (i == ci) continue;
            NodeId pi = order[i];
            bool ok = insert(pi);
            for (int attempt = 1; !ok && attempt <= 8; ++attempt) {
                points_[pi].x += 1e-9 * attempt;
                points_[pi].y -= 0.7e-9 * attempt;
                ok = insert(pi);
            }
            if (!ok) throw std::runtime_error("Delaunay insertion failed");
        }
    }

    std::vector<Point2> points_;
    std::vector<Tri> tris_;
    std::vector<int> free_;
    std::vector<char> mark_;
    std::vector<Edge> chain_;
    int last_ = 0;
    bool collinear_ = false;
};

} // namespace coregd
