#include "mcmmf/dbscan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <unordered_map>

namespace mcmmf {

void DbscanParams::validate() const {
    if (!(eps > 0.0))
        throw std::invalid_argument("eps must be > 0");
    if (min_pts < 1)
        throw std::invalid_argument("min_pts must be >= 1");
    if (intensity_threshold &&
        (*intensity_threshold < 0 || *intensity_threshold > 4095))
        throw std::invalid_argument("intensity_threshold must be in [0, 4095]");
}

namespace {

// Uniform grid with cell size eps; all neighbors of a point live in the
// surrounding 3x3 block of cells.
class NeighborGrid {
public:
    NeighborGrid(std::span<const Vec2> pts, const std::vector<std::uint32_t>& order,
                 double eps)
        : pts_(pts), eps2_(eps * eps), inv_cell_(1.0 / eps) {
        cells_.reserve(order.size());
        for (std::uint32_t rank = 0; rank < order.size(); ++rank)
            cells_[key(pts_[order[rank]])].push_back(rank);
    }

    // Ranks (positions in visit order) of all points within eps, self
    // included, ascending.
    void query(const Vec2& p, const std::vector<std::uint32_t>& order,
               std::vector<std::uint32_t>& out) const {
        out.clear();
        const long cx = cell_coord(p.x);
        const long cy = cell_coord(p.y);
        for (long dy = -1; dy <= 1; ++dy) {
            for (long dx = -1; dx <= 1; ++dx) {
                const auto it = cells_.find(pack(cx + dx, cy + dy));
                if (it == cells_.end()) continue;
                for (std::uint32_t rank : it->second) {
                    const Vec2& q = pts_[order[rank]];
                    const double ddx = q.x - p.x;
                    const double ddy = q.y - p.y;
                    if (ddx * ddx + ddy * ddy <= eps2_) out.push_back(rank);
                }
            }
        }
        std::sort(out.begin(), out.end());
    }

private:
    long cell_coord(double v) const {
        return static_cast<long>(std::floor(v * inv_cell_));
    }
    std::uint64_t key(const Vec2& p) const {
        return pack(cell_coord(p.x), cell_coord(p.y));
    }
    static std::uint64_t pack(long cx, long cy) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(cx)) << 32) |
               static_cast<std::uint32_t>(cy);
    }

    std::span<const Vec2> pts_;
    double eps2_;
    double inv_cell_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

} // namespace

ClusterLabeling dbscan(std::span<const Vec2> points, const DbscanParams& params) {
    params.validate();
    for (const Vec2& p : points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw std::invalid_argument("dbscan points must be finite");

    const std::size_t n = points.size();
    ClusterLabeling result;
    result.labels.assign(n, -1);
    if (n == 0) return result;

    // Visit order sorted by (y, x) makes the labeling independent of the
    // caller's point order.
    std::vector<std::uint32_t> order(n);
    for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (points[a].y != points[b].y) return points[a].y < points[b].y;
        if (points[a].x != points[b].x) return points[a].x < points[b].x;
        return a < b;
    });

    NeighborGrid grid(points, order, params.eps);

    constexpr int kUnvisited = -2;
    std::vector<int> label(n, kUnvisited); // by rank
    std::vector<std::uint32_t> neigh, seed_neigh;
    int next_cluster = 0;

    for (std::uint32_t rank = 0; rank < n; ++rank) {
        if (label[rank] != kUnvisited) continue;
        grid.query(points[order[rank]], order, neigh);
        if (static_cast<int>(neigh.size()) < params.min_pts) {
            label[rank] = -1; // noise, may be adopted as a border point later
            continue;
        }
        const int cluster = next_cluster++;
        label[rank] = cluster;
        std::deque<std::uint32_t> queue(neigh.begin(), neigh.end());
        while (!queue.empty()) {
            const std::uint32_t q = queue.front();
            queue.pop_front();
            if (label[q] == -1) label[q] = cluster; // border point
            if (label[q] != kUnvisited) continue;
            label[q] = cluster;
            grid.query(points[order[q]], order, seed_neigh);
            if (static_cast<int>(seed_neigh.size()) >= params.min_pts)
                queue.insert(queue.end(), seed_neigh.begin(), seed_neigh.end());
        }
    }

    for (std::uint32_t rank = 0; rank < n; ++rank)
        result.labels[order[rank]] = label[rank];
    result.cluster_count = next_cluster;
    return result;
}

} // namespace mcmmf
