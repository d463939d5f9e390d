#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mcmmf/bundle.hpp"

namespace mcmmf {

struct DbscanParams {
    double eps = 3.0;
    int min_pts = 13;
    // Pixels strictly above this count become clustering points; unset means
    // pick a threshold automatically (Otsu).
    std::optional<int> intensity_threshold;

    void validate() const;
};

// labels[i] is the cluster id of points[i] (dense ids starting at 0, in
// order of cluster creation) or -1 for noise.
struct ClusterLabeling {
    std::vector<int> labels;
    int cluster_count = 0;
};

// Euclidean DBSCAN. A point's eps-neighborhood includes the point itself and
// membership is inclusive (distance <= eps). Core points have at least
// min_pts neighbors; border points join the first cluster that reaches
// them. Points are visited in (y, x) order regardless of input order, so the
// labeling is fully deterministic.
ClusterLabeling dbscan(std::span<const Vec2> points, const DbscanParams& params);

} // namespace mcmmf
