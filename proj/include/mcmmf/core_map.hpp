#pragma once

#include <string>
#include <vector>

#include "mcmmf/dbscan.hpp"
#include "mcmmf/frame.hpp"

namespace mcmmf {

// Axis-aligned analysis window around a core, clipped to the frame.
struct AoiRect {
    int x0 = 0;
    int y0 = 0;
    int width = 0;
    int height = 0;

    int area() const { return width * height; }
};

struct CoreSite {
    int id = 0;
    double cx = 0.0;
    double cy = 0.0;
    AoiRect aoi;
};

// Detected core positions of one bundle frame. Sites are sorted by (cy, cx)
// and carry dense ids starting at 0.
struct CoreMap {
    int frame_width = 0;
    int frame_height = 0;
    int aoi_size_px = 0; // nominal (unclipped) AOI side
    std::vector<CoreSite> sites;

    const CoreSite* find(int id) const;
    bool clipped(const CoreSite& site) const {
        return site.aoi.width != aoi_size_px || site.aoi.height != aoi_size_px;
    }
};

// Otsu's threshold over a 4096-bin count histogram.
int otsu_threshold(const SpeckleFrame& frame);

// Core detection: threshold, DBSCAN over bright pixels, intensity-weighted
// centroids, duplicate merging (pairs closer than half the median
// nearest-neighbor distance collapse onto the brighter cluster's centroid),
// then AOI assignment. An empty result is a valid "no cores found" outcome,
// not an error.
CoreMap extract_core_map(const SpeckleFrame& frame, const DbscanParams& params,
                         int aoi_size_px);

// Returns a copy with AOIs recentred on the stored centroids at a new size.
CoreMap with_aoi_size(const CoreMap& map, int aoi_size_px);

void save_core_map(const CoreMap& map, const std::string& path);
CoreMap load_core_map(const std::string& path);

} // namespace mcmmf
