#include "mcmmf/core_map.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "mcmmf/errors.hpp"

namespace mcmmf {

using nlohmann::json;

const CoreSite* CoreMap::find(int id) const {
    for (const CoreSite& s : sites)
        if (s.id == id) return &s;
    return nullptr;
}

int otsu_threshold(const SpeckleFrame& frame) {
    if (frame.counts.empty())
        throw std::invalid_argument("otsu_threshold: empty frame");
    std::array<std::int64_t, 4096> hist{};
    for (std::uint16_t v : frame.counts) ++hist[v];

    const double total = static_cast<double>(frame.counts.size());
    double sum_all = 0.0;
    for (int v = 0; v < 4096; ++v) sum_all += static_cast<double>(v) * hist[v];

    double w0 = 0.0, sum0 = 0.0, best_var = -1.0;
    int best_t = 0;
    for (int t = 0; t < 4095; ++t) {
        w0 += static_cast<double>(hist[t]);
        if (w0 == 0.0) continue;
        const double w1 = total - w0;
        if (w1 == 0.0) break;
        sum0 += static_cast<double>(t) * hist[t];
        const double mu0 = sum0 / w0;
        const double mu1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
        if (between > best_var) {
            best_var = between;
            best_t = t;
        }
    }
    return best_t;
}

namespace {

struct Centroid {
    double x = 0.0;
    double y = 0.0;
    double brightness = 0.0; // total count of the cluster
};

AoiRect make_aoi(double cx, double cy, int aoi, int frame_w, int frame_h) {
    AoiRect r;
    int x0 = static_cast<int>(std::lround(cx - (aoi - 1) / 2.0));
    int y0 = static_cast<int>(std::lround(cy - (aoi - 1) / 2.0));
    int x1 = x0 + aoi;
    int y1 = y0 + aoi;
    x0 = std::max(x0, 0);
    y0 = std::max(y0, 0);
    x1 = std::min(x1, frame_w);
    y1 = std::min(y1, frame_h);
    r.x0 = x0;
    r.y0 = y0;
    r.width = std::max(0, x1 - x0);
    r.height = std::max(0, y1 - y0);
    return r;
}

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(int a, int b) { parent[find(a)] = find(b); }
};

// Collapses centroid pairs closer than half the median nearest-neighbor
// distance; each merged group keeps the brightest member's centroid.
std::vector<Centroid> merge_duplicates(std::vector<Centroid> cents) {
    const std::size_t k = cents.size();
    if (k < 2) return cents;

    std::vector<double> nn(k, std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const double dx = cents[i].x - cents[j].x;
            const double dy = cents[i].y - cents[j].y;
            const double d = std::sqrt(dx * dx + dy * dy);
            nn[i] = std::min(nn[i], d);
            nn[j] = std::min(nn[j], d);
        }
    }
    std::vector<double> sorted_nn = nn;
    std::sort(sorted_nn.begin(), sorted_nn.end());
    const double median = k % 2 == 1
                              ? sorted_nn[k / 2]
                              : 0.5 * (sorted_nn[k / 2 - 1] + sorted_nn[k / 2]);
    const double limit = 0.5 * median;

    UnionFind uf(k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const double dx = cents[i].x - cents[j].x;
            const double dy = cents[i].y - cents[j].y;
            if (std::sqrt(dx * dx + dy * dy) < limit)
                uf.unite(static_cast<int>(i), static_cast<int>(j));
        }
    }

    std::vector<int> best(k, -1);
    for (std::size_t i = 0; i < k; ++i) {
        const int root = uf.find(static_cast<int>(i));
        if (best[static_cast<std::size_t>(root)] < 0 ||
            cents[i].brightness >
                cents[static_cast<std::size_t>(best[static_cast<std::size_t>(root)])]
                    .brightness)
            best[static_cast<std::size_t>(root)] = static_cast<int>(i);
    }
    std::vector<Centroid> merged;
    for (std::size_t i = 0; i < k; ++i)
        if (best[i] >= 0)
            merged.push_back(cents[static_cast<std::size_t>(best[i])]);
    return merged;
}

} // namespace

CoreMap extract_core_map(const SpeckleFrame& frame, const DbscanParams& params,
                         int aoi_size_px) {
    params.validate();
    if (frame.width <= 0 || frame.height <= 0)
        throw std::invalid_argument("extract_core_map: empty frame");
    if (aoi_size_px < 1)
        throw std::invalid_argument("aoi_size_px must be >= 1");

    const int threshold =
        params.intensity_threshold ? *params.intensity_threshold
                                   : otsu_threshold(frame);

    std::vector<Vec2> points;
    std::vector<double> weights;
    for (int y = 0; y < frame.height; ++y) {
        for (int x = 0; x < frame.width; ++x) {
            const int v = frame.at(x, y);
            if (v > threshold) {
                points.push_back({static_cast<double>(x), static_cast<double>(y)});
                weights.push_back(static_cast<double>(v));
            }
        }
    }

    CoreMap map;
    map.frame_width = frame.width;
    map.frame_height = frame.height;
    map.aoi_size_px = aoi_size_px;

    const ClusterLabeling labeling = dbscan(points, params);
    if (labeling.cluster_count == 0) return map;

    std::vector<Centroid> cents(static_cast<std::size_t>(labeling.cluster_count));
    for (std::size_t i = 0; i < points.size(); ++i) {
        const int c = labeling.labels[i];
        if (c < 0) continue;
        Centroid& cen = cents[static_cast<std::size_t>(c)];
        cen.x += weights[i] * points[i].x;
        cen.y += weights[i] * points[i].y;
        cen.brightness += weights[i];
    }
    for (Centroid& c : cents) {
        c.x /= c.brightness;
        c.y /= c.brightness;
    }

    cents = merge_duplicates(std::move(cents));
    std::sort(cents.begin(), cents.end(), [](const Centroid& a, const Centroid& b) {
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });

    map.sites.resize(cents.size());
    for (std::size_t i = 0; i < cents.size(); ++i) {
        CoreSite& s = map.sites[i];
        s.id = static_cast<int>(i);
        s.cx = cents[i].x;
        s.cy = cents[i].y;
        s.aoi = make_aoi(s.cx, s.cy, aoi_size_px, frame.width, frame.height);
    }
    return map;
}

CoreMap with_aoi_size(const CoreMap& map, int aoi_size_px) {
    if (aoi_size_px < 1)
        throw std::invalid_argument("aoi_size_px must be >= 1");
    CoreMap out = map;
    out.aoi_size_px = aoi_size_px;
    for (CoreSite& s : out.sites)
        s.aoi = make_aoi(s.cx, s.cy, aoi_size_px, map.frame_width, map.frame_height);
    return out;
}

void save_core_map(const CoreMap& map, const std::string& path) {
    json sites = json::array();
    for (const CoreSite& s : map.sites) {
        sites.push_back({{"id", s.id},
                         {"cx", s.cx},
                         {"cy", s.cy},
                         {"aoi", {s.aoi.x0, s.aoi.y0, s.aoi.width, s.aoi.height}}});
    }
    json doc = {{"frame", {{"w", map.frame_width}, {"h", map.frame_height}}},
                {"sites", sites}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_core_map: cannot open " + path);
    out << doc.dump(2) << "\n";
}

CoreMap load_core_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_core_map: cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw format_error("core map: " + std::string(e.what()),
                           static_cast<std::size_t>(e.byte));
    }
    CoreMap map;
    try {
        map.frame_width = doc.at("frame").at("w").get<int>();
        map.frame_height = doc.at("frame").at("h").get<int>();
        for (const json& js : doc.at("sites")) {
            CoreSite s;
            s.id = js.at("id").get<int>();
            s.cx = js.at("cx").get<double>();
            s.cy = js.at("cy").get<double>();
            const auto& aoi = js.at("aoi");
            if (!aoi.is_array() || aoi.size() != 4)
                throw std::invalid_argument("aoi must be [x0, y0, w, h]");
            s.aoi.x0 = aoi[0].get<int>();
            s.aoi.y0 = aoi[1].get<int>();
            s.aoi.width = aoi[2].get<int>();
            s.aoi.height = aoi[3].get<int>();
            map.sites.push_back(s);
        }
    } catch (const json::exception& e) {
        throw format_error("core map: " + std::string(e.what()), 0);
    }
    for (const CoreSite& s : map.sites)
        map.aoi_size_px = std::max({map.aoi_size_px, s.aoi.width, s.aoi.height});
    return map;
}

} // namespace mcmmf
