#include "mcmmf/stm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mcmmf/errors.hpp"
#include "mcmmf/rng.hpp"

namespace mcmmf {

const StmCore* Stm::find(std::uint32_t id) const {
    for (const StmCore& c : cores)
        if (c.id == id) return &c;
    return nullptr;
}

namespace {

// AOI pixels ordered by Chebyshev ring around the rect centre, so a prefix
// of the list is always a centered block and pixel budgets nest.
std::vector<PixelCoord> ring_ordered_pixels(const AoiRect& aoi) {
    const double cx = aoi.x0 + (aoi.width - 1) / 2.0;
    const double cy = aoi.y0 + (aoi.height - 1) / 2.0;
    std::vector<PixelCoord> px;
    px.reserve(static_cast<std::size_t>(aoi.area()));
    for (int y = aoi.y0; y < aoi.y0 + aoi.height; ++y)
        for (int x = aoi.x0; x < aoi.x0 + aoi.width; ++x)
            px.push_back({static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)});
    std::sort(px.begin(), px.end(), [&](const PixelCoord& a, const PixelCoord& b) {
        const double ra = std::max(std::abs(a.x - cx), std::abs(a.y - cy));
        const double rb = std::max(std::abs(b.x - cx), std::abs(b.y - cy));
        if (ra != rb) return ra < rb;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    return px;
}

constexpr double kFullScale = 4095.0;

} // namespace

Stm calibrate(const std::vector<SpeckleFrame>& frames, const WavelengthGrid& grid,
              const CoreMap& map, int pixels_per_core, CalibrationReport* report) {
    grid.validate();
    if (pixels_per_core < 1)
        throw std::invalid_argument("pixels_per_core must be >= 1");
    if (frames.size() != grid.size())
        throw calibration_error("need one frame per grid wavelength, got " +
                                std::to_string(frames.size()) + " frames for " +
                                std::to_string(grid.size()) + " wavelengths");
    for (const SpeckleFrame& f : frames)
        if (f.width != map.frame_width || f.height != map.frame_height)
            throw calibration_error("frame size does not match the core map");

    Stm stm;
    stm.grid = grid;
    const int x_count = static_cast<int>(grid.size());

    for (const CoreSite& site : map.sites) {
        std::vector<PixelCoord> px = ring_ordered_pixels(site.aoi);
        if (static_cast<int>(px.size()) < pixels_per_core) {
            if (report)
                report->skipped_sites.push_back(static_cast<std::uint32_t>(site.id));
            continue;
        }
        px.resize(static_cast<std::size_t>(pixels_per_core));

        StmCore core;
        core.id = static_cast<std::uint32_t>(site.id);
        core.cx = site.cx;
        core.cy = site.cy;
        core.pixels = std::move(px);
        core.matrix.resize(pixels_per_core, x_count);
        for (int j = 0; j < x_count; ++j) {
            const SpeckleFrame& f = frames[static_cast<std::size_t>(j)];
            for (int i = 0; i < pixels_per_core; ++i) {
                const PixelCoord& p = core.pixels[static_cast<std::size_t>(i)];
                core.matrix(i, j) = static_cast<float>(
                    f.at(static_cast<int>(p.x), static_cast<int>(p.y)) / kFullScale);
            }
        }
        stm.cores.push_back(std::move(core));
    }
    return stm;
}

Eigen::VectorXd extract_pixel_vector(const SpeckleFrame& frame, const Stm& stm,
                                     std::uint32_t core_id) {
    const StmCore* core = stm.find(core_id);
    if (!core)
        throw lookup_error("extract_pixel_vector: unknown core id " +
                           std::to_string(core_id));
    Eigen::VectorXd y(static_cast<Eigen::Index>(core->pixels.size()));
    for (std::size_t i = 0; i < core->pixels.size(); ++i) {
        const PixelCoord& p = core->pixels[i];
        if (static_cast<int>(p.x) >= frame.width ||
            static_cast<int>(p.y) >= frame.height)
            throw std::invalid_argument(
                "extract_pixel_vector: frame does not cover the core pixels");
        y(static_cast<Eigen::Index>(i)) =
            frame.at(static_cast<int>(p.x), static_cast<int>(p.y)) / kFullScale;
    }
    return y;
}

std::vector<int> subsample_rows(const StmCore& core, double ratio, int channels,
                                std::uint64_t seed, SubsampleMode mode) {
    if (!(ratio > 0.0))
        throw std::invalid_argument("subsample ratio must be > 0");
    const int keep = static_cast<int>(std::llround(ratio * channels));
    if (keep < 1)
        throw std::invalid_argument("subsample keeps no rows at this ratio");
    const int rows = static_cast<int>(core.rows());
    if (keep > rows)
        throw std::invalid_argument(
            "subsample: core " + std::to_string(core.id) + " has " +
            std::to_string(rows) + " rows, ratio needs " + std::to_string(keep));
    if (mode == SubsampleMode::kBlock) {
        std::vector<int> sel(static_cast<std::size_t>(keep));
        for (int i = 0; i < keep; ++i) sel[static_cast<std::size_t>(i)] = i;
        return sel;
    }
    Rng rng(Rng::mix(seed, core.id));
    const std::vector<std::uint32_t> sel = rng.sample_sorted(
        static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(keep));
    return std::vector<int>(sel.begin(), sel.end());
}

Stm subsample(const Stm& stm, double ratio, std::uint64_t seed,
              SubsampleMode mode) {
    if (!(ratio > 0.0))
        throw std::invalid_argument("subsample ratio must be > 0");
    const int x_count = static_cast<int>(stm.grid.size());
    if (std::llround(ratio * x_count) < 1)
        throw std::invalid_argument("subsample keeps no rows at this ratio");
    Stm out;
    out.grid = stm.grid;
    for (const StmCore& core : stm.cores) {
        const std::vector<int> sel =
            subsample_rows(core, ratio, x_count, seed, mode);
        StmCore sub;
        sub.id = core.id;
        sub.cx = core.cx;
        sub.cy = core.cy;
        sub.pixels.reserve(sel.size());
        sub.matrix.resize(static_cast<Eigen::Index>(sel.size()), x_count);
        for (std::size_t i = 0; i < sel.size(); ++i) {
            const std::size_t r = static_cast<std::size_t>(sel[i]);
            sub.pixels.push_back(core.pixels[r]);
            sub.matrix.row(static_cast<Eigen::Index>(i)) =
                core.matrix.row(static_cast<Eigen::Index>(r));
        }
        out.cores.push_back(std::move(sub));
    }
    return out;
}

namespace {

// The container is little-endian on disk; these helpers write native
// x86/ARM little-endian bytes directly.
template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
public:
    explicit Reader(std::ifstream& in) : in_(in) {}

    template <class T>
    T get(const char* what) {
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (in_.gcount() != static_cast<std::streamsize>(sizeof(T)))
            throw format_error(std::string("stm: truncated while reading ") + what,
                               offset_);
        offset_ += sizeof(T);
        return v;
    }

    void get_bytes(void* dst, std::size_t n, const char* what) {
        in_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n)
            throw format_error(std::string("stm: truncated while reading ") + what,
                               offset_ + static_cast<std::size_t>(in_.gcount()));
        offset_ += n;
    }

    std::size_t offset() const { return offset_; }

private:
    std::ifstream& in_;
    std::size_t offset_ = 0;
};

} // namespace

void save_stm(const Stm& stm, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_stm: cannot open " + path);

    out.write("STM1", 4);
    put<std::uint32_t>(out, 1); // version
    put<std::uint32_t>(out, static_cast<std::uint32_t>(stm.cores.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(stm.grid.size()));
    for (double v : stm.grid.values_nm) put<double>(out, v);

    for (const StmCore& core : stm.cores) {
        put<std::uint32_t>(out, core.id);
        put<double>(out, core.cx);
        put<double>(out, core.cy);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(core.rows()));
        for (const PixelCoord& p : core.pixels) {
            put<std::uint32_t>(out, p.x);
            put<std::uint32_t>(out, p.y);
        }
        out.write(reinterpret_cast<const char*>(core.matrix.data()),
                  static_cast<std::streamsize>(sizeof(float) * core.matrix.size()));
    }
    if (!out) throw std::runtime_error("save_stm: write failed for " + path);
}

Stm load_stm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_stm: cannot open " + path);
    Reader r(in);

    char magic[4];
    r.get_bytes(magic, 4, "magic");
    if (std::memcmp(magic, "STM1", 4) != 0)
        throw format_error("stm: expected magic 'STM1'", 0);
    const std::uint32_t version = r.get<std::uint32_t>("version");
    if (version != 1)
        throw format_error("stm: unsupported version " + std::to_string(version), 4);

    const std::uint32_t core_count = r.get<std::uint32_t>("core count");
    const std::uint32_t x_count = r.get<std::uint32_t>("wavelength count");
    if (core_count > 1000000 || x_count == 0 || x_count > 1000000)
        throw format_error("stm: implausible table sizes", 8);

    Stm stm;
    stm.grid.values_nm.resize(x_count);
    for (std::uint32_t j = 0; j < x_count; ++j)
        stm.grid.values_nm[j] = r.get<double>("grid value");
    stm.grid.validate();

    stm.cores.resize(core_count);
    for (std::uint32_t c = 0; c < core_count; ++c) {
        StmCore& core = stm.cores[c];
        core.id = r.get<std::uint32_t>("core id");
        core.cx = r.get<double>("core cx");
        core.cy = r.get<double>("core cy");
        const std::uint32_t rows = r.get<std::uint32_t>("pixel count");
        if (rows == 0 || rows > 100000000)
            throw format_error("stm: implausible pixel count", r.offset() - 4);
        core.pixels.resize(rows);
        for (std::uint32_t i = 0; i < rows; ++i) {
            core.pixels[i].x = r.get<std::uint32_t>("pixel x");
            core.pixels[i].y = r.get<std::uint32_t>("pixel y");
        }
        core.matrix.resize(rows, x_count);
        r.get_bytes(core.matrix.data(), sizeof(float) * core.matrix.size(),
                    "matrix data");
    }
    return stm;
}

} // namespace mcmmf
