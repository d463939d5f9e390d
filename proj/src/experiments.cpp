#include "mcmmf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "mcmmf/stats.hpp"

namespace mcmmf {

void Scene::validate(int core_count) const {
    grid.validate();
    if (weights.rows() != core_count)
        throw std::invalid_argument("scene weights must have one row per core");
    if (weights.cols() != static_cast<Eigen::Index>(grid.size()))
        throw std::invalid_argument("scene weights must have one column per channel");
    if (!weights.allFinite() || weights.minCoeff() < 0.0 || weights.maxCoeff() > 1.0)
        throw std::invalid_argument("scene weights must lie in [0, 1]");
}

Eigen::VectorXd random_spectrum(int channels, int n_lambda, Rng& rng) {
    if (channels < 1)
        throw std::invalid_argument("random_spectrum: channels must be >= 1");
    if (n_lambda < 1 || n_lambda > channels)
        throw std::invalid_argument(
            "random_spectrum: n_lambda must be in [1, channels]");

    std::vector<std::uint32_t> support =
        rng.sample_sorted(static_cast<std::uint32_t>(channels),
                          static_cast<std::uint32_t>(n_lambda));
    Eigen::VectorXd s = Eigen::VectorXd::Zero(channels);
    double total = 0.0;
    for (std::uint32_t c : support) {
        const double a = rng.uniform(0.2, 1.0);
        s(static_cast<Eigen::Index>(c)) = a;
        total += a;
    }
    return s / total;
}

SpeckleFrame render_scene(const Bundle& bundle, const Scene& scene, int threads) {
    scene.validate(bundle.core_count());
    Eigen::ArrayXXd acc;
    std::vector<double> weights(static_cast<std::size_t>(bundle.core_count()));
    for (Eigen::Index j = 0; j < scene.weights.cols(); ++j) {
        if (scene.weights.col(j).maxCoeff() <= 0.0) continue;
        for (int i = 0; i < bundle.core_count(); ++i)
            weights[static_cast<std::size_t>(i)] = scene.weights(i, j);
        accumulate_channel(bundle, weights,
                           scene.grid.values_nm[static_cast<std::size_t>(j)], acc,
                           threads);
    }
    if (acc.size() == 0)
        acc = Eigen::ArrayXXd::Zero(bundle.layout.frame_height,
                                    bundle.layout.frame_width);
    return quantize_frame(acc);
}

Eigen::VectorXd add_noise(const Eigen::VectorXd& v, double strength, Rng& rng) {
    if (strength < 0.0)
        throw std::invalid_argument("add_noise: strength must be >= 0");
    if (v.size() == 0)
        throw std::invalid_argument("add_noise: empty vector");
    const double level = strength * v.mean();
    Eigen::VectorXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out(i) = v(i) + rng.uniform(0.0, level);
    return out;
}

Lab make_lab(const FiberSpec& fiber, const SourceModel& source,
             const RenderParams& render, const DbscanParams& clustering,
             const WavelengthGrid& grid, int core_count, int aoi_px,
             int pixels_per_core, std::uint64_t seed, int threads) {
    grid.validate();
    Lab lab;
    lab.threads = threads;
    lab.grid = grid;
    lab.bundle = Bundle::build(fiber, source, render, core_count,
                               Rng::mix(seed, 1), threads);

    const std::vector<double> ones(static_cast<std::size_t>(core_count), 1.0);
    std::vector<SpeckleFrame> frames;
    frames.reserve(grid.size());
    for (double lambda : grid.values_nm)
        frames.push_back(render_bundle(lab.bundle, ones, lambda, threads));

    // Averaging the calibration stack washes speckle out of the detection
    // frame, leaving near-uniform patches for the clustering stage.
    lab.detection_frame = average_frames(frames);
    lab.map = extract_core_map(lab.detection_frame, clustering, aoi_px);
    lab.stm = calibrate(frames, grid, lab.map, pixels_per_core);

    lab.site_to_core.assign(lab.map.sites.size(), -1);
    for (std::size_t s = 0; s < lab.map.sites.size(); ++s) {
        const CoreSite& site = lab.map.sites[s];
        double best = 3.0; // px
        for (int c = 0; c < core_count; ++c) {
            const Vec2& p = lab.bundle.layout.centroids[static_cast<std::size_t>(c)];
            const double d = std::hypot(p.x - site.cx, p.y - site.cy);
            if (d <= best) {
                best = d;
                lab.site_to_core[s] = c;
            }
        }
    }
    return lab;
}

namespace {

// Correlation of each core's reconstruction against its ground truth row.
void score_batch(const Lab& lab, const BatchResult& batch,
                 const Eigen::MatrixXd& truth_weights, double axis_value,
                 SweepResult& out) {
    std::vector<double> corrs;
    corrs.reserve(batch.spectra.size());
    for (std::size_t i = 0; i < lab.stm.cores.size(); ++i) {
        const std::uint32_t id = lab.stm.cores[i].id;
        const int core = lab.site_to_core[static_cast<std::size_t>(id)];
        if (core < 0) continue;
        const Eigen::VectorXd gt = truth_weights.row(core);
        const Eigen::VectorXd& rec = batch.spectra[i];
        std::vector<double> gt_v(gt.data(), gt.data() + gt.size());
        std::vector<double> rec_v(rec.data(), rec.data() + rec.size());
        corrs.push_back(pearson(gt_v, rec_v));
    }
    if (corrs.empty())
        throw std::runtime_error("sweep: no scorable cores");
    out.axis.push_back(axis_value);
    out.mean_corr.push_back(mean(corrs));
    out.std_corr.push_back(stddev(corrs));
    out.n_cores = static_cast<int>(corrs.size());
}

Scene shared_spectrum_scene(const Lab& lab, const Eigen::VectorXd& spectrum) {
    Scene scene;
    scene.grid = lab.grid;
    scene.weights.resize(lab.bundle.core_count(),
                         static_cast<Eigen::Index>(lab.grid.size()));
    for (int i = 0; i < lab.bundle.core_count(); ++i)
        scene.weights.row(i) = spectrum.transpose();
    return scene;
}

// Full-length measurement vectors with the instrument noise floor applied,
// one per STM core, in core order.
std::vector<Eigen::VectorXd> measure_cores(const Lab& lab,
                                           const SpeckleFrame& frame,
                                           double measurement_noise,
                                           std::uint64_t noise_seed) {
    std::vector<Eigen::VectorXd> measured;
    measured.reserve(lab.stm.cores.size());
    for (const StmCore& core : lab.stm.cores) {
        const Eigen::VectorXd v = extract_pixel_vector(frame, lab.stm, core.id);
        Rng rng(Rng::mix(noise_seed, core.id));
        measured.push_back(add_noise(v, measurement_noise, rng));
    }
    return measured;
}

// Slices measured vectors down to the rows subsample() kept for each core.
std::vector<Eigen::VectorXd> slice_measurements(
    const Lab& lab, const std::vector<Eigen::VectorXd>& measured, double ratio,
    std::uint64_t subsample_seed) {
    const int channels = static_cast<int>(lab.grid.size());
    std::vector<Eigen::VectorXd> sliced(measured.size());
    for (std::size_t i = 0; i < lab.stm.cores.size(); ++i) {
        const std::vector<int> rows =
            subsample_rows(lab.stm.cores[i], ratio, channels, subsample_seed);
        Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
            y(static_cast<Eigen::Index>(r)) = measured[i](rows[r]);
        sliced[i] = std::move(y);
    }
    return sliced;
}

} // namespace

std::vector<SweepResult> sweep_sampling(const Lab& lab,
                                        const std::vector<int>& n_lambdas,
                                        const std::vector<double>& ratios,
                                        const SolveOptions& options,
                                        double measurement_noise,
                                        std::uint64_t seed) {
    if (n_lambdas.empty() || ratios.empty())
        throw std::invalid_argument("sweep_sampling: empty axis");
    std::vector<SweepResult> results;
    for (std::size_t s = 0; s < n_lambdas.size(); ++s) {
        const int nl = n_lambdas[s];
        Rng rng(Rng::mix(seed, 10 + static_cast<std::uint64_t>(nl)));
        const Eigen::VectorXd spectrum =
            random_spectrum(static_cast<int>(lab.grid.size()), nl, rng);
        const Scene scene = shared_spectrum_scene(lab, spectrum);
        const SpeckleFrame frame = render_scene(lab.bundle, scene, lab.threads);
        const std::vector<Eigen::VectorXd> measured =
            measure_cores(lab, frame, measurement_noise,
                          Rng::mix(Rng::mix(seed, 23), static_cast<std::uint64_t>(nl)));

        SweepResult r;
        r.label = "n_lambda_" + std::to_string(nl);
        r.seed = seed;
        for (double ratio : ratios) {
            const Stm sub = subsample(lab.stm, ratio, Rng::mix(seed, 17));
            const std::vector<Eigen::VectorXd> ys =
                slice_measurements(lab, measured, ratio, Rng::mix(seed, 17));
            const BatchResult batch =
                solve_batch_vectors(sub, ys, options, lab.threads);
            score_batch(lab, batch, scene.weights, ratio, r);
        }
        results.push_back(std::move(r));
    }
    return results;
}

std::vector<SweepResult> sweep_sparsity(const Lab& lab,
                                        const std::vector<int>& n_lambda_axis,
                                        const std::vector<double>& ratios,
                                        const SolveOptions& options,
                                        double measurement_noise,
                                        std::uint64_t seed) {
    if (n_lambda_axis.empty() || ratios.empty())
        throw std::invalid_argument("sweep_sparsity: empty axis");
    std::vector<SweepResult> results(ratios.size());
    for (std::size_t k = 0; k < ratios.size(); ++k) {
        char label[32];
        std::snprintf(label, sizeof label, "ratio_%.4g", ratios[k]);
        results[k].label = label;
        results[k].seed = seed;
    }

    for (int nl : n_lambda_axis) {
        Rng rng(Rng::mix(seed, 100 + static_cast<std::uint64_t>(nl)));
        const Eigen::VectorXd spectrum =
            random_spectrum(static_cast<int>(lab.grid.size()), nl, rng);
        const Scene scene = shared_spectrum_scene(lab, spectrum);
        const SpeckleFrame frame = render_scene(lab.bundle, scene, lab.threads);
        const std::vector<Eigen::VectorXd> measured =
            measure_cores(lab, frame, measurement_noise,
                          Rng::mix(Rng::mix(seed, 23), static_cast<std::uint64_t>(nl)));
        for (std::size_t k = 0; k < ratios.size(); ++k) {
            const Stm sub = subsample(lab.stm, ratios[k], Rng::mix(seed, 17));
            const std::vector<Eigen::VectorXd> ys =
                slice_measurements(lab, measured, ratios[k], Rng::mix(seed, 17));
            const BatchResult batch =
                solve_batch_vectors(sub, ys, options, lab.threads);
            score_batch(lab, batch, scene.weights, static_cast<double>(nl),
                        results[k]);
        }
    }
    return results;
}

std::vector<SweepResult> sweep_noise(const Lab& lab,
                                     const std::vector<double>& noise_axis,
                                     const std::vector<double>& ratios,
                                     const SolveOptions& options,
                                     double measurement_noise,
                                     std::uint64_t seed) {
    if (noise_axis.empty() || ratios.empty())
        throw std::invalid_argument("sweep_noise: empty axis");
    Rng rng(Rng::mix(seed, 200));
    const Eigen::VectorXd spectrum =
        random_spectrum(static_cast<int>(lab.grid.size()), 1, rng);
    const Scene scene = shared_spectrum_scene(lab, spectrum);
    const SpeckleFrame frame = render_scene(lab.bundle, scene, lab.threads);
    const std::vector<Eigen::VectorXd> measured =
        measure_cores(lab, frame, measurement_noise, Rng::mix(seed, 23));

    std::vector<SweepResult> results(ratios.size());
    for (std::size_t k = 0; k < ratios.size(); ++k) {
        char label[32];
        std::snprintf(label, sizeof label, "ratio_%.4g", ratios[k]);
        results[k].label = label;
        results[k].seed = seed;

        const Stm sub = subsample(lab.stm, ratios[k], Rng::mix(seed, 17));
        const std::vector<Eigen::VectorXd> clean =
            slice_measurements(lab, measured, ratios[k], Rng::mix(seed, 17));

        for (std::size_t n = 0; n < noise_axis.size(); ++n) {
            std::vector<Eigen::VectorXd> noisy(clean.size());
            for (std::size_t i = 0; i < clean.size(); ++i) {
                Rng noise_rng(Rng::mix(Rng::mix(Rng::mix(seed, 300 + n), k),
                                       sub.cores[i].id));
                noisy[i] = add_noise(clean[i], noise_axis[n], noise_rng);
            }
            const BatchResult batch =
                solve_batch_vectors(sub, noisy, options, lab.threads);
            score_batch(lab, batch, scene.weights, noise_axis[n], results[k]);
        }
    }
    return results;
}

void write_sweep_csv(const SweepResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_sweep_csv: cannot open " + path);
    out << "axis,mean_corr,std_corr,n_cores,seed\n";
    char line[160];
    for (std::size_t i = 0; i < result.axis.size(); ++i) {
        std::snprintf(line, sizeof line, "%.10g,%.10g,%.10g,%d,%llu\n",
                      result.axis[i], result.mean_corr[i], result.std_corr[i],
                      result.n_cores,
                      static_cast<unsigned long long>(result.seed));
        out << line;
    }
    if (!out) throw std::runtime_error("write_sweep_csv: write failed " + path);
}

namespace {

// 5x7 uppercase bitmaps, 5 low bits per row, MSB = left column.
constexpr std::uint8_t kFont5x7[26][7] = {
    {0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}, // A
    {0x1e, 0x11, 0x11, 0x1e, 0x11, 0x11, 0x1e}, // B
    {0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}, // C
    {0x1e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1e}, // D
    {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x1f}, // E
    {0x1f, 0x10, 0x10, 0x1e, 0x10, 0x10, 0x10}, // F
    {0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f}, // G
    {0x11, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}, // H
    {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}, // I
    {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c}, // J
    {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}, // K
    {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f}, // L
    {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}, // M
    {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}, // N
    {0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}, // O
    {0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10}, // P
    {0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d}, // Q
    {0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11}, // R
    {0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}, // S
    {0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}, // T
    {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}, // U
    {0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04}, // V
    {0x11, 0x11, 0x11, 0x15, 0x15, 0x1b, 0x11}, // W
    {0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11}, // X
    {0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04}, // Y
    {0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f}, // Z
};

} // namespace

std::vector<double> rasterize_letter(char glyph, const CoreMap& map,
                                     const AoiRect& box) {
    if (glyph < 'A' || glyph > 'Z')
        throw std::invalid_argument("rasterize_letter: glyph must be A-Z");
    if (box.width < 1 || box.height < 1)
        throw std::invalid_argument("rasterize_letter: empty box");

    const std::uint8_t* rows = kFont5x7[glyph - 'A'];
    std::vector<double> weights(map.sites.size(), 0.0);
    for (std::size_t i = 0; i < map.sites.size(); ++i) {
        // Weight = fraction of the site's AOI covered by lit bitmap cells.
        // Cells are disjoint axis-aligned rectangles, so summing exact
        // rectangle intersections is the true covered area.
        const AoiRect& a = map.sites[i].aoi;
        const double ax1 = a.x0 + a.width;
        const double ay1 = a.y0 + a.height;
        double covered = 0.0;
        for (int row = 0; row < 7; ++row) {
            const double cy0 = box.y0 + box.height * (row / 7.0);
            const double cy1 = box.y0 + box.height * ((row + 1) / 7.0);
            const double h = std::min(ay1, cy1) - std::max<double>(a.y0, cy0);
            if (h <= 0.0) continue;
            for (int col = 0; col < 5; ++col) {
                if (!(rows[row] & (0x10 >> col))) continue;
                const double cx0 = box.x0 + box.width * (col / 5.0);
                const double cx1 = box.x0 + box.width * ((col + 1) / 5.0);
                const double w = std::min(ax1, cx1) - std::max<double>(a.x0, cx0);
                if (w > 0.0) covered += w * h;
            }
        }
        weights[i] = covered / (static_cast<double>(a.width) * a.height);
    }
    return weights;
}

Eigen::ArrayXXd assemble_image(const std::vector<double>& values,
                               const CoreMap& map, double core_diameter_px) {
    if (values.size() != map.sites.size())
        throw std::invalid_argument("assemble_image: one value per site required");
    if (!(core_diameter_px > 0.0))
        throw std::invalid_argument("assemble_image: diameter must be > 0");
    Eigen::ArrayXXd img =
        Eigen::ArrayXXd::Zero(map.frame_height, map.frame_width);
    const double r = core_diameter_px / 2.0;
    for (std::size_t i = 0; i < map.sites.size(); ++i) {
        const double v = values[i];
        if (std::isnan(v)) continue;
        const CoreSite& s = map.sites[i];
        const int x0 = std::max(0, static_cast<int>(std::floor(s.cx - r)));
        const int x1 = std::min(map.frame_width - 1,
                                static_cast<int>(std::ceil(s.cx + r)));
        const int y0 = std::max(0, static_cast<int>(std::floor(s.cy - r)));
        const int y1 = std::min(map.frame_height - 1,
                                static_cast<int>(std::ceil(s.cy + r)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x)
                if ((x - s.cx) * (x - s.cx) + (y - s.cy) * (y - s.cy) <= r * r)
                    img(y, x) += v;
    }
    return img;
}

CoreMap truth_core_map(const Bundle& bundle) {
    CoreMap map;
    map.frame_width = bundle.layout.frame_width;
    map.frame_height = bundle.layout.frame_height;
    map.aoi_size_px = bundle.render.patch_size_px;
    map.sites.resize(bundle.layout.centroids.size());
    for (std::size_t i = 0; i < bundle.layout.centroids.size(); ++i) {
        CoreSite& s = map.sites[i];
        s.id = static_cast<int>(i);
        s.cx = bundle.layout.centroids[i].x;
        s.cy = bundle.layout.centroids[i].y;
        const int a = bundle.render.patch_size_px;
        s.aoi.x0 = static_cast<int>(std::lround(s.cx - (a - 1) / 2.0));
        s.aoi.y0 = static_cast<int>(std::lround(s.cy - (a - 1) / 2.0));
        s.aoi.width = a;
        s.aoi.height = a;
    }
    return map;
}

CompositeResult run_composite(const Lab& lab,
                              const std::vector<GlyphAssignment>& assignments,
                              double sampling_ratio, const SolveOptions& options,
                              double measurement_noise, std::uint64_t seed) {
    if (assignments.empty())
        throw std::invalid_argument("run_composite: no assignments");
    const int channels = static_cast<int>(lab.grid.size());
    for (const GlyphAssignment& a : assignments)
        if (a.channel < 0 || a.channel >= channels)
            throw std::invalid_argument("run_composite: channel out of range");

    // Square tiling of the layout centroid bounding box, one tile per
    // assignment (16 letters -> 4x4, one letter -> the full field). Each
    // glyph is drawn with a 10% stencil margin inside its tile so
    // neighbouring apertures stay separated, like physical letter stencils.
    const BundleLayout& layout = lab.bundle.layout;
    double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
    double min_y = min_x, max_y = -min_x;
    for (const Vec2& c : layout.centroids) {
        min_x = std::min(min_x, c.x);
        max_x = std::max(max_x, c.x);
        min_y = std::min(min_y, c.y);
        max_y = std::max(max_y, c.y);
    }
    const int grid_n = static_cast<int>(
        std::ceil(std::sqrt(static_cast<double>(assignments.size()))));
    const double tile_w = (max_x - min_x + 1.0) / grid_n;
    const double tile_h = (max_y - min_y + 1.0) / grid_n;
    auto tile_box = [&](std::size_t i) {
        const int col = static_cast<int>(i) % grid_n;
        const int row = static_cast<int>(i) / grid_n;
        AoiRect box;
        box.x0 = static_cast<int>(std::floor(min_x + tile_w * (col + 0.1)));
        box.y0 = static_cast<int>(std::floor(min_y + tile_h * (row + 0.1)));
        box.width = static_cast<int>(std::ceil(tile_w * 0.8));
        box.height = static_cast<int>(std::ceil(tile_h * 0.8));
        return box;
    };

    const CoreMap truth_map = truth_core_map(lab.bundle);

    CompositeResult result;
    result.assignments = assignments;

    // Scene in layout space: letter i lights its sites at its channel.
    Scene scene;
    scene.grid = lab.grid;
    scene.weights = Eigen::MatrixXd::Zero(lab.bundle.core_count(), channels);
    std::vector<std::vector<double>> truth_weights(assignments.size());
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        truth_weights[i] =
            rasterize_letter(assignments[i].glyph, truth_map, tile_box(i));
        for (int c = 0; c < lab.bundle.core_count(); ++c) {
            const double w = truth_weights[i][static_cast<std::size_t>(c)];
            if (w > 0.0)
                scene.weights(c, assignments[i].channel) =
                    std::min(1.0, scene.weights(c, assignments[i].channel) + w);
        }
        result.wavelengths_nm.push_back(
            lab.grid.values_nm[static_cast<std::size_t>(assignments[i].channel)]);
    }

    const SpeckleFrame frame = render_scene(lab.bundle, scene, lab.threads);
    const std::vector<Eigen::VectorXd> measured =
        measure_cores(lab, frame, measurement_noise, Rng::mix(seed, 23));
    const Stm sub = subsample(lab.stm, sampling_ratio, Rng::mix(seed, 17));
    const std::vector<Eigen::VectorXd> ys =
        slice_measurements(lab, measured, sampling_ratio, Rng::mix(seed, 17));
    result.batch = solve_batch_vectors(sub, ys, options, lab.threads);

    const double diameter_px =
        lab.bundle.fiber.core_diameter_m / lab.bundle.render.pixel_pitch_m;

    // Per-site views: reconstructed channel values and matched truth.
    const std::size_t n_sites = lab.map.sites.size();
    result.crosstalk =
        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(assignments.size()),
                              static_cast<Eigen::Index>(assignments.size()));
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        std::vector<double> recon(n_sites, std::numeric_limits<double>::quiet_NaN());
        std::vector<double> truth_site(n_sites, 0.0);
        for (std::size_t s = 0; s < sub.cores.size(); ++s) {
            const std::uint32_t id = sub.cores[s].id;
            recon[id] = result.batch.spectra[s](assignments[i].channel);
            const int core = lab.site_to_core[id];
            if (core >= 0)
                truth_site[id] = truth_weights[i][static_cast<std::size_t>(core)];
        }
        result.maps.push_back(assemble_image(recon, lab.map, diameter_px));
        result.truth.push_back(assemble_image(truth_site, lab.map, diameter_px));

        // Energy of letter i's sites at every assigned channel.
        for (std::size_t j = 0; j < assignments.size(); ++j) {
            double e = 0.0;
            for (std::size_t s = 0; s < sub.cores.size(); ++s) {
                const std::uint32_t id = sub.cores[s].id;
                if (truth_site[id] > 0.5)
                    e += result.batch.spectra[s](assignments[j].channel);
            }
            result.crosstalk(static_cast<Eigen::Index>(i),
                             static_cast<Eigen::Index>(j)) = e;
        }
    }
    return result;
}

} // namespace mcmmf
