#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mcmmf/errors.hpp"
#include "mcmmf/experiments.hpp"
#include "mcmmf/rng.hpp"
#include "mcmmf/stats.hpp"

using namespace mcmmf;

namespace {

// Small but complete instrument shared by the lab-level cases below. Built
// once; everything downstream of it is deterministic in (lab, seed).
const Lab& tiny_lab() {
    static const Lab lab = [] {
        FiberSpec fiber;
        SourceModel source;
        RenderParams render;
        render.patch_size_px = 12;
        render.margin_px = 8;
        DbscanParams clustering;
        const WavelengthGrid grid = WavelengthGrid::regular(660.0, 2.0, 5);
        return make_lab(fiber, source, render, clustering, grid,
                        /*core_count=*/12, /*aoi_px=*/8,
                        /*pixels_per_core=*/36, /*seed=*/5150);
    }();
    return lab;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Regular grid of touching AOI cells, one site per cell, aligned with the
// 5x7 bitmap so rasterized weights take exact values.
CoreMap cell_map(int cols, int rows, int cell_px) {
    CoreMap map;
    map.frame_width = cols * cell_px;
    map.frame_height = rows * cell_px;
    map.aoi_size_px = cell_px;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            CoreSite s;
            s.id = r * cols + c;
            s.cx = c * cell_px + (cell_px - 1) / 2.0;
            s.cy = r * cell_px + (cell_px - 1) / 2.0;
            s.aoi = AoiRect{c * cell_px, r * cell_px, cell_px, cell_px};
            map.sites.push_back(s);
        }
    return map;
}

bool sweep_equal(const SweepResult& a, const SweepResult& b) {
    return a.label == b.label && a.axis == b.axis &&
           a.mean_corr == b.mean_corr && a.std_corr == b.std_corr &&
           a.n_cores == b.n_cores && a.seed == b.seed;
}

} // namespace

TEST_SUITE("experiments") {

TEST_CASE("pearson correlation") {
    const std::vector<double> u{1.0, 2.0, 3.0, 4.0};
    const std::vector<double> v{1.0, 2.0, 3.0, 5.0};
    CHECK(pearson(u, v) == doctest::Approx(0.9827076).epsilon(1e-4));
    CHECK(pearson(u, u) == doctest::Approx(1.0));

    const std::vector<double> neg{4.0, 3.0, 2.0, 1.0};
    CHECK(pearson(u, neg) == doctest::Approx(-1.0));

    // one constant side is defined as uncorrelated, two constant sides are
    // not defined at all
    const std::vector<double> flat{2.0, 2.0, 2.0, 2.0};
    CHECK(pearson(u, flat) == 0.0);
    CHECK(pearson(flat, u) == 0.0);
    CHECK_THROWS_AS(pearson(flat, flat), undefined_correlation);

    const std::vector<double> one{1.0};
    CHECK_THROWS_AS(pearson(one, one), std::invalid_argument);
    CHECK_THROWS_AS(pearson(u, one), std::invalid_argument);
}

TEST_CASE("mean, stddev, line fit") {
    const std::vector<double> v{2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
    CHECK(mean(v) == doctest::Approx(5.0));
    CHECK(stddev(v) == doctest::Approx(2.0)); // population form

    CHECK_THROWS_AS(mean(std::vector<double>{}), std::invalid_argument);

    const std::vector<double> x{0.0, 1.0, 2.0, 3.0};
    std::vector<double> y;
    for (double xi : x) y.push_back(3.0 + 2.0 * xi);
    const LineFit exact = fit_line(x, y);
    CHECK(exact.intercept == doctest::Approx(3.0));
    CHECK(exact.slope == doctest::Approx(2.0));
    CHECK(exact.r2 == doctest::Approx(1.0));

    y[1] += 0.5; // perturb one point: fit degrades but stays close
    const LineFit noisy = fit_line(x, y);
    CHECK(noisy.r2 < 1.0);
    CHECK(noisy.r2 > 0.9);

    const std::vector<double> cx{1.0, 1.0, 1.0, 1.0};
    CHECK_THROWS_AS(fit_line(cx, y), std::invalid_argument);
}

TEST_CASE("random spectrum contract") {
    Rng rng(77);
    const Eigen::VectorXd s = random_spectrum(43, 10, rng);
    CHECK(s.size() == 43);
    CHECK(s.minCoeff() >= 0.0);
    CHECK(s.sum() == doctest::Approx(1.0).epsilon(1e-12));
    int support = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > 0.0) ++support;
    CHECK(support == 10);

    Rng r1(123), r2(123);
    const Eigen::VectorXd a = random_spectrum(20, 5, r1);
    const Eigen::VectorXd b = random_spectrum(20, 5, r2);
    CHECK((a.array() == b.array()).all());

    Rng rng2(9);
    const Eigen::VectorXd full = random_spectrum(7, 7, rng2);
    CHECK(full.minCoeff() > 0.0);

    CHECK_THROWS_AS(random_spectrum(0, 1, rng), std::invalid_argument);
    CHECK_THROWS_AS(random_spectrum(10, 0, rng), std::invalid_argument);
    CHECK_THROWS_AS(random_spectrum(10, 11, rng), std::invalid_argument);
}

TEST_CASE("scene validation") {
    Scene scene;
    scene.grid = WavelengthGrid::regular(660.0, 2.0, 5);
    scene.weights = Eigen::MatrixXd::Constant(12, 5, 0.5);
    CHECK_NOTHROW(scene.validate(12));

    CHECK_THROWS_AS(scene.validate(11), std::invalid_argument);

    Scene narrow = scene;
    narrow.weights = Eigen::MatrixXd::Constant(12, 4, 0.5);
    CHECK_THROWS_AS(narrow.validate(12), std::invalid_argument);

    Scene hot = scene;
    hot.weights(3, 2) = 1.5;
    CHECK_THROWS_AS(hot.validate(12), std::invalid_argument);

    Scene bad = scene;
    bad.weights(0, 0) = std::nan("");
    CHECK_THROWS_AS(bad.validate(12), std::invalid_argument);
}

TEST_CASE("render_scene equals manual per-channel accumulation") {
    const Lab& lab = tiny_lab();
    const Bundle& bundle = lab.bundle;

    Scene scene;
    scene.grid = lab.grid;
    scene.weights = Eigen::MatrixXd::Zero(bundle.core_count(),
                                          static_cast<Eigen::Index>(lab.grid.size()));
    Rng rng(31);
    for (int i = 0; i < bundle.core_count(); ++i) {
        scene.weights(i, 0) = rng.uniform();
        scene.weights(i, 3) = rng.uniform();
    }
    // channels 1, 2, 4 stay dark on purpose

    const SpeckleFrame rendered = render_scene(bundle, scene);

    Eigen::ArrayXXd acc;
    std::vector<double> w(static_cast<std::size_t>(bundle.core_count()));
    for (Eigen::Index j : {Eigen::Index(0), Eigen::Index(3)}) {
        for (int i = 0; i < bundle.core_count(); ++i)
            w[static_cast<std::size_t>(i)] = scene.weights(i, j);
        accumulate_channel(bundle, w, lab.grid.values_nm[static_cast<std::size_t>(j)],
                           acc);
    }
    const SpeckleFrame manual = quantize_frame(acc);

    CHECK(rendered.width == manual.width);
    CHECK(rendered.counts == manual.counts);

    Scene dark;
    dark.grid = lab.grid;
    dark.weights = Eigen::MatrixXd::Zero(bundle.core_count(),
                                         static_cast<Eigen::Index>(lab.grid.size()));
    const SpeckleFrame zero = render_scene(bundle, dark);
    CHECK(zero.width == bundle.layout.frame_width);
    CHECK(zero.height == bundle.layout.frame_height);
    for (std::uint16_t c : zero.counts) CHECK(c == 0);
}

TEST_CASE("lab assembles a consistent instrument") {
    const Lab& lab = tiny_lab();
    CHECK(lab.bundle.core_count() == 12);
    CHECK(lab.map.sites.size() == 12);
    CHECK(lab.stm.cores.size() == 12);
    CHECK(lab.stm.grid.values_nm == lab.grid.values_nm);
    CHECK(lab.detection_frame.width == lab.bundle.layout.frame_width);
    CHECK(lab.detection_frame.height == lab.bundle.layout.frame_height);

    // every detected site matches a distinct layout core
    REQUIRE(lab.site_to_core.size() == 12);
    std::vector<int> hits(12, 0);
    for (int c : lab.site_to_core) {
        REQUIRE(c >= 0);
        REQUIRE(c < 12);
        ++hits[static_cast<std::size_t>(c)];
    }
    for (int h : hits) CHECK(h == 1);
}

TEST_CASE("sweeps are deterministic and sane") {
    const Lab& lab = tiny_lab();
    const SolveOptions options{1e-7, 400};
    const std::vector<double> ratios{0.6, 1.0, 2.0};

    const auto a = sweep_sampling(lab, {1, 2}, ratios, options, 0.02, 91);
    const auto b = sweep_sampling(lab, {1, 2}, ratios, options, 0.02, 91);
    REQUIRE(a.size() == 2);
    REQUIRE(b.size() == 2);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(sweep_equal(a[i], b[i]));
    CHECK(a[0].label != a[1].label);

    for (const SweepResult& r : a) {
        CHECK(r.axis == ratios);
        CHECK(r.n_cores == 12);
        for (double m : r.mean_corr) {
            CHECK(m >= -1.0);
            CHECK(m <= 1.0);
        }
        for (double s : r.std_corr) CHECK(s >= 0.0);
    }

    // overdetermined and noiseless: reconstruction is essentially perfect
    const auto clean = sweep_noise(lab, {0.0}, {2.0}, options, 0.0, 17);
    REQUIRE(clean.size() == 1);
    REQUIRE(clean[0].mean_corr.size() == 1);
    CHECK(clean[0].mean_corr[0] > 0.95);

    const auto sparse = sweep_sparsity(lab, {1, 3}, {2.0}, options, 0.0, 18);
    REQUIRE(sparse.size() == 1);
    CHECK(sparse[0].axis == std::vector<double>{1.0, 3.0});
    CHECK(sparse[0].mean_corr[0] > 0.9);
}

TEST_CASE("sweep csv format") {
    SweepResult r;
    r.label = "demo";
    r.axis = {0.5, 1.0};
    r.mean_corr = {0.25, 0.75};
    r.std_corr = {0.1, 0.05};
    r.n_cores = 12;
    r.seed = 99;

    const std::string path = "test_sweep.csv";
    write_sweep_csv(r, path);
    const std::string text = slurp(path);

    std::istringstream lines(text);
    std::string line;
    REQUIRE(std::getline(lines, line));
    CHECK(line == "axis,mean_corr,std_corr,n_cores,seed");
    int rows = 0;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        ++rows;
        std::istringstream fields(line);
        double axis = 0.0;
        char comma = 0;
        fields >> axis >> comma;
        CHECK(axis == r.axis[static_cast<std::size_t>(rows - 1)]);
    }
    CHECK(rows == 2);

    write_sweep_csv(r, path); // rewriting must be stable
    CHECK(slurp(path) == text);
    std::remove(path.c_str());
}

TEST_CASE("rasterize_letter covers lit cells exactly") {
    // cell-aligned sites: weights are exactly 0 or 1, plus one deliberate
    // half-overlap site
    CoreMap map = cell_map(5, 7, 10);
    CoreSite straddle;
    straddle.id = 35;
    straddle.cx = 9.5;
    straddle.cy = 4.5;
    straddle.aoi = AoiRect{5, 0, 10, 10}; // half in (0,0), half in (0,1)
    map.sites.push_back(straddle);

    const AoiRect box{0, 0, 50, 70};
    const auto weights = rasterize_letter('I', map, box);
    REQUIRE(weights.size() == 36);

    // 'I' in the 5x7 face: serif bars across columns 1-3 on the top and
    // bottom rows, stem in column 2 between them
    for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 5; ++c) {
            const bool lit = (r == 0 || r == 6) ? (c >= 1 && c <= 3) : (c == 2);
            const double w = weights[static_cast<std::size_t>(r * 5 + c)];
            CHECK(w == doctest::Approx(lit ? 1.0 : 0.0).epsilon(1e-9));
        }
    // the straddling site sees the top serif with half its area
    CHECK(weights[35] == doctest::Approx(0.5).epsilon(1e-9));

    // sites fully outside the box get nothing
    CoreMap outside = cell_map(2, 2, 10);
    const auto dark = rasterize_letter('I', outside, AoiRect{100, 100, 50, 70});
    for (double w : dark) CHECK(w == 0.0);

    CHECK_THROWS_AS(rasterize_letter('@', map, box), std::invalid_argument);
    CHECK_THROWS_AS(rasterize_letter('a', map, box), std::invalid_argument);
    CHECK_THROWS_AS(rasterize_letter('I', map, AoiRect{0, 0, 0, 70}),
                    std::invalid_argument);
}

TEST_CASE("assemble_image splats disks and skips NaN") {
    CoreMap map;
    map.frame_width = 40;
    map.frame_height = 40;
    map.aoi_size_px = 8;
    CoreSite a;
    a.id = 0;
    a.cx = 10.0;
    a.cy = 10.0;
    CoreSite b = a;
    b.id = 1;
    b.cx = 30.0;
    b.cy = 30.0;
    map.sites = {a, b};

    const std::vector<double> values{2.0, std::nan("")};
    const Eigen::ArrayXXd img = assemble_image(values, map, 6.0);
    CHECK(img.rows() == 40);
    CHECK(img.cols() == 40);
    CHECK(img(10, 10) == 2.0);
    CHECK(img(13, 10) == 2.0);  // on the rim, radius 3 inclusive
    CHECK(img(14, 10) == 0.0);  // just past it
    CHECK(img(30, 30) == 0.0);  // NaN site leaves a gap
    CHECK(img.isNaN().any() == false);

    CHECK_THROWS_AS(assemble_image({1.0}, map, 6.0), std::invalid_argument);
    CHECK_THROWS_AS(assemble_image(values, map, 0.0), std::invalid_argument);
}

TEST_CASE("truth_core_map mirrors the layout") {
    const Lab& lab = tiny_lab();
    const CoreMap truth = truth_core_map(lab.bundle);
    REQUIRE(truth.sites.size() == 12);
    CHECK(truth.frame_width == lab.bundle.layout.frame_width);
    CHECK(truth.frame_height == lab.bundle.layout.frame_height);
    CHECK(truth.aoi_size_px == lab.bundle.render.patch_size_px);
    for (std::size_t i = 0; i < truth.sites.size(); ++i) {
        CHECK(truth.sites[i].id == static_cast<int>(i));
        CHECK(truth.sites[i].cx == lab.bundle.layout.centroids[i].x);
        CHECK(truth.sites[i].cy == lab.bundle.layout.centroids[i].y);
        CHECK(truth.sites[i].aoi.width == lab.bundle.render.patch_size_px);
    }
}

TEST_CASE("composite snapshot on a tiny bundle") {
    const Lab& lab = tiny_lab();
    const SolveOptions options{1e-7, 400};
    const std::vector<GlyphAssignment> four{
        {'A', 0}, {'B', 1}, {'C', 3}, {'D', 4}};

    const CompositeResult r = run_composite(lab, four, 2.0, options, 0.0, 7);
    REQUIRE(r.assignments.size() == 4);
    REQUIRE(r.maps.size() == 4);
    REQUIRE(r.truth.size() == 4);
    CHECK(r.crosstalk.rows() == 4);
    CHECK(r.crosstalk.cols() == 4);
    CHECK(r.wavelengths_nm[1] == lab.grid.values_nm[1]);
    for (const Eigen::ArrayXXd& m : r.maps) {
        CHECK(m.rows() == lab.bundle.layout.frame_height);
        CHECK(m.cols() == lab.bundle.layout.frame_width);
    }
    CHECK(r.batch.spectra.size() == lab.stm.cores.size());

    // a single glyph spans the whole field, so its truth aperture is wider
    // than any one tile of the 2x2 split
    const CompositeResult solo =
        run_composite(lab, {{'A', 2}}, 2.0, options, 0.0, 7);
    const auto lit_cols = [](const Eigen::ArrayXXd& img) {
        int n = 0;
        for (Eigen::Index c = 0; c < img.cols(); ++c)
            if ((img.col(c) > 0.0).any()) ++n;
        return n;
    };
    CHECK(lit_cols(solo.truth[0]) > lit_cols(r.truth[0]));

    CHECK_THROWS_AS(run_composite(lab, {}, 2.0, options, 0.0, 7),
                    std::invalid_argument);
    CHECK_THROWS_AS(run_composite(lab, {{'A', 5}}, 2.0, options, 0.0, 7),
                    std::invalid_argument);
    CHECK_THROWS_AS(run_composite(lab, {{'A', -1}}, 2.0, options, 0.0, 7),
                    std::invalid_argument);
}

} // TEST_SUITE
