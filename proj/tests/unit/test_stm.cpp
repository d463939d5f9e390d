#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <vector>

#include "mcmmf/errors.hpp"
#include "mcmmf/stm.hpp"

using namespace mcmmf;

namespace {

CoreSite make_site(int id, double cx, double cy, int x0, int y0, int side) {
    CoreSite s;
    s.id = id;
    s.cx = cx;
    s.cy = cy;
    s.aoi = AoiRect{x0, y0, side, side};
    return s;
}

// frame whose every pixel value is a distinct function of (x, y, channel)
SpeckleFrame pattern_frame(int w, int h, int channel) {
    SpeckleFrame f(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            f.at(x, y) =
                static_cast<std::uint16_t>((x * 7 + y * 131 + channel * 641) % 4096);
    return f;
}

struct Fixture {
    WavelengthGrid grid = WavelengthGrid::regular(609.0, 2.0, 5);
    CoreMap map;
    std::vector<SpeckleFrame> frames;

    Fixture() {
        map.frame_width = 48;
        map.frame_height = 36;
        map.aoi_size_px = 16;
        map.sites.push_back(make_site(0, 10.2, 10.8, 2, 3, 16));
        map.sites.push_back(make_site(1, 31.0, 17.0, 23, 9, 16));
        for (int j = 0; j < 5; ++j) frames.push_back(pattern_frame(48, 36, j));
    }
};

} // namespace

TEST_SUITE("stm") {

TEST_CASE("calibration shapes, normalization, and nested pixel order") {
    Fixture fx;
    const Stm stm = calibrate(fx.frames, fx.grid, fx.map, 16);

    REQUIRE(stm.cores.size() == 2);
    CHECK(stm.grid.values_nm == fx.grid.values_nm);
    for (const StmCore& core : stm.cores) {
        CHECK(core.rows() == 16);
        CHECK(core.cols() == 5);
        CHECK(core.matrix.minCoeff() >= 0.0f);
        CHECK(core.matrix.maxCoeff() <= 1.0f);
    }
    CHECK(stm.cores[0].id == 0);
    CHECK(stm.cores[0].cx == doctest::Approx(10.2));
    CHECK(stm.find(1) != nullptr);
    CHECK(stm.find(9) == nullptr);

    // entries are the 12-bit-normalized counts of the stored pixels
    const StmCore& c0 = stm.cores[0];
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 5; ++j) {
            const PixelCoord& p = c0.pixels[static_cast<std::size_t>(i)];
            const float want = static_cast<float>(
                fx.frames[static_cast<std::size_t>(j)].at(
                    static_cast<int>(p.x), static_cast<int>(p.y)) /
                4095.0);
            CHECK(c0.matrix(i, j) == want);
        }

    // the first 16 pixels of a 16x16 AOI are its central 4x4 block
    std::set<std::pair<int, int>> got;
    for (const PixelCoord& p : c0.pixels)
        got.insert({static_cast<int>(p.x), static_cast<int>(p.y)});
    std::set<std::pair<int, int>> want;
    for (int y = 3 + 6; y < 3 + 10; ++y)
        for (int x = 2 + 6; x < 2 + 10; ++x) want.insert({x, y});
    CHECK(got == want);

    // a larger budget keeps the smaller one as a prefix
    const Stm big = calibrate(fx.frames, fx.grid, fx.map, 36);
    for (int i = 0; i < 16; ++i) {
        CHECK(big.cores[0].pixels[static_cast<std::size_t>(i)].x == c0.pixels[static_cast<std::size_t>(i)].x);
        CHECK(big.cores[0].pixels[static_cast<std::size_t>(i)].y == c0.pixels[static_cast<std::size_t>(i)].y);
    }
}

TEST_CASE("calibration error taxonomy and skip reporting") {
    Fixture fx;
    fx.frames.pop_back();
    CHECK_THROWS_AS(calibrate(fx.frames, fx.grid, fx.map, 16),
                    calibration_error);

    Fixture sized;
    sized.frames[2] = pattern_frame(20, 20, 2);
    CHECK_THROWS_AS(calibrate(sized.frames, sized.grid, sized.map, 16),
                    calibration_error);

    Fixture skinny;
    skinny.map.sites[1].aoi = AoiRect{23, 9, 3, 3}; // 9 px cannot give 16
    CalibrationReport report;
    const Stm stm = calibrate(skinny.frames, skinny.grid, skinny.map, 16, &report);
    CHECK(stm.cores.size() == 1);
    REQUIRE(report.skipped_sites.size() == 1);
    CHECK(report.skipped_sites[0] == 1);

    CHECK_THROWS_AS(calibrate(skinny.frames, skinny.grid, skinny.map, 0),
                    std::invalid_argument);
}

TEST_CASE("pixel vector extraction matches the calibration columns") {
    Fixture fx;
    const Stm stm = calibrate(fx.frames, fx.grid, fx.map, 20);
    for (int j = 0; j < 5; ++j) {
        const Eigen::VectorXd y = extract_pixel_vector(
            fx.frames[static_cast<std::size_t>(j)], stm, 1);
        REQUIRE(y.size() == 20);
        for (int i = 0; i < 20; ++i)
            CHECK(static_cast<float>(y(i)) == stm.cores[1].matrix(i, j));
    }
    CHECK_THROWS_AS(extract_pixel_vector(fx.frames[0], stm, 77), lookup_error);
}

TEST_CASE("subsampling keeps a centered block by default, nested over ratios") {
    // 22x22 AOI, 111 channels: the classic 0.14 ratio keeps 16 rows, the
    // middle 4x4 pixel block of the area of interest
    const WavelengthGrid grid = WavelengthGrid::regular(654.0, 0.4, 111);
    CoreMap map;
    map.frame_width = 30;
    map.frame_height = 30;
    map.aoi_size_px = 22;
    map.sites.push_back(make_site(0, 15.0, 15.0, 4, 4, 22));
    std::vector<SpeckleFrame> frames;
    for (int j = 0; j < 111; ++j) frames.push_back(pattern_frame(30, 30, j));
    const Stm stm = calibrate(frames, grid, map, 484);

    const Stm sub = subsample(stm, 0.14, 900);
    REQUIRE(sub.cores.size() == 1);
    CHECK(sub.cores[0].rows() == 16);
    CHECK(sub.cores[0].cols() == 111);
    std::set<std::pair<int, int>> got;
    for (const PixelCoord& p : sub.cores[0].pixels)
        got.insert({static_cast<int>(p.x), static_cast<int>(p.y)});
    std::set<std::pair<int, int>> want;
    for (int y = 4 + 9; y < 4 + 13; ++y)
        for (int x = 4 + 9; x < 4 + 13; ++x) want.insert({x, y});
    CHECK(got == want);

    // nesting: a lower ratio keeps a prefix of a higher one
    const std::vector<int> small_rows =
        subsample_rows(stm.cores[0], 0.14, 111, 900);
    const std::vector<int> large_rows =
        subsample_rows(stm.cores[0], 0.5, 111, 900);
    REQUIRE(large_rows.size() == 56);
    for (std::size_t i = 0; i < small_rows.size(); ++i)
        CHECK(small_rows[i] == large_rows[i]);

    // subsampled matrix rows match the selected rows of the full matrix
    for (std::size_t r = 0; r < small_rows.size(); ++r)
        CHECK((sub.cores[0].matrix.row(static_cast<Eigen::Index>(r)).array() ==
               stm.cores[0].matrix.row(small_rows[r]).array()).all());
}

TEST_CASE("random subsampling draws a seeded sorted subset") {
    Fixture fx;
    const Stm stm = calibrate(fx.frames, fx.grid, fx.map, 40);

    const std::vector<int> rows =
        subsample_rows(stm.cores[0], 2.0, 5, 77, SubsampleMode::kRandom);
    REQUIRE(rows.size() == 10);
    CHECK(std::is_sorted(rows.begin(), rows.end()));
    CHECK(std::adjacent_find(rows.begin(), rows.end()) == rows.end());
    CHECK(rows.front() >= 0);
    CHECK(rows.back() < 40);

    const std::vector<int> again =
        subsample_rows(stm.cores[0], 2.0, 5, 77, SubsampleMode::kRandom);
    CHECK(rows == again);

    const std::vector<int> other_core =
        subsample_rows(stm.cores[1], 2.0, 5, 77, SubsampleMode::kRandom);
    CHECK(rows != other_core); // per-core streams decorrelate

    const Stm sub = subsample(stm, 2.0, 77, SubsampleMode::kRandom);
    CHECK(sub.cores[0].rows() == 10);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        CHECK(sub.cores[0].pixels[r].x ==
              stm.cores[0].pixels[static_cast<std::size_t>(rows[r])].x);
        CHECK((sub.cores[0].matrix.row(static_cast<Eigen::Index>(r)).array() ==
               stm.cores[0].matrix.row(rows[r]).array()).all());
    }
}

TEST_CASE("subsampling rejects impossible ratios") {
    Fixture fx;
    const Stm stm = calibrate(fx.frames, fx.grid, fx.map, 16);

    CHECK_THROWS_AS(subsample(stm, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(subsample(stm, -1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(subsample(stm, 0.05, 1), std::invalid_argument); // 0 rows
    CHECK_THROWS_AS(subsample(stm, 4.0, 1), std::invalid_argument);  // 20 > 16
    CHECK_NOTHROW(subsample(stm, 3.2, 1)); // exactly every row
}

TEST_CASE("stm container round-trips bit-exactly") {
    Fixture fx;
    const Stm stm = calibrate(fx.frames, fx.grid, fx.map, 24);
    const std::string path = "test_stm_roundtrip.bin";
    save_stm(stm, path);
    const Stm back = load_stm(path);

    CHECK(back.grid.values_nm == stm.grid.values_nm);
    REQUIRE(back.cores.size() == stm.cores.size());
    for (std::size_t c = 0; c < stm.cores.size(); ++c) {
        CHECK(back.cores[c].id == stm.cores[c].id);
        CHECK(back.cores[c].cx == stm.cores[c].cx);
        CHECK(back.cores[c].cy == stm.cores[c].cy);
        REQUIRE(back.cores[c].pixels.size() == stm.cores[c].pixels.size());
        for (std::size_t i = 0; i < stm.cores[c].pixels.size(); ++i) {
            CHECK(back.cores[c].pixels[i].x == stm.cores[c].pixels[i].x);
            CHECK(back.cores[c].pixels[i].y == stm.cores[c].pixels[i].y);
        }
        CHECK((back.cores[c].matrix.array() == stm.cores[c].matrix.array()).all());
    }

    // a second save of the loaded copy writes identical bytes
    const std::string path2 = "test_stm_roundtrip2.bin";
    save_stm(back, path2);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)), {});
    const std::string bytes_b((std::istreambuf_iterator<char>(b)), {});
    CHECK(bytes_a == bytes_b);
    CHECK(!bytes_a.empty());
    std::remove(path2.c_str());

    // corrupt magic is rejected at offset zero
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
    f.close();
    try {
        load_stm(path);
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(e.byte_offset == 0);
    }
    std::remove(path.c_str());
}

TEST_CASE("truncated stm files fail with a format error") {
    Fixture fx;
    const Stm stm = calibrate(fx.frames, fx.grid, fx.map, 24);
    const std::string path = "test_stm_trunc.bin";
    save_stm(stm, path);

    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    bytes.resize(bytes.size() / 2);
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();

    CHECK_THROWS_AS(load_stm(path), format_error);
    std::remove(path.c_str());

    CHECK_THROWS(load_stm("no_such_stm.bin"));
}

} // TEST_SUITE
