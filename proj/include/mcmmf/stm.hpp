#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcmmf/core_map.hpp"
#include "mcmmf/fiber.hpp"
#include "mcmmf/frame.hpp"

namespace mcmmf {

struct PixelCoord {
    std::uint32_t x = 0;
    std::uint32_t y = 0;
};

// Spectral transmission matrix of one core: Y rows (pixels) by X columns
// (calibration wavelengths), counts normalized to [0, 1] by the 12-bit full
// scale. pixels[i] is the camera coordinate of row i.
struct StmCore {
    std::uint32_t id = 0;
    double cx = 0.0;
    double cy = 0.0;
    std::vector<PixelCoord> pixels;
    Eigen::MatrixXf matrix;

    Eigen::Index rows() const { return matrix.rows(); }
    Eigen::Index cols() const { return matrix.cols(); }
};

struct Stm {
    WavelengthGrid grid;
    std::vector<StmCore> cores;

    const StmCore* find(std::uint32_t id) const;
};

struct CalibrationReport {
    // Sites whose clipped AOI could not supply pixels_per_core pixels.
    std::vector<std::uint32_t> skipped_sites;
};

// Builds the STM from one frame per grid wavelength (frames[j] taken at
// grid.values_nm[j]). Each core contributes the first pixels_per_core pixels
// of its AOI in centered ring order (Chebyshev rings around the AOI centre),
// so smaller and larger pixel budgets select nested pixel sets.
Stm calibrate(const std::vector<SpeckleFrame>& frames, const WavelengthGrid& grid,
              const CoreMap& map, int pixels_per_core,
              CalibrationReport* report = nullptr);

// Measurement vector of one core from a scene frame, normalized like the
// STM columns. Throws lookup_error for unknown core ids.
Eigen::VectorXd extract_pixel_vector(const SpeckleFrame& frame, const Stm& stm,
                                     std::uint32_t core_id);

// How subsample() picks the rows it keeps. Calibration stores pixels
// centre-out, so kBlock's prefix is the centred square block of the AOI
// (16 rows = the middle 4x4 pixels); kRandom draws uniformly without
// replacement from per-core seeded streams. Both keep the original row
// order and are nested across ratios at a fixed seed.
enum class SubsampleMode { kBlock, kRandom };

// Keeps round(ratio * X) rows per core.
Stm subsample(const Stm& stm, double ratio, std::uint64_t seed,
              SubsampleMode mode = SubsampleMode::kBlock);

// The row indices subsample() keeps for one core, so callers holding a
// full-length pixel vector can slice it to match the subsampled matrix.
std::vector<int> subsample_rows(const StmCore& core, double ratio, int channels,
                                std::uint64_t seed,
                                SubsampleMode mode = SubsampleMode::kBlock);

// Binary container, round-trips bit-exactly.
void save_stm(const Stm& stm, const std::string& path);
Stm load_stm(const std::string& path);

} // namespace mcmmf
