#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcmmf/bundle.hpp"
#include "mcmmf/rng.hpp"
#include "mcmmf/solver.hpp"
#include "mcmmf/stm.hpp"

namespace mcmmf {

// Ground-truth input: what each core sees at each grid wavelength, weights
// in [0, 1] (rows = cores in layout order, cols = channels).
struct Scene {
    WavelengthGrid grid;
    Eigen::MatrixXd weights;

    void validate(int core_count) const;
};

// Sparse random spectrum: n_lambda support channels drawn without
// replacement, amplitudes uniform in [0.2, 1], normalized to unit sum.
Eigen::VectorXd random_spectrum(int channels, int n_lambda, Rng& rng);

// Sum of per-channel renders, quantized once at the end like a real
// exposure integrating all wavelengths.
SpeckleFrame render_scene(const Bundle& bundle, const Scene& scene,
                          int threads = 0);

// Additive positive readout noise: each entry gains an independent
// U[0, strength * mean(v)] offset.
Eigen::VectorXd add_noise(const Eigen::VectorXd& v, double strength, Rng& rng);

// A built instrument together with its own calibration: detection frame,
// core map, full-pixel STM, and the site -> layout-core match used to look
// up ground truth for detected sites (-1 when no centroid is within 3 px).
struct Lab {
    Bundle bundle;
    WavelengthGrid grid;
    SpeckleFrame detection_frame;
    CoreMap map;
    Stm stm;
    std::vector<int> site_to_core;
    int threads = 0;
};

Lab make_lab(const FiberSpec& fiber, const SourceModel& source,
             const RenderParams& render, const DbscanParams& clustering,
             const WavelengthGrid& grid, int core_count, int aoi_px,
             int pixels_per_core, std::uint64_t seed, int threads = 0);

// One reconstruction-quality curve: mean and spread of the per-core Pearson
// correlation between reconstructed and true spectra along some axis.
struct SweepResult {
    std::string label;
    std::vector<double> axis;
    std::vector<double> mean_corr;
    std::vector<double> std_corr;
    int n_cores = 0;
    std::uint64_t seed = 0;
};

// Every experiment below measures through the instrument's noise floor:
// each core's full calibrated pixel vector picks up one seeded add_noise()
// draw of the given relative strength before any row subsetting, so all
// sampling ratios of a run see the same measurement realization. Strength 0
// reproduces the ideal noiseless pipeline bit for bit.

// axis = sampling ratio Y/X, one curve per requested scene sparsity.
std::vector<SweepResult> sweep_sampling(const Lab& lab,
                                        const std::vector<int>& n_lambdas,
                                        const std::vector<double>& ratios,
                                        const SolveOptions& options,
                                        double measurement_noise,
                                        std::uint64_t seed);

// axis = number of occupied channels, one curve per sampling ratio.
std::vector<SweepResult> sweep_sparsity(const Lab& lab,
                                        const std::vector<int>& n_lambda_axis,
                                        const std::vector<double>& ratios,
                                        const SolveOptions& options,
                                        double measurement_noise,
                                        std::uint64_t seed);

// axis = added noise strength on top of the floor, one curve per sampling
// ratio; single-line scene.
std::vector<SweepResult> sweep_noise(const Lab& lab,
                                     const std::vector<double>& noise_axis,
                                     const std::vector<double>& ratios,
                                     const SolveOptions& options,
                                     double measurement_noise,
                                     std::uint64_t seed);

// CSV with header axis,mean_corr,std_corr,n_cores,seed.
void write_sweep_csv(const SweepResult& result, const std::string& path);

// Per-site weights in [0, 1] of a 5x7 uppercase glyph drawn inside the
// given pixel box: each site's weight is the fraction of its AOI covered
// by lit bitmap cells, so cores straddling a stroke edge get partial light.
std::vector<double> rasterize_letter(char glyph, const CoreMap& map,
                                     const AoiRect& box);

// Splats one value per site as a filled disk of the core diameter onto a
// frame-sized image; NaN entries leave gaps.
Eigen::ArrayXXd assemble_image(const std::vector<double>& values,
                               const CoreMap& map, double core_diameter_px);

// A CoreMap in layout (ground truth) space, for rasterizing scenes.
CoreMap truth_core_map(const Bundle& bundle);

struct GlyphAssignment {
    char glyph = 'A';
    int channel = 0;
};

// Snapshot multi-target experiment: each glyph is drawn in its own tile of
// a square partition of the bundle (16 letters -> 4x4, a single letter
// spans the whole field) and lit at its own channel; one exposure is
// reconstructed core by core and reassembled per channel.
struct CompositeResult {
    std::vector<GlyphAssignment> assignments;
    std::vector<double> wavelengths_nm;    // channel centres per assignment
    std::vector<Eigen::ArrayXXd> maps;     // reconstructed, per assignment
    std::vector<Eigen::ArrayXXd> truth;    // rasterized truth, per assignment
    Eigen::MatrixXd crosstalk;             // [i][j]: letter-i sites' energy at channel j
    BatchResult batch;
};

CompositeResult run_composite(const Lab& lab,
                              const std::vector<GlyphAssignment>& assignments,
                              double sampling_ratio, const SolveOptions& options,
                              double measurement_noise, std::uint64_t seed);

} // namespace mcmmf
