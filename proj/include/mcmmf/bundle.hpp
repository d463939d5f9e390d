#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mcmmf/core_model.hpp"
#include "mcmmf/fiber.hpp"
#include "mcmmf/frame.hpp"

namespace mcmmf {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Camera-side rendering knobs.
struct RenderParams {
    int patch_size_px = 20;
    double pixel_pitch_m = 2.2e-6;
    double mean_counts = 500.0; // expected counts of a fully lit patch
    int margin_px = 26;         // frame border around the outermost patches
    double jitter_px = 1.0;     // uniform centroid jitter per axis

    void validate() const;
};

// Core centroids in pixel coordinates plus the frame that contains them.
struct BundleLayout {
    int frame_width = 0;
    int frame_height = 0;
    std::vector<Vec2> centroids;
};

// Hexagonal arrangement of core_count centroids at the fiber pitch, with a
// little per-core jitter. Rows are offset by half a pitch like a real
// bundle's close packing. Throws layout_error if a patch would leave the
// frame (cannot happen with the built-in margin, but custom layouts pass
// through the same check at render time).
BundleLayout hex_layout(const FiberSpec& spec, const RenderParams& render,
                        int core_count, std::uint64_t seed);

// A full instrument: fiber, per-core interference models, layout, and the
// fixed camera gain that maps model intensity to counts. The gain depends
// only on mean_counts, never on wavelength or scene weights, so scaling all
// weights scales pre-quantization pixel values exactly.
struct Bundle {
    FiberSpec fiber;
    SourceModel source;
    RenderParams render;
    BundleLayout layout;
    std::vector<CoreModel> models;
    double gain = 0.0;

    int core_count() const { return static_cast<int>(models.size()); }

    static Bundle build(const FiberSpec& fiber, const SourceModel& source,
                        const RenderParams& render, int core_count,
                        std::uint64_t seed, int threads = 0);
};

// Adds gain * weight * patch(lambda) for every core into a pre-quantization
// accumulator frame. Finite source linewidth is handled by averaging the
// patch over five Gauss-Legendre wavelengths across the line. weights must
// have one entry per core, each in [0, 1].
void accumulate_channel(const Bundle& bundle, std::span<const double> weights,
                        double wavelength_nm, Eigen::ArrayXXd& frame,
                        int threads = 0);

// Serial reference for accumulate_channel; bit-identical by construction.
void accumulate_channel_reference(const Bundle& bundle,
                                  std::span<const double> weights,
                                  double wavelength_nm, Eigen::ArrayXXd& frame);

// Rounds to 12-bit counts, clipping at 4095.
SpeckleFrame quantize_frame(const Eigen::ArrayXXd& frame);

// One-channel render: accumulate_channel + quantize_frame.
SpeckleFrame render_bundle(const Bundle& bundle, std::span<const double> weights,
                           double wavelength_nm, int threads = 0);
SpeckleFrame render_bundle_reference(const Bundle& bundle,
                                     std::span<const double> weights,
                                     double wavelength_nm);

// Mean of several equally sized frames (used to wash out speckle before
// core detection).
SpeckleFrame average_frames(const std::vector<SpeckleFrame>& frames);

} // namespace mcmmf
