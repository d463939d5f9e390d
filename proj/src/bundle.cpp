#include "mcmmf/bundle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "mcmmf/errors.hpp"
#include "mcmmf/rng.hpp"
#include "mcmmf/threading.hpp"

namespace mcmmf {

namespace {

// Gauss-Legendre 5-point rule on [-1, 1]; weights sum to 2.
constexpr double kGlNode[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                               0.5384693101056831, 0.9061798459386640};
constexpr double kGlWeight[5] = {0.2369268850561891, 0.4786286704993665,
                                 0.5688888888888889, 0.4786286704993665,
                                 0.2369268850561891};

struct PatchAnchor {
    int x0 = 0;
    int y0 = 0;
};

PatchAnchor anchor_for(const Vec2& c, int patch, int width, int height, int core) {
    PatchAnchor a;
    a.x0 = static_cast<int>(std::lround(c.x - patch / 2.0));
    a.y0 = static_cast<int>(std::lround(c.y - patch / 2.0));
    if (a.x0 < 0 || a.y0 < 0 || a.x0 + patch > width || a.y0 + patch > height)
        throw layout_error("core " + std::to_string(core) +
                           " patch does not fit inside the frame");
    return a;
}

// Patch of one core averaged over the source line.
Eigen::ArrayXd core_patch(const Bundle& bundle, int core, double wavelength_nm) {
    const CoreModel& model = bundle.models[static_cast<std::size_t>(core)];
    const double lw = bundle.source.linewidth_nm;
    if (lw <= 0.0)
        return synthesize_patch(model, bundle.fiber, wavelength_nm,
                                bundle.source.incidence_deg);
    Eigen::ArrayXd acc =
        Eigen::ArrayXd::Zero(model.patch_size_px * model.patch_size_px);
    for (int q = 0; q < 5; ++q) {
        const double lambda = wavelength_nm + 0.5 * lw * kGlNode[q];
        acc += (0.5 * kGlWeight[q]) *
               synthesize_patch(model, bundle.fiber, lambda,
                                bundle.source.incidence_deg);
    }
    return acc;
}

void check_weights(const Bundle& bundle, std::span<const double> weights) {
    if (static_cast<int>(weights.size()) != bundle.core_count())
        throw std::invalid_argument("weights must have one entry per core");
    for (double w : weights)
        if (!(w >= 0.0 && w <= 1.0))
            throw std::invalid_argument("core weights must lie in [0, 1]");
}

void place_patches(const Bundle& bundle,
                   const std::vector<Eigen::ArrayXd>& patches,
                   Eigen::ArrayXXd& frame) {
    const int patch = bundle.render.patch_size_px;
    for (int i = 0; i < bundle.core_count(); ++i) {
        if (patches[static_cast<std::size_t>(i)].size() == 0) continue;
        const PatchAnchor a =
            anchor_for(bundle.layout.centroids[static_cast<std::size_t>(i)], patch,
                       bundle.layout.frame_width, bundle.layout.frame_height, i);
        const Eigen::ArrayXd& p = patches[static_cast<std::size_t>(i)];
        for (int y = 0; y < patch; ++y)
            for (int x = 0; x < patch; ++x)
                frame(a.y0 + y, a.x0 + x) += p(y * patch + x);
    }
}

void prepare_frame(const Bundle& bundle, Eigen::ArrayXXd& frame) {
    if (frame.size() == 0) {
        frame = Eigen::ArrayXXd::Zero(bundle.layout.frame_height,
                                      bundle.layout.frame_width);
    } else if (frame.rows() != bundle.layout.frame_height ||
               frame.cols() != bundle.layout.frame_width) {
        throw std::invalid_argument("accumulator frame has the wrong shape");
    }
}

} // namespace

void RenderParams::validate() const {
    if (patch_size_px < 4)
        throw std::invalid_argument("patch_size_px must be >= 4");
    if (!(pixel_pitch_m > 0.0))
        throw std::invalid_argument("pixel_pitch_m must be > 0");
    if (!(mean_counts > 0.0 && mean_counts <= SpeckleFrame::kMaxCount))
        throw std::invalid_argument("mean_counts must be in (0, 4095]");
    if (margin_px < 0)
        throw std::invalid_argument("margin_px must be >= 0");
    if (jitter_px < 0.0 || jitter_px > margin_px)
        throw std::invalid_argument("jitter_px must be in [0, margin_px]");
}

BundleLayout hex_layout(const FiberSpec& spec, const RenderParams& render,
                        int core_count, std::uint64_t seed) {
    spec.validate();
    render.validate();
    if (core_count < 1)
        throw std::invalid_argument("core_count must be >= 1");

    const double pitch_px = spec.core_pitch_m / render.pixel_pitch_m;
    if (pitch_px < render.patch_size_px * 0.75)
        throw layout_error("core pitch is too small for the patch size");

    // Close to square overall: hexagonal rows are pitch*sqrt(3)/2 apart.
    const double row_gap = pitch_px * std::sqrt(3.0) / 2.0;
    int cols = static_cast<int>(
        std::lround(std::sqrt(static_cast<double>(core_count) * row_gap / pitch_px)));
    if (cols < 1) cols = 1;
    const double origin = render.margin_px + render.patch_size_px / 2.0 +
                          render.jitter_px;

    BundleLayout layout;
    layout.centroids.resize(static_cast<std::size_t>(core_count));
    Rng rng(seed);
    double max_x = 0.0, max_y = 0.0;
    for (int i = 0; i < core_count; ++i) {
        const int row = i / cols;
        const int col = i % cols;
        Vec2 c;
        c.x = origin + (col + 0.5 * (row % 2)) * pitch_px +
              rng.uniform(-render.jitter_px, render.jitter_px);
        c.y = origin + row * row_gap +
              rng.uniform(-render.jitter_px, render.jitter_px);
        layout.centroids[static_cast<std::size_t>(i)] = c;
        max_x = std::max(max_x, c.x);
        max_y = std::max(max_y, c.y);
    }
    layout.frame_width = static_cast<int>(
        std::ceil(max_x + render.patch_size_px / 2.0 + render.margin_px));
    layout.frame_height = static_cast<int>(
        std::ceil(max_y + render.patch_size_px / 2.0 + render.margin_px));
    return layout;
}

Bundle Bundle::build(const FiberSpec& fiber, const SourceModel& source,
                     const RenderParams& render, int core_count,
                     std::uint64_t seed, int threads) {
    fiber.validate();
    source.validate();
    render.validate();

    Bundle bundle;
    bundle.fiber = fiber;
    bundle.source = source;
    bundle.render = render;
    bundle.layout = hex_layout(fiber, render, core_count, Rng::mix(seed, 0));
    bundle.gain = render.mean_counts / 2.0; // two polarizations of unit mean power

    // Wavelength used only to size the mode basis; mid-band of the visible
    // red window the instrument works in.
    const double reference_nm = 670.0;
    bundle.models.resize(static_cast<std::size_t>(core_count));
    const int nthreads = resolve_threads(threads);
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
    for (int i = 0; i < core_count; ++i)
        bundle.models[static_cast<std::size_t>(i)] = build_core_model(
            fiber, reference_nm, render.patch_size_px, Rng::mix(seed, 1 + i));
    return bundle;
}

void accumulate_channel(const Bundle& bundle, std::span<const double> weights,
                        double wavelength_nm, Eigen::ArrayXXd& frame,
                        int threads) {
    check_weights(bundle, weights);
    prepare_frame(bundle, frame);

    // Patches are synthesized in parallel, then composited serially in core
    // order so the result does not depend on the thread count.
    std::vector<Eigen::ArrayXd> patches(static_cast<std::size_t>(bundle.core_count()));
    const int nthreads = resolve_threads(threads);
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
    for (int i = 0; i < bundle.core_count(); ++i) {
        const double w = weights[static_cast<std::size_t>(i)];
        if (w == 0.0) continue;
        patches[static_cast<std::size_t>(i)] =
            (bundle.gain * w) * core_patch(bundle, i, wavelength_nm);
    }
    place_patches(bundle, patches, frame);
}

void accumulate_channel_reference(const Bundle& bundle,
                                  std::span<const double> weights,
                                  double wavelength_nm, Eigen::ArrayXXd& frame) {
    check_weights(bundle, weights);
    prepare_frame(bundle, frame);
    std::vector<Eigen::ArrayXd> patches(static_cast<std::size_t>(bundle.core_count()));
    for (int i = 0; i < bundle.core_count(); ++i) {
        const double w = weights[static_cast<std::size_t>(i)];
        if (w == 0.0) continue;
        patches[static_cast<std::size_t>(i)] =
            (bundle.gain * w) * core_patch(bundle, i, wavelength_nm);
    }
    place_patches(bundle, patches, frame);
}

SpeckleFrame quantize_frame(const Eigen::ArrayXXd& frame) {
    SpeckleFrame out(static_cast<int>(frame.cols()), static_cast<int>(frame.rows()));
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            long v = std::lround(frame(y, x));
            if (v < 0) v = 0;
            if (v > SpeckleFrame::kMaxCount) v = SpeckleFrame::kMaxCount;
            out.at(x, y) = static_cast<std::uint16_t>(v);
        }
    }
    return out;
}

SpeckleFrame render_bundle(const Bundle& bundle, std::span<const double> weights,
                           double wavelength_nm, int threads) {
    Eigen::ArrayXXd frame;
    accumulate_channel(bundle, weights, wavelength_nm, frame, threads);
    return quantize_frame(frame);
}

SpeckleFrame render_bundle_reference(const Bundle& bundle,
                                     std::span<const double> weights,
                                     double wavelength_nm) {
    Eigen::ArrayXXd frame;
    accumulate_channel_reference(bundle, weights, wavelength_nm, frame);
    return quantize_frame(frame);
}

SpeckleFrame average_frames(const std::vector<SpeckleFrame>& frames) {
    if (frames.empty())
        throw std::invalid_argument("average_frames: no frames");
    const int w = frames.front().width;
    const int h = frames.front().height;
    std::vector<double> acc(static_cast<std::size_t>(w) * h, 0.0);
    for (const SpeckleFrame& f : frames) {
        if (f.width != w || f.height != h)
            throw std::invalid_argument("average_frames: frame sizes differ");
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f.counts[i];
    }
    SpeckleFrame out(w, h);
    for (std::size_t i = 0; i < acc.size(); ++i)
        out.counts[i] =
            static_cast<std::uint16_t>(std::lround(acc[i] / frames.size()));
    return out;
}

} // namespace mcmmf
