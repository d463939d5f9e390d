#include "mcmmf/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "mcmmf/rng.hpp"

namespace mcmmf {

namespace {

constexpr double kPi = 3.14159265358979323846;

// At the nominal 3.5 degree launch the window excites half of the guided
// modes. Together with the index spread below this pins the spectral
// correlation width to the right order (about 2 nm for a 0.3 m fiber).
constexpr double kCalibrationAngleDeg = 3.5;

// Scale of the per-mode angular phase rate (radians per degree for the
// highest-order mode). Chosen so the angular correlation width at a 3.5
// degree launch comes out near one degree.
constexpr double kAngularRateScale = 11.0;

// Transverse speckle texture: each mode field is a superposition of random
// plane waves with |k| below this radius, giving grains of roughly two
// pixels FWHM, i.e. one grain covers about four camera pixels.
constexpr double kMaxTransverseK = 1.0; // rad per pixel
constexpr int kPlaneWavesPerMode = 24;

} // namespace

std::vector<double> CoreModel::excitation_window(double theta_deg) const {
    if (theta_deg < 0.0)
        throw std::invalid_argument("theta_deg must be >= 0");
    std::vector<double> w(static_cast<std::size_t>(modes), 0.0);
    const double sigma =
        theta_deg * static_cast<double>(modes) /
        (2.0 * std::sqrt(kPi) * kCalibrationAngleDeg);
    w[0] = 1.0;
    if (sigma > 1e-12) {
        for (int m = 1; m < modes; ++m) {
            const double z = static_cast<double>(m) / sigma;
            w[static_cast<std::size_t>(m)] = std::exp(-0.5 * z * z);
        }
    }
    return w;
}

double CoreModel::participation_ratio(double theta_deg) const {
    const std::vector<double> w = excitation_window(theta_deg);
    double s1 = 0.0, s2 = 0.0;
    for (double v : w) {
        s1 += v;
        s2 += v * v;
    }
    return s1 * s1 / s2;
}

CoreModel build_core_model(const FiberSpec& spec, double reference_wavelength_nm,
                           int patch_size_px, std::uint64_t seed) {
    spec.validate();
    if (patch_size_px < 4)
        throw std::invalid_argument("patch_size_px must be >= 4");

    CoreModel model;
    model.patch_size_px = patch_size_px;
    model.modes = mode_count(spec, reference_wavelength_nm);

    Rng rng(seed);

    // Effective indices spread over the step-index acceptance range
    // [n - NA^2/(2n), n], high-index (low-order) modes first.
    const double spread = spec.numerical_aperture * spec.numerical_aperture /
                          (2.0 * spec.core_index);
    model.effective_index.resize(static_cast<std::size_t>(model.modes));
    for (double& n : model.effective_index)
        n = spec.core_index - spread * rng.uniform();
    std::sort(model.effective_index.begin(), model.effective_index.end(),
              std::greater<double>());

    // Angular phase rates grow with mode order; the sign and magnitude within
    // the envelope are random per mode.
    model.angular_rate_rad_per_deg.resize(static_cast<std::size_t>(model.modes));
    for (int m = 0; m < model.modes; ++m) {
        const double envelope =
            kAngularRateScale * (static_cast<double>(m) + 0.5) / model.modes;
        model.angular_rate_rad_per_deg[static_cast<std::size_t>(m)] =
            envelope * rng.uniform(-1.0, 1.0);
    }

    // Random transverse fields, normalized to unit mean power so that the
    // expected patch intensity equals the number of polarizations summed.
    const int npx = patch_size_px * patch_size_px;
    std::vector<std::complex<double>> row_phase(static_cast<std::size_t>(patch_size_px));
    std::vector<std::complex<double>> col_phase(static_cast<std::size_t>(patch_size_px));
    Eigen::VectorXcd accum(npx);
    for (auto& mat : model.fields) mat.resize(npx, model.modes);

    for (int pol = 0; pol < 2; ++pol) {
        for (int m = 0; m < model.modes; ++m) {
            accum.setZero();
            for (int w = 0; w < kPlaneWavesPerMode; ++w) {
                double kx, ky;
                do {
                    kx = rng.uniform(-kMaxTransverseK, kMaxTransverseK);
                    ky = rng.uniform(-kMaxTransverseK, kMaxTransverseK);
                } while (kx * kx + ky * ky > kMaxTransverseK * kMaxTransverseK);
                const std::complex<double> g(rng.normal(), rng.normal());
                for (int x = 0; x < patch_size_px; ++x)
                    col_phase[static_cast<std::size_t>(x)] =
                        std::polar(1.0, kx * x);
                for (int y = 0; y < patch_size_px; ++y)
                    row_phase[static_cast<std::size_t>(y)] =
                        g * std::polar(1.0, ky * y);
                for (int y = 0; y < patch_size_px; ++y) {
                    const std::complex<double> r = row_phase[static_cast<std::size_t>(y)];
                    std::complex<double>* dst = accum.data() + y * patch_size_px;
                    for (int x = 0; x < patch_size_px; ++x)
                        dst[x] += r * col_phase[static_cast<std::size_t>(x)];
                }
            }
            accum /= std::sqrt(accum.squaredNorm() / npx);
            model.fields[static_cast<std::size_t>(pol)].col(m) =
                accum.cast<std::complex<float>>();
        }
    }
    return model;
}

Eigen::ArrayXd synthesize_patch(const CoreModel& model, const FiberSpec& spec,
                                double wavelength_nm, double theta_deg,
                                int polarizations) {
    if (model.modes <= 0 || model.patch_size_px <= 0)
        throw std::invalid_argument("synthesize_patch: model is empty");
    if (wavelength_nm <= 0.0)
        throw std::invalid_argument("wavelength_nm must be > 0");
    if (polarizations < 1 || polarizations > 2)
        throw std::invalid_argument("polarizations must be 1 or 2");

    const std::vector<double> w = model.excitation_window(theta_deg);
    double total = 0.0;
    for (double v : w) total += v;

    // Complex launch amplitude of each mode at this wavelength and angle.
    const double phase_per_index = 2.0 * kPi * spec.length_m / (wavelength_nm * 1e-9);
    Eigen::VectorXcd phasor(model.modes);
    for (int m = 0; m < model.modes; ++m) {
        const std::size_t im = static_cast<std::size_t>(m);
        const double phase = phase_per_index * model.effective_index[im] +
                             model.angular_rate_rad_per_deg[im] * theta_deg;
        phasor(m) = std::polar(std::sqrt(w[im] / total), phase);
    }

    const int npx = model.patch_size_px * model.patch_size_px;
    Eigen::ArrayXd intensity = Eigen::ArrayXd::Zero(npx);
    Eigen::VectorXcd field(npx);
    for (int pol = 0; pol < polarizations; ++pol) {
        field.setZero();
        for (int m = 0; m < model.modes; ++m)
            field += phasor(m) *
                     model.fields[static_cast<std::size_t>(pol)].col(m)
                         .cast<std::complex<double>>();
        intensity += field.cwiseAbs2().array();
    }
    return intensity;
}

} // namespace mcmmf
