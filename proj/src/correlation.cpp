#include "mcmmf/correlation.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mcmmf/errors.hpp"

namespace mcmmf {

namespace {

CorrelationCurve intensity_correlation(const std::vector<Eigen::ArrayXd>& patches,
                                       double step) {
    if (patches.size() < 3)
        throw std::invalid_argument("correlation needs at least 3 samples");
    if (!(step > 0.0))
        throw std::invalid_argument("correlation step must be > 0");
    const Eigen::Index npx = patches.front().size();
    if (npx < 2)
        throw std::invalid_argument("correlation patches are too small");
    for (const Eigen::ArrayXd& p : patches)
        if (p.size() != npx)
            throw std::invalid_argument("correlation patches differ in size");

    const std::size_t n = patches.size();
    std::vector<double> means(n);
    for (std::size_t i = 0; i < n; ++i) {
        means[i] = patches[i].mean();
        if (!(means[i] > 0.0))
            throw undefined_correlation(
                "patch mean is not positive; no speckle to correlate");
    }

    std::vector<double> raw(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i + j < n; ++i) {
            const double cross = (patches[i] * patches[i + j]).mean();
            acc += cross / (means[i] * means[i + j]) - 1.0;
        }
        raw[j] = acc / static_cast<double>(n - j);
    }

    if (!(raw[0] > 1e-15) || !std::isfinite(raw[0]))
        throw undefined_correlation(
            "zero intensity variance; patches are constant");

    CorrelationCurve curve;
    curve.offsets.resize(n);
    curve.values.resize(n);
    bool all_flat = true;
    for (std::size_t j = 0; j < n; ++j) {
        curve.offsets[j] = step * static_cast<double>(j);
        double v = raw[j] / raw[0];
        if (v > 1.0) v = 1.0;
        if (v < -1.0) v = -1.0;
        curve.values[j] = v;
        if (v < 1.0 - 1e-9) all_flat = false;
    }
    if (all_flat)
        throw undefined_correlation(
            "correlation is identically 1; patches do not decorrelate");

    curve.fwhm = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t j = 1; j < n; ++j) {
        if (curve.values[j] < 0.5) {
            const double v0 = curve.values[j - 1];
            const double v1 = curve.values[j];
            const double frac = (v0 - 0.5) / (v0 - v1);
            curve.fwhm = 2.0 * (curve.offsets[j - 1] + frac * step);
            break;
        }
    }
    return curve;
}

} // namespace

CorrelationCurve spectral_correlation(const std::vector<Eigen::ArrayXd>& patches,
                                      double step_nm) {
    return intensity_correlation(patches, step_nm);
}

CorrelationCurve angle_correlation(const std::vector<Eigen::ArrayXd>& patches,
                                   double step_deg) {
    return intensity_correlation(patches, step_deg);
}

} // namespace mcmmf
