#pragma once

#include <vector>

#include <Eigen/Dense>

namespace mcmmf {

// Normalized intensity correlation versus offset along a uniformly sampled
// parameter axis (wavelength or launch angle).
struct CorrelationCurve {
    std::vector<double> offsets; // 0, step, 2*step, ...
    std::vector<double> values;  // values[0] == 1, clamped to [-1, 1]
    double fwhm = 0.0;           // NaN when the curve never drops below 0.5
};

// Estimator: for each offset j,
//   C_j = mean_i [ <I_i * I_{i+j}>_pixels / (<I_i>_pixels * <I_{i+j}>_pixels) - 1 ]
// normalized so C_0 = 1. The FWHM is twice the linearly interpolated
// half-height crossing. patches[i] holds pixel intensities at axis sample i;
// all patches must be the same size. Throws undefined_correlation when the
// patches carry no speckle information (constant or identical inputs).
CorrelationCurve spectral_correlation(const std::vector<Eigen::ArrayXd>& patches,
                                      double step_nm);
CorrelationCurve angle_correlation(const std::vector<Eigen::ArrayXd>& patches,
                                   double step_deg);

} // namespace mcmmf
