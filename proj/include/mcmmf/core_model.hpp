#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mcmmf/fiber.hpp"

namespace mcmmf {

// Frozen interference model of one multimode core: per-mode effective
// indices, per-mode angular phase rates, and two polarizations' worth of
// random transverse mode fields sampled on patch_size^2 camera pixels.
// The intensity at pixel p is
//
//   I_p = sum_pol | sum_m sqrt(w_m(theta)) * a_pm * exp(i*phi_m(lambda,theta)) |^2
//
// with phi_m = 2*pi*n_m*L/lambda + v_m*theta. The fields a_pm stay fixed for
// the lifetime of the model, so the same physical core is interrogated at
// every wavelength and launch angle.
struct CoreModel {
    int patch_size_px = 0;
    int modes = 0;
    std::vector<double> effective_index;          // n_m, descending
    std::vector<double> angular_rate_rad_per_deg; // v_m
    std::array<Eigen::MatrixXcf, 2> fields;       // patch^2 x modes, unit mean power

    // Unnormalized per-mode power weights w_m(theta) of the half-Gaussian
    // launch window. theta = 0 excites the fundamental mode only.
    std::vector<double> excitation_window(double theta_deg) const;

    // Effective number of excited modes, (sum w)^2 / sum w^2.
    double participation_ratio(double theta_deg) const;
};

// Samples a core model. The mode basis is sized by mode_count() at the
// reference wavelength and stays fixed across the band.
CoreModel build_core_model(const FiberSpec& spec, double reference_wavelength_nm,
                           int patch_size_px, std::uint64_t seed);

// Monochromatic intensity patch (row-major, length patch^2, nonnegative).
// 'polarizations' restricts the incoherent sum to the first 1 or 2 channels;
// a single polarization raises the speckle contrast by sqrt(2).
Eigen::ArrayXd synthesize_patch(const CoreModel& model, const FiberSpec& spec,
                                double wavelength_nm, double theta_deg,
                                int polarizations = 2);

} // namespace mcmmf
