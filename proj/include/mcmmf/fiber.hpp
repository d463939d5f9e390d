#pragma once

#include <cstddef>
#include <vector>

namespace mcmmf {

// Geometry and optics of a single multimode core.
struct FiberSpec {
    double core_diameter_m = 50e-6;
    double numerical_aperture = 0.06;
    double length_m = 0.3085;
    double core_index = 1.458;
    double core_pitch_m = 66e-6; // centre-to-centre spacing in the bundle

    void validate() const;
};

// Illumination geometry and linewidth of the probe light.
struct SourceModel {
    double incidence_deg = 3.5; // off-axis launch angle
    double linewidth_nm = 0.0;  // 0 means monochromatic

    // Beyond this launch angle light couples between neighbouring cores and
    // the single-core model stops being valid.
    static constexpr double kMaxIncidenceDeg = 4.5;

    void validate() const;
};

// Uniformly spaced calibration wavelengths, ascending.
struct WavelengthGrid {
    std::vector<double> values_nm;

    static WavelengthGrid regular(double start_nm, double step_nm, int count);

    std::size_t size() const { return values_nm.size(); }
    double step_nm() const;
    void validate() const;
};

// Number of guided modes per polarization for a step-index core at the
// given wavelength. Never less than 1.
int mode_count(const FiberSpec& spec, double wavelength_nm);

} // namespace mcmmf
