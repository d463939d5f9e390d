#include "mcmmf/fiber.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mcmmf {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

} // namespace

void FiberSpec::validate() const {
    require(core_diameter_m > 0.0, "core_diameter_m must be > 0");
    require(numerical_aperture > 0.0 && numerical_aperture < 1.0,
            "numerical_aperture must be in (0, 1)");
    require(length_m > 0.0, "length_m must be > 0");
    require(core_index > 1.0, "core_index must be > 1");
    require(core_pitch_m > core_diameter_m,
            "core_pitch_m must exceed core_diameter_m");
}

void SourceModel::validate() const {
    require(incidence_deg >= 0.0, "incidence_deg must be >= 0");
    if (incidence_deg >= kMaxIncidenceDeg) {
        throw std::invalid_argument(
            "incidence_deg must be < 4.5 degrees; beyond that light leaks into "
            "neighbouring cores");
    }
    require(linewidth_nm >= 0.0, "linewidth_nm must be >= 0");
}

WavelengthGrid WavelengthGrid::regular(double start_nm, double step_nm, int count) {
    require(start_nm > 0.0, "grid start_nm must be > 0");
    require(step_nm > 0.0, "grid step_nm must be > 0");
    require(count >= 1, "grid count must be >= 1");
    WavelengthGrid g;
    g.values_nm.resize(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        g.values_nm[static_cast<std::size_t>(i)] = start_nm + step_nm * i;
    return g;
}

double WavelengthGrid::step_nm() const {
    if (values_nm.size() < 2) return 0.0;
    return (values_nm.back() - values_nm.front()) /
           static_cast<double>(values_nm.size() - 1);
}

void WavelengthGrid::validate() const {
    require(!values_nm.empty(), "wavelength grid must not be empty");
    require(values_nm.front() > 0.0, "wavelengths must be > 0");
    for (std::size_t i = 1; i < values_nm.size(); ++i)
        require(values_nm[i] > values_nm[i - 1],
                "wavelength grid must be strictly ascending");
}

int mode_count(const FiberSpec& spec, double wavelength_nm) {
    spec.validate();
    require(wavelength_nm > 0.0, "wavelength_nm must be > 0");
    const double pi = 3.14159265358979323846;
    const double v = pi * spec.core_diameter_m * spec.numerical_aperture /
                     (wavelength_nm * 1e-9);
    const double n = 4.0 / (pi * pi) * v * v;
    const long long rounded = std::llround(n);
    return rounded < 1 ? 1 : static_cast<int>(rounded);
}

} // namespace mcmmf
