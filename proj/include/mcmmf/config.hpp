#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcmmf/bundle.hpp"
#include "mcmmf/dbscan.hpp"
#include "mcmmf/fiber.hpp"
#include "mcmmf/solver.hpp"

namespace mcmmf {

struct SweepConfig {
    std::vector<double> sampling_ratios;
    std::vector<int> sampling_n_lambdas;
    std::vector<int> sparsity_axis;
    std::vector<double> sparsity_ratios;
    std::vector<double> noise_axis;
    std::vector<double> noise_ratios;
};

struct CompositeConfig {
    std::string letters = "ABCDEFGHIJKLMNOP";
    std::vector<int> channels; // empty means spread evenly over the grid
    double sampling_ratio = 4.0;
};

// Everything a run needs. Unknown keys in the file are rejected; validation
// failures name the offending section and key.
struct RunConfig {
    FiberSpec fiber;
    SourceModel source;
    double grid_start_nm = 609.0;
    double grid_step_nm = 2.0;
    int grid_count = 43;
    int core_count = 200;
    RenderParams render;
    DbscanParams clustering;
    int aoi_px = 20;
    int pixels_per_core = 173;
    SolveOptions solver{1e-7, 1500};
    // Relative strength of the instrument noise floor applied to every
    // measured pixel vector in the experiment pipelines (0 disables it).
    double measurement_noise = 0.02;
    SweepConfig sweep;
    CompositeConfig composite;
    std::uint64_t seed = 1234;
    int threads = 0;

    WavelengthGrid grid() const;
    void validate() const;
};

// The sweep-flavored defaults above.
RunConfig default_config();
// Narrow-band many-channel variant for the snapshot imaging experiment.
RunConfig composite_default_config();

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& config, const std::string& path);

} // namespace mcmmf
