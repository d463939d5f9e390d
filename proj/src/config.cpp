#include "mcmmf/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <stdexcept>

#include <json.hpp>

#include "mcmmf/errors.hpp"

namespace mcmmf {

using nlohmann::json;

WavelengthGrid RunConfig::grid() const {
    return WavelengthGrid::regular(grid_start_nm, grid_step_nm, grid_count);
}

void RunConfig::validate() const {
    auto wrap = [](const char* section, auto&& fn) {
        try {
            fn();
        } catch (const std::invalid_argument& e) {
            throw config_error(std::string(section) + ": " + e.what());
        }
    };
    wrap("fiber", [&] { fiber.validate(); });
    wrap("source", [&] { source.validate(); });
    wrap("grid", [&] { grid().validate(); });
    wrap("bundle", [&] {
        render.validate();
        if (core_count < 1)
            throw std::invalid_argument("core_count must be >= 1");
    });
    wrap("clustering", [&] { clustering.validate(); });
    wrap("calibration", [&] {
        if (aoi_px < 1) throw std::invalid_argument("aoi_px must be >= 1");
        if (pixels_per_core < 1)
            throw std::invalid_argument("pixels_per_core must be >= 1");
        if (pixels_per_core > aoi_px * aoi_px)
            throw std::invalid_argument(
                "pixels_per_core cannot exceed aoi_px squared");
    });
    wrap("solver", [&] {
        if (!(solver.tolerance > 0.0))
            throw std::invalid_argument("tolerance must be > 0");
        if (solver.max_iterations < 0)
            throw std::invalid_argument("max_iterations must be >= 0");
    });
    wrap("composite", [&] {
        if (composite.letters.empty())
            throw std::invalid_argument("letters must not be empty");
        for (char c : composite.letters)
            if (c < 'A' || c > 'Z')
                throw std::invalid_argument("letters must be A-Z");
        if (!composite.channels.empty() &&
            composite.channels.size() != composite.letters.size())
            throw std::invalid_argument("channels must match letters in length");
        for (int c : composite.channels)
            if (c < 0 || c >= grid_count)
                throw std::invalid_argument("channels must index the grid");
        if (!(composite.sampling_ratio > 0.0))
            throw std::invalid_argument("sampling_ratio must be > 0");
    });
    wrap("sweep", [&] {
        for (double r : sweep.sampling_ratios)
            if (!(r > 0.0))
                throw std::invalid_argument("sampling_ratios must be > 0");
        for (double r : sweep.sparsity_ratios)
            if (!(r > 0.0))
                throw std::invalid_argument("sparsity_ratios must be > 0");
        for (double r : sweep.noise_ratios)
            if (!(r > 0.0))
                throw std::invalid_argument("noise_ratios must be > 0");
        for (int n : sweep.sampling_n_lambdas)
            if (n < 1 || n > grid_count)
                throw std::invalid_argument(
                    "sampling_n_lambdas must be in [1, grid count]");
        for (int n : sweep.sparsity_axis)
            if (n < 1 || n > grid_count)
                throw std::invalid_argument(
                    "sparsity_axis must be in [1, grid count]");
        for (double s : sweep.noise_axis)
            if (s < 0.0)
                throw std::invalid_argument("noise_axis must be >= 0");
    });
    if (measurement_noise < 0.0 || measurement_noise > 1.0)
        throw config_error("measurement_noise must be in [0, 1]");
    if (threads < 0) throw config_error("threads must be >= 0");
}

RunConfig default_config() {
    RunConfig cfg;
    cfg.sweep.sampling_ratios = {0.1,  0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45,
                                 0.5,  0.6,  0.75, 0.9, 1.1, 1.5,  2.0};
    cfg.sweep.sampling_n_lambdas = {1, 10};
    cfg.sweep.sparsity_axis = {1, 5, 10, 15, 20, 25, 30, 35, 40, 43};
    cfg.sweep.sparsity_ratios = {2.01, 1.1, 0.84};
    cfg.sweep.noise_axis = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    cfg.sweep.noise_ratios = {2.01, 1.1, 0.84};
    return cfg;
}

RunConfig composite_default_config() {
    RunConfig cfg = default_config();
    cfg.grid_start_nm = 654.0;
    cfg.grid_step_nm = 0.4;
    cfg.grid_count = 111;
    cfg.fiber.core_pitch_m = 84e-6;
    cfg.render.patch_size_px = 24;
    cfg.aoi_px = 22;
    cfg.pixels_per_core = 484;
    return cfg;
}

namespace {

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw config_error("unknown key " +
                               (section.empty() ? item.key()
                                                : section + "." + item.key()));
    }
}

template <class T>
void fetch(const json& j, const std::string& section, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error(section + "." + key + ": wrong type");
    }
}

} // namespace

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_config: cannot open " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw format_error("config: " + std::string(e.what()),
                           static_cast<std::size_t>(e.byte));
    }
    if (!doc.is_object()) throw config_error("config root must be an object");

    RunConfig cfg = default_config();
    check_keys(doc, "",
               {"fiber", "source", "grid", "bundle", "clustering", "calibration",
                "solver", "measurement_noise", "sweep", "composite", "seed",
                "threads"});

    if (doc.contains("fiber")) {
        const json& j = doc["fiber"];
        check_keys(j, "fiber",
                   {"core_diameter_um", "numerical_aperture", "length_m",
                    "core_index", "core_pitch_um"});
        double d_um = cfg.fiber.core_diameter_m * 1e6;
        double p_um = cfg.fiber.core_pitch_m * 1e6;
        fetch(j, "fiber", "core_diameter_um", d_um);
        fetch(j, "fiber", "numerical_aperture", cfg.fiber.numerical_aperture);
        fetch(j, "fiber", "length_m", cfg.fiber.length_m);
        fetch(j, "fiber", "core_index", cfg.fiber.core_index);
        fetch(j, "fiber", "core_pitch_um", p_um);
        cfg.fiber.core_diameter_m = d_um * 1e-6;
        cfg.fiber.core_pitch_m = p_um * 1e-6;
    }
    if (doc.contains("source")) {
        const json& j = doc["source"];
        check_keys(j, "source", {"incidence_deg", "linewidth_nm"});
        fetch(j, "source", "incidence_deg", cfg.source.incidence_deg);
        fetch(j, "source", "linewidth_nm", cfg.source.linewidth_nm);
    }
    if (doc.contains("grid")) {
        const json& j = doc["grid"];
        check_keys(j, "grid", {"start_nm", "step_nm", "count"});
        fetch(j, "grid", "start_nm", cfg.grid_start_nm);
        fetch(j, "grid", "step_nm", cfg.grid_step_nm);
        fetch(j, "grid", "count", cfg.grid_count);
    }
    if (doc.contains("bundle")) {
        const json& j = doc["bundle"];
        check_keys(j, "bundle",
                   {"core_count", "patch_size_px", "pixel_pitch_um",
                    "mean_counts", "margin_px", "jitter_px"});
        double pp_um = cfg.render.pixel_pitch_m * 1e6;
        fetch(j, "bundle", "core_count", cfg.core_count);
        fetch(j, "bundle", "patch_size_px", cfg.render.patch_size_px);
        fetch(j, "bundle", "pixel_pitch_um", pp_um);
        fetch(j, "bundle", "mean_counts", cfg.render.mean_counts);
        fetch(j, "bundle", "margin_px", cfg.render.margin_px);
        fetch(j, "bundle", "jitter_px", cfg.render.jitter_px);
        cfg.render.pixel_pitch_m = pp_um * 1e-6;
    }
    if (doc.contains("clustering")) {
        const json& j = doc["clustering"];
        check_keys(j, "clustering", {"eps", "min_pts", "intensity_threshold"});
        fetch(j, "clustering", "eps", cfg.clustering.eps);
        fetch(j, "clustering", "min_pts", cfg.clustering.min_pts);
        if (j.contains("intensity_threshold") &&
            !j["intensity_threshold"].is_null()) {
            int t = 0;
            fetch(j, "clustering", "intensity_threshold", t);
            cfg.clustering.intensity_threshold = t;
        }
    }
    if (doc.contains("calibration")) {
        const json& j = doc["calibration"];
        check_keys(j, "calibration", {"aoi_px", "pixels_per_core"});
        fetch(j, "calibration", "aoi_px", cfg.aoi_px);
        fetch(j, "calibration", "pixels_per_core", cfg.pixels_per_core);
    }
    if (doc.contains("solver")) {
        const json& j = doc["solver"];
        check_keys(j, "solver", {"tolerance", "max_iterations"});
        fetch(j, "solver", "tolerance", cfg.solver.tolerance);
        fetch(j, "solver", "max_iterations", cfg.solver.max_iterations);
    }
    if (doc.contains("sweep")) {
        const json& j = doc["sweep"];
        check_keys(j, "sweep",
                   {"sampling_ratios", "sampling_n_lambdas", "sparsity_axis",
                    "sparsity_ratios", "noise_axis", "noise_ratios"});
        fetch(j, "sweep", "sampling_ratios", cfg.sweep.sampling_ratios);
        fetch(j, "sweep", "sampling_n_lambdas", cfg.sweep.sampling_n_lambdas);
        fetch(j, "sweep", "sparsity_axis", cfg.sweep.sparsity_axis);
        fetch(j, "sweep", "sparsity_ratios", cfg.sweep.sparsity_ratios);
        fetch(j, "sweep", "noise_axis", cfg.sweep.noise_axis);
        fetch(j, "sweep", "noise_ratios", cfg.sweep.noise_ratios);
    }
    if (doc.contains("composite")) {
        const json& j = doc["composite"];
        check_keys(j, "composite", {"letters", "channels", "sampling_ratio"});
        fetch(j, "composite", "letters", cfg.composite.letters);
        fetch(j, "composite", "channels", cfg.composite.channels);
        fetch(j, "composite", "sampling_ratio", cfg.composite.sampling_ratio);
    }
    fetch(doc, "", "measurement_noise", cfg.measurement_noise);
    fetch(doc, "", "seed", cfg.seed);
    fetch(doc, "", "threads", cfg.threads);

    cfg.validate();
    return cfg;
}

void save_config(const RunConfig& cfg, const std::string& path) {
    json doc;
    doc["fiber"] = {{"core_diameter_um", cfg.fiber.core_diameter_m * 1e6},
                    {"numerical_aperture", cfg.fiber.numerical_aperture},
                    {"length_m", cfg.fiber.length_m},
                    {"core_index", cfg.fiber.core_index},
                    {"core_pitch_um", cfg.fiber.core_pitch_m * 1e6}};
    doc["source"] = {{"incidence_deg", cfg.source.incidence_deg},
                     {"linewidth_nm", cfg.source.linewidth_nm}};
    doc["grid"] = {{"start_nm", cfg.grid_start_nm},
                   {"step_nm", cfg.grid_step_nm},
                   {"count", cfg.grid_count}};
    doc["bundle"] = {{"core_count", cfg.core_count},
                     {"patch_size_px", cfg.render.patch_size_px},
                     {"pixel_pitch_um", cfg.render.pixel_pitch_m * 1e6},
                     {"mean_counts", cfg.render.mean_counts},
                     {"margin_px", cfg.render.margin_px},
                     {"jitter_px", cfg.render.jitter_px}};
    doc["clustering"] = {{"eps", cfg.clustering.eps},
                         {"min_pts", cfg.clustering.min_pts}};
    if (cfg.clustering.intensity_threshold)
        doc["clustering"]["intensity_threshold"] =
            *cfg.clustering.intensity_threshold;
    else
        doc["clustering"]["intensity_threshold"] = nullptr;
    doc["calibration"] = {{"aoi_px", cfg.aoi_px},
                          {"pixels_per_core", cfg.pixels_per_core}};
    doc["solver"] = {{"tolerance", cfg.solver.tolerance},
                     {"max_iterations", cfg.solver.max_iterations}};
    doc["sweep"] = {{"sampling_ratios", cfg.sweep.sampling_ratios},
                    {"sampling_n_lambdas", cfg.sweep.sampling_n_lambdas},
                    {"sparsity_axis", cfg.sweep.sparsity_axis},
                    {"sparsity_ratios", cfg.sweep.sparsity_ratios},
                    {"noise_axis", cfg.sweep.noise_axis},
                    {"noise_ratios", cfg.sweep.noise_ratios}};
    doc["composite"] = {{"letters", cfg.composite.letters},
                        {"channels", cfg.composite.channels},
                        {"sampling_ratio", cfg.composite.sampling_ratio}};
    doc["measurement_noise"] = cfg.measurement_noise;
    doc["seed"] = cfg.seed;
    doc["threads"] = cfg.threads;

    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_config: cannot open " + path);
    out << doc.dump(2) << "\n";
}

} // namespace mcmmf
