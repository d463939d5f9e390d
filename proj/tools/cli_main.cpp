#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcmmf/config.hpp"
#include "mcmmf/core_map.hpp"
#include "mcmmf/errors.hpp"
#include "mcmmf/experiments.hpp"
#include "mcmmf/frame.hpp"
#include "mcmmf/rng.hpp"
#include "mcmmf/solver.hpp"
#include "mcmmf/stm.hpp"

namespace fs = std::filesystem;
using namespace mcmmf;

namespace {

std::string frame_filename(int index, double wavelength_nm) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "frame_%04d_%.4f.pgm", index, wavelength_nm);
    return buf;
}

// Wavelength is encoded in the file name: frame_<index>_<nm>.pgm.
std::optional<double> parse_frame_wavelength(const std::string& name) {
    if (name.size() < 5 || name.substr(name.size() - 4) != ".pgm")
        return std::nullopt;
    const std::string stem = name.substr(0, name.size() - 4);
    const std::size_t us = stem.rfind('_');
    if (us == std::string::npos) return std::nullopt;
    try {
        std::size_t used = 0;
        const double v = std::stod(stem.substr(us + 1), &used);
        if (used != stem.size() - us - 1) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

void apply_overrides(RunConfig& cfg, const std::optional<std::uint64_t>& seed,
                     const std::optional<int>& threads) {
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
}

Lab build_lab(const RunConfig& cfg) {
    std::cerr << "building bundle (" << cfg.core_count << " cores, "
              << cfg.grid_count << " wavelengths)...\n";
    Lab lab = make_lab(cfg.fiber, cfg.source, cfg.render, cfg.clustering,
                       cfg.grid(), cfg.core_count, cfg.aoi_px,
                       cfg.pixels_per_core, cfg.seed, cfg.threads);
    std::cerr << "detected " << lab.map.sites.size() << " cores, calibrated "
              << lab.stm.cores.size() << "\n";
    return lab;
}

void write_spectra_csv(const Stm& stm, const BatchResult& batch,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "core_id,wavelength_nm,intensity\n";
    char line[96];
    for (std::size_t i = 0; i < stm.cores.size(); ++i) {
        for (std::size_t j = 0; j < stm.grid.size(); ++j) {
            std::snprintf(line, sizeof line, "%u,%.4f,%.10g\n", stm.cores[i].id,
                          stm.grid.values_nm[j],
                          batch.spectra[i](static_cast<Eigen::Index>(j)));
            out << line;
        }
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

void report_status(const BatchResult& batch) {
    int unconverged = 0;
    for (const CoreStatus& st : batch.status) {
        if (!st.message.empty())
            std::cerr << "core " << st.core_id << " failed: " << st.message << "\n";
        else if (!st.converged)
            ++unconverged;
    }
    if (unconverged > 0)
        std::cerr << unconverged
                  << " cores stopped on the iteration cap (best iterate kept)\n";
}

int run_simulate(const std::string& config_path, const std::string& out_dir,
                 std::optional<std::uint64_t> seed, std::optional<int> threads) {
    RunConfig cfg = load_config(config_path);
    apply_overrides(cfg, seed, threads);
    const WavelengthGrid grid = cfg.grid();

    fs::create_directories(fs::path(out_dir) / "frames");
    save_config(cfg, (fs::path(out_dir) / "effective_config.json").string());

    const Bundle bundle = Bundle::build(cfg.fiber, cfg.source, cfg.render,
                                        cfg.core_count, Rng::mix(cfg.seed, 1),
                                        cfg.threads);
    const std::vector<double> ones(static_cast<std::size_t>(cfg.core_count), 1.0);
    std::vector<SpeckleFrame> frames;
    frames.reserve(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        frames.push_back(
            render_bundle(bundle, ones, grid.values_nm[j], cfg.threads));
        write_pgm(frames.back(),
                  (fs::path(out_dir) / "frames" /
                   frame_filename(static_cast<int>(j), grid.values_nm[j]))
                      .string());
    }
    write_pgm(average_frames(frames),
              (fs::path(out_dir) / "mean_frame.pgm").string());

    nlohmann::json layout;
    layout["frame"] = {{"w", bundle.layout.frame_width},
                       {"h", bundle.layout.frame_height}};
    layout["centroids"] = nlohmann::json::array();
    for (const Vec2& c : bundle.layout.centroids)
        layout["centroids"].push_back({c.x, c.y});
    std::ofstream lj((fs::path(out_dir) / "layout.json").string());
    lj << layout.dump(2) << "\n";

    std::cerr << "wrote " << grid.size() << " calibration frames to " << out_dir
              << "/frames\n";
    return 0;
}

int run_find_cores(const std::string& frame_path, const std::string& out_path,
                   double eps, int min_pts, std::optional<int> threshold,
                   int aoi) {
    DbscanParams params;
    params.eps = eps;
    params.min_pts = min_pts;
    params.intensity_threshold = threshold;
    const SpeckleFrame frame = read_pgm(frame_path);
    const CoreMap map = extract_core_map(frame, params, aoi);
    if (map.sites.empty())
        std::cerr << "warning: no cores found in " << frame_path << "\n";
    else
        std::cerr << "found " << map.sites.size() << " cores\n";
    save_core_map(map, out_path);
    return 0;
}

int run_calibrate(const std::string& frames_dir, const std::string& cores_path,
                  const std::string& out_path, std::optional<int> aoi,
                  std::optional<int> pixels) {
    std::vector<std::pair<double, std::string>> found;
    for (const auto& entry : fs::directory_iterator(frames_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (const auto nm = parse_frame_wavelength(name))
            found.emplace_back(*nm, entry.path().string());
    }
    if (found.empty())
        throw calibration_error("no frame_*.pgm files in " + frames_dir);
    // Calibration order comes from the wavelength in the name, not from the
    // directory listing or lexical order.
    std::sort(found.begin(), found.end());

    WavelengthGrid grid;
    std::vector<SpeckleFrame> frames;
    for (const auto& [nm, path] : found) {
        grid.values_nm.push_back(nm);
        frames.push_back(read_pgm(path));
    }

    CoreMap map = load_core_map(cores_path);
    if (aoi) map = with_aoi_size(map, *aoi);
    const int budget = pixels ? *pixels : map.aoi_size_px * map.aoi_size_px;

    CalibrationReport report;
    const Stm stm = calibrate(frames, grid, map, budget, &report);
    for (std::uint32_t id : report.skipped_sites)
        std::cerr << "warning: site " << id
                  << " skipped (clipped AOI cannot supply " << budget
                  << " pixels)\n";
    save_stm(stm, out_path);
    std::cerr << "calibrated " << stm.cores.size() << " cores at "
              << grid.size() << " wavelengths\n";
    return 0;
}

int run_reconstruct(const std::string& stm_path, const std::string& frame_path,
                    const std::string& out_path, double tolerance,
                    int max_iterations, std::optional<int> threads) {
    const Stm stm = load_stm(stm_path);
    const SpeckleFrame frame = read_pgm(frame_path);
    SolveOptions options;
    options.tolerance = tolerance;
    options.max_iterations = max_iterations;
    const BatchResult batch =
        solve_batch(stm, frame, options, threads.value_or(0));
    report_status(batch);
    write_spectra_csv(stm, batch, out_path);
    std::cerr << "wrote spectra for " << stm.cores.size() << " cores to "
              << out_path << "\n";
    return 0;
}

int run_sweep(const std::string& config_path, const std::string& kind,
              const std::string& out_dir, std::optional<std::uint64_t> seed,
              std::optional<int> threads) {
    RunConfig cfg = load_config(config_path);
    apply_overrides(cfg, seed, threads);
    fs::create_directories(out_dir);
    save_config(cfg, (fs::path(out_dir) / "effective_config.json").string());

    const Lab lab = build_lab(cfg);
    std::vector<SweepResult> results;
    if (kind == "sampling") {
        results = sweep_sampling(lab, cfg.sweep.sampling_n_lambdas,
                                 cfg.sweep.sampling_ratios, cfg.solver,
                                 cfg.measurement_noise, cfg.seed);
    } else if (kind == "sparsity") {
        results = sweep_sparsity(lab, cfg.sweep.sparsity_axis,
                                 cfg.sweep.sparsity_ratios, cfg.solver,
                                 cfg.measurement_noise, cfg.seed);
    } else if (kind == "noise") {
        results = sweep_noise(lab, cfg.sweep.noise_axis, cfg.sweep.noise_ratios,
                              cfg.solver, cfg.measurement_noise, cfg.seed);
    } else {
        std::cerr << "error: unknown sweep kind '" << kind << "'\n";
        return 2;
    }
    for (const SweepResult& r : results) {
        const std::string path =
            (fs::path(out_dir) / (kind + "_" + r.label + ".csv")).string();
        write_sweep_csv(r, path);
        std::cerr << "wrote " << path << "\n";
    }
    return 0;
}

int run_composite(const std::string& config_path, const std::string& out_dir,
                  std::optional<double> ratio, std::optional<std::uint64_t> seed,
                  std::optional<int> threads) {
    RunConfig cfg = load_config(config_path);
    apply_overrides(cfg, seed, threads);
    if (ratio) cfg.composite.sampling_ratio = *ratio;
    fs::create_directories(out_dir);
    save_config(cfg, (fs::path(out_dir) / "effective_config.json").string());

    const Lab lab = build_lab(cfg);

    std::vector<GlyphAssignment> assignments;
    const std::size_t n = cfg.composite.letters.size();
    for (std::size_t i = 0; i < n; ++i) {
        GlyphAssignment a;
        a.glyph = cfg.composite.letters[i];
        a.channel = cfg.composite.channels.empty()
                        ? static_cast<int>((i + 0.5) * cfg.grid_count / n)
                        : cfg.composite.channels[i];
        assignments.push_back(a);
    }

    const CompositeResult result =
        run_composite(lab, assignments, cfg.composite.sampling_ratio, cfg.solver,
                      cfg.measurement_noise, cfg.seed);
    report_status(result.batch);

    double peak = 0.0;
    for (const Eigen::ArrayXXd& m : result.maps)
        peak = std::max(peak, m.maxCoeff());
    if (peak <= 0.0) peak = 1.0;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "%c_%.1f.pgm", assignments[i].glyph,
                      result.wavelengths_nm[i]);
        write_pgm(quantize_frame(result.maps[i] * (4095.0 / peak)),
                  (fs::path(out_dir) / name).string());
        std::snprintf(name, sizeof name, "truth_%c_%.1f.pgm",
                      assignments[i].glyph, result.wavelengths_nm[i]);
        write_pgm(quantize_frame(result.truth[i] * 4095.0),
                  (fs::path(out_dir) / name).string());
    }

    std::ofstream ct((fs::path(out_dir) / "crosstalk.csv").string());
    ct << "letter,channel,wavelength_nm";
    for (const GlyphAssignment& a : assignments) ct << ",energy_" << a.glyph;
    ct << "\n";
    char cell[48];
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        ct << assignments[i].glyph << "," << assignments[i].channel;
        std::snprintf(cell, sizeof cell, ",%.4f", result.wavelengths_nm[i]);
        ct << cell;
        for (std::size_t j = 0; j < assignments.size(); ++j) {
            std::snprintf(cell, sizeof cell, ",%.10g",
                          result.crosstalk(static_cast<Eigen::Index>(i),
                                           static_cast<Eigen::Index>(j)));
            ct << cell;
        }
        ct << "\n";
    }

    const Stm sub = subsample(lab.stm, cfg.composite.sampling_ratio,
                              Rng::mix(cfg.seed, 17));
    write_spectra_csv(sub, result.batch,
                      (fs::path(out_dir) / "spectra.csv").string());
    std::cerr << "wrote " << assignments.size() << " channel maps to " << out_dir
              << "\n";
    return 0;
}

int run_init_config(const std::string& kind, const std::string& out_path) {
    if (kind == "sweep") {
        save_config(default_config(), out_path);
    } else if (kind == "composite") {
        save_config(composite_default_config(), out_path);
    } else {
        std::cerr << "error: unknown config kind '" << kind << "'\n";
        return 2;
    }
    std::cerr << "wrote " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Simulator and reconstruction pipeline for a multicore multimode "
        "fiber snapshot spectrometer"};
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string config_path, out_dir = "out", frame_path, out_path;
    std::string cores_path, frames_dir, stm_path, kind;
    double eps = 3.0, tolerance = 1e-7;
    int min_pts = 13, aoi = 20, max_iterations = 1500;
    std::optional<int> threshold, aoi_opt, pixels_opt;
    std::optional<double> ratio_opt;

    CLI::App* simulate = app.add_subcommand(
        "simulate", "Render the calibration frame stack of a bundle");
    simulate->add_option("--config", config_path, "JSON run configuration")
        ->required();
    simulate->add_option("--out", out_dir, "output directory");
    simulate->add_option("--seed", seed, "override the config seed");
    simulate->add_option("--threads", threads, "worker threads (0 = auto)");

    CLI::App* find_cores =
        app.add_subcommand("find-cores", "Detect core sites in a frame");
    find_cores->add_option("--frame", frame_path, "input PGM frame")->required();
    find_cores->add_option("--out", out_path, "core map JSON path")->required();
    find_cores->add_option("--eps", eps, "DBSCAN radius in pixels");
    find_cores->add_option("--min-pts", min_pts, "DBSCAN density threshold");
    find_cores->add_option("--threshold", threshold,
                           "intensity threshold (default: Otsu)");
    find_cores->add_option("--aoi", aoi, "AOI side length in pixels");

    CLI::App* calibrate_cmd = app.add_subcommand(
        "calibrate", "Build the spectral transmission matrix from frames");
    calibrate_cmd->add_option("--frames", frames_dir, "directory of frame_*.pgm")
        ->required();
    calibrate_cmd->add_option("--cores", cores_path, "core map JSON")->required();
    calibrate_cmd->add_option("--out", out_path, "output STM path")->required();
    calibrate_cmd->add_option("--aoi", aoi_opt, "recentre AOIs at this size");
    calibrate_cmd->add_option("--pixels", pixels_opt,
                              "pixels per core (default: full AOI)");

    CLI::App* reconstruct =
        app.add_subcommand("reconstruct", "Recover per-core spectra of a frame");
    reconstruct->add_option("--stm", stm_path, "calibrated STM")->required();
    reconstruct->add_option("--frame", frame_path, "scene PGM frame")->required();
    reconstruct->add_option("--out", out_path, "spectra CSV path")->required();
    reconstruct->add_option("--tol", tolerance, "solver tolerance");
    reconstruct->add_option("--max-iter", max_iterations, "iteration cap");
    reconstruct->add_option("--threads", threads, "worker threads (0 = auto)");

    CLI::App* sweep = app.add_subcommand(
        "sweep", "Run a reconstruction-quality sweep end to end");
    sweep->add_option("--config", config_path, "JSON run configuration")
        ->required();
    sweep->add_option("--kind", kind, "sampling | sparsity | noise")->required();
    sweep->add_option("--out", out_dir, "output directory");
    sweep->add_option("--seed", seed, "override the config seed");
    sweep->add_option("--threads", threads, "worker threads (0 = auto)");

    CLI::App* composite = app.add_subcommand(
        "composite", "Snapshot multi-letter imaging experiment");
    composite->add_option("--config", config_path, "JSON run configuration")
        ->required();
    composite->add_option("--out", out_dir, "output directory");
    composite->add_option("--ratio", ratio_opt, "sampling ratio override");
    composite->add_option("--seed", seed, "override the config seed");
    composite->add_option("--threads", threads, "worker threads (0 = auto)");

    CLI::App* init_config =
        app.add_subcommand("init-config", "Write a default configuration file");
    init_config->add_option("--kind", kind, "sweep | composite")->required();
    init_config->add_option("--out", out_path, "config path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed())
            return run_simulate(config_path, out_dir, seed, threads);
        if (find_cores->parsed())
            return run_find_cores(frame_path, out_path, eps, min_pts, threshold,
                                  aoi);
        if (calibrate_cmd->parsed())
            return run_calibrate(frames_dir, cores_path, out_path, aoi_opt,
                                 pixels_opt);
        if (reconstruct->parsed())
            return run_reconstruct(stm_path, frame_path, out_path, tolerance,
                                   max_iterations, threads);
        if (sweep->parsed()) return run_sweep(config_path, kind, out_dir, seed, threads);
        if (composite->parsed())
            return run_composite(config_path, out_dir, ratio_opt, seed, threads);
        if (init_config->parsed()) return run_init_config(kind, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
