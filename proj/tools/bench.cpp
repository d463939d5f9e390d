// Timing comparison of the OpenMP kernels against their serial reference
// twins. The two code paths must agree bit for bit; the benchmark verifies
// that while it measures.

#include <chrono>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "mcmmf/bundle.hpp"
#include "mcmmf/experiments.hpp"
#include "mcmmf/rng.hpp"
#include "mcmmf/solver.hpp"
#include "mcmmf/threading.hpp"

using namespace mcmmf;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

bool identical(const Eigen::ArrayXXd& a, const Eigen::ArrayXXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           (a == b).all();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel benchmark: OpenMP vs serial reference"};
    int cores = 100;
    int threads = 0;
    int repeats = 3;
    app.add_option("--cores", cores, "bundle size");
    app.add_option("--threads", threads, "worker threads (0 = auto)");
    app.add_option("--repeats", repeats, "timing repeats");
    CLI11_PARSE(app, argc, argv);

    std::printf("threads: %d (requested %d)\n", resolve_threads(threads), threads);

    FiberSpec fiber;
    SourceModel source;
    RenderParams render;
    const Bundle bundle = Bundle::build(fiber, source, render, cores, 42, threads);
    const std::vector<double> ones(static_cast<std::size_t>(cores), 1.0);

    // Render kernel.
    double t_par = 1e300, t_ser = 1e300;
    Eigen::ArrayXXd frame_par, frame_ser;
    for (int r = 0; r < repeats; ++r) {
        frame_par.resize(0, 0);
        auto t0 = Clock::now();
        accumulate_channel(bundle, ones, 670.0, frame_par, threads);
        t_par = std::min(t_par, ms_since(t0));

        frame_ser.resize(0, 0);
        t0 = Clock::now();
        accumulate_channel_reference(bundle, ones, 670.0, frame_ser);
        t_ser = std::min(t_ser, ms_since(t0));
    }
    std::printf("render   %4d cores: omp %8.2f ms   serial %8.2f ms   "
                "speedup %.2fx   identical %s\n",
                cores, t_par, t_ser, t_ser / t_par,
                identical(frame_par, frame_ser) ? "yes" : "NO");
    if (!identical(frame_par, frame_ser)) return 1;

    // Batch solve kernel on a synthetic reconstruction workload.
    const WavelengthGrid grid = WavelengthGrid::regular(609.0, 2.0, 43);
    Stm stm;
    stm.grid = grid;
    Rng rng(7);
    std::vector<Eigen::VectorXd> ys;
    for (int c = 0; c < cores; ++c) {
        StmCore core;
        core.id = static_cast<std::uint32_t>(c);
        core.matrix.resize(86, 43);
        for (Eigen::Index i = 0; i < core.matrix.size(); ++i)
            core.matrix.data()[i] = static_cast<float>(rng.uniform());
        core.pixels.resize(86);
        stm.cores.push_back(std::move(core));
        Eigen::VectorXd y(86);
        for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.uniform();
        ys.push_back(y);
    }
    SolveOptions options;
    options.tolerance = 1e-7;
    options.max_iterations = 500;

    double s_par = 1e300, s_ser = 1e300;
    BatchResult b_par, b_ser;
    for (int r = 0; r < repeats; ++r) {
        auto t0 = Clock::now();
        b_par = solve_batch_vectors(stm, ys, options, threads);
        s_par = std::min(s_par, ms_since(t0));

        t0 = Clock::now();
        b_ser = solve_batch_vectors_reference(stm, ys, options);
        s_ser = std::min(s_ser, ms_since(t0));
    }
    bool same = true;
    for (std::size_t i = 0; i < b_par.spectra.size(); ++i)
        same = same && (b_par.spectra[i].array() == b_ser.spectra[i].array()).all();
    std::printf("solve    %4d cores: omp %8.2f ms   serial %8.2f ms   "
                "speedup %.2fx   identical %s\n",
                cores, s_par, s_ser, s_ser / s_par, same ? "yes" : "NO");
    return same ? 0 : 1;
}
