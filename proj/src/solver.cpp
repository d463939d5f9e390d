#include "mcmmf/solver.hpp"

#include <cmath>
#include <stdexcept>

#include "mcmmf/threading.hpp"

namespace mcmmf {

void L1Problem::validate() const {
    if (A.rows() < 1 || A.cols() < 1)
        throw std::invalid_argument("L1Problem: A must be nonempty");
    if (y.size() != A.rows())
        throw std::invalid_argument("L1Problem: y size must match A rows");
    if (!A.allFinite() || !y.allFinite())
        throw std::invalid_argument("L1Problem: A and y must be finite");
    if (!(tolerance > 0.0))
        throw std::invalid_argument("L1Problem: tolerance must be > 0");
    if (max_iterations < 0)
        throw std::invalid_argument("L1Problem: max_iterations must be >= 0");
}

namespace {

double soft_threshold(double v, double k) {
    if (v > k) return v - k;
    if (v < -k) return v + k;
    return 0.0;
}

} // namespace

// Splitting: z1 = A x carries the L1 residual term, z2 = x carries the
// nonnegativity constraint. The x update solves (A^T A + I) x = rhs, which
// is independent of the penalty rho, so the Cholesky factor is computed
// once and rho can adapt freely.
L1Solution solve_l1_nonneg(const L1Problem& problem,
                           std::vector<double>* objective_trace) {
    problem.validate();
    const Eigen::Index rows = problem.A.rows();
    const Eigen::Index cols = problem.A.cols();
    const int max_iter =
        problem.max_iterations > 0
            ? problem.max_iterations
            : std::max<int>(1000, 10 * static_cast<int>(rows + cols));

    const Eigen::MatrixXd& A = problem.A;
    const Eigen::VectorXd& y = problem.y;

    Eigen::MatrixXd gram = A.transpose() * A;
    gram.diagonal().array() += 1.0;
    const Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("solve_l1_nonneg: factorization failed");

    Eigen::VectorXd x = Eigen::VectorXd::Zero(cols);
    Eigen::VectorXd z1 = Eigen::VectorXd::Zero(rows);
    Eigen::VectorXd z2 = Eigen::VectorXd::Zero(cols);
    Eigen::VectorXd u1 = Eigen::VectorXd::Zero(rows); // scaled duals
    Eigen::VectorXd u2 = Eigen::VectorXd::Zero(cols);
    Eigen::VectorXd ax(rows), v1(rows), v2(cols), z1_prev(rows), z2_prev(cols);

    double rho = 1.0;
    const double alpha = 1.6; // over-relaxation
    const double eps = problem.tolerance;

    L1Solution best;
    best.x = Eigen::VectorXd::Zero(cols);
    best.objective = y.cwiseAbs().sum(); // objective of x = 0
    if (objective_trace) {
        objective_trace->clear();
        objective_trace->push_back(best.objective);
    }

    int iter = 0;
    bool converged = false;
    constexpr int kBestEvery = 5;

    while (iter < max_iter) {
        ++iter;

        x = llt.solve(A.transpose() * (z1 - u1) + (z2 - u2));
        ax.noalias() = A * x;

        z1_prev = z1;
        z2_prev = z2;
        v1 = alpha * ax + (1.0 - alpha) * z1;
        v2 = alpha * x + (1.0 - alpha) * z2;

        // prox of ||. - y||_1 with weight 1/rho
        const double k = 1.0 / rho;
        for (Eigen::Index i = 0; i < rows; ++i)
            z1(i) = y(i) + soft_threshold(v1(i) + u1(i) - y(i), k);
        z2 = (v2 + u2).cwiseMax(0.0);

        u1 += v1 - z1;
        u2 += v2 - z2;

        // Track the cheapest feasible candidate: z2 is nonnegative by
        // construction and converges to the solution.
        if (iter % kBestEvery == 0 || iter == max_iter) {
            const double obj = (A * z2 - y).cwiseAbs().sum();
            if (obj < best.objective) {
                best.objective = obj;
                best.x = z2;
            }
            if (objective_trace) objective_trace->push_back(best.objective);
        }

        const double r_norm = std::sqrt((ax - z1).squaredNorm() +
                                        (x - z2).squaredNorm());
        const double s_norm =
            rho * (A.transpose() * (z1 - z1_prev) + (z2 - z2_prev)).norm();
        const double p_scale = std::max(
            std::sqrt(ax.squaredNorm() + x.squaredNorm()),
            std::sqrt(z1.squaredNorm() + z2.squaredNorm()));
        const double d_scale = rho * (A.transpose() * u1 + u2).norm();
        const double eps_pri =
            std::sqrt(static_cast<double>(rows + cols)) * eps + eps * p_scale;
        const double eps_dual =
            std::sqrt(static_cast<double>(cols)) * eps + eps * d_scale;
        if (r_norm <= eps_pri && s_norm <= eps_dual) {
            converged = true;
            break;
        }

        // Residual balancing keeps rho in a productive range; the scaled
        // duals must be rescaled whenever rho changes.
        if (iter % 10 == 0) {
            if (r_norm > 10.0 * s_norm && rho < 1e6) {
                rho *= 2.0;
                u1 *= 0.5;
                u2 *= 0.5;
            } else if (s_norm > 10.0 * r_norm && rho > 1e-6) {
                rho *= 0.5;
                u1 *= 2.0;
                u2 *= 2.0;
            }
        }
    }

    // Evaluate the final iterate too; convergence may land between the
    // periodic best checks.
    const double final_obj = (A * z2 - y).cwiseAbs().sum();
    if (final_obj < best.objective) {
        best.objective = final_obj;
        best.x = z2;
    }
    if (objective_trace) objective_trace->push_back(best.objective);

    best.iterations = iter;
    best.converged = converged;
    return best;
}

namespace {

// One core's solve; shared verbatim by the parallel batch and the serial
// reference, so the two can only differ in loop scheduling.
void solve_core(const Stm& stm, const std::vector<Eigen::VectorXd>& ys, int i,
                const SolveOptions& options, BatchResult& result) {
    const StmCore& core = stm.cores[static_cast<std::size_t>(i)];
    CoreStatus& st = result.status[static_cast<std::size_t>(i)];
    st.core_id = core.id;
    try {
        L1Problem p;
        p.A = core.matrix.cast<double>();
        p.y = ys[static_cast<std::size_t>(i)];
        p.tolerance = options.tolerance;
        p.max_iterations = options.max_iterations;
        const L1Solution sol = solve_l1_nonneg(p);
        result.spectra[static_cast<std::size_t>(i)] = sol.x;
        st.converged = sol.converged;
        st.iterations = sol.iterations;
        st.objective = sol.objective;
    } catch (const std::exception& e) {
        result.spectra[static_cast<std::size_t>(i)] =
            Eigen::VectorXd::Zero(static_cast<Eigen::Index>(stm.grid.size()));
        st.message = e.what();
    }
}

BatchResult make_batch_result(const Stm& stm,
                              const std::vector<Eigen::VectorXd>& ys) {
    if (ys.size() != stm.cores.size())
        throw std::invalid_argument("solve_batch: need one vector per core");
    BatchResult result;
    result.spectra.resize(stm.cores.size());
    result.status.resize(stm.cores.size());
    return result;
}

} // namespace

BatchResult solve_batch_vectors(const Stm& stm,
                                const std::vector<Eigen::VectorXd>& ys,
                                const SolveOptions& options, int threads) {
    BatchResult result = make_batch_result(stm, ys);
    const int n = static_cast<int>(stm.cores.size());
    const int nthreads = resolve_threads(threads);
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
    for (int i = 0; i < n; ++i) solve_core(stm, ys, i, options, result);
    return result;
}

BatchResult solve_batch_vectors_reference(const Stm& stm,
                                          const std::vector<Eigen::VectorXd>& ys,
                                          const SolveOptions& options) {
    BatchResult result = make_batch_result(stm, ys);
    const int n = static_cast<int>(stm.cores.size());
    for (int i = 0; i < n; ++i) solve_core(stm, ys, i, options, result);
    return result;
}

BatchResult solve_batch(const Stm& stm, const SpeckleFrame& frame,
                        const SolveOptions& options, int threads) {
    std::vector<Eigen::VectorXd> ys;
    ys.reserve(stm.cores.size());
    for (const StmCore& core : stm.cores)
        ys.push_back(extract_pixel_vector(frame, stm, core.id));
    return solve_batch_vectors(stm, ys, options, threads);
}

} // namespace mcmmf
