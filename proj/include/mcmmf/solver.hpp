#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcmmf/frame.hpp"
#include "mcmmf/stm.hpp"

namespace mcmmf {

// Nonnegative L1 residual fit:  minimize ||A x - y||_1  subject to  x >= 0.
struct L1Problem {
    Eigen::MatrixXd A;
    Eigen::VectorXd y;
    double tolerance = 1e-8;  // absolute and relative residual tolerance
    int max_iterations = 0;   // 0 picks max(1000, 10 * (rows + cols))

    void validate() const;
};

struct L1Solution {
    Eigen::VectorXd x;       // elementwise >= 0
    double objective = 0.0;  // ||A x - y||_1 at x
    int iterations = 0;
    bool converged = false;
};

// First-order splitting solver (ADMM with over-relaxation and residual
// balancing). Tracks the best feasible iterate seen, so the returned
// objective never exceeds any intermediate one; on iteration exhaustion the
// best iterate is returned with converged = false. If objective_trace is
// given it receives the running best objective, a nonincreasing sequence.
L1Solution solve_l1_nonneg(const L1Problem& problem,
                           std::vector<double>* objective_trace = nullptr);

// Independent exact reference: textbook dense-tableau primal simplex with
// Bland's rule on the LP reformulation of the same problem. Only for small
// instances (rows * cols <= 5000).
L1Solution lp_oracle(const L1Problem& problem);

struct SolveOptions {
    double tolerance = 1e-8;
    int max_iterations = 0;
};

struct CoreStatus {
    std::uint32_t core_id = 0;
    bool converged = false;
    int iterations = 0;
    double objective = 0.0;
    std::string message; // empty on success
};

// Per-core reconstruction results, aligned with stm.cores. A core whose
// solve throws gets a zero spectrum and a message; the batch continues.
struct BatchResult {
    std::vector<Eigen::VectorXd> spectra;
    std::vector<CoreStatus> status;
};

// Reconstructs every core of a scene frame.
BatchResult solve_batch(const Stm& stm, const SpeckleFrame& frame,
                        const SolveOptions& options, int threads = 0);

// Same, but with caller-supplied measurement vectors (one per core).
BatchResult solve_batch_vectors(const Stm& stm,
                                const std::vector<Eigen::VectorXd>& ys,
                                const SolveOptions& options, int threads = 0);

// Serial reference for the OpenMP batch; bit-identical results.
BatchResult solve_batch_vectors_reference(const Stm& stm,
                                          const std::vector<Eigen::VectorXd>& ys,
                                          const SolveOptions& options);

} // namespace mcmmf
