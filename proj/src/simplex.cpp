#include <cmath>
#include <stdexcept>
#include <vector>

#include "mcmmf/solver.hpp"

namespace mcmmf {

// Exact reference for solve_l1_nonneg via the LP reformulation
//
//   minimize  sum t
//   subject   A x - t + s_plus  =  y
//            -A x - t + s_minus = -y
//             x, t, s_plus, s_minus >= 0
//
// solved with a dense-tableau primal simplex. No Phase I is needed: pivoting
// t_i into the row whose right-hand side is negative (i.e. t_i = |y_i|)
// yields a feasible starting basis directly. Bland's rule guarantees
// termination; speed is irrelevant here, trustworthiness is the point.

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kCostTol = 1e-9;

class Tableau {
public:
    Tableau(const Eigen::MatrixXd& A, const Eigen::VectorXd& y) {
        const Eigen::Index rows = A.rows();
        const Eigen::Index cols = A.cols();
        m_ = 2 * rows;
        n_ = cols + 3 * rows;
        // Layout: [x (cols) | t (rows) | s_plus (rows) | s_minus (rows) | rhs]
        t_ = Eigen::MatrixXd::Zero(m_ + 1, n_ + 1);
        t_.block(0, 0, rows, cols) = A;
        t_.block(rows, 0, rows, cols) = -A;
        for (Eigen::Index i = 0; i < rows; ++i) {
            t_(i, cols + i) = -1.0;
            t_(rows + i, cols + i) = -1.0;
            t_(i, cols + rows + i) = 1.0;
            t_(rows + i, cols + 2 * rows + i) = 1.0;
            t_(i, n_) = y(i);
            t_(rows + i, n_) = -y(i);
        }
        // Objective row: minimize sum of t.
        for (Eigen::Index i = 0; i < rows; ++i) t_(m_, cols + i) = 1.0;

        basis_.resize(static_cast<std::size_t>(m_));
        for (Eigen::Index i = 0; i < rows; ++i) {
            basis_[static_cast<std::size_t>(i)] = cols + rows + i;
            basis_[static_cast<std::size_t>(rows + i)] = cols + 2 * rows + i;
        }
        // Make the start feasible: bring t_i into the basis on the side
        // whose slack would be negative.
        for (Eigen::Index i = 0; i < rows; ++i) {
            if (y(i) >= 0.0)
                pivot(rows + i, cols + i);
            else
                pivot(i, cols + i);
        }
    }

    int run() {
        int pivots = 0;
        const int limit = 50000;
        while (pivots < limit) {
            // Bland: entering variable is the lowest-index improving column.
            Eigen::Index enter = -1;
            for (Eigen::Index j = 0; j < n_; ++j) {
                if (t_(m_, j) < -kCostTol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0) return pivots; // optimal

            // Ratio test; ties resolved by the lowest basic variable index
            // (Bland again).
            Eigen::Index leave = -1;
            double best_ratio = 0.0;
            for (Eigen::Index i = 0; i < m_; ++i) {
                const double a = t_(i, enter);
                if (a <= kPivotTol) continue;
                const double ratio = t_(i, n_) / a;
                if (leave < 0 || ratio < best_ratio - 1e-12 ||
                    (std::abs(ratio - best_ratio) <= 1e-12 &&
                     basis_[static_cast<std::size_t>(i)] <
                         basis_[static_cast<std::size_t>(leave)])) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
            if (leave < 0)
                throw std::runtime_error("lp_oracle: objective unbounded below");
            pivot(leave, enter);
            ++pivots;
        }
        throw std::runtime_error("lp_oracle: pivot limit exceeded");
    }

    Eigen::VectorXd extract_x(Eigen::Index cols) const {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(cols);
        for (Eigen::Index i = 0; i < m_; ++i) {
            const Eigen::Index v = basis_[static_cast<std::size_t>(i)];
            if (v < cols) x(v) = t_(i, n_);
        }
        // Clean tiny negatives left by roundoff.
        for (Eigen::Index j = 0; j < cols; ++j)
            if (x(j) < 0.0) x(j) = 0.0;
        return x;
    }

    double objective() const { return -t_(m_, n_); }

private:
    void pivot(Eigen::Index row, Eigen::Index col) {
        const double p = t_(row, col);
        if (std::abs(p) < kPivotTol)
            throw std::runtime_error("lp_oracle: degenerate pivot element");
        t_.row(row) /= p;
        for (Eigen::Index i = 0; i <= m_; ++i) {
            if (i == row) continue;
            const double f = t_(i, col);
            if (f != 0.0) t_.row(i) -= f * t_.row(row);
        }
        basis_[static_cast<std::size_t>(row)] = col;
    }

    Eigen::Index m_ = 0; // constraint rows
    Eigen::Index n_ = 0; // structural + slack columns
    Eigen::MatrixXd t_;  // (m_+1) x (n_+1), last row objective, last col rhs
    std::vector<Eigen::Index> basis_;
};

} // namespace

L1Solution lp_oracle(const L1Problem& problem) {
    problem.validate();
    if (problem.A.rows() * problem.A.cols() > 5000)
        throw std::invalid_argument(
            "lp_oracle: instance too large (rows * cols must be <= 5000)");

    Tableau tableau(problem.A, problem.y);
    const int pivots = tableau.run();

    L1Solution sol;
    sol.x = tableau.extract_x(problem.A.cols());
    sol.objective = (problem.A * sol.x - problem.y).cwiseAbs().sum();
    sol.iterations = pivots;
    sol.converged = true;
    return sol;
}

} // namespace mcmmf
