#ifndef EHNET_LP_HPP
#define EHNET_LP_HPP

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace ehnet::lp {

enum class Status { Optimal, Unbounded, PivotLimit };

struct Result {
    Status status = Status::PivotLimit;
    double value = 0.0;
    Eigen::VectorXd x;
};

/// maximize c.x subject to A x <= b, x >= 0, with b >= 0 so the origin is a
/// feasible start. Dense tableau simplex with Bland's rule (no cycling).
inline Result maximize(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                       int max_pivots = 100000, double tol = 1e-11) {
    const Eigen::Index m = A.rows();
    const Eigen::Index n = A.cols();
    const Eigen::Index cols = n + m + 1;

    // Rows 0..m-1 are constraints, row m holds the reduced costs.
    Eigen::MatrixXd tab = Eigen::MatrixXd::Zero(m + 1, cols);
    tab.block(0, 0, m, n) = A;
    tab.block(0, n, m, m).setIdentity();
    tab.col(cols - 1).head(m) = b;
    tab.row(m).head(n) = -c.transpose();

    std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;

    Result res;
    for (int pivot = 0; pivot < max_pivots; ++pivot) {
        Eigen::Index enter = -1;
        for (Eigen::Index j = 0; j < n + m; ++j) {
            if (tab(m, j) < -tol) {
                enter = j;
                break;
            }
        }
        if (enter < 0) {
            res.status = Status::Optimal;
            res.value = tab(m, cols - 1);
            res.x = Eigen::VectorXd::Zero(n);
            for (Eigen::Index i = 0; i < m; ++i) {
                const Eigen::Index v = basis[static_cast<std::size_t>(i)];
                if (v < n) res.x(v) = tab(i, cols - 1);
            }
            return res;
        }

        Eigen::Index leave = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < m; ++i) {
            const double aij = tab(i, enter);
            if (aij <= tol) continue;
            const double ratio = tab(i, cols - 1) / aij;
            if (ratio < best - tol ||
                (std::abs(ratio - best) <= tol && leave >= 0 &&
                 basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
                best = ratio;
                leave = i;
            }
        }
        if (leave < 0) {
            res.status = Status::Unbounded;
            return res;
        }

        tab.row(leave) /= tab(leave, enter);
        for (Eigen::Index i = 0; i <= m; ++i) {
            if (i == leave) continue;
            const double f = tab(i, enter);
            if (f != 0.0) tab.row(i) -= f * tab.row(leave);
        }
        basis[static_cast<std::size_t>(leave)] = enter;
    }
    res.status = Status::PivotLimit;
    return res;
}

} // namespace ehnet::lp

#endif // EHNET_LP_HPP
