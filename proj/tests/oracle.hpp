#pragma once

#include <optional>

#include "elsem/numkit.hpp"

namespace test_helpers {

// Independent primal maximizer of sum_j log(pi_j) over the probability
// simplex intersected with the moment constraints U' pi = 0, by gradient
// projection onto the affine constraint set with a feasibility-preserving
// backtracking line search. Returns the achieved log likelihood, or nothing
// when no strictly positive feasible starting point was found.
inline std::optional<double> simplex_log_likelihood_oracle(const elsem::Matrix& u, int iterations) {
    using elsem::Matrix;
    using elsem::Vector;

    const Eigen::Index n = u.rows();
    const Eigen::Index m = u.cols();

    Matrix a(m + 1, n);
    a.row(0).setOnes();
    a.bottomRows(m) = u.transpose();
    Vector b = Vector::Zero(m + 1);
    b[0] = 1.0;

    const Eigen::LLT<Matrix> aat((a * a.transpose()).eval());
    if (aat.info() != Eigen::Success) return std::nullopt;
    auto project_affine = [&](const Vector& pi) -> Vector {
        return pi - a.transpose() * aat.solve(a * pi - b);
    };
    auto project_null = [&](const Vector& g) -> Vector {
        return g - a.transpose() * aat.solve(a * g);
    };

    Vector pi = project_affine(Vector::Constant(n, 1.0 / static_cast<double>(n)));
    if (pi.minCoeff() <= 1e-8) return std::nullopt;

    auto value = [](const Vector& p) { return p.array().log().sum(); };
    double f = value(pi);

    for (int iter = 0; iter < iterations; ++iter) {
        const Vector dir = project_null(pi.cwiseInverse());
        if (dir.norm() <= 1e-15) break;

        // Largest step keeping strictly inside the positive orthant.
        double alpha = 1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (dir[i] < 0.0) alpha = std::min(alpha, -0.95 * pi[i] / dir[i]);
        }
        bool moved = false;
        for (int half = 0; half < 60; ++half, alpha *= 0.5) {
            const Vector cand = pi + alpha * dir;
            if (cand.minCoeff() <= 0.0) continue;
            const double fc = value(cand);
            if (fc > f) {
                pi = cand;
                f = fc;
                moved = true;
                break;
            }
        }
        if (!moved) break;
        if ((iter & 255) == 255) {
            pi = project_affine(pi);  // counter floating-point drift
            f = value(pi);
        }
    }
    return f;
}

}  // namespace test_helpers
