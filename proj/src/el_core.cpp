#include "elsem/el_core.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <random>

namespace elsem {

namespace {

void check_constraint_matrix(const Matrix& u) {
    const Eigen::Index n = u.rows();
    const Eigen::Index m = u.cols();
    if (m < 1 || n < m + 1) {
        throw DimensionMismatch("constraint matrix needs n >= m+1 rows");
    }
    if (!u.allFinite()) {
        throw DimensionMismatch("constraint matrix has non-finite entries");
    }
}

}  // namespace

ELDiagnostics el_diagnostics(const Matrix& u) {
    check_constraint_matrix(u);
    const double n = static_cast<double>(u.rows());

    ELDiagnostics d;
    d.x_bar_norm = u.colwise().mean().norm();
    d.x_star = u.rowwise().norm().maxCoeff();
    const Matrix s = u.transpose() * u / n;
    auto [lo, hi] = eigen_bounds(s, 1e-9);
    d.lambda_min = lo;
    d.lambda_max = hi;
    d.owen_condition = d.lambda_min > 5.0 * d.x_bar_norm * d.x_star;
    const double gap = d.lambda_min - d.x_bar_norm * d.x_star;
    d.zeta_bound = gap > 0.0 ? d.x_bar_norm / gap : std::numeric_limits<double>::infinity();
    return d;
}

ELSolution solve_dual(const Matrix& u, const SolverOptions& opts) {
    check_constraint_matrix(u);
    const Eigen::Index n = u.rows();
    const Eigen::Index m = u.cols();
    const double nn = static_cast<double>(n);

    ELSolution sol;
    sol.diagnostics = el_diagnostics(u);

    if (sol.diagnostics.lambda_max <= 0.0 ||
        sol.diagnostics.lambda_min <= 1e-12 * sol.diagnostics.lambda_max) {
        throw DegenerateConstraints("solve_dual: constraint second-moment matrix is singular");
    }

    Vector zeta = Vector::Zero(m);
    Vector denom = Vector::Ones(n);  // 1 + u_j' zeta
    double obj = 0.0;                // -sum_j log denom_j
    const double grad_tol = opts.tol_stat * nn;

    auto newton_step = [&](const Vector& grad) {
        const Vector inv2 = denom.array().square().inverse().matrix();
        const Matrix hess = u.transpose() * inv2.asDiagonal() * u;
        try {
            return solve_pd(hess, Vector(-grad));
        } catch (const IllConditioned&) {
            throw DegenerateConstraints("solve_dual: singular curvature matrix");
        }
    };

    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        const Vector grad = -(u.transpose() * denom.cwiseInverse());
        if (grad.norm() <= grad_tol) {
            sol.converged = true;
            break;
        }
        const Vector step = newton_step(grad);

        // Objective decrements shrink to rounding scale right before the
        // gradient criterion fires; the slack keeps those last steps accepted.
        const double noise = 1e-14 * (1.0 + std::abs(obj));
        double t = 1.0;
        bool accepted = false;
        for (int half = 0; half < 60; ++half, t *= 0.5) {
            const Vector cand = zeta + t * step;
            const Vector cand_denom = Vector::Ones(n) + u * cand;
            if (cand_denom.minCoeff() < opts.feas_floor) continue;
            const double cand_obj = -cand_denom.array().log().sum();
            if (cand_obj < obj + noise) {
                zeta = cand;
                denom = cand_denom;
                obj = cand_obj;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            throw NotInHull("solve_dual: line search collapsed; origin outside the convex hull");
        }
        if (zeta.norm() > 1e10 || obj < -1e12) {
            throw NotInHull("solve_dual: dual iterates diverged; origin outside the convex hull");
        }
    }
    if (!sol.converged) {
        throw MaxIterations("solve_dual: no convergence after " + std::to_string(opts.max_iter) +
                            " iterations");
    }

    // Polish toward the exact stationary point so the weight identities hold
    // to near machine precision, accepting steps while the residual shrinks.
    for (int extra = 0; extra < 4; ++extra) {
        const Vector grad = -(u.transpose() * denom.cwiseInverse());
        if (grad.norm() == 0.0) break;
        const Vector cand = zeta + newton_step(grad);
        const Vector cand_denom = Vector::Ones(n) + u * cand;
        if (cand_denom.minCoeff() < opts.feas_floor) break;
        const Vector cand_grad = -(u.transpose() * cand_denom.cwiseInverse());
        if (cand_grad.norm() >= grad.norm()) break;
        zeta = cand;
        denom = cand_denom;
    }

    sol.zeta = zeta;
    sol.weights = (nn * denom.array()).inverse().matrix();
    sol.log_el = -denom.array().log().sum();
    sol.iterations = iter;
    return sol;
}

Vector weighted_mean(const ELSolution& sol, const Matrix& values) {
    if (values.rows() != sol.weights.size()) {
        throw DimensionMismatch("weighted_mean: row count does not match weight count");
    }
    return values.transpose() * sol.weights;
}

namespace {

// Largest directional fourth moment sup_|v|=1 n^-1 sum (v'u_j)^4, witnessed
// over random unit directions plus the top eigenvector of the second-moment
// matrix. A sampled maximum under-reports the true supremum, so a bound that
// verifies against it also holds for the exact value.
double fourth_moment_witness(const Matrix& u) {
    const Eigen::Index m = u.cols();
    const double n = static_cast<double>(u.rows());

    auto directional = [&](const Vector& v) { return (u * v).array().pow(4).sum() / n; };

    Eigen::SelfAdjointEigenSolver<Matrix> es(u.transpose() * u / n);
    double best = directional(es.eigenvectors().col(m - 1));

    std::mt19937_64 gen(0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int k = 0; k < 64; ++k) {
        Vector v(m);
        for (Eigen::Index i = 0; i < m; ++i) v[i] = normal(gen);
        const double norm = v.norm();
        if (norm == 0.0) continue;
        best = std::max(best, directional(v / norm));
    }
    return best;
}

}  // namespace

MultiplierBoundReport verify_multiplier_bounds(const ELSolution& sol, const Matrix& u) {
    const ELDiagnostics& d = sol.diagnostics;
    const double n = static_cast<double>(u.rows());
    const Matrix s = u.transpose() * u / n;
    const Vector x_bar = u.colwise().mean();
    constexpr double slack = 1e-12;

    MultiplierBoundReport r;
    r.zeta_norm = sol.zeta.norm();

    const double gap = d.lambda_min - d.x_bar_norm * d.x_star;
    r.norm_bound = gap > 0.0 ? d.x_bar_norm / gap : std::numeric_limits<double>::infinity();
    r.norm_ok = r.zeta_norm <= r.norm_bound * (1.0 + slack) + slack;

    // The quarter cap on ||zeta|| x* is part of the existence guarantee and is
    // only promised under the owen condition; the chain bound holds regardless.
    r.product = r.zeta_norm * d.x_star;
    const double chain_bound = gap > 0.0 ? d.x_bar_norm * d.x_star / gap
                                         : std::numeric_limits<double>::infinity();
    r.product_ok = r.product <= chain_bound * (1.0 + slack) + slack &&
                   (!d.owen_condition || r.product < 0.25);

    r.quad_form = sol.zeta.dot(s * sol.zeta);
    r.quad_bound = gap > 0.0 ? d.lambda_max * d.x_bar_norm * d.x_bar_norm / (gap * gap)
                             : std::numeric_limits<double>::infinity();
    r.quad_ok = r.quad_form <= r.quad_bound * (1.0 + slack) + slack;

    const Vector gap_vec = sol.zeta - solve_pd(s, x_bar);
    r.linearization_gap = gap_vec.squaredNorm();
    const double x4 = fourth_moment_witness(u);
    r.linearization_bound = 2.0 *
                            (1.0 / d.lambda_min + d.lambda_max / (9.0 * d.lambda_min * d.lambda_min)) *
                            std::pow(r.zeta_norm, 4) * x4;
    r.linearization_ok = r.linearization_gap <= r.linearization_bound * (1.0 + slack) + slack;
    return r;
}

}  // namespace elsem
