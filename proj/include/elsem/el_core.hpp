#pragma once

#include "elsem/numkit.hpp"

namespace elsem {

struct SolverOptions {
    int max_iter = 100;
    // Stationarity tolerance: the solve stops once
    // ||sum_j u_j / (1 + zeta'u_j)|| <= tol_stat * n.
    double tol_stat = 1e-10;
    // Line search keeps every 1 + zeta'u_j at or above this floor.
    double feas_floor = 1e-10;
};

// Summary statistics of a constraint matrix that control existence and size
// of the dual multiplier: the mean-row norm, the largest row norm, and the
// eigenvalue range of the second-moment matrix n^-1 sum u_j u_j'.
struct ELDiagnostics {
    double x_bar_norm = 0.0;
    double x_star = 0.0;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    // lambda_min > 5 * x_bar_norm * x_star guarantees a unique interior solution.
    bool owen_condition = false;
    // Bound on ||zeta||; finite iff lambda_min > x_bar_norm * x_star.
    double zeta_bound = 0.0;
};

struct ELSolution {
    Vector zeta;
    Vector weights;
    // sum_j log(n * w_j); zero at uniform weights, negative otherwise.
    double log_el = 0.0;
    ELDiagnostics diagnostics;
    bool converged = false;
    int iterations = 0;
};

// Checks of the multiplier against its a-priori bounds; a violation on a
// converged solve indicates a solver bug, never a data problem.
struct MultiplierBoundReport {
    double zeta_norm = 0.0;
    double norm_bound = 0.0;        // ||zeta|| <= ||x_bar|| / (lambda - ||x_bar|| x*)
    bool norm_ok = false;
    double product = 0.0;           // ||zeta|| x* < 1/4
    bool product_ok = false;
    double quad_form = 0.0;         // zeta' S zeta
    double quad_bound = 0.0;
    bool quad_ok = false;
    double linearization_gap = 0.0;  // ||zeta - S^-1 x_bar||^2
    double linearization_bound = 0.0;
    bool linearization_ok = false;
    bool all_ok() const { return norm_ok && product_ok && quad_ok && linearization_ok; }
};

// Rows of u are the constraint evaluations, one observation per row.
ELDiagnostics el_diagnostics(const Matrix& u);

// Solves the dual stationarity equation sum_j u_j / (1 + zeta'u_j) = 0 by
// damped Newton descent on -sum_j log(1 + zeta'u_j), and returns the
// probability weights w_j = 1 / (n (1 + zeta'u_j)).
ELSolution solve_dual(const Matrix& u, const SolverOptions& opts = {});

// sum_j w_j * values_j for an n x r value matrix.
Vector weighted_mean(const ELSolution& sol, const Matrix& values);

MultiplierBoundReport verify_multiplier_bounds(const ELSolution& sol, const Matrix& u);

}  // namespace elsem
