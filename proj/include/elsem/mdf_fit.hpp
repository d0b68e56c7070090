#pragma once

#include <optional>
#include <string>
#include <vector>

#include "elsem/constraints.hpp"
#include "elsem/sem_model.hpp"

namespace elsem {

enum class Discrepancy { ml, gls };
enum class GlsWeight { sample_cov, identity, given };

struct DiscrepancyKind {
    Discrepancy variant = Discrepancy::ml;
    // sample_cov uses the target matrix being fitted as the weight.
    GlsWeight gls_weight = GlsWeight::sample_cov;
    Matrix given_weight;
};

// log|Sigma| - log|S| + trace(S Sigma^-1) - p for positive definite inputs.
double f_ml(const Matrix& s, const Matrix& sigma);

// trace((S - Sigma) W^-1 (S - Sigma) W^-1) for positive definite W.
double f_gls(const Matrix& s, const Matrix& sigma, const Matrix& w);

struct FitOptions {
    double grad_tol = 1e-8;
    int max_iter = 500;
    int max_restarts = 5;
    double fd_step = 1e-6;
    bool compute_avar = true;
};

struct FitResult {
    Vector theta;
    double discrepancy = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    Matrix avar;                       // q x q estimate; empty when not computed
    std::vector<double> trace;         // discrepancy after each accepted step
    std::optional<Vector> stage1_theta;
    std::optional<std::string> skipped_reason;
};

// Starting values from a covariance matrix: equation-by-equation least
// squares for the coefficient rows, residual variances for the error terms,
// and the exogenous block of the covariance itself.
Vector initial_params(const SemSpec& spec, const Matrix& cov);

// Minimizes the discrepancy between the target covariance and the structured
// covariance over the parameter vector (quasi-Newton with numerical
// gradients; variances kept positive through an internal log scale).
FitResult fit_mdf(const Matrix& target, const SemSpec& spec, const DiscrepancyKind& kind,
                  const Vector& init, const FitOptions& opts = {});

FitResult fit_plain(const Matrix& data, const SemSpec& spec, const DiscrepancyKind& kind,
                    const FitOptions& opts = {});

// Two-stage pipeline: plain fit, residual-based (or median) constraints, EL
// weights, reweighted covariance, refit warm-started at the first stage.
// Infeasible EL solves mark the result skipped instead of throwing.
FitResult fit_el(const Matrix& data, const SemSpec& spec, const DiscrepancyKind& kind,
                 const SideInfoSpec& side, const FitOptions& opts = {});

// Same pipeline with a caller-supplied constraint matrix.
FitResult fit_el_with_constraints(const Matrix& data, const SemSpec& spec,
                                  const DiscrepancyKind& kind, const Matrix& constraint_rows,
                                  const FitOptions& opts = {});

}  // namespace elsem
