#pragma once

#include <utility>

#include "elsem/constraints.hpp"
#include "elsem/sem_model.hpp"

namespace elsem {

// Plug-in moments entering the sandwich covariance of a minimum-discrepancy
// estimator, with and without EL reweighting.
struct AsymptoticInputs {
    Vector mu0;
    Matrix sigma0;
    Matrix delta0;    // p(p+1)/2 x q
    Matrix h0;        // p(p+1)/2 square
    Matrix var_w;     // p(p+1)/2 square
    Matrix c_matrix;  // p(p+1)/2 x m cross-covariance of w and v; empty without side info
    Matrix var_v;     // m x m; empty without side info
};

// vecs((z - mu0)(z - mu0)' - Sigma0), the influence of one observation on the
// half-vectorized second-moment estimate.
Vector w_fn(const Vector& z, const Vector& mu0, const Matrix& sigma0);

// The discrepancy curvature Sigma0^-1 (x) Sigma0^-1 compressed to vecs
// coordinates: the Hessian of f_ml(., vecs(Sigma0)) at Sigma0 equals twice
// this matrix. Off-diagonal coordinates carry the duplication weight 2.
Matrix h0_matrix(const Matrix& sigma0);

// Sandwich covariance of the plain estimator:
// (D'HD)^-1 D'H Var(w) H D (D'HD)^-1 with D = delta0, H = h0.
Matrix v0_matrix(const AsymptoticInputs& inputs);

struct EfficiencyMatrices {
    Matrix d;  // Var(w) - c Var(v)^-1 c'
    Matrix v;  // sandwich of d; never exceeds v0 in the PSD order
};

EfficiencyMatrices el_avar(const AsymptoticInputs& inputs);

// Empirical full and projection-reduced covariance of psi given constraint
// values: the reduced matrix subtracts the explained covariance of the least
// squares projection of psi onto the constraint span.
std::pair<Matrix, Matrix> projection_variance(const Matrix& psi_vals, const Matrix& u_vals);

// Plug-in moment estimation at a fitted parameter vector.
AsymptoticInputs estimate_inputs_plain(const Matrix& data, const SemSpec& spec, const Vector& theta);
AsymptoticInputs estimate_inputs_el(const Matrix& data, const SemSpec& spec, const Vector& theta,
                                    const SideInfoSpec& side);

}  // namespace elsem
