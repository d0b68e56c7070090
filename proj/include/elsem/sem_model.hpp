#pragma once

#include <string>
#include <vector>

#include "elsem/el_core.hpp"
#include "elsem/numkit.hpp"

namespace elsem {

struct FreeEntry {
    int row = 0;
    int col = 0;
    std::string name;
};

// Topology of a recursive structural model Y = B Y + G X + e with strictly
// lower-triangular coefficient matrix B, diagonal error covariance, and an
// optional free exogenous covariance block.
//
// The parameter vector packs, in order: the free B entries, the free G
// entries (each in declaration order), the d error variances, then the
// exogenous covariance block. The block is the column-stacked lower triangle
// of its Cholesky factor when phi_cholesky is set, and the half-vectorized
// covariance itself otherwise.
struct SemSpec {
    int d = 0;  // endogenous variables
    int c = 0;  // exogenous variables
    Matrix b_fixed;      // d x d baseline values for entries that are not free
    Matrix gamma_fixed;  // d x c baseline values
    std::vector<FreeEntry> b_free;
    std::vector<FreeEntry> gamma_free;
    bool phi_free = true;
    bool phi_cholesky = true;
    Matrix phi_fixed;  // used when phi_free is false

    int p() const { return d + c; }
    int param_count() const;
    std::vector<std::string> param_names() const;
    void validate() const;
};

struct SemMatrices {
    Matrix b;      // d x d
    Matrix gamma;  // d x c
    Vector psi;    // d error variances
    Matrix phi;    // c x c exogenous covariance
};

SemMatrices unpack_params(const SemSpec& spec, const Vector& theta);
Vector pack_params(const SemSpec& spec, const SemMatrices& mats);

// Model-implied covariance of Z = (Y', X')' given the parameter vector.
Matrix structured_sigma(const SemSpec& spec, const Vector& theta);

// Central finite-difference derivative of vecs(structured_sigma) in theta,
// p(p+1)/2 x q; throws NotLocallyIdentified when the result is rank deficient.
Matrix jacobian_delta(const SemSpec& spec, const Vector& theta);

// n-divisor covariance of the data rows.
Matrix sample_cov(const Matrix& data);

// Covariance reweighted by EL weights, centered at the unweighted mean;
// reduces to sample_cov at uniform weights.
Matrix el_weighted_cov(const Matrix& data, const ELSolution& sol);

// Structural residuals (I - B) Y - G X on mean-centered data, n x d.
Matrix residuals(const SemSpec& spec, const Vector& theta, const Matrix& data);

}  // namespace elsem
