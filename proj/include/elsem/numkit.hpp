#pragma once

#include <Eigen/Dense>
#include <utility>

#include "elsem/errors.hpp"

namespace elsem {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Relative asymmetry past which a matrix is rejected as non-symmetric.
inline constexpr double kSymmetryTol = 1e-12;
// Relative residual a positive-definite solve is required to reach.
inline constexpr double kSolveResidualTol = 1e-10;

bool is_symmetric(const Matrix& m, double tol = kSymmetryTol);

// Half-vectorization: stacks the columns of the upper triangle, so a p x p
// symmetric matrix maps to a vector of length p(p+1)/2 ordered
// (m00, m01, m11, m02, m12, m22, ...).
Vector vecs(const Matrix& m, double tol = kSymmetryTol);

// Inverse of vecs; the input length must be a triangular number.
Matrix unvecs(const Vector& v);

Matrix kron(const Matrix& a, const Matrix& b);

// Smallest and largest eigenvalue of a symmetric matrix.
std::pair<double, double> eigen_bounds(const Matrix& s, double tol = kSymmetryTol);

// Largest singular value.
double spectral_norm(const Matrix& m);

// Cholesky solve; throws IllConditioned (reporting the smallest pivot) when
// the matrix is not positive definite.
Vector solve_pd(const Matrix& s, const Vector& b);
Matrix solve_pd(const Matrix& s, const Matrix& b);

double log_det_pd(const Matrix& s);

// D with vec(M) = D * vecs(M) for symmetric M, matching the vecs ordering.
Matrix duplication_matrix(int p);

}  // namespace elsem
