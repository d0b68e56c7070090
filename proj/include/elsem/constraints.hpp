#pragma once

#include <vector>

#include "elsem/numkit.hpp"
#include "elsem/sem_model.hpp"

namespace elsem {

enum class SideInfoKind { independence, medians, none };

struct SideInfoSpec {
    SideInfoKind kind = SideInfoKind::none;
    // Trigonometric basis size (independence kind).
    int m = 1;
    // Direction that collapses the residual vector to a scalar; defaults to
    // the equal-weight unit direction when left empty.
    Vector a;
    // Known marginal medians, one per exogenous column (medians kind).
    Vector medians;
};

// sqrt(2) * (cos(pi t), ..., cos(m pi t)); orthonormal mean-zero components
// when t is uniform on [0, 1].
Vector trig_basis(double t, int m);

// Empirical distribution function of a scalar sample using the rank/(n+1)
// convention, so values stay strictly inside (0, 1).
class ScalarEdf {
public:
    explicit ScalarEdf(const Vector& sample);
    double operator()(double t) const;
    int size() const { return static_cast<int>(sorted_.size()); }

private:
    std::vector<double> sorted_;
};

// Componentwise empirical distribution function with the plain /n convention.
class MultivariateEdf {
public:
    explicit MultivariateEdf(const Matrix& sample);
    double operator()(const Vector& x) const;
    int size() const { return static_cast<int>(sample_.rows()); }

private:
    Matrix sample_;
};

// Row j = trig_basis(F_n(eps_j), m) (x) trig_basis(G_n(X_j), m), where
// eps_j = a' residuals_j, F_n is the scalar EDF of the eps values and G_n the
// multivariate EDF of the X rows. Output has m^2 columns.
Matrix independence_constraints(const Matrix& residuals, const Matrix& x, const SideInfoSpec& spec);

// Row j entry k = 1[x_jk <= median_k] - 0.5.
Matrix median_constraints(const Matrix& x, const SideInfoSpec& spec);

// Dispatches on the side-information kind, computing structural residuals at
// the given parameters when the constraints need them.
Matrix side_constraints(const Matrix& data, const SemSpec& spec, const Vector& theta,
                        const SideInfoSpec& side);

}  // namespace elsem
