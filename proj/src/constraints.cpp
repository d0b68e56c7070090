#include "elsem/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace elsem {

Vector trig_basis(double t, int m) {
    if (m < 1) {
        throw DimensionMismatch("trig_basis: basis size must be at least 1");
    }
    if (!(t >= 0.0 && t <= 1.0)) {
        throw DimensionMismatch("trig_basis: argument outside [0, 1]");
    }
    Vector out(m);
    const double sqrt2 = std::numbers::sqrt2;
    for (int k = 1; k <= m; ++k) {
        out[k - 1] = sqrt2 * std::cos(k * std::numbers::pi * t);
    }
    return out;
}

ScalarEdf::ScalarEdf(const Vector& sample) {
    if (sample.size() == 0) {
        throw DimensionMismatch("ScalarEdf: empty sample");
    }
    sorted_.assign(sample.data(), sample.data() + sample.size());
    std::sort(sorted_.begin(), sorted_.end());
}

double ScalarEdf::operator()(double t) const {
    const auto count = std::upper_bound(sorted_.begin(), sorted_.end(), t) - sorted_.begin();
    return static_cast<double>(count) / static_cast<double>(sorted_.size() + 1);
}

MultivariateEdf::MultivariateEdf(const Matrix& sample) : sample_(sample) {
    if (sample.rows() == 0 || sample.cols() == 0) {
        throw DimensionMismatch("MultivariateEdf: empty sample");
    }
}

double MultivariateEdf::operator()(const Vector& x) const {
    if (x.size() != sample_.cols()) {
        throw DimensionMismatch("MultivariateEdf: dimension mismatch");
    }
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < sample_.rows(); ++i) {
        if ((sample_.row(i).transpose().array() <= x.array()).all()) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(sample_.rows());
}

Matrix independence_constraints(const Matrix& residuals, const Matrix& x, const SideInfoSpec& spec) {
    if (spec.kind != SideInfoKind::independence) {
        throw DimensionMismatch("independence_constraints: wrong side-information kind");
    }
    const Eigen::Index n = residuals.rows();
    if (x.rows() != n) {
        throw DimensionMismatch("independence_constraints: residual and covariate row counts differ");
    }
    const int m = spec.m;
    if (m < 1) {
        throw DimensionMismatch("independence_constraints: basis size must be at least 1");
    }
    if (static_cast<Eigen::Index>(m) * m >= n - 1) {
        throw DegenerateConstraints("independence_constraints: m^2 >= n-1 would be singular");
    }

    Vector a = spec.a;
    if (a.size() == 0) {
        a = Vector::Constant(residuals.cols(), 1.0 / std::sqrt(static_cast<double>(residuals.cols())));
    }
    if (a.size() != residuals.cols()) {
        throw DimensionMismatch("independence_constraints: direction length != residual columns");
    }
    if (a.norm() == 0.0) {
        throw DimensionMismatch("independence_constraints: direction must be nonzero");
    }

    const Vector eps = residuals * a;
    const ScalarEdf f_n(eps);
    const MultivariateEdf g_n(x);

    Matrix rows(n, static_cast<Eigen::Index>(m) * m);
    for (Eigen::Index j = 0; j < n; ++j) {
        const Vector left = trig_basis(f_n(eps[j]), m);
        const Vector right = trig_basis(g_n(x.row(j).transpose()), m);
        rows.row(j) = kron(left, right).col(0).transpose();
    }
    return rows;
}

Matrix side_constraints(const Matrix& data, const SemSpec& spec, const Vector& theta,
                        const SideInfoSpec& side) {
    const Matrix x = data.rightCols(spec.c);
    switch (side.kind) {
        case SideInfoKind::independence:
            return independence_constraints(residuals(spec, theta, data), x, side);
        case SideInfoKind::medians:
            return median_constraints(x, side);
        case SideInfoKind::none:
            break;
    }
    throw DimensionMismatch("side_constraints: side-information kind carries no constraints");
}

Matrix median_constraints(const Matrix& x, const SideInfoSpec& spec) {
    if (spec.kind != SideInfoKind::medians) {
        throw DimensionMismatch("median_constraints: wrong side-information kind");
    }
    if (spec.medians.size() != x.cols()) {
        throw DimensionMismatch("median_constraints: one median per covariate column required");
    }
    Matrix rows(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
            rows(j, k) = (x(j, k) <= spec.medians[k] ? 1.0 : 0.0) - 0.5;
        }
    }
    return rows;
}

}  // namespace elsem
