#include "elsem/numkit.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

namespace elsem {

bool is_symmetric(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

Vector vecs(const Matrix& m, double tol) {
    if (!is_symmetric(m, tol)) {
        throw DimensionMismatch("vecs: input matrix is not symmetric");
    }
    const Eigen::Index p = m.rows();
    Vector out(p * (p + 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
            out[k++] = m(i, j);
        }
    }
    return out;
}

namespace {

// Returns p with p(p+1)/2 == len, or -1.
Eigen::Index triangular_root(Eigen::Index len) {
    const Eigen::Index p = static_cast<Eigen::Index>((std::sqrt(8.0 * static_cast<double>(len) + 1.0) - 1.0) / 2.0 + 0.5);
    return (p * (p + 1) / 2 == len) ? p : -1;
}

}  // namespace

Matrix unvecs(const Vector& v) {
    const Eigen::Index p = triangular_root(v.size());
    if (p < 1) {
        throw DimensionMismatch("unvecs: length is not a triangular number");
    }
    Matrix m(p, p);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
            m(i, j) = v[k];
            m(j, i) = v[k];
            ++k;
        }
    }
    return m;
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

std::pair<double, double> eigen_bounds(const Matrix& s, double tol) {
    if (!is_symmetric(s, tol)) {
        throw DimensionMismatch("eigen_bounds: input matrix is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return {ev.minCoeff(), ev.maxCoeff()};
}

double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()[0];
}

namespace {

Eigen::LLT<Matrix> checked_llt(const Matrix& s) {
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) {
        // Recover the offending pivot for the error message.
        Eigen::LDLT<Matrix> ldlt(s);
        const double min_pivot = ldlt.vectorD().minCoeff();
        throw IllConditioned("solve_pd: matrix is not positive definite, smallest pivot " +
                             std::to_string(min_pivot));
    }
    return llt;
}

}  // namespace

Vector solve_pd(const Matrix& s, const Vector& b) {
    if (s.rows() != b.size()) {
        throw DimensionMismatch("solve_pd: dimension mismatch");
    }
    return checked_llt(s).solve(b);
}

Matrix solve_pd(const Matrix& s, const Matrix& b) {
    if (s.rows() != b.rows()) {
        throw DimensionMismatch("solve_pd: dimension mismatch");
    }
    return checked_llt(s).solve(b);
}

double log_det_pd(const Matrix& s) {
    auto llt = checked_llt(s);
    return 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
}

Matrix duplication_matrix(int p) {
    Matrix d = Matrix::Zero(static_cast<Eigen::Index>(p) * p, static_cast<Eigen::Index>(p) * (p + 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i <= j; ++i) {
            d(i + p * j, k) = 1.0;
            d(j + p * i, k) = 1.0;
            ++k;
        }
    }
    return d;
}

}  // namespace elsem
