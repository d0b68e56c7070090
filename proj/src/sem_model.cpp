#include "elsem/sem_model.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace elsem {

int SemSpec::param_count() const {
    int q = static_cast<int>(b_free.size() + gamma_free.size()) + d;
    if (phi_free) q += c * (c + 1) / 2;
    return q;
}

std::vector<std::string> SemSpec::param_names() const {
    std::vector<std::string> names;
    for (const auto& e : b_free) names.push_back(e.name);
    for (const auto& e : gamma_free) names.push_back(e.name);
    for (int i = 0; i < d; ++i) names.push_back("psi" + std::to_string(i + 1));
    if (phi_free) {
        for (int j = 0; j < c; ++j) {
            for (int i = j; i < c; ++i) {
                names.push_back((phi_cholesky ? "phi_chol_" : "phi_") + std::to_string(i + 1) +
                                std::to_string(j + 1));
            }
        }
    }
    return names;
}

void SemSpec::validate() const {
    if (d < 1 || c < 0) {
        throw DimensionMismatch("SemSpec: needs at least one endogenous variable");
    }
    if (b_fixed.rows() != d || b_fixed.cols() != d || gamma_fixed.rows() != d ||
        gamma_fixed.cols() != c) {
        throw DimensionMismatch("SemSpec: fixed-value matrices have wrong shape");
    }
    auto strictly_lower = [](int r, int cidx) { return r > cidx; };
    for (const auto& e : b_free) {
        if (e.row < 0 || e.row >= d || e.col < 0 || e.col >= d || !strictly_lower(e.row, e.col)) {
            throw DimensionMismatch("SemSpec: free B entry outside the strict lower triangle");
        }
    }
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            if (b_fixed(i, j) != 0.0) {
                throw DimensionMismatch("SemSpec: fixed B values must be strictly lower triangular");
            }
        }
    }
    for (const auto& e : gamma_free) {
        if (e.row < 0 || e.row >= d || e.col < 0 || e.col >= c) {
            throw DimensionMismatch("SemSpec: free G entry out of range");
        }
    }
    if (!phi_free && (phi_fixed.rows() != c || phi_fixed.cols() != c)) {
        throw DimensionMismatch("SemSpec: fixed exogenous covariance has wrong shape");
    }
    const int pp = p() * (p() + 1) / 2;
    if (param_count() > pp) {
        throw DimensionMismatch("SemSpec: more parameters than covariance moments");
    }
}

namespace {

Matrix lower_from_packed(int c, const Vector& packed) {
    Matrix l = Matrix::Zero(c, c);
    Eigen::Index k = 0;
    for (int j = 0; j < c; ++j) {
        for (int i = j; i < c; ++i) {
            l(i, j) = packed[k++];
        }
    }
    return l;
}

Vector pack_lower(const Matrix& l) {
    const int c = static_cast<int>(l.rows());
    Vector packed(c * (c + 1) / 2);
    Eigen::Index k = 0;
    for (int j = 0; j < c; ++j) {
        for (int i = j; i < c; ++i) {
            packed[k++] = l(i, j);
        }
    }
    return packed;
}

}  // namespace

SemMatrices unpack_params(const SemSpec& spec, const Vector& theta) {
    if (theta.size() != spec.param_count()) {
        throw DimensionMismatch("unpack_params: parameter vector has wrong length");
    }
    SemMatrices mats;
    mats.b = spec.b_fixed;
    mats.gamma = spec.gamma_fixed;
    Eigen::Index k = 0;
    for (const auto& e : spec.b_free) mats.b(e.row, e.col) = theta[k++];
    for (const auto& e : spec.gamma_free) mats.gamma(e.row, e.col) = theta[k++];
    mats.psi = theta.segment(k, spec.d);
    k += spec.d;
    if (spec.phi_free) {
        const Vector block = theta.segment(k, spec.c * (spec.c + 1) / 2);
        if (spec.phi_cholesky) {
            const Matrix l = lower_from_packed(spec.c, block);
            mats.phi = l * l.transpose();
        } else {
            mats.phi = unvecs(block);
        }
    } else {
        mats.phi = spec.phi_fixed;
    }
    return mats;
}

Vector pack_params(const SemSpec& spec, const SemMatrices& mats) {
    Vector theta(spec.param_count());
    Eigen::Index k = 0;
    for (const auto& e : spec.b_free) theta[k++] = mats.b(e.row, e.col);
    for (const auto& e : spec.gamma_free) theta[k++] = mats.gamma(e.row, e.col);
    theta.segment(k, spec.d) = mats.psi;
    k += spec.d;
    if (spec.phi_free) {
        if (spec.phi_cholesky) {
            Eigen::LLT<Matrix> llt(mats.phi);
            if (llt.info() != Eigen::Success) {
                throw IllConditioned("pack_params: exogenous covariance is not positive definite");
            }
            theta.segment(k, spec.c * (spec.c + 1) / 2) = pack_lower(Matrix(llt.matrixL()));
        } else {
            theta.segment(k, spec.c * (spec.c + 1) / 2) = vecs(mats.phi);
        }
    }
    return theta;
}

Matrix structured_sigma(const SemSpec& spec, const Vector& theta) {
    const SemMatrices mats = unpack_params(spec, theta);
    const int d = spec.d;
    const int c = spec.c;

    const Matrix a = Matrix::Identity(d, d) - mats.b;
    Eigen::PartialPivLU<Matrix> lu(a);
    if (std::abs(lu.determinant()) < 1e-12) {
        throw SingularSystem("structured_sigma: I - B is not invertible");
    }
    const Matrix a_inv = lu.inverse();

    Matrix sigma(spec.p(), spec.p());
    const Matrix gpg = mats.gamma * mats.phi * mats.gamma.transpose();
    Matrix inner = gpg;
    inner.diagonal() += mats.psi;
    const Matrix syy = a_inv * inner * a_inv.transpose();
    const Matrix syx = a_inv * mats.gamma * mats.phi;
    sigma.topLeftCorner(d, d) = (syy + syy.transpose()) / 2.0;
    sigma.topRightCorner(d, c) = syx;
    sigma.bottomLeftCorner(c, d) = syx.transpose();
    sigma.bottomRightCorner(c, c) = (mats.phi + mats.phi.transpose()) / 2.0;
    return sigma;
}

Matrix jacobian_delta(const SemSpec& spec, const Vector& theta) {
    const int q = spec.param_count();
    const Eigen::Index rows = static_cast<Eigen::Index>(spec.p()) * (spec.p() + 1) / 2;
    Matrix delta(rows, q);
    for (int k = 0; k < q; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(theta[k]));
        Vector up = theta, down = theta;
        up[k] += h;
        down[k] -= h;
        delta.col(k) = (vecs(structured_sigma(spec, up)) - vecs(structured_sigma(spec, down))) / (2.0 * h);
    }
    Eigen::JacobiSVD<Matrix> svd(delta);
    const auto& sv = svd.singularValues();
    if (sv[0] <= 0.0 || sv[sv.size() - 1] <= 1e-8 * sv[0]) {
        throw NotLocallyIdentified("jacobian_delta: rank below the parameter count");
    }
    return delta;
}

Matrix sample_cov(const Matrix& data) {
    if (data.rows() < 2) {
        throw DimensionMismatch("sample_cov: needs at least two rows");
    }
    const Matrix centered = data.rowwise() - data.colwise().mean();
    return centered.transpose() * centered / static_cast<double>(data.rows());
}

Matrix el_weighted_cov(const Matrix& data, const ELSolution& sol) {
    if (data.rows() != sol.weights.size()) {
        throw DimensionMismatch("el_weighted_cov: weight count does not match row count");
    }
    const Matrix centered = data.rowwise() - data.colwise().mean();
    return centered.transpose() * sol.weights.asDiagonal() * centered;
}

Matrix residuals(const SemSpec& spec, const Vector& theta, const Matrix& data) {
    if (data.cols() != spec.p()) {
        throw DimensionMismatch("residuals: data width does not match the model");
    }
    const SemMatrices mats = unpack_params(spec, theta);
    const Matrix centered = data.rowwise() - data.colwise().mean();
    const Matrix y = centered.leftCols(spec.d);
    const Matrix x = centered.rightCols(spec.c);
    const Matrix a = Matrix::Identity(spec.d, spec.d) - mats.b;
    return y * a.transpose() - x * mats.gamma.transpose();
}

}  // namespace elsem
