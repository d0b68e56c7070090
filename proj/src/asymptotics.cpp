#include "elsem/asymptotics.hpp"

#include <cmath>

namespace elsem {

Vector w_fn(const Vector& z, const Vector& mu0, const Matrix& sigma0) {
    if (z.size() != mu0.size() || sigma0.rows() != z.size()) {
        throw DimensionMismatch("w_fn: dimension mismatch");
    }
    const Vector centered = z - mu0;
    return vecs(centered * centered.transpose() - sigma0, 1e-9);
}

Matrix h0_matrix(const Matrix& sigma0) {
    const int p = static_cast<int>(sigma0.rows());
    const Matrix sigma_inv = solve_pd(sigma0, Matrix(Matrix::Identity(p, p)));
    const Matrix dup = duplication_matrix(p);
    Matrix h0 = 0.5 * dup.transpose() * kron(sigma_inv, sigma_inv) * dup;
    return (h0 + h0.transpose()) / 2.0;
}

namespace {

// (D'HD)^-1 D'H, the linear map taking a moment perturbation to the induced
// parameter perturbation.
Matrix sandwich_projector(const AsymptoticInputs& inputs) {
    const Matrix dh = inputs.delta0.transpose() * inputs.h0;
    const Matrix gram = dh * inputs.delta0;
    return solve_pd((gram + gram.transpose()) / 2.0, dh);
}

}  // namespace

Matrix v0_matrix(const AsymptoticInputs& inputs) {
    const Matrix proj = sandwich_projector(inputs);
    Matrix v0 = proj * inputs.var_w * proj.transpose();
    return (v0 + v0.transpose()) / 2.0;
}

EfficiencyMatrices el_avar(const AsymptoticInputs& inputs) {
    if (inputs.var_v.size() == 0 || inputs.c_matrix.size() == 0) {
        throw DimensionMismatch("el_avar: inputs carry no side-information moments");
    }
    EfficiencyMatrices out;
    Matrix reduction = inputs.c_matrix * solve_pd(inputs.var_v, Matrix(inputs.c_matrix.transpose()));
    out.d = inputs.var_w - (reduction + reduction.transpose()) / 2.0;
    const Matrix proj = sandwich_projector(inputs);
    Matrix v = proj * out.d * proj.transpose();
    out.v = (v + v.transpose()) / 2.0;
    return out;
}

std::pair<Matrix, Matrix> projection_variance(const Matrix& psi_vals, const Matrix& u_vals) {
    if (psi_vals.rows() != u_vals.rows()) {
        throw DimensionMismatch("projection_variance: row counts differ");
    }
    const double n = static_cast<double>(psi_vals.rows());
    const Matrix psi_c = psi_vals.rowwise() - psi_vals.colwise().mean();
    const Matrix full = psi_c.transpose() * psi_c / n;
    const Matrix w_hat = u_vals.transpose() * u_vals / n;
    const Matrix a_hat = psi_c.transpose() * u_vals / n;
    Matrix reduction;
    try {
        reduction = a_hat * solve_pd(w_hat, Matrix(a_hat.transpose()));
    } catch (const IllConditioned&) {
        throw DegenerateConstraints("projection_variance: empirical constraint moment is singular");
    }
    Matrix reduced = full - (reduction + reduction.transpose()) / 2.0;
    return {full, (reduced + reduced.transpose()) / 2.0};
}

namespace {

Matrix w_values(const Matrix& data, const Vector& mu0, const Matrix& sigma0) {
    const Eigen::Index n = data.rows();
    const Eigen::Index len = sigma0.rows() * (sigma0.rows() + 1) / 2;
    Matrix w(n, len);
    for (Eigen::Index j = 0; j < n; ++j) {
        w.row(j) = w_fn(data.row(j).transpose(), mu0, sigma0).transpose();
    }
    return w;
}

Matrix centered_cross(const Matrix& a, const Matrix& b) {
    const double n = static_cast<double>(a.rows());
    const Matrix ac = a.rowwise() - a.colwise().mean();
    const Matrix bc = b.rowwise() - b.colwise().mean();
    return ac.transpose() * bc / n;
}

}  // namespace

AsymptoticInputs estimate_inputs_plain(const Matrix& data, const SemSpec& spec,
                                       const Vector& theta) {
    AsymptoticInputs inputs;
    inputs.mu0 = data.colwise().mean();
    inputs.sigma0 = structured_sigma(spec, theta);
    inputs.delta0 = jacobian_delta(spec, theta);
    inputs.h0 = h0_matrix(inputs.sigma0);
    const Matrix w = w_values(data, inputs.mu0, inputs.sigma0);
    inputs.var_w = centered_cross(w, w);
    return inputs;
}

AsymptoticInputs estimate_inputs_el(const Matrix& data, const SemSpec& spec, const Vector& theta,
                                    const SideInfoSpec& side) {
    AsymptoticInputs inputs = estimate_inputs_plain(data, spec, theta);
    const Matrix g = side_constraints(data, spec, theta, side);
    const Eigen::Index n = data.rows();
    const Eigen::Index m = g.cols();
    const int q = spec.param_count();

    Matrix v = g;
    if (side.kind == SideInfoKind::independence) {
        // Mean constraint derivative in theta, by central differences of the
        // whole builder (the EDF plug-ins move with theta as well).
        const double step = 1e-5;
        Matrix g_dot(m, q);
        for (int k = 0; k < q; ++k) {
            const double h = step * std::max(1.0, std::abs(theta[k]));
            Vector up = theta, down = theta;
            up[k] += h;
            down[k] -= h;
            const Matrix gu = side_constraints(data, spec, up, side);
            const Matrix gd = side_constraints(data, spec, down, side);
            g_dot.col(k) = ((gu - gd) / (2.0 * h)).colwise().mean().transpose();
        }
        const Matrix proj = sandwich_projector(inputs);  // q x vecs-dim
        const Matrix w = w_values(data, inputs.mu0, inputs.sigma0);
        for (Eigen::Index j = 0; j < n; ++j) {
            v.row(j) += (g_dot * (proj * w.row(j).transpose())).transpose();
        }
    }
    inputs.var_v = centered_cross(v, v);
    inputs.c_matrix = centered_cross(w_values(data, inputs.mu0, inputs.sigma0), v);
    return inputs;
}

}  // namespace elsem
