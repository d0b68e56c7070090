#include "elsem/mdf_fit.hpp"

#include <cmath>
#include <random>

#include "elsem/asymptotics.hpp"
#include "elsem/el_core.hpp"

namespace elsem {

double f_ml(const Matrix& s, const Matrix& sigma) {
    if (s.rows() != sigma.rows() || s.rows() != s.cols() || sigma.rows() != sigma.cols()) {
        throw DimensionMismatch("f_ml: inputs must be square matrices of equal size");
    }
    const double p = static_cast<double>(s.rows());
    const double log_det_sigma = log_det_pd(sigma);
    const double log_det_s = log_det_pd(s);
    const double tr = solve_pd(sigma, s).trace();
    return log_det_sigma - log_det_s + tr - p;
}

double f_gls(const Matrix& s, const Matrix& sigma, const Matrix& w) {
    if (s.rows() != sigma.rows() || s.rows() != w.rows()) {
        throw DimensionMismatch("f_gls: inputs must be square matrices of equal size");
    }
    const Matrix diff = s - sigma;
    const Matrix scaled = solve_pd(w, diff);  // W^-1 (S - Sigma)
    return (scaled * scaled).trace();
}

namespace {

// Indices of parameters carried on log scale internally: error variances and,
// in the Cholesky parameterization, the factor diagonal.
std::vector<bool> log_scale_mask(const SemSpec& spec) {
    const int q = spec.param_count();
    std::vector<bool> mask(q, false);
    int k = static_cast<int>(spec.b_free.size() + spec.gamma_free.size());
    for (int i = 0; i < spec.d; ++i) mask[k + i] = true;
    k += spec.d;
    if (spec.phi_free && spec.phi_cholesky) {
        for (int j = 0; j < spec.c; ++j) {
            mask[k] = true;          // diagonal entry leads each packed column
            k += spec.c - j;
        }
    }
    return mask;
}

// Natural parameters -> unconstrained internal coordinates. The direct
// covariance parameterization routes through the Cholesky factor so the
// block stays positive definite during optimization.
Vector to_internal(const SemSpec& spec, const Vector& theta) {
    SemSpec chol_spec = spec;
    chol_spec.phi_cholesky = true;
    Vector work = theta;
    if (spec.phi_free && !spec.phi_cholesky) {
        work = pack_params(chol_spec, unpack_params(spec, theta));
    }
    const auto mask = log_scale_mask(chol_spec);
    for (int k = 0; k < work.size(); ++k) {
        if (mask[k]) {
            if (!(work[k] > 0.0)) {
                throw IllConditioned("fit_mdf: variance-type parameter must be positive");
            }
            work[k] = std::log(work[k]);
        }
    }
    return work;
}

Vector from_internal(const SemSpec& spec, const Vector& eta) {
    SemSpec chol_spec = spec;
    chol_spec.phi_cholesky = true;
    const auto mask = log_scale_mask(chol_spec);
    Vector work = eta;
    for (int k = 0; k < work.size(); ++k) {
        if (mask[k]) work[k] = std::exp(eta[k]);
    }
    if (spec.phi_free && !spec.phi_cholesky) {
        return pack_params(spec, unpack_params(chol_spec, work));
    }
    return work;
}

}  // namespace

Vector initial_params(const SemSpec& spec, const Matrix& cov) {
    spec.validate();
    const int d = spec.d;
    const int p = spec.p();
    if (cov.rows() != p || cov.cols() != p) {
        throw DimensionMismatch("initial_params: covariance has wrong size");
    }

    SemMatrices mats;
    mats.b = spec.b_fixed;
    mats.gamma = spec.gamma_fixed;
    mats.psi = Vector::Ones(d);
    mats.phi = cov.bottomRightCorner(spec.c, spec.c);

    for (int i = 0; i < d; ++i) {
        // Full fixed coefficient row over all p variables.
        Vector fixed = Vector::Zero(p);
        for (int j = 0; j < d; ++j) fixed[j] = spec.b_fixed(i, j);
        for (int k = 0; k < spec.c; ++k) fixed[d + k] = spec.gamma_fixed(i, k);

        std::vector<int> pred;
        for (const auto& e : spec.b_free) {
            if (e.row == i) pred.push_back(e.col);
        }
        const std::size_t n_b = pred.size();
        for (const auto& e : spec.gamma_free) {
            if (e.row == i) pred.push_back(d + e.col);
        }

        const Vector cov_fixed = cov * fixed;
        double var_adj = cov(i, i) - 2.0 * fixed.dot(cov.col(i)) + fixed.dot(cov_fixed);
        if (!pred.empty()) {
            const int np = static_cast<int>(pred.size());
            Matrix cpp(np, np);
            Vector cpy(np);
            for (int a = 0; a < np; ++a) {
                cpy[a] = cov(pred[a], i) - cov_fixed[pred[a]];
                for (int b = 0; b < np; ++b) cpp(a, b) = cov(pred[a], pred[b]);
            }
            const Vector coef = cpp.colPivHouseholderQr().solve(cpy);
            var_adj -= coef.dot(cpy);
            for (std::size_t a = 0; a < pred.size(); ++a) {
                if (a < n_b) {
                    mats.b(i, pred[a]) = coef[static_cast<int>(a)];
                } else {
                    mats.gamma(i, pred[a] - d) = coef[static_cast<int>(a)];
                }
            }
        }
        mats.psi[i] = std::max(var_adj, 1e-6);
    }
    return pack_params(spec, mats);
}

namespace {

struct Objective {
    const Matrix& target;
    const SemSpec& spec;
    const DiscrepancyKind& kind;
    const Matrix& weight;  // resolved GLS weight

    double operator()(const Vector& eta) const {
        const Matrix sigma = structured_sigma(spec, from_internal(spec, eta));
        if (kind.variant == Discrepancy::ml) return f_ml(target, sigma);
        return f_gls(target, sigma, weight);
    }
};

Vector numeric_gradient(const Objective& obj, const Vector& eta, double step) {
    Vector grad(eta.size());
    for (int k = 0; k < eta.size(); ++k) {
        const double h = step * std::max(1.0, std::abs(eta[k]));
        Vector up = eta, down = eta;
        up[k] += h;
        down[k] -= h;
        grad[k] = (obj(up) - obj(down)) / (2.0 * h);
    }
    return grad;
}

struct DescentOutcome {
    Vector eta;
    double value = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    bool line_search_failed = false;
    std::vector<double> trace;
};

DescentOutcome bfgs_descent(const Objective& obj, Vector eta, const FitOptions& opts) {
    DescentOutcome out;
    const int q = static_cast<int>(eta.size());
    Matrix h_inv = Matrix::Identity(q, q);
    double value = obj(eta);
    Vector grad = numeric_gradient(obj, eta, opts.fd_step);
    out.trace.push_back(value);

    int iter = 0;
    for (; iter < opts.max_iter; ++iter) {
        if (grad.norm() <= opts.grad_tol) {
            out.converged = true;
            break;
        }
        Vector dir = -(h_inv * grad);
        double slope = dir.dot(grad);
        if (!(slope < 0.0)) {
            h_inv = Matrix::Identity(q, q);
            dir = -grad;
            slope = dir.dot(grad);
        }

        // Armijo with rounding slack: decrements shrink below machine noise
        // right before the gradient tolerance is met.
        const double noise = 1e-15 * (1.0 + std::abs(value));
        double t = 1.0;
        bool accepted = false;
        double cand_value = value;
        Vector cand;
        for (int half = 0; half < 60; ++half, t *= 0.5) {
            cand = eta + t * dir;
            double v;
            try {
                v = obj(cand);
            } catch (const IllConditioned&) {
                continue;  // stepped outside the well-posed region
            }
            if (std::isfinite(v) && v <= value + 1e-4 * t * slope + noise) {
                cand_value = v;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            out.line_search_failed = true;
            break;
        }

        const Vector step_vec = t * dir;
        const Vector grad_new = numeric_gradient(obj, cand, opts.fd_step);
        const Vector y = grad_new - grad;
        const double sy = step_vec.dot(y);
        if (sy > 1e-12 * step_vec.norm() * y.norm()) {
            const Matrix sy_outer = step_vec * y.transpose() / sy;
            h_inv = (Matrix::Identity(q, q) - sy_outer) * h_inv *
                        (Matrix::Identity(q, q) - sy_outer.transpose()) +
                    step_vec * step_vec.transpose() / sy;
        }
        eta = cand;
        value = cand_value;
        grad = grad_new;
        out.trace.push_back(value);
    }

    out.eta = eta;
    out.value = value;
    out.grad_norm = grad.norm();
    out.iterations = iter;
    return out;
}

Matrix resolve_gls_weight(const Matrix& target, const DiscrepancyKind& kind) {
    switch (kind.gls_weight) {
        case GlsWeight::sample_cov:
            return target;
        case GlsWeight::identity:
            return Matrix::Identity(target.rows(), target.cols());
        case GlsWeight::given:
            if (kind.given_weight.rows() != target.rows() ||
                !is_symmetric(kind.given_weight, 1e-10)) {
                throw DimensionMismatch("fit_mdf: given GLS weight must be symmetric, same size");
            }
            return kind.given_weight;
    }
    throw DimensionMismatch("fit_mdf: unknown GLS weight choice");
}

}  // namespace

FitResult fit_mdf(const Matrix& target, const SemSpec& spec, const DiscrepancyKind& kind,
                  const Vector& init, const FitOptions& opts) {
    spec.validate();
    if (!is_symmetric(target, 1e-9)) {
        throw DimensionMismatch("fit_mdf: target covariance is not symmetric");
    }
    log_det_pd(target);  // rejects non-PD targets up front

    const Matrix weight = resolve_gls_weight(target, kind);
    if (kind.variant == Discrepancy::gls) log_det_pd(weight);
    const Objective obj{target, spec, kind, weight};

    const Vector eta0 = to_internal(spec, init);
    std::mt19937_64 perturb_gen(1234567);
    std::normal_distribution<double> normal(0.0, 1.0);

    DescentOutcome outcome;
    for (int attempt = 0; attempt <= opts.max_restarts; ++attempt) {
        Vector eta_start = eta0;
        if (attempt > 0) {
            for (int k = 0; k < eta_start.size(); ++k) {
                eta_start[k] += 0.05 * attempt * normal(perturb_gen);
            }
        }
        outcome = bfgs_descent(obj, eta_start, opts);
        if (outcome.converged) break;
        if (!outcome.line_search_failed) {
            throw MaxIterations("fit_mdf: no convergence after " + std::to_string(opts.max_iter) +
                                " iterations");
        }
    }
    if (!outcome.converged) {
        throw MaxIterations("fit_mdf: line search failed on every restart");
    }

    FitResult result;
    result.theta = from_internal(spec, outcome.eta);
    result.discrepancy = outcome.value;
    result.gradient_norm = outcome.grad_norm;
    result.iterations = outcome.iterations;
    result.converged = true;
    result.trace = std::move(outcome.trace);
    jacobian_delta(spec, result.theta);  // NotLocallyIdentified on rank deficiency
    return result;
}

FitResult fit_plain(const Matrix& data, const SemSpec& spec, const DiscrepancyKind& kind,
                    const FitOptions& opts) {
    const Matrix s = sample_cov(data);
    FitResult result = fit_mdf(s, spec, kind, initial_params(spec, s), opts);
    if (opts.compute_avar) {
        result.avar = v0_matrix(estimate_inputs_plain(data, spec, result.theta)) /
                      static_cast<double>(data.rows());
    }
    return result;
}

namespace {

FitResult el_stage_two(const Matrix& data, const SemSpec& spec, const DiscrepancyKind& kind,
                       const Matrix& constraint_rows, FitResult stage1, const FitOptions& opts) {
    FitOptions stage_opts = opts;
    stage_opts.compute_avar = false;

    FitResult result;
    try {
        const ELSolution sol = solve_dual(constraint_rows);
        const Matrix s_el = el_weighted_cov(data, sol);
        result = fit_mdf(s_el, spec, kind, stage1.theta, stage_opts);
    } catch (const NotInHull& e) {
        result = stage1;
        result.skipped_reason = std::string("not_in_hull: ") + e.what();
    } catch (const MaxIterations& e) {
        result = stage1;
        result.skipped_reason = std::string("max_iterations: ") + e.what();
    } catch (const IllConditioned& e) {
        result = stage1;
        result.skipped_reason = std::string("ill_conditioned: ") + e.what();
    }
    result.stage1_theta = stage1.theta;
    return result;
}

}  // namespace

FitResult fit_el(const Matrix& data, const SemSpec& spec, const DiscrepancyKind& kind,
                 const SideInfoSpec& side, const FitOptions& opts) {
    FitOptions stage_opts = opts;
    stage_opts.compute_avar = false;
    FitResult stage1 = fit_plain(data, spec, kind, stage_opts);

    const Matrix rows = side_constraints(data, spec, stage1.theta, side);
    FitResult result = el_stage_two(data, spec, kind, rows, std::move(stage1), opts);
    if (opts.compute_avar && !result.skipped_reason) {
        result.avar = el_avar(estimate_inputs_el(data, spec, result.theta, side)).v /
                      static_cast<double>(data.rows());
    }
    return result;
}

FitResult fit_el_with_constraints(const Matrix& data, const SemSpec& spec,
                                  const DiscrepancyKind& kind, const Matrix& constraint_rows,
                                  const FitOptions& opts) {
    FitOptions stage_opts = opts;
    stage_opts.compute_avar = false;
    FitResult stage1 = fit_plain(data, spec, kind, stage_opts);
    return el_stage_two(data, spec, kind, constraint_rows, std::move(stage1), opts);
}

}  // namespace elsem
