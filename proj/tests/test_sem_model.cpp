#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "elsem/mdf_fit.hpp"
#include "elsem/sem_model.hpp"
#include "elsem/sim.hpp"
#include "helpers.hpp"

using namespace elsem;
using test_helpers::random_matrix;
using test_helpers::random_pd;

namespace {

SemSpec null_b_spec(bool phi_cholesky = true) {
    SemSpec spec;
    spec.d = 2;
    spec.c = 2;
    spec.b_fixed = Matrix::Zero(2, 2);
    spec.gamma_fixed = Matrix::Zero(2, 2);
    spec.gamma_free = {{0, 0, "g11"}, {0, 1, "g12"}, {1, 0, "g21"}, {1, 1, "g22"}};
    spec.phi_cholesky = phi_cholesky;
    spec.validate();
    return spec;
}

Vector null_b_theta(const SemSpec& spec, const Matrix& gamma, const Vector& psi, const Matrix& phi) {
    SemMatrices mats;
    mats.b = Matrix::Zero(2, 2);
    mats.gamma = gamma;
    mats.psi = psi;
    mats.phi = phi;
    return pack_params(spec, mats);
}

}  // namespace

TEST_CASE("structured_sigma block-diagonal degenerate case") {
    SemSpec spec;
    spec.d = 2;
    spec.c = 2;
    spec.b_fixed = Matrix::Zero(2, 2);
    spec.gamma_fixed = Matrix::Zero(2, 2);
    spec.validate();  // no free coefficients at all

    SemMatrices mats;
    mats.b = Matrix::Zero(2, 2);
    mats.gamma = Matrix::Zero(2, 2);
    mats.psi = Vector(2);
    mats.psi << 1.5, 2.5;
    mats.phi = Matrix(2, 2);
    mats.phi << 2.0, 0.5, 0.5, 1.0;

    const Matrix sigma = structured_sigma(spec, pack_params(spec, mats));
    Matrix expected = Matrix::Zero(4, 4);
    expected(0, 0) = 1.5;
    expected(1, 1) = 2.5;
    expected.bottomRightCorner(2, 2) = mats.phi;
    CHECK((sigma - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("structured_sigma matches the hand expansion of the study model") {
    McConfig cfg;  // lambda = (1, -1, 0.5), beta = 1
    cfg.model.psi1 = 1.0;
    cfg.model.psi2 = 1.0;
    const SemSpec spec = study_spec(cfg);

    SemMatrices mats;
    mats.b = Matrix::Zero(2, 2);
    mats.b(1, 0) = 1.0;
    mats.gamma = Matrix::Zero(2, 2);
    mats.gamma(0, 1) = 1.0;
    mats.gamma(1, 1) = -1.0;
    mats.gamma(1, 0) = 0.5;
    mats.psi = Vector::Ones(2);
    mats.phi = Matrix::Identity(2, 2);

    const Matrix sigma = structured_sigma(spec, pack_params(spec, mats));
    // y1 = x2 + e1 has variance lambda1^2 Phi22 + psi1 = 2.
    CHECK(sigma(0, 0) == doctest::Approx(2.0));
    // y2 = y1 + 0.5 x1 - x2 + e2 = 0.5 x1 + e1 + e2.
    CHECK(sigma(1, 1) == doctest::Approx(0.25 + 2.0));
    CHECK(sigma(0, 1) == doctest::Approx(1.0));   // cov(y1, y2) = var(e1)
    CHECK(sigma(0, 3) == doctest::Approx(1.0));   // cov(y1, x2)
    CHECK(sigma(1, 2) == doctest::Approx(0.5));   // cov(y2, x1)
    CHECK(sigma(1, 3) == doctest::Approx(0.0));
}

TEST_CASE("structured_sigma is symmetric positive definite at interior points") {
    std::mt19937_64 gen(103);
    McConfig cfg;
    const SemSpec spec = study_spec(cfg);
    for (int t = 0; t < 50; ++t) {
        SemMatrices mats;
        mats.b = Matrix::Zero(2, 2);
        mats.b(1, 0) = random_matrix(1, 1, gen)(0, 0);
        mats.gamma = random_matrix(2, 2, gen);
        mats.gamma(0, 0) = 0.0;
        mats.psi = Vector(2);
        mats.psi << 0.3 + std::abs(random_matrix(1, 1, gen)(0, 0)),
            0.3 + std::abs(random_matrix(1, 1, gen)(0, 0));
        mats.phi = random_pd(2, gen, 0.3);
        const Matrix sigma = structured_sigma(spec, pack_params(spec, mats));
        CHECK((sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
        auto [lo, hi] = eigen_bounds(sigma);
        CHECK(lo > 0.0);
    }
}

TEST_CASE("the generator covariance matches the structured covariance") {
    McConfig cfg;
    cfg.n = 1000000;
    cfg.seed = 777;
    Rng rng(replication_seed(cfg.seed, 0));
    const Matrix x = gen_biexp(cfg.n, cfg.x_dist.gamma1, cfg.x_dist.gamma2, rng);
    const Matrix eps = gen_normal_mixture(cfg.n, cfg.eps_dist, rng);
    Matrix data(cfg.n, 4);
    for (int i = 0; i < cfg.n; ++i) {
        const double y1 = cfg.model.lambda1 * x(i, 1) + eps(i, 0);
        const double y2 = cfg.model.beta * y1 + cfg.model.lambda3 * x(i, 0) +
                          cfg.model.lambda2 * x(i, 1) + eps(i, 1);
        data.row(i) << y1, y2, x(i, 0), x(i, 1);
    }
    const Matrix sim_cov = sample_cov(data);
    const Matrix sigma = structured_sigma(study_spec(cfg), study_truth(cfg));
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            CHECK(std::abs(sim_cov(i, j) - sigma(i, j)) <= 0.01 * std::max(1.0, std::abs(sigma(i, j))));
        }
    }
}

TEST_CASE("jacobian has exact unit entries for directly parameterized covariance") {
    const SemSpec spec = null_b_spec(false);
    std::mt19937_64 gen(107);
    Matrix gamma = random_matrix(2, 2, gen);
    Vector psi(2);
    psi << 1.0, 2.0;
    const Matrix phi = random_pd(2, gen, 0.4);
    const Vector theta = null_b_theta(spec, gamma, psi, phi);
    const Matrix delta = jacobian_delta(spec, theta);

    const auto names = spec.param_names();
    // Row of vecs(Sigma) holding Sigma_xx(0,0) is index 2+3+4 = 9 for p=4
    // ordering (00,01,11,02,12,22,03,13,23,33): entry (2,2) sits at index 5.
    // Locate instead by probing: perturb phi_11 and phi_22 directly.
    const int q = spec.param_count();
    for (int k = 0; k < q; ++k) {
        if (names[k] == "phi_11") {
            CHECK(delta(5, k) == doctest::Approx(1.0).epsilon(1e-9));
        }
        if (names[k] == "phi_22") {
            CHECK(delta(9, k) == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
}

TEST_CASE("jacobian matches the analytic derivative in the null-B model") {
    const SemSpec spec = null_b_spec(false);
    std::mt19937_64 gen(109);
    const Matrix gamma = random_matrix(2, 2, gen);
    Vector psi(2);
    psi << 0.8, 1.3;
    const Matrix phi = random_pd(2, gen, 0.4);
    const Vector theta = null_b_theta(spec, gamma, psi, phi);
    const Matrix delta = jacobian_delta(spec, theta);

    auto sigma_of = [&](const Matrix& g, const Matrix& ph, const Vector& ps) {
        Matrix s(4, 4);
        Matrix syy = g * ph * g.transpose();
        syy.diagonal() += ps;
        s.topLeftCorner(2, 2) = syy;
        s.topRightCorner(2, 2) = g * ph;
        s.bottomLeftCorner(2, 2) = (g * ph).transpose();
        s.bottomRightCorner(2, 2) = ph;
        return s;
    };

    Matrix analytic(10, spec.param_count());
    int k = 0;
    for (const auto& e : spec.gamma_free) {
        Matrix eab = Matrix::Zero(2, 2);
        eab(e.row, e.col) = 1.0;
        Matrix ds = Matrix::Zero(4, 4);
        ds.topLeftCorner(2, 2) = eab * phi * gamma.transpose() + gamma * phi * eab.transpose();
        ds.topRightCorner(2, 2) = eab * phi;
        ds.bottomLeftCorner(2, 2) = (eab * phi).transpose();
        analytic.col(k++) = vecs(ds);
    }
    for (int i = 0; i < 2; ++i) {
        Matrix ds = Matrix::Zero(4, 4);
        ds(i, i) = 1.0;
        analytic.col(k++) = vecs(ds);
    }
    for (int j = 0; j < 2; ++j) {
        for (int i = j; i < 2; ++i) {
            Matrix dphi = Matrix::Zero(2, 2);
            dphi(i, j) = 1.0;
            dphi(j, i) = 1.0;
            Matrix ds = Matrix::Zero(4, 4);
            ds.topLeftCorner(2, 2) = gamma * dphi * gamma.transpose();
            ds.topRightCorner(2, 2) = gamma * dphi;
            ds.bottomLeftCorner(2, 2) = (gamma * dphi).transpose();
            ds.bottomRightCorner(2, 2) = dphi;
            analytic.col(k++) = vecs(ds);
        }
    }
    CHECK((delta - analytic).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("jacobian has full rank at the study truth") {
    McConfig cfg;
    const SemSpec spec = study_spec(cfg);
    const Matrix delta = jacobian_delta(spec, study_truth(cfg));
    CHECK(delta.rows() == 10);
    CHECK(delta.cols() == spec.param_count());
    Eigen::JacobiSVD<Matrix> svd(delta);
    CHECK(svd.singularValues()[spec.param_count() - 1] >
          1e-6 * svd.singularValues()[0]);
}

TEST_CASE("first-order Taylor error of the structured covariance decays quadratically") {
    McConfig cfg;
    const SemSpec spec = study_spec(cfg);
    const Vector theta = study_truth(cfg);
    const Matrix delta = jacobian_delta(spec, theta);
    const Vector base = vecs(structured_sigma(spec, theta));

    for (int k = 0; k < spec.param_count(); ++k) {
        std::vector<double> logs_h, logs_r;
        for (double h : {1e-2, 1e-3, 1e-4, 1e-5}) {
            Vector bumped = theta;
            bumped[k] += h;
            const double r =
                (vecs(structured_sigma(spec, bumped)) - base - h * delta.col(k)).norm();
            if (r > 1e-12) {
                logs_h.push_back(std::log(h));
                logs_r.push_back(std::log(r));
            }
        }
        if (logs_h.size() < 3) continue;  // linear direction, no curvature to measure
        const double n = static_cast<double>(logs_h.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < logs_h.size(); ++i) {
            sx += logs_h[i];
            sy += logs_r[i];
            sxx += logs_h[i] * logs_h[i];
            sxy += logs_h[i] * logs_r[i];
        }
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        CHECK(slope >= 1.7);
    }
}

TEST_CASE("sample covariance uses the n divisor") {
    Matrix constant = Matrix::Constant(5, 3, 2.0);
    CHECK(sample_cov(constant).cwiseAbs().maxCoeff() == 0.0);

    Matrix two(2, 2);
    two << 0.0, 0.0, 2.0, 0.0;
    Matrix expected(2, 2);
    expected << 1.0, 0.0, 0.0, 0.0;
    CHECK((sample_cov(two) - expected).cwiseAbs().maxCoeff() == 0.0);

    std::mt19937_64 gen(113);
    const Matrix data = random_matrix(37, 4, gen);
    const Vector mean = data.colwise().mean();
    Matrix oracle = Matrix::Zero(4, 4);
    for (int i = 0; i < 37; ++i) {
        const Vector c = data.row(i).transpose() - mean;
        oracle += c * c.transpose();
    }
    oracle /= 37.0;
    CHECK((sample_cov(data) - oracle).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("el_weighted_cov reduces to sample_cov and matches hand weights") {
    std::mt19937_64 gen(127);
    const Matrix data = random_matrix(64, 3, gen);

    ELSolution uniform;
    uniform.weights = Vector::Constant(64, 1.0 / 64.0);
    uniform.zeta = Vector::Zero(1);
    CHECK((el_weighted_cov(data, uniform) - sample_cov(data)).cwiseAbs().maxCoeff() == 0.0);

    Matrix two(2, 2);
    two << 0.0, 0.0, 3.0, 0.0;
    ELSolution sol;
    sol.weights = Vector(2);
    sol.weights << 2.0 / 3.0, 1.0 / 3.0;
    const Matrix w = el_weighted_cov(two, sol);
    CHECK(w(0, 0) == doctest::Approx(2.25));

    // Positive weights keep the weighted covariance PSD and symmetric.
    Vector raw = random_matrix(64, 1, gen).cwiseAbs();
    ELSolution psd;
    psd.weights = raw / raw.sum();
    const Matrix m = el_weighted_cov(data, psd);
    CHECK((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
    auto [lo, hi] = eigen_bounds(m);
    CHECK(lo >= -1e-12);
}

TEST_CASE("el_weighted_cov approaches sample_cov as the multiplier vanishes") {
    std::mt19937_64 gen(131);
    const Matrix data = random_matrix(80, 4, gen);
    const Matrix g = random_matrix(80, 2, gen);
    Vector zeta = Vector::Constant(2, 1e-8 / std::sqrt(2.0));
    ELSolution sol;
    sol.zeta = zeta;
    sol.weights = Vector(80);
    for (int j = 0; j < 80; ++j) {
        sol.weights[j] = 1.0 / (80.0 * (1.0 + g.row(j).dot(zeta)));
    }
    CHECK((el_weighted_cov(data, sol) - sample_cov(data)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("residuals vanish on noiseless data and reduce to centered Y") {
    McConfig cfg;
    const SemSpec spec = study_spec(cfg);
    std::mt19937_64 gen(137);
    const int n = 50;
    Matrix data(n, 4);
    for (int i = 0; i < n; ++i) {
        const double x1 = std::abs(random_matrix(1, 1, gen)(0, 0));
        const double x2 = std::abs(random_matrix(1, 1, gen)(0, 0)) * 3.0;
        const double y1 = cfg.model.lambda1 * x2;
        const double y2 = cfg.model.beta * y1 + cfg.model.lambda3 * x1 + cfg.model.lambda2 * x2;
        data.row(i) << y1, y2, x1, x2;
    }
    const Matrix res = residuals(spec, study_truth(cfg), data);
    CHECK(res.cwiseAbs().maxCoeff() <= 1e-12);

    SemSpec empty;
    empty.d = 2;
    empty.c = 2;
    empty.b_fixed = Matrix::Zero(2, 2);
    empty.gamma_fixed = Matrix::Zero(2, 2);
    empty.validate();
    SemMatrices mats;
    mats.b = Matrix::Zero(2, 2);
    mats.gamma = Matrix::Zero(2, 2);
    mats.psi = Vector::Ones(2);
    mats.phi = Matrix::Identity(2, 2);
    const Matrix res2 = residuals(empty, pack_params(empty, mats), data);
    const Matrix centered_y = data.leftCols(2).rowwise() - data.leftCols(2).colwise().mean();
    CHECK((res2 - centered_y).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("fitted residuals decorrelate from the covariates") {
    McConfig cfg;
    cfg.n = 200;
    const SemSpec spec = study_spec(cfg);
    FitOptions opts;
    opts.compute_avar = false;

    int ok = 0;
    const int reps = 50;
    const double bound = 3.0 / std::sqrt(static_cast<double>(cfg.n));
    for (int r = 0; r < reps; ++r) {
        cfg.seed = 900 + r;
        Rng rng(replication_seed(cfg.seed, 0));
        const Matrix x = gen_biexp(cfg.n, cfg.x_dist.gamma1, cfg.x_dist.gamma2, rng);
        const Matrix eps = gen_normal_mixture(cfg.n, cfg.eps_dist, rng);
        Matrix data(cfg.n, 4);
        for (int i = 0; i < cfg.n; ++i) {
            const double y1 = cfg.model.lambda1 * x(i, 1) + eps(i, 0);
            const double y2 = cfg.model.beta * y1 + cfg.model.lambda3 * x(i, 0) +
                              cfg.model.lambda2 * x(i, 1) + eps(i, 1);
            data.row(i) << y1, y2, x(i, 0), x(i, 1);
        }
        const FitResult fit = fit_plain(data, spec, DiscrepancyKind{}, opts);
        const Matrix res = residuals(spec, fit.theta, data);
        double max_corr = 0.0;
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                const Vector u = res.col(a).array() - res.col(a).mean();
                const Vector v = x.col(b).array() - x.col(b).mean();
                max_corr = std::max(max_corr, std::abs(u.dot(v) / (u.norm() * v.norm())));
            }
        }
        if (max_corr <= bound) ++ok;
    }
    CHECK(ok >= reps * 90 / 100);
}

TEST_CASE("pack and unpack are mutually inverse") {
    McConfig cfg;
    const SemSpec spec = study_spec(cfg);
    const Vector theta = study_truth(cfg);
    const SemMatrices mats = unpack_params(spec, theta);
    CHECK((pack_params(spec, mats) - theta).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK_THROWS_AS(unpack_params(spec, Vector::Zero(3)), DimensionMismatch);
}
