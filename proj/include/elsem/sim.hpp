#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "elsem/mdf_fit.hpp"

namespace elsem {

// Deterministic generator with a pinned algorithm so studies reproduce
// bit-for-bit: mt19937_64 raw draws, uniforms from the top 53 bits, normals
// by Box-Muller (cosine branch), exponentials by inverse CDF.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform() {  // strictly inside (0, 1)
        return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double exponential(double scale) { return -scale * std::log(uniform()); }

private:
    std::mt19937_64 gen_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Substream seed for one replication; replications are independent of the
// order in which worker threads pick them up.
std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t rep_index);

struct TrueParams {
    double lambda1 = 1.0;
    double lambda2 = -1.0;
    double lambda3 = 0.5;
    double beta = 1.0;
    double psi1 = 1.0;
    double psi2 = 1.0;
};

// Independent exponential marginals with the given scale (= mean) parameters.
struct XDist {
    double gamma1 = 1.0;
    double gamma2 = 3.0;
};

// Two-component normal scale mixture; population covariance is
// (weight1 * var1 + (1 - weight1) * var2) * I.
struct EpsDist {
    double weight1 = 0.9;
    double var1 = 1.0;
    double var2 = 5.0;

    double variance() const { return weight1 * var1 + (1.0 - weight1) * var2; }
};

struct McConfig {
    int n = 100;
    int reps = 50;
    std::uint64_t seed = 20240901;
    TrueParams model;
    XDist x_dist;
    EpsDist eps_dist;
    SideInfoSpec side;
    DiscrepancyKind discrepancy;
    bool fix_beta = false;

    void validate() const;
};

Matrix gen_normal_mixture(int n, const EpsDist& dist, Rng& rng);
Matrix gen_biexp(int n, double gamma1, double gamma2, Rng& rng);

// Model topology of the simulated two-equation system:
// y1 = l1 x2 + e1,  y2 = b y1 + l3 x1 + l2 x2 + e2.
SemSpec study_spec(const McConfig& cfg);

// Parameter vector the estimates are compared against: configured
// coefficients, error variances scaled by the mixture variance, and the
// exogenous covariance implied by the exponential scales.
Vector study_truth(const McConfig& cfg);

// Side-information spec with defaults resolved (known medians filled in from
// the exponential scales when not set explicitly).
SideInfoSpec resolved_side(const McConfig& cfg);

struct RepRecord {
    std::uint64_t rep = 0;
    bool plain_ok = false;
    bool el_ok = false;
    Vector theta_plain;
    Vector theta_el;
    std::string skipped_reason;
};

RepRecord run_replication(const McConfig& cfg, std::uint64_t rep_index);
std::vector<RepRecord> run_replications(const McConfig& cfg, int threads = 1);

struct ParamSummary {
    std::string name;
    double bias_mean = 0.0;
    double bias_mean_el = 0.0;
    double bias_median = 0.0;
    double bias_median_el = 0.0;
    double var_mean = 0.0;
    double var_mean_el = 0.0;
    double r1 = 0.0;
    double var_median = 0.0;
    double var_median_el = 0.0;
    double r2 = 0.0;
};

struct McReport {
    std::string scenario;
    int reps = 0;
    int skipped = 0;
    std::vector<ParamSummary> params;
};

std::string scenario_label(const McConfig& cfg);
McReport summarize(const McConfig& cfg, const std::vector<RepRecord>& records);
McReport run_study(const McConfig& cfg, int threads = 1);

std::string render_csv(const McReport& report);
std::string render_markdown(const McReport& report);
McReport parse_csv(const std::string& text);

std::string render_replications_csv(const McConfig& cfg, const std::vector<RepRecord>& records);

}  // namespace elsem
