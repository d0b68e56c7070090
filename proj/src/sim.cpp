#include "elsem/sim.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

namespace elsem {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t replication_seed(std::uint64_t seed, std::uint64_t rep_index) {
    return splitmix64(seed ^ splitmix64(rep_index + 1));
}

void McConfig::validate() const {
    if (reps < 1) throw ConfigError("reps must be at least 1");
    if (n <= 4) throw ConfigError("n must exceed the number of observed variables");
    if (x_dist.gamma1 <= 0.0 || x_dist.gamma2 <= 0.0) throw ConfigError("biexp scales must be positive");
    if (eps_dist.weight1 < 0.0 || eps_dist.weight1 > 1.0) throw ConfigError("mixture weight must lie in [0, 1]");
    if (eps_dist.var1 <= 0.0 || eps_dist.var2 <= 0.0) throw ConfigError("mixture variances must be positive");
    if (model.psi1 <= 0.0 || model.psi2 <= 0.0) throw ConfigError("error variances must be positive");
    if (side.kind == SideInfoKind::independence && side.m < 1) throw ConfigError("basis size must be at least 1");
}

Matrix gen_normal_mixture(int n, const EpsDist& dist, Rng& rng) {
    Matrix out(n, 2);
    for (int i = 0; i < n; ++i) {
        const double var = rng.uniform() < dist.weight1 ? dist.var1 : dist.var2;
        const double sd = std::sqrt(var);
        out(i, 0) = sd * rng.normal();
        out(i, 1) = sd * rng.normal();
    }
    return out;
}

Matrix gen_biexp(int n, double gamma1, double gamma2, Rng& rng) {
    Matrix out(n, 2);
    for (int i = 0; i < n; ++i) {
        out(i, 0) = rng.exponential(gamma1);
        out(i, 1) = rng.exponential(gamma2);
    }
    return out;
}

SemSpec study_spec(const McConfig& cfg) {
    SemSpec spec;
    spec.d = 2;
    spec.c = 2;
    spec.b_fixed = Matrix::Zero(2, 2);
    spec.gamma_fixed = Matrix::Zero(2, 2);
    if (cfg.fix_beta) {
        spec.b_fixed(1, 0) = cfg.model.beta;
    } else {
        spec.b_free.push_back({1, 0, "beta"});
    }
    spec.gamma_free.push_back({0, 1, "lambda1"});
    spec.gamma_free.push_back({1, 1, "lambda2"});
    spec.gamma_free.push_back({1, 0, "lambda3"});
    spec.phi_free = true;
    spec.phi_cholesky = true;
    spec.validate();
    return spec;
}

Vector study_truth(const McConfig& cfg) {
    const SemSpec spec = study_spec(cfg);
    SemMatrices mats;
    mats.b = spec.b_fixed;
    mats.gamma = spec.gamma_fixed;
    if (!cfg.fix_beta) mats.b(1, 0) = cfg.model.beta;
    mats.gamma(0, 1) = cfg.model.lambda1;
    mats.gamma(1, 1) = cfg.model.lambda2;
    mats.gamma(1, 0) = cfg.model.lambda3;
    const double mix_var = cfg.eps_dist.variance();
    mats.psi = Vector(2);
    mats.psi << cfg.model.psi1 * mix_var, cfg.model.psi2 * mix_var;
    mats.phi = Matrix::Zero(2, 2);
    mats.phi(0, 0) = cfg.x_dist.gamma1 * cfg.x_dist.gamma1;
    mats.phi(1, 1) = cfg.x_dist.gamma2 * cfg.x_dist.gamma2;
    return pack_params(spec, mats);
}

SideInfoSpec resolved_side(const McConfig& cfg) {
    SideInfoSpec side = cfg.side;
    if (side.kind == SideInfoKind::medians && side.medians.size() == 0) {
        side.medians = Vector(2);
        side.medians << cfg.x_dist.gamma1 * std::numbers::ln2, cfg.x_dist.gamma2 * std::numbers::ln2;
    }
    return side;
}

namespace {

Matrix simulate_data(const McConfig& cfg, Rng& rng) {
    const int n = cfg.n;
    const Matrix x = gen_biexp(n, cfg.x_dist.gamma1, cfg.x_dist.gamma2, rng);
    const Matrix eps_raw = gen_normal_mixture(n, cfg.eps_dist, rng);
    const double s1 = std::sqrt(cfg.model.psi1);
    const double s2 = std::sqrt(cfg.model.psi2);

    Matrix data(n, 4);
    for (int i = 0; i < n; ++i) {
        const double e1 = s1 * eps_raw(i, 0);
        const double e2 = s2 * eps_raw(i, 1);
        const double y1 = cfg.model.lambda1 * x(i, 1) + e1;
        const double y2 = cfg.model.beta * y1 + cfg.model.lambda3 * x(i, 0) +
                          cfg.model.lambda2 * x(i, 1) + e2;
        data(i, 0) = y1;
        data(i, 1) = y2;
        data(i, 2) = x(i, 0);
        data(i, 3) = x(i, 1);
    }
    return data;
}

}  // namespace

RepRecord run_replication(const McConfig& cfg, std::uint64_t rep_index) {
    cfg.validate();
    Rng rng(replication_seed(cfg.seed, rep_index));
    const Matrix data = simulate_data(cfg, rng);
    const SemSpec spec = study_spec(cfg);
    const SideInfoSpec side = resolved_side(cfg);

    FitOptions opts;
    opts.compute_avar = false;

    RepRecord rec;
    rec.rep = rep_index;
    try {
        const FitResult plain = fit_plain(data, spec, cfg.discrepancy, opts);
        rec.theta_plain = plain.theta;
        rec.plain_ok = true;

        const FitResult el = fit_el(data, spec, cfg.discrepancy, side, opts);
        if (el.skipped_reason) {
            rec.skipped_reason = *el.skipped_reason;
        } else {
            rec.theta_el = el.theta;
            rec.el_ok = true;
        }
    } catch (const std::exception& e) {
        rec.skipped_reason = e.what();
    }
    return rec;
}

std::vector<RepRecord> run_replications(const McConfig& cfg, int threads) {
    cfg.validate();
    const int reps = cfg.reps;
    std::vector<RepRecord> records(reps);
    const int workers = std::max(1, std::min(threads, reps));
    if (workers == 1) {
        for (int r = 0; r < reps; ++r) records[r] = run_replication(cfg, r);
        return records;
    }
    std::atomic<int> next{0};
    auto work = [&]() {
        for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) {
            records[r] = run_replication(cfg, r);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    return records;
}

namespace {

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double mean_of(const std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double sample_variance(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mu = mean_of(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mu) * (v - mu);
    return ss / static_cast<double>(n - 1);
}

// Median squared deviation from the median: the robust dispersion whose
// ratio forms the median-based efficiency column.
double median_dispersion(const std::vector<double>& values) {
    if (values.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double med = median_of(values);
    std::vector<double> dev(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) dev[i] = (values[i] - med) * (values[i] - med);
    return median_of(dev);
}

}  // namespace

std::string scenario_label(const McConfig& cfg) {
    std::ostringstream out;
    if (cfg.side.kind == SideInfoKind::independence) {
        out << "m=" << cfg.side.m;
    } else {
        out << "(" << cfg.x_dist.gamma1 << "," << cfg.x_dist.gamma2 << ")";
    }
    return out.str();
}

McReport summarize(const McConfig& cfg, const std::vector<RepRecord>& records) {
    const SemSpec spec = study_spec(cfg);
    const Vector truth = study_truth(cfg);
    const auto names = spec.param_names();
    const int q = spec.param_count();

    std::vector<std::size_t> usable;
    for (std::size_t r = 0; r < records.size(); ++r) {
        if (records[r].plain_ok && records[r].el_ok) usable.push_back(r);
    }
    const int skipped = static_cast<int>(records.size() - usable.size());
    if (usable.empty()) {
        throw StudyDegenerate("every replication failed or was skipped");
    }
    const double rate = static_cast<double>(skipped) / static_cast<double>(records.size());
    if (rate >= 0.05) {
        std::ostringstream msg;
        msg << "skipped-replication rate " << rate << " (" << skipped << "/" << records.size()
            << ") exceeds the 5% gate";
        throw StudyDegenerate(msg.str());
    }

    McReport report;
    report.scenario = scenario_label(cfg);
    report.reps = static_cast<int>(records.size());
    report.skipped = skipped;
    report.params.resize(q);
    for (int k = 0; k < q; ++k) {
        std::vector<double> plain, el;
        plain.reserve(usable.size());
        el.reserve(usable.size());
        for (std::size_t r : usable) {
            plain.push_back(records[r].theta_plain[k]);
            el.push_back(records[r].theta_el[k]);
        }
        ParamSummary& s = report.params[k];
        s.name = names[k];
        s.bias_mean = mean_of(plain) - truth[k];
        s.bias_mean_el = mean_of(el) - truth[k];
        s.bias_median = median_of(plain) - truth[k];
        s.bias_median_el = median_of(el) - truth[k];
        s.var_mean = sample_variance(plain);
        s.var_mean_el = sample_variance(el);
        s.r1 = s.var_mean_el / s.var_mean;
        s.var_median = median_dispersion(plain);
        s.var_median_el = median_dispersion(el);
        s.r2 = s.var_median_el / s.var_median;
    }
    return report;
}

McReport run_study(const McConfig& cfg, int threads) {
    return summarize(cfg, run_replications(cfg, threads));
}

namespace {

constexpr const char* kCsvHeader =
    "scenario,param,bias_mean,bias_mean_el,bias_median,bias_median_el,"
    "var_mean,var_mean_el,r1,var_median,var_median_el,r2";

std::string format_value(double v) {
    if (std::isnan(v)) return "NA";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_value(const std::string& token) {
    if (token == "NA") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        throw ConfigError("report CSV: bad numeric field '" + token + "'");
    }
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::string render_csv(const McReport& report) {
    std::ostringstream out;
    out << "# reps=" << report.reps << " skipped=" << report.skipped << "\n";
    out << kCsvHeader << "\n";
    for (const auto& s : report.params) {
        out << report.scenario << ',' << s.name << ',' << format_value(s.bias_mean) << ','
            << format_value(s.bias_mean_el) << ',' << format_value(s.bias_median) << ','
            << format_value(s.bias_median_el) << ',' << format_value(s.var_mean) << ','
            << format_value(s.var_mean_el) << ',' << format_value(s.r1) << ','
            << format_value(s.var_median) << ',' << format_value(s.var_median_el) << ','
            << format_value(s.r2) << "\n";
    }
    return out.str();
}

McReport parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    McReport report;
    bool saw_header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream meta(line.substr(1));
            std::string token;
            while (meta >> token) {
                const auto eq = token.find('=');
                if (eq == std::string::npos) continue;
                const std::string key = token.substr(0, eq);
                const std::string value = token.substr(eq + 1);
                if (key == "reps") report.reps = std::stoi(value);
                if (key == "skipped") report.skipped = std::stoi(value);
            }
            continue;
        }
        if (!saw_header) {
            if (line != kCsvHeader) throw ConfigError("report CSV: unexpected header");
            saw_header = true;
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 12) throw ConfigError("report CSV: wrong column count");
        report.scenario = fields[0];
        ParamSummary s;
        s.name = fields[1];
        s.bias_mean = parse_value(fields[2]);
        s.bias_mean_el = parse_value(fields[3]);
        s.bias_median = parse_value(fields[4]);
        s.bias_median_el = parse_value(fields[5]);
        s.var_mean = parse_value(fields[6]);
        s.var_mean_el = parse_value(fields[7]);
        s.r1 = parse_value(fields[8]);
        s.var_median = parse_value(fields[9]);
        s.var_median_el = parse_value(fields[10]);
        s.r2 = parse_value(fields[11]);
        report.params.push_back(std::move(s));
    }
    if (!saw_header) throw ConfigError("report CSV: missing header");
    return report;
}

std::string render_markdown(const McReport& report) {
    std::ostringstream out;
    out << "| scenario | param | bias_mean | bias_mean_el | bias_median | bias_median_el "
        << "| var_mean | var_mean_el | r1 | var_median | var_median_el | r2 |\n";
    out << "|---|---|---|---|---|---|---|---|---|---|---|---|\n";
    char buf[64];
    auto fmt = [&](double v) -> std::string {
        if (std::isnan(v)) return "NA";
        std::snprintf(buf, sizeof(buf), "%.4f", v);
        return buf;
    };
    for (const auto& s : report.params) {
        out << "| " << report.scenario << " | " << s.name << " | " << fmt(s.bias_mean) << " | "
            << fmt(s.bias_mean_el) << " | " << fmt(s.bias_median) << " | " << fmt(s.bias_median_el)
            << " | " << fmt(s.var_mean) << " | " << fmt(s.var_mean_el) << " | " << fmt(s.r1)
            << " | " << fmt(s.var_median) << " | " << fmt(s.var_median_el) << " | " << fmt(s.r2)
            << " |\n";
    }
    out << "\n_" << report.reps << " replications, " << report.skipped << " skipped_\n";
    return out.str();
}

std::string render_replications_csv(const McConfig& cfg, const std::vector<RepRecord>& records) {
    const auto names = study_spec(cfg).param_names();
    std::ostringstream out;
    out << "rep,estimator,param,estimate,skipped_reason\n";
    for (const auto& rec : records) {
        std::string reason = rec.skipped_reason;
        std::replace(reason.begin(), reason.end(), ',', ';');
        for (int which = 0; which < 2; ++which) {
            const bool ok = which == 0 ? rec.plain_ok : rec.el_ok;
            const Vector& theta = which == 0 ? rec.theta_plain : rec.theta_el;
            const char* label = which == 0 ? "plain" : "el";
            for (std::size_t k = 0; k < names.size(); ++k) {
                out << rec.rep << ',' << label << ',' << names[k] << ',';
                if (ok) {
                    out << format_value(theta[static_cast<Eigen::Index>(k)]) << ',';
                } else {
                    out << "NA,";
                }
                out << (ok ? "" : reason) << "\n";
            }
        }
    }
    return out.str();
}

}  // namespace elsem
