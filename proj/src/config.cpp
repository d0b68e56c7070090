#include "elsem/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace elsem {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) {
            throw ConfigError("unknown key '" + item.key() + "' in " + where);
        }
    }
}

double get_number(const json& obj, const std::string& key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) throw ConfigError("'" + key + "' must be a number");
    return obj[key].get<double>();
}

void parse_model(const json& obj, TrueParams& model) {
    reject_unknown(obj, {"lambda1", "lambda2", "lambda3", "beta", "psi1", "psi2"}, "model");
    model.lambda1 = get_number(obj, "lambda1", model.lambda1);
    model.lambda2 = get_number(obj, "lambda2", model.lambda2);
    model.lambda3 = get_number(obj, "lambda3", model.lambda3);
    model.beta = get_number(obj, "beta", model.beta);
    model.psi1 = get_number(obj, "psi1", model.psi1);
    model.psi2 = get_number(obj, "psi2", model.psi2);
}

void parse_x_dist(const json& obj, XDist& dist) {
    reject_unknown(obj, {"kind", "gamma1", "gamma2"}, "x_dist");
    if (obj.contains("kind") && obj["kind"] != "biexp") {
        throw ConfigError("x_dist.kind must be 'biexp'");
    }
    dist.gamma1 = get_number(obj, "gamma1", dist.gamma1);
    dist.gamma2 = get_number(obj, "gamma2", dist.gamma2);
}

void parse_eps_dist(const json& obj, EpsDist& dist) {
    reject_unknown(obj, {"kind", "weight1", "var1", "var2"}, "eps_dist");
    if (obj.contains("kind") && obj["kind"] != "normal_mixture") {
        throw ConfigError("eps_dist.kind must be 'normal_mixture'");
    }
    dist.weight1 = get_number(obj, "weight1", dist.weight1);
    dist.var1 = get_number(obj, "var1", dist.var1);
    dist.var2 = get_number(obj, "var2", dist.var2);
}

void parse_side(const json& obj, SideInfoSpec& side) {
    reject_unknown(obj, {"kind", "m", "a", "medians"}, "side");
    if (obj.contains("kind")) {
        const std::string kind = obj["kind"].get<std::string>();
        if (kind == "independence") {
            side.kind = SideInfoKind::independence;
        } else if (kind == "medians") {
            side.kind = SideInfoKind::medians;
        } else if (kind == "none") {
            side.kind = SideInfoKind::none;
        } else {
            throw ConfigError("side.kind must be independence, medians, or none");
        }
    }
    if (obj.contains("m")) {
        if (!obj["m"].is_number_integer()) throw ConfigError("side.m must be an integer");
        side.m = obj["m"].get<int>();
    }
    auto read_vector = [](const json& arr, const char* key) {
        if (!arr.is_array()) throw ConfigError(std::string(key) + " must be an array of numbers");
        Vector v(arr.size());
        Eigen::Index i = 0;
        for (const auto& x : arr) {
            if (!x.is_number()) throw ConfigError(std::string(key) + " must be an array of numbers");
            v[i++] = x.get<double>();
        }
        return v;
    };
    if (obj.contains("a")) side.a = read_vector(obj["a"], "side.a");
    if (obj.contains("medians")) side.medians = read_vector(obj["medians"], "side.medians");
}

void parse_discrepancy(const json& node, DiscrepancyKind& kind) {
    auto set_variant = [&](const std::string& name) {
        if (name == "ml") {
            kind.variant = Discrepancy::ml;
        } else if (name == "gls") {
            kind.variant = Discrepancy::gls;
        } else {
            throw ConfigError("discrepancy variant must be 'ml' or 'gls'");
        }
    };
    if (node.is_string()) {
        set_variant(node.get<std::string>());
        return;
    }
    if (!node.is_object()) throw ConfigError("discrepancy must be a string or object");
    reject_unknown(node, {"variant", "gls_weight"}, "discrepancy");
    if (node.contains("variant")) set_variant(node["variant"].get<std::string>());
    if (node.contains("gls_weight")) {
        const std::string w = node["gls_weight"].get<std::string>();
        if (w == "sample_cov") {
            kind.gls_weight = GlsWeight::sample_cov;
        } else if (w == "identity") {
            kind.gls_weight = GlsWeight::identity;
        } else {
            throw ConfigError("gls_weight must be 'sample_cov' or 'identity'");
        }
    }
}

}  // namespace

McConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(root,
                   {"n", "reps", "seed", "model", "x_dist", "eps_dist", "side", "discrepancy",
                    "fix_beta"},
                   "config");

    McConfig cfg;
    if (root.contains("n")) cfg.n = root["n"].get<int>();
    if (root.contains("reps")) cfg.reps = root["reps"].get<int>();
    if (root.contains("seed")) cfg.seed = root["seed"].get<std::uint64_t>();
    if (root.contains("model")) parse_model(root["model"], cfg.model);
    if (root.contains("x_dist")) parse_x_dist(root["x_dist"], cfg.x_dist);
    if (root.contains("eps_dist")) parse_eps_dist(root["eps_dist"], cfg.eps_dist);
    if (root.contains("side")) parse_side(root["side"], cfg.side);
    if (root.contains("discrepancy")) parse_discrepancy(root["discrepancy"], cfg.discrepancy);
    if (root.contains("fix_beta")) {
        if (!root["fix_beta"].is_boolean()) throw ConfigError("fix_beta must be a boolean");
        cfg.fix_beta = root["fix_beta"].get<bool>();
    }
    try {
        cfg.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

McConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

DataFile read_data_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open data file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("data file is empty: " + path);

    DataFile file;
    {
        std::istringstream header(line);
        std::string col;
        while (std::getline(header, col, ',')) {
            if (col.rfind("y", 0) == 0) {
                ++file.d;
            } else if (col.rfind("x", 0) == 0) {
                ++file.c;
            } else {
                throw ConfigError("data header columns must be y1..yd then x1..xc");
            }
        }
    }
    if (file.d < 1 || file.c < 0) throw ConfigError("data header needs y columns first");

    std::vector<double> values;
    Eigen::Index rows = 0;
    const int width = file.d + file.c;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        int count = 0;
        while (std::getline(row, cell, ',')) {
            values.push_back(std::stod(cell));
            ++count;
        }
        if (count != width) throw ConfigError("data row has wrong number of columns");
        ++rows;
    }
    file.data = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), rows, width);
    return file;
}

void write_data_csv(const std::string& path, const Matrix& data, int d, int c) {
    if (data.cols() != d + c) throw DimensionMismatch("write_data_csv: width != d + c");
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);
    for (int j = 0; j < d; ++j) out << (j ? "," : "") << "y" << (j + 1);
    for (int k = 0; k < c; ++k) out << ",x" << (k + 1);
    out << "\n";
    out.precision(17);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        for (Eigen::Index j = 0; j < data.cols(); ++j) {
            if (j) out << ',';
            out << data(i, j);
        }
        out << "\n";
    }
}

}  // namespace elsem
