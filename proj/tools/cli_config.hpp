// cli_config.hpp - INI experiment configuration for the ahe command line tool
#pragma once

#include <cstdint>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "ahe/ahe.hpp"

namespace ahe::cli {

namespace pt = boost::property_tree;

struct Config {
    // [geometry]
    int N = 16;
    Eigen::Matrix2cd g = Eigen::Matrix2cd::Identity();
    bool normalize_volume = false;
    // [bundle]
    int rank = 1;
    double beta = 0.0;
    std::vector<ModeSpec> modes;
    double random_amplitude = 0.0;
    int random_band = 1;
    // [flow]
    FlowConfig flow;
    // [output]
    std::string csv = "flow.csv";
    std::string report = "report.json";
    int snapshot_every = 0;
    // [path]
    double path_k = 20.0;
    int path_steps = 256;
    std::vector<ModeSpec> path_a, path_b;
    std::vector<double> bow_scales = {0.0, 1.0};
    double path_tolerance = 1e-6;
    bool path_calibrate = false;
    // [moment]
    double moment_k = 10.0;
    double moment_dt = 1e-3;
    double moment_tolerance = 1e-3;
    bool moment_refine = true;
    // [identities]
    double identities_tolerance = 1e-8;
    // [k_limit]
    std::vector<double> k_list = {25, 50, 100, 200};
    double k_window = 0.1;
    // [chi]
    std::vector<double> chi_k = {1, 2, 3, 4};

    std::uint64_t seed = 0;
    nlohmann::json echo;  // normalized form of every effective setting
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

inline double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || trim(v.substr(used)) != "") throw ConfigError(key + ": expected a number, got '" + v + "'");
    return d;
}

inline int to_int(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != std::floor(d) || std::abs(d) > 1e9) throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return static_cast<int>(d);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split(v, ',')) out.push_back(to_double(key, item));
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

/// "m1 m2 m3 m4 | phase | a_11 ... a_rr  re_12 im_12 ..." with the
/// diagonal first, then upper-triangular entries row by row.
inline ModeSpec to_mode(const std::string& key, const std::string& v, int rank) {
    const auto parts = split(v, '|');
    if (parts.size() != 3) throw ConfigError(key + ": expected 'm1 m2 m3 m4 | phase | amplitudes'");
    ModeSpec ms;
    std::istringstream wv(parts[0]);
    for (int& c : ms.m)
        if (!(wv >> c)) throw ConfigError(key + ": wave vector needs four integers");
    std::string extra;
    if (wv >> extra) throw ConfigError(key + ": wave vector needs four integers");
    ms.phase = to_double(key, parts[1]);
    std::istringstream av(parts[2]);
    std::vector<double> nums;
    for (std::string tok; av >> tok;) nums.push_back(to_double(key, tok));
    const std::size_t want = static_cast<std::size_t>(rank + rank * (rank - 1));
    if (nums.size() != want)
        throw ConfigError(key + ": rank " + std::to_string(rank) + " needs " + std::to_string(want) + " amplitudes");
    ms.amp = Eigen::MatrixXcd::Zero(rank, rank);
    std::size_t q = 0;
    for (int i = 0; i < rank; ++i) ms.amp(i, i) = nums[q++];
    for (int i = 0; i < rank; ++i)
        for (int j = i + 1; j < rank; ++j) {
            ms.amp(i, j) = cd{nums[q], nums[q + 1]};
            ms.amp(j, i) = std::conj(ms.amp(i, j));
            q += 2;
        }
    return ms;
}

inline nlohmann::json mode_echo(const ModeSpec& ms) {
    nlohmann::json amp = nlohmann::json::array();
    for (int i = 0; i < ms.amp.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < ms.amp.cols(); ++j) row.push_back({ms.amp(i, j).real(), ms.amp(i, j).imag()});
        amp.push_back(row);
    }
    return {{"wave_vector", ms.m}, {"phase", ms.phase}, {"amplitude", amp}};
}

struct Schema {
    std::set<std::string> keys;
    std::vector<std::regex> patterns;

    bool allows(const std::string& k) const {
        if (keys.count(k)) return true;
        for (const auto& re : patterns)
            if (std::regex_match(k, re)) return true;
        return false;
    }
};

inline const std::map<std::string, Schema>& schema() {
    static const std::map<std::string, Schema> s = {
        {"geometry", {{"N", "g11", "g22", "g12_re", "g12_im", "normalize_volume"}, {}}},
        {"bundle", {{"rank", "beta", "degree", "random_amplitude", "random_band"}, {std::regex("mode[0-9]+")}}},
        {"flow", {{"k", "dt", "t_end", "integrator", "stop_tolerance", "stability_constant"}, {}}},
        {"output", {{"csv", "report", "snapshot_every"}, {}}},
        {"path",
         {{"k", "steps", "bow_scales", "tolerance", "calibrate"}, {std::regex("a_mode[0-9]+"), std::regex("b_mode[0-9]+")}}},
        {"moment", {{"k", "dt", "tolerance", "refine"}, {}}},
        {"identities", {{"tolerance"}, {}}},
        {"k_limit", {{"k_list", "window"}, {}}},
        {"chi", {{"k_list"}, {}}},
    };
    return s;
}

/// Reads typed values and records each effective setting in the echo.
class Reader {
public:
    Reader(const pt::ptree& tree, nlohmann::json& echo) : tree_(tree), echo_(echo) {}

    std::optional<std::string> raw(const std::string& sec, const std::string& key) const {
        const auto s = tree_.get_child_optional(sec);
        if (!s) return std::nullopt;
        const auto v = s->get_optional<std::string>(key);
        if (!v) return std::nullopt;
        return trim(*v);
    }

    double num(const std::string& sec, const std::string& key, double def) {
        const auto v = raw(sec, key);
        const double d = v ? to_double(sec + "." + key, *v) : def;
        echo_[sec][key] = d;
        return d;
    }
    int integer(const std::string& sec, const std::string& key, int def) {
        const auto v = raw(sec, key);
        const int i = v ? to_int(sec + "." + key, *v) : def;
        echo_[sec][key] = i;
        return i;
    }
    bool flag(const std::string& sec, const std::string& key, bool def) {
        const auto v = raw(sec, key);
        const bool b = v ? to_bool(sec + "." + key, *v) : def;
        echo_[sec][key] = b;
        return b;
    }
    std::string text(const std::string& sec, const std::string& key, const std::string& def) {
        const auto v = raw(sec, key);
        const std::string s = v ? *v : def;
        echo_[sec][key] = s;
        return s;
    }
    std::vector<double> list(const std::string& sec, const std::string& key, const std::vector<double>& def) {
        const auto v = raw(sec, key);
        std::vector<double> out = v ? to_list(sec + "." + key, *v) : def;
        echo_[sec][key] = out;
        return out;
    }
    /// Keys `<prefix><n>` in ascending n.
    std::vector<ModeSpec> modes(const std::string& sec, const std::string& prefix, int rank) {
        std::vector<std::pair<int, ModeSpec>> found;
        if (const auto s = tree_.get_child_optional(sec)) {
            const std::regex re(prefix + "([0-9]+)");
            for (const auto& [k, v] : *s) {
                std::smatch mt;
                if (std::regex_match(k, mt, re))
                    found.emplace_back(std::stoi(mt[1]), to_mode(sec + "." + k, trim(v.data()), rank));
            }
        }
        std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        std::vector<ModeSpec> out;
        nlohmann::json arr = nlohmann::json::array();
        for (auto& [n, ms] : found) {
            arr.push_back(mode_echo(ms));
            out.push_back(std::move(ms));
        }
        echo_[sec][prefix + "s"] = arr;
        return out;
    }

private:
    const pt::ptree& tree_;
    nlohmann::json& echo_;
};

inline void check_keys(const pt::ptree& tree) {
    const auto& sch = schema();
    for (const auto& [sec, body] : tree) {
        const auto it = sch.find(sec);
        if (it == sch.end()) {
            if (body.empty()) throw ConfigError("unknown key '" + sec + "' outside any section");
            throw ConfigError("unknown section [" + sec + "]");
        }
        for (const auto& [key, v] : body)
            if (!it->second.allows(key)) throw ConfigError("unknown key '" + sec + "." + key + "'");
    }
}

}  // namespace detail

inline Config parse_config(const pt::ptree& tree, std::uint64_t seed) {
    detail::check_keys(tree);
    Config c;
    c.seed = seed;
    detail::Reader rd(tree, c.echo);

    c.N = rd.integer("geometry", "N", 16);
    if (c.N < 4 || (c.N & (c.N - 1)) != 0) throw ConfigError("geometry.N must be a power of two >= 4");
    const double g11 = rd.num("geometry", "g11", 1.0), g22 = rd.num("geometry", "g22", 1.0);
    const cd g12{rd.num("geometry", "g12_re", 0.0), rd.num("geometry", "g12_im", 0.0)};
    c.g << g11, g12, std::conj(g12), g22;
    c.normalize_volume = rd.flag("geometry", "normalize_volume", false);
    if (!(g11 > 0.0 && g22 > 0.0 && g11 * g22 - std::norm(g12) > 0.0))
        throw ConfigError("geometry: g must be positive definite");

    c.rank = rd.integer("bundle", "rank", 1);
    if (c.rank < 1 || c.rank > 4) throw ConfigError("bundle.rank must be in 1..4");
    if (rd.raw("bundle", "beta") && rd.raw("bundle", "degree"))
        throw ConfigError("bundle: give either beta or degree, not both");
    if (rd.raw("bundle", "degree")) {
        const int deg = rd.integer("bundle", "degree", 0);
        c.beta = integral_beta(deg);
        c.echo["bundle"]["beta"] = c.beta;
    } else {
        c.beta = rd.num("bundle", "beta", 0.0);
    }
    c.modes = rd.modes("bundle", "mode", c.rank);
    c.random_amplitude = rd.num("bundle", "random_amplitude", 0.0);
    c.random_band = rd.integer("bundle", "random_band", 1);
    if (c.random_amplitude < 0.0) throw ConfigError("bundle.random_amplitude must be >= 0");
    if (c.random_band < 1 || 2 * c.random_band >= c.N) throw ConfigError("bundle.random_band must be in 1..N/2-1");

    const std::string k = rd.text("flow", "k", "100");
    c.flow.k = k == "inf" ? Polarization::infinite() : Polarization::finite(detail::to_double("flow.k", k));
    if (!c.flow.k.is_infinite() && !(c.flow.k.value() > 0.0)) throw ConfigError("flow.k must be positive or 'inf'");
    c.flow.dt = rd.num("flow", "dt", 1e-3);
    c.flow.t_end = rd.num("flow", "t_end", 1.0);
    const std::string integ = rd.text("flow", "integrator", "rk4");
    if (integ != "rk4" && integ != "imex") throw ConfigError("flow.integrator must be rk4 or imex");
    c.flow.integrator = integ == "rk4" ? Integrator::rk4 : Integrator::imex;
    c.flow.stop_tolerance = rd.num("flow", "stop_tolerance", 1e-8);
    c.flow.stability_constant = rd.num("flow", "stability_constant", 0.8);
    if (!(c.flow.dt > 0.0)) throw ConfigError("flow.dt must be positive");
    if (!(c.flow.t_end >= 0.0)) throw ConfigError("flow.t_end must be >= 0");

    c.csv = rd.text("output", "csv", "flow.csv");
    c.report = rd.text("output", "report", "report.json");
    c.snapshot_every = rd.integer("output", "snapshot_every", 0);
    if (c.snapshot_every < 0) throw ConfigError("output.snapshot_every must be >= 0");

    c.path_k = rd.num("path", "k", 20.0);
    c.path_steps = rd.integer("path", "steps", 256);
    if (c.path_steps < 4 || c.path_steps % 4 != 0) throw ConfigError("path.steps must be a positive multiple of 4");
    c.path_a = rd.modes("path", "a_mode", c.rank);
    c.path_b = rd.modes("path", "b_mode", c.rank);
    c.bow_scales = rd.list("path", "bow_scales", {0.0, 1.0});
    c.path_tolerance = rd.num("path", "tolerance", 1e-6);
    c.path_calibrate = rd.flag("path", "calibrate", false);

    c.moment_k = rd.num("moment", "k", 10.0);
    c.moment_dt = rd.num("moment", "dt", 1e-3);
    c.moment_tolerance = rd.num("moment", "tolerance", 1e-3);
    c.moment_refine = rd.flag("moment", "refine", true);

    c.identities_tolerance = rd.num("identities", "tolerance", 1e-8);

    c.k_list = rd.list("k_limit", "k_list", {25, 50, 100, 200});
    c.k_window = rd.num("k_limit", "window", 0.1);

    c.chi_k = rd.list("chi", "k_list", {1, 2, 3, 4});
    c.echo["seed"] = seed;
    return c;
}

inline Config load_config(const std::string& path, std::uint64_t seed) {
    pt::ptree tree;
    try {
        pt::read_ini(path, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(e.what());
    }
    return parse_config(tree, seed);
}

inline TorusGeometry make_geometry(const Config& c) {
    TorusGeometry g = TorusGeometry::standard(c.N);
    g.g = c.g;
    if (c.normalize_volume) g.normalize_volume();
    g.validate();
    return g;
}

/// H_0 = exp(sum of configured and random modes) with the background beta.
inline MetricField initial_metric(const SpectralGrid& grid, const Config& c) {
    std::vector<ModeSpec> modes = c.modes;
    if (c.random_amplitude > 0.0) {
        const auto rnd = random_modes(c.rank, c.random_amplitude, c.random_band, c.seed);
        modes.insert(modes.end(), rnd.begin(), rnd.end());
    }
    return metric_from_modes(grid, modes, c.rank, c.beta);
}

}  // namespace ahe::cli
