// ahe - command line driver: flow runs, topology, and verification checks.
//
// Exit codes: 0 success / all checks pass, 1 check or runtime failure,
// 2 configuration or usage error.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ahe/ahe.hpp"
#include "cli_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ahe;

namespace {

constexpr const char* version_string = "1.0.0";
constexpr const char* csv_schema = "ahe-flow-csv/1";

struct Options {
    std::string config;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string output_dir = ".";
};

class CheckFailed : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

fs::path output_path(const Options& opt, const std::string& name) {
    const fs::path p(name);
    return p.is_absolute() ? p : fs::path(opt.output_dir) / p;
}

void write_json(const fs::path& path, const json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << j.dump(2) << '\n';
}

json base_report(const std::string& command, const cli::Config& cfg, const Options& opt) {
    return {{"command", command}, {"version", version_string}, {"config", cfg.echo}, {"threads", opt.threads}};
}

/// Prints the report and stores it under [output] report.
void emit(const json& report, const cli::Config& cfg, const Options& opt) {
    std::cout << report.dump(2) << '\n';
    if (!cfg.report.empty()) write_json(output_path(opt, cfg.report), report);
}

// ---------------------------------------------------------------------------

int cmd_run(const cli::Config& cfg, const Options& opt) {
    SpectralGrid grid(cli::make_geometry(cfg));
    const MetricField m0 = cli::initial_metric(grid, cfg);
    const fs::path csv_path = output_path(opt, cfg.csv);
    if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
    csv << "# schema: " << csv_schema << '\n';
    csv << "# generated: " << utc_timestamp() << '\n';
    csv << "t,Dk_hamiltonian,Dk_secondary,res_L2,res_Linf,F_L2,F_Linf,chi_check,pos_margin\n";

    const fs::path snap_dir = output_path(opt, "snapshots");
    auto observer = [&](const FlowState& s, const Diagnostics& d) {
        for (double v : {d.t, d.dk_hamiltonian, d.dk_secondary, d.res_l2, d.res_linf, d.f_l2, d.f_linf, d.chi_check})
            csv << fmt_double(v) << ',';
        csv << fmt_double(d.pos_margin) << '\n';
        if (cfg.snapshot_every > 0 && s.step % static_cast<std::size_t>(cfg.snapshot_every) == 0) {
            fs::create_directories(snap_dir);
            char name[64];
            std::snprintf(name, sizeof name, "H_%06zu.ahef", s.step);
            write_snapshot_file((snap_dir / name).string(), s.m.H, cfg.N, "H", s.t, s.m.beta);
        }
    };
    const Trajectory traj = run(grid, m0, cfg.flow, observer);
    if (traj.early_stop) csv << "# early_stop: " << traj.stop_reason << " at t=" << fmt_double(traj.rows.back().t) << '\n';
    csv.close();

    json report = base_report("run", cfg, opt);
    const auto& last = traj.rows.back();
    report["csv"] = csv_path.string();
    report["rows"] = traj.rows.size();
    report["stop_reason"] = traj.stop_reason;
    report["early_stop"] = traj.early_stop;
    report["failed"] = traj.failed;
    report["final"] = {{"t", last.t},           {"Dk_hamiltonian", last.dk_hamiltonian},
                       {"Dk_secondary", last.dk_secondary}, {"res_L2", last.res_l2},
                       {"res_Linf", last.res_linf}, {"pos_margin", last.pos_margin}};
    emit(report, cfg, opt);
    if (traj.failed) {
        std::cerr << "runtime error: flow failed: " << traj.stop_reason << '\n';
        return 1;
    }
    return 0;
}

int cmd_chi(const cli::Config& cfg, const Options& opt) {
    SpectralGrid grid(cli::make_geometry(cfg));
    const MetricField m = cli::initial_metric(grid, cfg);
    const CharNumbers cn = char_numbers(grid, m);
    json report = base_report("chi", cfg, opt);
    report["coefficients"] = {{"c0", cn.c0}, {"c1", cn.c1}, {"c2", cn.c2}};
    report["degree"] = cn.degree;
    report["slope"] = cn.slope;
    json values = json::array();
    for (double k : cfg.chi_k) values.push_back({{"k", k}, {"chi", cn.chi(k)}});
    report["chi"] = values;
    emit(report, cfg, opt);
    return 0;
}

int cmd_check_path(const cli::Config& cfg, const Options& opt) {
    if (cfg.path_a.empty()) throw ConfigError("check-path needs at least one [path] a_mode entry");
    if (cfg.bow_scales.size() < 2) throw ConfigError("path.bow_scales needs at least two paths");
    SpectralGrid grid(cli::make_geometry(cfg));
    const MetricField m0 = cli::initial_metric(grid, cfg);
    const MatrixField A = mode_sum(grid, cfg.path_a, cfg.rank);
    const MatrixField B = mode_sum(grid, cfg.path_b, cfg.rank);
    std::vector<ExponentialPath> paths;
    for (double s : cfg.bow_scales) {
        MatrixField Bs = B;
        Bs *= cd{s};
        paths.emplace_back(m0.H, A, Bs, cfg.beta, "bow=" + fmt_double(s));
    }
    const auto k = Polarization::finite(cfg.path_k);
    double kappa = 1.0;
    if (cfg.path_calibrate) kappa = calibrate_kappa(grid, paths.front(), k, cfg.path_steps);
    const auto rep = path_independence_check(grid, paths, k, cfg.path_steps, kappa);
    const bool pass = rep.max_delta < cfg.path_tolerance;

    json report = base_report("check-path", cfg, opt);
    report["paths"] = rep.paths;
    report["steps"] = rep.steps;
    report["kappa"] = rep.kappa;
    report["Dk_values"] = {{"hamiltonian", rep.dk_hamiltonian}, {"secondary", rep.dk_secondary}};
    report["deltas"] = {{"hamiltonian", rep.delta_hamiltonian}, {"secondary", rep.delta_secondary}};
    report["refinement_orders"] = {{"hamiltonian", rep.order_hamiltonian}, {"secondary", rep.order_secondary}};
    report["max_delta"] = rep.max_delta;
    report["tolerance"] = cfg.path_tolerance;
    report["pass"] = pass;
    emit(report, cfg, opt);
    if (!pass) throw CheckFailed("path independence delta " + fmt_double(rep.max_delta) + " above tolerance");
    return 0;
}

CheckReport moment_check_at(const SpectralGrid& grid, const MetricField& m0, const cli::Config& cfg, double dt) {
    FlowConfig fc = cfg.flow;
    fc.k = Polarization::finite(cfg.moment_k);
    fc.dt = dt;
    fc.t_end = 2 * dt;
    fc.stop_tolerance = 0.0;
    fc.keep_states = true;
    const Trajectory traj = run(grid, m0, fc);
    if (traj.failed) throw std::runtime_error("flow failed: " + traj.stop_reason);
    return theorem2_check(grid, traj, 1, cfg.moment_k, cfg.moment_tolerance);
}

int cmd_check_moment(const cli::Config& cfg, const Options& opt) {
    SpectralGrid grid(cli::make_geometry(cfg));
    const MetricField m0 = cli::initial_metric(grid, cfg);
    CheckReport r = moment_check_at(grid, m0, cfg, cfg.moment_dt);
    if (cfg.moment_refine) {
        const CheckReport half = moment_check_at(grid, m0, cfg, 0.5 * cfg.moment_dt);
        if (r.rel_err > 0.0 && half.rel_err > 0.0) r.refinement_orders.push_back(std::log2(r.rel_err / half.rel_err));
    }
    json report = base_report("check-moment", cfg, opt);
    report["checks"] = json::array({r});
    report["pass"] = r.pass;
    emit(report, cfg, opt);
    if (!r.pass) throw CheckFailed("moment evolution check failed, rel_err " + fmt_double(r.rel_err));
    return 0;
}

int cmd_check_identities(const cli::Config& cfg, const Options& opt) {
    if (cfg.rank != 1) throw ConfigError("check-identities requires bundle.rank = 1");
    SpectralGrid grid(cli::make_geometry(cfg));
    const auto reps = section5_identity_check(grid, cli::initial_metric(grid, cfg), cfg.identities_tolerance);
    bool pass = true;
    for (const auto& r : reps) pass = pass && r.pass;
    json report = base_report("check-identities", cfg, opt);
    report["checks"] = reps;
    report["pass"] = pass;
    emit(report, cfg, opt);
    if (!pass) throw CheckFailed("curvature identity check failed");
    return 0;
}

int cmd_check_k_limit(const cli::Config& cfg, const Options& opt) {
    SpectralGrid grid(cli::make_geometry(cfg));
    const CheckReport r = k_limit_check(grid, cli::initial_metric(grid, cfg), cfg.k_list, cfg.k_window);
    json report = base_report("check-k-limit", cfg, opt);
    report["checks"] = json::array({r});
    report["fitted_exponent"] = r.lhs_norm;
    report["pass"] = r.pass;
    emit(report, cfg, opt);
    if (!r.pass) throw CheckFailed("k-limit exponent " + fmt_double(r.lhs_norm) + " outside window");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral simulator for the almost Hermitian-Einstein flow on flat complex 2-tori"};
    app.require_subcommand(1);
    app.fallthrough();
    Options opt;
    app.add_option("--config", opt.config, "INI experiment configuration")->envname("AHE_CONFIG");
    app.add_option("--seed", opt.seed, "seed for random initial data")->envname("AHE_SEED");
    app.add_option("--threads", opt.threads, "worker threads (compute is single threaded)")
        ->envname("AHE_THREADS")
        ->check(CLI::PositiveNumber);
    app.add_option("--output-dir", opt.output_dir, "directory for CSV, snapshots and reports")
        ->envname("AHE_OUTPUT_DIR");

    using Handler = int (*)(const cli::Config&, const Options&);
    const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
        {"run", "integrate the flow and write the diagnostics CSV", cmd_run},
        {"chi", "characteristic numbers and Euler characteristic of the initial metric", cmd_chi},
        {"check-path", "path independence of the potential", cmd_check_path},
        {"check-moment", "moment-map evolution along the flow", cmd_check_moment},
        {"check-identities", "rank-one curvature identities on the flat base", cmd_check_identities},
        {"check-k-limit", "1/k approach of the flow to its large-k limit", cmd_check_k_limit},
    };
    std::vector<std::pair<CLI::App*, Handler>> subs;
    for (const auto& [name, help, fn] : commands) subs.emplace_back(app.add_subcommand(name, help), fn);
    CLI::App* version = app.add_subcommand("version", "print version information");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (version->parsed()) {
        std::cout << "ahe " << version_string << " (csv schema " << csv_schema << ")\n";
        return 0;
    }

    cli::Config cfg;
    try {
        if (opt.config.empty()) throw ConfigError("--config is required for this subcommand");
        if (!fs::exists(opt.config)) throw ConfigError("config file not found: " + opt.config);
        cfg = cli::load_config(opt.config, opt.seed);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }

    for (const auto& [sub, fn] : subs) {
        if (!sub->parsed()) continue;
        try {
            return fn(cfg, opt);
        } catch (const ConfigError& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return 2;
        } catch (const CheckFailed& e) {
            std::cerr << "check failed: " << e.what() << '\n';
            return 1;
        } catch (const std::exception& e) {
            std::cerr << "runtime error: " << e.what() << '\n';
            return 1;
        }
    }
    return 2;
}
