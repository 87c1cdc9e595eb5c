// diagnostics.hpp - numerical checks of the moment-map evolution law, the
// rank-one curvature identities on the flat base, the k -> infinity limit,
// and an empirical parabolicity scan.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "ahe/bundle.hpp"
#include "ahe/flow.hpp"
#include "ahe/moment_map.hpp"
#include "ahe/spectral_grid.hpp"

namespace ahe {

struct CheckReport {
    std::string name;
    double lhs_norm = 0.0;
    double rhs_norm = 0.0;
    double abs_err = 0.0;
    double rel_err = 0.0;
    std::vector<double> refinement_orders;
    double tolerance = 0.0;
    bool pass = false;
    std::string note;

    static constexpr double eps = 1e-14;

    /// Fills rel_err = abs_err / max(lhs, rhs, eps) and pass.
    void finish() {
        rel_err = abs_err / std::max({lhs_norm, rhs_norm, eps});
        pass = std::isfinite(rel_err) && rel_err <= tolerance;
    }
};

inline void to_json(nlohmann::json& j, const CheckReport& r) {
    j = {{"name", r.name},
         {"lhs_norm", r.lhs_norm},
         {"rhs_norm", r.rhs_norm},
         {"abs_err", r.abs_err},
         {"rel_err", r.rel_err},
         {"refinement_orders", r.refinement_orders},
         {"tolerance", r.tolerance},
         {"pass", r.pass}};
    if (!r.note.empty()) j["note"] = r.note;
}

inline CheckReport compare_fields(const SpectralGrid& grid, std::string name, const MatrixField& lhs,
                                  const MatrixField& rhs, double tol) {
    CheckReport r;
    r.name = std::move(name);
    r.lhs_norm = grid.l2_norm(lhs);
    r.rhs_norm = grid.l2_norm(rhs);
    r.abs_err = grid.l2_norm(lhs - rhs);
    r.tolerance = tol;
    r.finish();
    return r;
}

// ---------------------------------------------------------------------------
// Moment-map evolution.

/// Right side of the moment-map evolution on the flat base (only the
/// top Todd component survives):
///     sum_{l=0}^{1} C(1, l) k^l [ omega^l ((i/2pi) F)^{1-l} (i/2pi) dbar d_H(phi) ]_sym
/// with phi = H^{-1} dH/dt the flow velocity.
inline MatrixField moment_evolution_rhs(const SpectralGrid& grid, const MetricAnalysis& a, const MatrixField& phi,
                                        double k) {
    const auto& geom = grid.geometry();
    const Form11 dF = chern_form(dbar_d_h(grid, a.conn, phi));
    // l = 0: C(1,0) = 1, ((i/2pi) F)^1
    MatrixField out = wedge_top(chern_form(a.F), dF);
    // l = 1: C(1,1) = 1, omega^1 k^1
    out.axpy(k, wedge_top(omega_form(geom, a.F.rank()), dF));
    return out;
}

/// Centered difference of the moment density at states[i-1], states[i+1]
/// against the assembled right side at states[i] (uniform spacing dt).
inline CheckReport theorem2_check(const SpectralGrid& grid, const FlowState& prev, const FlowState& mid,
                                  const FlowState& next, double k, double tol = 1e-3) {
    const double dt = 0.5 * (next.t - prev.t);
    if (!(dt > 0.0)) throw std::invalid_argument("theorem2_check: snapshots must be time ordered");
    MatrixField lhs = moment(grid, next.m, k).M;
    lhs -= moment(grid, prev.m, k).M;
    lhs *= cd{1.0 / (2.0 * dt)};

    const MetricAnalysis a = analyze(grid, mid.m);
    MatrixField phi = residual(grid, a, Polarization::finite(k));
    phi *= cd{-1.0};
    const MatrixField rhs = moment_evolution_rhs(grid, a, phi, k);
    const double t = mid.m.rank() == 1 ? tol : std::max(tol, 1e-2);
    CheckReport r = compare_fields(grid, "moment_evolution", lhs, rhs, t);
    if (mid.m.rank() > 1) r.note = "rank > 1: matrix ordering under symmetrization is a convention";
    return r;
}

inline CheckReport theorem2_check(const SpectralGrid& grid, const Trajectory& traj, std::size_t i, double k,
                                  double tol = 1e-3) {
    if (i == 0 || i + 1 >= traj.states.size())
        throw std::invalid_argument("theorem2_check: missing snapshots around index " + std::to_string(i));
    return theorem2_check(grid, traj.states[i - 1], traj.states[i], traj.states[i + 1], k, tol);
}

/// The evolution right side is a polynomial of degree n - 1 = 1 in k for a
/// fixed velocity: checks the second difference over k, 2k, 3k vanishes.
inline CheckReport theorem2_k_structure(const SpectralGrid& grid, const MetricField& m, const MatrixField& phi,
                                        double k, double tol = 1e-12) {
    const MetricAnalysis a = analyze(grid, m);
    const MatrixField r1 = moment_evolution_rhs(grid, a, phi, k);
    const MatrixField r2 = moment_evolution_rhs(grid, a, phi, 2 * k);
    const MatrixField r3 = moment_evolution_rhs(grid, a, phi, 3 * k);
    MatrixField second = r3;
    second.axpy(-2.0, r2);
    second += r1;
    CheckReport r;
    r.name = "moment_evolution_k_polynomial";
    r.lhs_norm = grid.l2_norm(r2);
    r.rhs_norm = grid.l2_norm(r1);
    r.abs_err = grid.l2_norm(second);
    r.tolerance = tol;
    r.finish();
    return r;
}

// ---------------------------------------------------------------------------
// Rank-one identities on the flat base.

namespace detail {

/// Component of dbar d_H f on dzbar^l ^ dz^m for a scalar f (standard
/// tensor-calculus index order), via the bundle operator.
inline std::array<std::array<ScalarField, 2>, 2> ddbar_components(const SpectralGrid& grid, const Connection& conn,
                                                                   const ScalarField& f) {
    const Form11 X = dbar_d_h(grid, conn, f);
    std::array<std::array<ScalarField, 2>, 2> out;
    for (int l = 1; l <= 2; ++l)
        for (int m = 1; m <= 2; ++m) {
            out[l - 1][m - 1] = X(l, m);
            out[l - 1][m - 1] *= cd{-1.0};
        }
    return out;
}

inline ScalarField product(const ScalarField& a, const ScalarField& b) { return pointwise_product(a, b); }

}  // namespace detail

/// Checks, for a line bundle on the flat base with g = I,
///   (dbar d_H (F_{i kbar} F_{k ibar}))_{lbar m} F_{l mbar} = nabla_lbar nabla_m |F|^2 F_{l mbar}
///   (dbar d_H (Fhat^2))_{lbar m} F_{l mbar}
///       = Fhat Delta|F|^2 - 2 |nabla_i F_{m lbar}|^2 Fhat + 2 nabla_m Fhat nabla_lbar Fhat F_{l mbar}
/// with Delta = sum_i d_i d_ibar. Components are on dzbar ^ dz.
inline std::vector<CheckReport> section5_identity_check(const SpectralGrid& grid, const MetricField& m,
                                                        double tol = 1e-8) {
    if (m.rank() != 1) throw std::invalid_argument("curvature identities are stated for rank 1 only");
    if ((grid.geometry().g - Eigen::Matrix2cd::Identity()).norm() > 1e-14)
        throw std::invalid_argument("curvature identities are checked for g = I only");
    using detail::product;
    const MetricAnalysis a = analyze(grid, m);
    const std::size_t n = grid.points();

    // P[k][j] = coefficient of dzbar^k ^ dz^j, i.e. F_{j kbar}.
    std::array<std::array<ScalarField, 2>, 2> P;
    for (int k = 1; k <= 2; ++k)
        for (int j = 1; j <= 2; ++j) {
            P[k - 1][j - 1] = a.F(k, j);
            P[k - 1][j - 1] *= cd{-1.0};
        }
    // |F|^2 = F_{i kbar} F_{k ibar}; Fhat = F_{i ibar}
    ScalarField norm2(n, 1), fhat(n, 1);
    for (int i = 0; i < 2; ++i) {
        fhat += P[i][i];
        for (int k = 0; k < 2; ++k) norm2 += product(P[k][i], P[i][k]);
    }
    auto contract = [&](const std::array<std::array<ScalarField, 2>, 2>& Y) {
        ScalarField s(n, 1);
        for (int l = 0; l < 2; ++l)
            for (int mm = 0; mm < 2; ++mm) s += product(Y[l][mm], P[mm][l]);
        return s;
    };
    // Direct second derivatives, taken in the opposite order to dbar_d_h.
    auto hessian = [&](const ScalarField& f) {
        std::array<std::array<ScalarField, 2>, 2> Y;
        for (int l = 1; l <= 2; ++l) {
            const ScalarField fl = grid.deriv_anti(f, l);
            for (int mm = 1; mm <= 2; ++mm) Y[l - 1][mm - 1] = grid.deriv_holo(fl, mm);
        }
        return Y;
    };

    std::vector<CheckReport> out;

    {
        const ScalarField lhs = contract(detail::ddbar_components(grid, a.conn, norm2));
        const ScalarField rhs = contract(hessian(norm2));
        out.push_back(compare_fields(grid, "ddbar_F_ikbar_F_kibar", lhs, rhs, tol));
    }
    {
        const ScalarField lhs = contract(detail::ddbar_components(grid, a.conn, product(fhat, fhat)));
        ScalarField lap(n, 1);
        for (int i = 1; i <= 2; ++i) lap += grid.deriv_holo(grid.deriv_anti(norm2, i), i);
        ScalarField grad2(n, 1);
        for (int i = 1; i <= 2; ++i)
            for (int l = 0; l < 2; ++l)
                for (int mm = 0; mm < 2; ++mm) {
                    const ScalarField d = grid.deriv_holo(P[l][mm], i);
                    for (std::size_t p = 0; p < n; ++p) grad2.data()[p] += std::norm(d.data()[p]);
                }
        std::array<ScalarField, 2> dh, da;
        for (int i = 1; i <= 2; ++i) {
            dh[i - 1] = grid.deriv_holo(fhat, i);
            da[i - 1] = grid.deriv_anti(fhat, i);
        }
        ScalarField rhs = product(fhat, lap);
        rhs.axpy(-2.0, product(grad2, fhat));
        for (int l = 0; l < 2; ++l)
            for (int mm = 0; mm < 2; ++mm) rhs.axpy(2.0, product(product(dh[mm], da[l]), P[mm][l]));
        out.push_back(compare_fields(grid, "ddbar_Fhat_squared", lhs, rhs, tol));
    }
    return out;
}

// ---------------------------------------------------------------------------
// k -> infinity.

/// Least-squares slope of log y against log x.
inline double fit_exponent(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Fits |flow_rhs(m, k) - flow_rhs(m, inf)|_L2 ~ C k^p and checks p = -1.
inline CheckReport k_limit_check(const SpectralGrid& grid, const MetricField& m, const std::vector<double>& k_list,
                                 double window = 0.1) {
    if (k_list.size() < 2) throw std::invalid_argument("k_limit_check needs at least two k values");
    if (!std::is_sorted(k_list.begin(), k_list.end()) ||
        std::adjacent_find(k_list.begin(), k_list.end()) != k_list.end())
        throw std::invalid_argument("k_limit_check needs strictly increasing k values");
    const MetricAnalysis a = analyze(grid, m);
    const MatrixField limit = residual(grid, a, Polarization::infinite());
    std::vector<double> gaps;
    for (double k : k_list) gaps.push_back(grid.l2_norm(residual(grid, a, Polarization::finite(k)) - limit));

    CheckReport r;
    r.name = "k_limit";
    r.tolerance = window;
    const double gmax = *std::max_element(gaps.begin(), gaps.end());
    if (gmax < 1e-13) {
        r.note = "zero gap at every k";
        r.lhs_norm = r.rhs_norm = -1.0;
        r.abs_err = gmax;
        r.rel_err = 0.0;
        r.pass = true;
        return r;
    }
    const double p = fit_exponent(k_list, gaps);
    r.lhs_norm = p;
    r.rhs_norm = -1.0;
    r.abs_err = std::abs(p + 1.0);
    r.rel_err = r.abs_err;
    r.pass = r.abs_err <= window;
    for (std::size_t i = 1; i < gaps.size(); ++i)
        r.refinement_orders.push_back(std::log(gaps[i - 1] / gaps[i]) / std::log(k_list[i] / k_list[i - 1]));
    return r;
}

// ---------------------------------------------------------------------------
// Empirical parabolicity.

struct ParabolicityResult {
    double k = 0.0;
    bool stable = false;
    bool residual_decreasing = false;
    double final_residual = 0.0;
    std::string reason;
};

struct ParabolicityScan {
    std::vector<ParabolicityResult> runs;
    /// Smallest scanned k with a stable, residual-decreasing run from
    /// which every larger scanned k is also good; NaN if none.
    double smallest_stable_k = std::numeric_limits<double>::quiet_NaN();
};

inline ParabolicityScan parabolicity_scan(const SpectralGrid& grid, const MetricField& m0,
                                          std::vector<double> k_list, FlowConfig cfg) {
    std::sort(k_list.begin(), k_list.end());
    cfg.stop_tolerance = 0.0;
    cfg.keep_states = false;
    ParabolicityScan scan;
    for (double k : k_list) {
        cfg.k = Polarization::finite(k);
        ParabolicityResult r;
        r.k = k;
        const Trajectory traj = run(grid, m0, cfg);
        r.stable = !traj.failed;
        r.reason = traj.stop_reason;
        r.residual_decreasing = r.stable;
        for (std::size_t i = 1; i < traj.rows.size() && r.residual_decreasing; ++i)
            if (traj.rows[i].res_l2 > traj.rows[i - 1].res_l2 * (1.0 + 1e-12) + 1e-300)
                r.residual_decreasing = false;
        r.final_residual = traj.rows.empty() ? NAN : traj.rows.back().res_l2;
        scan.runs.push_back(r);
    }
    for (std::size_t i = scan.runs.size(); i-- > 0;) {
        if (!(scan.runs[i].stable && scan.runs[i].residual_decreasing)) break;
        scan.smallest_stable_k = scan.runs[i].k;
    }
    return scan;
}

}  // namespace ahe
