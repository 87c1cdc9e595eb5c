// flow.hpp - time integration of the almost Hermitian-Einstein flow
//     H^{-1} dH/dt = -rho(H, k),   h = H_0^{-1} H,  h(0) = I,
// with the D_k accumulators carried along as extra state.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ahe/bundle.hpp"
#include "ahe/functional.hpp"
#include "ahe/moment_map.hpp"
#include "ahe/spectral_grid.hpp"
#include "ahe/topology.hpp"

namespace ahe {

enum class Integrator { rk4, imex };

inline const char* to_string(Integrator i) { return i == Integrator::rk4 ? "rk4" : "imex"; }

/// Coefficient c_Delta in K(F) = -c_Delta Delta u for a line bundle H = e^u.
inline constexpr double c_delta = 1.0 / (2.0 * pi);

struct FlowConfig {
    Polarization k = Polarization::finite(100.0);
    double dt = 1e-3;
    double t_end = 1.0;
    Integrator integrator = Integrator::rk4;
    /// Early stop when the residual sup-norm falls below this (0 disables).
    double stop_tolerance = 1e-8;
    /// rk4 requires dt <= stability_constant / (N^2 |g^{-1}|).
    double stability_constant = 0.8;
    double positivity_margin = 1e-8;
    double blowup_threshold = 1e6;
    /// Keep every state in the trajectory (needed by moment-evolution checks).
    bool keep_states = false;

    void validate(const TorusGeometry& geom) const {
        if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
        if (!(t_end >= 0.0)) throw std::invalid_argument("t_end must be non-negative");
        if (integrator == Integrator::rk4) {
            const double bound = rk4_dt_bound(geom, stability_constant);
            if (dt > bound)
                throw FlowError("rk4 step " + std::to_string(dt) + " exceeds stability bound " + std::to_string(bound));
        }
    }

    static double rk4_dt_bound(const TorusGeometry& geom, double cs) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(geom.g_inv(), Eigen::EigenvaluesOnly);
        const double ginv = es.eigenvalues().maxCoeff();
        return cs / (static_cast<double>(geom.N) * geom.N * ginv);
    }
};

/// Running integrals of the D_k decomposition.
struct FlowAccumulators {
    Form11 r2;
    double t_term = 0.0;
    double hamiltonian = 0.0;
    double max_imag = 0.0;
};

struct FlowState {
    double t = 0.0;
    MetricField m;
    MatrixField H0;
    FlowAccumulators acc;
    std::size_t step = 0;
};

inline FlowState initial_state(MetricField m0) {
    FlowState s;
    s.H0 = m0.H;
    s.acc.r2 = Form11(m0.H.points(), 1);
    s.m = std::move(m0);
    return s;
}

/// Everything derived from the metric at one instant.
struct FlowEval {
    MetricAnalysis a;
    MatrixField rho;
};

inline FlowEval evaluate(const SpectralGrid& grid, const MetricField& m, Polarization k) {
    FlowEval e;
    e.a = analyze(grid, m);
    e.rho = residual(grid, e.a, k);
    return e;
}

/// Right side of the flow as an endomorphism: H^{-1} dH/dt = -rho.
inline MatrixField flow_rhs(const SpectralGrid& grid, const MetricField& m, Polarization k) {
    MatrixField v = residual(grid, m, k);
    v *= cd{-1.0};
    return v;
}

/// Per-step record; also the CSV row.
struct Diagnostics {
    double t = 0.0;
    double dk_hamiltonian = 0.0;
    double dk_secondary = 0.0;
    double res_l2 = 0.0;
    double res_linf = 0.0;
    double f_l2 = 0.0;
    double f_linf = 0.0;
    double chi_check = 0.0;
    double pos_margin = 0.0;
};

/// D_k of the current state by the secondary route (kappa applied).
inline double dk_secondary(const SpectralGrid& grid, const FlowState& s, double mu, double kappa = 1.0) {
    const cd v = r2_term(grid, s.acc.r2) + r1_term(grid, mu, s.H0, s.m.H) + s.acc.t_term;
    return kappa * v.real();
}

inline Diagnostics diagnose(const SpectralGrid& grid, const FlowState& s, const FlowEval& e, double chi_ref,
                            Polarization k, double kappa = 1.0) {
    Diagnostics d;
    d.t = s.t;
    d.dk_hamiltonian = s.acc.hamiltonian;
    d.dk_secondary = dk_secondary(grid, s, e.a.numbers.slope, kappa);
    d.res_l2 = grid.l2_norm(e.rho);
    d.res_linf = max_frobenius(e.rho);
    double f2 = 0.0, finf = 0.0;
    for (const auto& c : e.a.F.c) {
        const double l2 = grid.l2_norm(c);
        f2 += l2 * l2;
        finf = std::max(finf, max_frobenius(c));
    }
    d.f_l2 = std::sqrt(f2);
    d.f_linf = finf;
    const double kref = k.is_infinite() ? 1.0 : k.value();
    d.chi_check = std::abs(e.a.numbers.chi(kref) - chi_ref);
    d.pos_margin = positivity(s.m.H).min_eigenvalue;
    return d;
}

namespace detail {

struct FlowDerivative {
    MatrixField Hdot;
    FunctionalRates rates;
};

inline FlowDerivative flow_derivative(const SpectralGrid& grid, const MetricField& m, const FlowEval& e,
                                      Polarization k) {
    FlowDerivative d;
    d.Hdot = pointwise_product(m.H, e.rho);
    d.Hdot *= cd{-1.0};
    MatrixField phi = e.rho;
    phi *= cd{-1.0};
    d.rates = functional_rates(grid, e.a, e.rho, phi, k);
    return d;
}

inline void check_health(const FlowEval& e, const MetricField& m, const FlowConfig& cfg) {
    if (!all_finite(m.H) || !all_finite(e.rho)) throw FlowError("non-finite values in flow state");
    const double r = max_frobenius(e.rho);
    if (r > cfg.blowup_threshold)
        throw FlowError("residual blow-up (" + std::to_string(r) + "); step size likely unstable");
}

inline MetricField shifted(const MetricField& m, double s, const MatrixField& Hdot) {
    MetricField out = m;
    out.H.axpy(s, Hdot);
    return out;
}

}  // namespace detail

/// One step from `s`; `e` must be evaluate(grid, s.m, k).
inline FlowState step(const SpectralGrid& grid, const FlowState& s, const FlowEval& e, double dt, Polarization k,
                      Integrator integrator, const FlowConfig& cfg = {}) {
    using detail::flow_derivative;
    FlowState next = s;
    FunctionalRates rate_sum = FunctionalRates::zero(grid.points());

    if (integrator == Integrator::rk4) {
        const auto d1 = flow_derivative(grid, s.m, e, k);
        const MetricField m2 = detail::shifted(s.m, 0.5 * dt, d1.Hdot);
        const auto d2 = flow_derivative(grid, m2, evaluate(grid, m2, k), k);
        const MetricField m3 = detail::shifted(s.m, 0.5 * dt, d2.Hdot);
        const auto d3 = flow_derivative(grid, m3, evaluate(grid, m3, k), k);
        const MetricField m4 = detail::shifted(s.m, dt, d3.Hdot);
        const auto d4 = flow_derivative(grid, m4, evaluate(grid, m4, k), k);
        next.m.H.axpy(dt / 6.0, d1.Hdot);
        next.m.H.axpy(dt / 3.0, d2.Hdot);
        next.m.H.axpy(dt / 3.0, d3.Hdot);
        next.m.H.axpy(dt / 6.0, d4.Hdot);
        rate_sum.axpy(dt / 6.0, d1.rates).axpy(dt / 3.0, d2.rates).axpy(dt / 3.0, d3.rates).axpy(dt / 6.0, d4.rates);
    } else {
        // ARS(2,2,2): c_Delta Delta H implicit, the remainder explicit.
        const double gamma = 1.0 - 1.0 / std::sqrt(2.0);
        const double delta = 1.0 - 1.0 / (2.0 * gamma);
        const Symbol lap = grid.laplacian_symbol();
        auto implicit_op = [&](const MatrixField& H) { return grid.apply_to(H, c_delta * lap); };
        auto solve = [&](const MatrixField& rhs, double a) {
            Symbol sys = (-a * dt * c_delta) * lap;
            sys.constant = 1.0;
            return grid.apply(grid.forward(rhs), sys, true);
        };
        auto explicit_part = [&](const detail::FlowDerivative& d, const MatrixField& H) {
            MatrixField f = d.Hdot;
            f -= implicit_op(H);
            return f;
        };
        const auto d1 = flow_derivative(grid, s.m, e, k);
        const MatrixField fe1 = explicit_part(d1, s.m.H);

        MatrixField rhs2 = s.m.H;
        rhs2.axpy(dt * gamma, fe1);
        MetricField m2{solve(rhs2, gamma), s.m.beta};
        hermitian_project(m2.H);
        const MatrixField fi2 = implicit_op(m2.H);
        const auto d2 = flow_derivative(grid, m2, evaluate(grid, m2, k), k);
        const MatrixField fe2 = explicit_part(d2, m2.H);

        MatrixField rhs3 = s.m.H;
        rhs3.axpy(dt * delta, fe1);
        rhs3.axpy(dt * (1.0 - delta), fe2);
        rhs3.axpy(dt * (1.0 - gamma), fi2);
        next.m.H = solve(rhs3, gamma);
        rate_sum.axpy(dt * delta, d1.rates).axpy(dt * (1.0 - delta), d2.rates);
    }
    hermitian_project(next.m.H);
    if (!all_finite(next.m.H)) throw FlowError("non-finite values after step");
    const auto pos = positivity(next.m.H);
    if (!(pos.min_eigenvalue > cfg.positivity_margin)) throw PositivityError(pos.point, pos.min_eigenvalue);

    next.acc.r2 += rate_sum.r2;
    next.acc.t_term += rate_sum.t_term;
    next.acc.hamiltonian += rate_sum.hamiltonian;
    next.acc.max_imag = std::max(next.acc.max_imag, rate_sum.max_imag);
    next.t = s.t + dt;
    next.step = s.step + 1;
    return next;
}

inline FlowState step(const SpectralGrid& grid, const FlowState& s, double dt, Polarization k,
                      Integrator integrator = Integrator::rk4) {
    return step(grid, s, evaluate(grid, s.m, k), dt, k, integrator);
}

struct Trajectory {
    std::vector<Diagnostics> rows;
    std::vector<FlowState> states;  // filled when keep_states
    FlowState final_state;
    bool early_stop = false;
    std::string stop_reason;  // "t_end", "converged", or the error text
    bool failed = false;
};

/// Called after each diagnostics row with the state it describes.
using FlowObserver = std::function<void(const FlowState&, const Diagnostics&)>;

/// Integrates from m0 until t_end, convergence, or failure. Failures
/// (positivity loss, blow-up) end the run with failed = true.
inline Trajectory run(const SpectralGrid& grid, MetricField m0, const FlowConfig& cfg,
                      const FlowObserver& observer = {}) {
    cfg.validate(grid.geometry());
    Trajectory traj;
    FlowState s = initial_state(std::move(m0));
    const double kref = cfg.k.is_infinite() ? 1.0 : cfg.k.value();
    const auto n_steps = static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
    double chi_ref = 0.0;
    for (std::size_t i = 0;; ++i) {
        FlowEval e;
        try {
            e = evaluate(grid, s.m, cfg.k);
            detail::check_health(e, s.m, cfg);
        } catch (const std::exception& ex) {
            traj.failed = true;
            traj.early_stop = true;
            traj.stop_reason = ex.what();
            break;
        }
        if (i == 0) chi_ref = e.a.numbers.chi(kref);
        const Diagnostics d = diagnose(grid, s, e, chi_ref, cfg.k);
        traj.rows.push_back(d);
        if (observer) observer(s, d);
        if (cfg.keep_states) traj.states.push_back(s);
        if (i >= n_steps) {
            traj.stop_reason = "t_end";
            break;
        }
        if (cfg.stop_tolerance > 0.0 && d.res_linf < cfg.stop_tolerance) {
            traj.early_stop = true;
            traj.stop_reason = "converged";
            break;
        }
        const double dt = (i + 1 == n_steps) ? cfg.t_end - s.t : cfg.dt;
        try {
            s = step(grid, s, e, dt, cfg.k, cfg.integrator, cfg);
        } catch (const std::exception& ex) {
            traj.failed = true;
            traj.early_stop = true;
            traj.stop_reason = ex.what();
            break;
        }
    }
    traj.final_state = std::move(s);
    return traj;
}

}  // namespace ahe
