// functional.hpp - the potential D_k along a path of metrics, by two routes.
//
// Hamiltonian route: D_k = int_0^1 int_X tr(rho phi) omega^2 dt with
// phi = H^{-1} dH/dt.
//
// Secondary route: D_k = kappa [ 2 int_X R2 ^ omega - mu int_X R1 omega^2
//                                + int_0^1 int_X tr(S phi) omega^2 dt ],
// where R1 = log det(H_0^{-1} H) at the endpoint, R2 = int tr((i/2pi) F phi) dt
// is accumulated as a (1,1)-form, and the last integrand is built from the
// operational T-sum (the top-degree combination k^{-1}(c - M)
// + (i/2pi) F ^ omega - mu omega^2/2, which equals -S omega^2/2).
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ahe/bundle.hpp"
#include "ahe/moment_map.hpp"
#include "ahe/spectral_grid.hpp"

namespace ahe {

enum class Route { secondary, hamiltonian };

inline const char* to_string(Route r) { return r == Route::secondary ? "secondary" : "hamiltonian"; }

struct FunctionalValue {
    double dk = 0.0;
    double term_r2 = 0.0;
    double term_r1 = 0.0;
    double term_t = 0.0;
    /// Largest imaginary part met while integrating (should be round-off).
    double max_imag = 0.0;
    Route route = Route::hamiltonian;
};

/// Time derivatives of the D_k accumulators at one metric along a path.
struct FunctionalRates {
    Form11 r2;           // tr((i/2pi) F phi), omega basis, rank 1
    double t_term = 0.0; // int tr(S phi) omega^2
    double hamiltonian = 0.0;
    double max_imag = 0.0;

    FunctionalRates& axpy(double s, const FunctionalRates& o) {
        r2.axpy(s, o.r2);
        t_term += s * o.t_term;
        hamiltonian += s * o.hamiltonian;
        max_imag = std::max(max_imag, o.max_imag);
        return *this;
    }

    static FunctionalRates zero(std::size_t points) {
        FunctionalRates z;
        z.r2 = Form11(points, 1);
        return z;
    }
};

/// Operational T-sum c^omega - mu det g I + (chi(k) det g / (r vol) I - M) / k
/// as a top coefficient; zero in the k = infinity limit. Expanding M, the
/// c^omega and k^2 terms cancel and only the mean-free part of c^c remains:
///     T = -(c^c - 2 c0 det g / (r vol) I) / 2k.
inline MatrixField t_sum(const SpectralGrid& grid, const MetricAnalysis& a, Polarization k) {
    const auto& geom = grid.geometry();
    const int r = a.F.rank();
    if (k.is_infinite()) return MatrixField(a.F.points(), r);
    MatrixField T = a.c_c;
    T.add_identity(-2.0 * a.numbers.c0 * geom.det_g() / (r * geom.volume()));
    T *= cd{-0.5 / k.value()};
    return T;
}

inline FunctionalRates functional_rates(const SpectralGrid& grid, const MetricAnalysis& a, const MatrixField& rho,
                                        const MatrixField& phi, Polarization k) {
    const double w = 2.0 * grid.geometry().det_g();  // omega^2 = 2 det g dV
    FunctionalRates out;
    out.r2 = Form11(phi.points(), 1);
    for (int kk = 1; kk <= 2; ++kk)
        for (int j = 1; j <= 2; ++j) out.r2(kk, j) = trace_product(a.c(kk, j), phi);

    const cd ham = grid.integrate_top(trace_product(rho, phi)) * w;
    const cd tt = k.is_infinite() ? cd{0.0} : -2.0 * grid.integrate_top(trace_product(t_sum(grid, a, k), phi));
    out.hamiltonian = ham.real();
    out.t_term = tt.real();
    out.max_imag = std::max(std::abs(ham.imag()), std::abs(tt.imag()));
    return out;
}

/// 2 int_X R2 ^ omega for an accumulated rank-1 form R2.
inline cd r2_term(const SpectralGrid& grid, const Form11& r2) {
    return 2.0 * grid.integrate_top(wedge_omega(r2, grid.geometry()));
}

/// -mu int_X log det(H0^{-1} H) omega^2.
inline cd r1_term(const SpectralGrid& grid, double mu, const MatrixField& H0, const MatrixField& H) {
    ScalarField ld = log_det(H);
    ld -= log_det(H0);
    return -mu * 2.0 * grid.geometry().det_g() * grid.integrate_top(ld);
}

/// H(t) = L exp(t A + t (1 - t) B) L^dagger with H_0 = L L^dagger; B = 0 is
/// the straight exponential path. A reversed path runs from H(1) to H_0.
class ExponentialPath {
public:
    ExponentialPath(const MatrixField& H0, MatrixField A, MatrixField B, double beta, std::string name = "path",
                    bool reversed = false)
        : L_(cholesky_factor(H0)), A_(std::move(A)), B_(std::move(B)), beta_(beta), name_(std::move(name)),
          reversed_(reversed) {
            L_.check_same(A_);
            A_.check_same(B_);
            hermitian_project(A_);
            hermitian_project(B_);
    }

    const std::string& name() const noexcept { return name_; }
    double beta() const noexcept { return beta_; }
    int rank() const noexcept { return A_.rank(); }

    ExponentialPath reversed() const {
        ExponentialPath p = *this;
        p.reversed_ = !reversed_;
        p.name_ = name_ + "-reversed";
        return p;
    }

    /// Metric and phi = H^{-1} dH/dt at path time t in [0, 1].
    ExpWithVelocity at(double t) const {
        const double s = reversed_ ? 1.0 - t : t;
        MatrixField X = A_;
        X *= cd{s};
        X.axpy(s * (1.0 - s), B_);
        MatrixField Xdot = A_;
        Xdot.axpy(1.0 - 2.0 * s, B_);
        auto ev = hermitian_exp(L_, X, Xdot);
        if (reversed_) ev.phi *= cd{-1.0};
        return ev;
    }

    MatrixField start() const { return at(0.0).H; }
    MatrixField end() const { return at(1.0).H; }

private:
    MatrixField L_, A_, B_;
    double beta_;
    std::string name_;
    bool reversed_;
};

/// Composite Simpson weights on [0, 1] with `steps` (even, >= 2) intervals.
inline std::vector<double> simpson_weights(int steps) {
    if (steps < 2) throw std::invalid_argument("quadrature step count must be >= 2, got " + std::to_string(steps));
    if (steps % 2 != 0) throw std::invalid_argument("Simpson quadrature needs an even step count");
    const double h = 1.0 / steps;
    std::vector<double> w(steps + 1);
    for (int i = 0; i <= steps; ++i) w[i] = (i == 0 || i == steps) ? h / 3.0 : (i % 2 ? 4.0 * h / 3.0 : 2.0 * h / 3.0);
    return w;
}

struct PathFunctional {
    FunctionalValue hamiltonian;
    FunctionalValue secondary;  // kappa = 1
};

namespace detail {

inline PathFunctional finish_path(const SpectralGrid& grid, const FunctionalRates& acc, double mu,
                                  const MatrixField& H_first, const MatrixField& H_last) {
    PathFunctional out;
    out.hamiltonian.route = Route::hamiltonian;
    out.hamiltonian.dk = acc.hamiltonian;
    out.hamiltonian.max_imag = acc.max_imag;

    const cd r2 = r2_term(grid, acc.r2);
    const cd r1 = r1_term(grid, mu, H_first, H_last);
    auto& s = out.secondary;
    s.route = Route::secondary;
    s.term_r2 = r2.real();
    s.term_r1 = r1.real();
    s.term_t = acc.t_term;
    s.dk = s.term_r2 + s.term_r1 + s.term_t;
    s.max_imag = std::max({acc.max_imag, std::abs(r2.imag()), std::abs(r1.imag())});
    return out;
}

}  // namespace detail

/// Both routes at `steps` and, reusing the even nodes, at steps / 2.
inline std::pair<PathFunctional, PathFunctional> evaluate_path_pair(const SpectralGrid& grid,
                                                                    const ExponentialPath& path, Polarization k,
                                                                    int steps) {
    if (steps % 4 != 0) throw std::invalid_argument("steps must be divisible by 4 for the refinement pair");
    const auto wf = simpson_weights(steps);
    const auto wc = simpson_weights(steps / 2);
    FunctionalRates fine = FunctionalRates::zero(grid.points());
    FunctionalRates coarse = FunctionalRates::zero(grid.points());
    double mu = 0.0;
    MatrixField H_first, H_last;
    for (int i = 0; i <= steps; ++i) {
        const auto ev = path.at(static_cast<double>(i) / steps);
        const MetricAnalysis a = analyze(grid, MetricField{ev.H, path.beta()});
        const FunctionalRates rates = functional_rates(grid, a, residual(grid, a, k), ev.phi, k);
        fine.axpy(wf[i], rates);
        if (i % 2 == 0) coarse.axpy(wc[i / 2], rates);
        mu = a.numbers.slope;
        if (i == 0) H_first = ev.H;
        if (i == steps) H_last = ev.H;
    }
    return {detail::finish_path(grid, fine, mu, H_first, H_last), detail::finish_path(grid, coarse, mu, H_first, H_last)};
}

/// Evaluates both routes in one pass over the Simpson nodes.
inline PathFunctional evaluate_path(const SpectralGrid& grid, const ExponentialPath& path, Polarization k,
                                    int steps) {
    const auto w = simpson_weights(steps);
    FunctionalRates acc = FunctionalRates::zero(grid.points());
    double mu = 0.0;
    MatrixField H_first, H_last;
    for (int i = 0; i <= steps; ++i) {
        const auto ev = path.at(static_cast<double>(i) / steps);
        const MetricAnalysis a = analyze(grid, MetricField{ev.H, path.beta()});
        acc.axpy(w[i], functional_rates(grid, a, residual(grid, a, k), ev.phi, k));
        mu = a.numbers.slope;
        if (i == 0) H_first = ev.H;
        if (i == steps) H_last = ev.H;
    }
    return detail::finish_path(grid, acc, mu, H_first, H_last);
}

inline FunctionalValue dk_hamiltonian(const SpectralGrid& grid, const ExponentialPath& path, Polarization k,
                                      int steps) {
    return evaluate_path(grid, path, k, steps).hamiltonian;
}

inline FunctionalValue dk_secondary(const SpectralGrid& grid, const ExponentialPath& path, Polarization k, int steps,
                                    double kappa = 1.0) {
    FunctionalValue v = evaluate_path(grid, path, k, steps).secondary;
    v.dk *= kappa;
    v.term_r1 *= kappa;
    v.term_r2 *= kappa;
    v.term_t *= kappa;
    return v;
}

/// kappa fixing the secondary route's overall normalization against the
/// Hamiltonian route on one calibration path.
inline double calibrate_kappa(const SpectralGrid& grid, const ExponentialPath& path, Polarization k, int steps) {
    const auto pf = evaluate_path(grid, path, k, steps);
    if (std::abs(pf.secondary.dk) < 1e-300) throw std::runtime_error("calibration path has zero secondary value");
    return pf.hamiltonian.dk / pf.secondary.dk;
}

struct PathIndependenceReport {
    std::vector<std::string> paths;
    int steps = 0;
    std::vector<double> dk_hamiltonian;       // at `steps`
    std::vector<double> dk_secondary;         // at `steps`, times kappa
    std::vector<double> dk_hamiltonian_half;  // at steps / 2
    std::vector<double> dk_secondary_half;
    /// |D_i - D_0| / (1 + |D_0|) for i >= 1, both routes.
    std::vector<double> delta_hamiltonian;
    std::vector<double> delta_secondary;
    /// log2 of the delta ratio between steps/2 and steps.
    std::vector<double> order_hamiltonian;
    std::vector<double> order_secondary;
    double max_delta = 0.0;
    double kappa = 1.0;
};

/// Compares D_k over paths sharing both endpoints, at `steps` and steps/2.
inline PathIndependenceReport path_independence_check(const SpectralGrid& grid,
                                                      const std::vector<ExponentialPath>& paths, Polarization k,
                                                      int steps, double kappa = 1.0) {
    if (paths.size() < 2) throw std::invalid_argument("path_independence_check needs at least two paths");
    if (steps % 4 != 0) throw std::invalid_argument("steps must be divisible by 4 for the refinement pair");
    const MatrixField H0 = paths.front().start();
    const MatrixField H1 = paths.front().end();
    for (const auto& p : paths) {
        const double e0 = max_abs(p.start() - H0), e1 = max_abs(p.end() - H1);
        if (e0 > 1e-12 || e1 > 1e-12)
            throw std::invalid_argument("path '" + p.name() + "' endpoint mismatch " + std::to_string(std::max(e0, e1)));
    }
    PathIndependenceReport rep;
    rep.steps = steps;
    rep.kappa = kappa;
    for (const auto& p : paths) {
        rep.paths.push_back(p.name());
        const auto [fine, coarse] = evaluate_path_pair(grid, p, k, steps);
        rep.dk_hamiltonian.push_back(fine.hamiltonian.dk);
        rep.dk_secondary.push_back(kappa * fine.secondary.dk);
        rep.dk_hamiltonian_half.push_back(coarse.hamiltonian.dk);
        rep.dk_secondary_half.push_back(kappa * coarse.secondary.dk);
    }
    auto rel = [](double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); };
    for (std::size_t i = 1; i < paths.size(); ++i) {
        const double dh = rel(rep.dk_hamiltonian[i], rep.dk_hamiltonian[0]);
        const double ds = rel(rep.dk_secondary[i], rep.dk_secondary[0]);
        const double dh2 = rel(rep.dk_hamiltonian_half[i], rep.dk_hamiltonian_half[0]);
        const double ds2 = rel(rep.dk_secondary_half[i], rep.dk_secondary_half[0]);
        rep.delta_hamiltonian.push_back(dh);
        rep.delta_secondary.push_back(ds);
        rep.order_hamiltonian.push_back(std::log2(dh2 / dh));
        rep.order_secondary.push_back(std::log2(ds2 / ds));
        rep.max_delta = std::max({rep.max_delta, dh, ds});
    }
    return rep;
}

}  // namespace ahe
