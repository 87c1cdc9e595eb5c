// moment_map.hpp - the moment map density, the normalized AHE residual and
// its 1/k correction term.
//
// With Td = 1 on the flat base and M the top coefficient of
// exp((i/2pi) F + k omega I), the residual is
//     rho = k^{-1} (M / det g - chi(k) / (r vol) I)
//         = K(F) - mu I + S(k),
// and S(k) = (Q - qbar I) / k with Q the normalized (i/2pi)^2 F^2 / 2 term.
#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "ahe/bundle.hpp"
#include "ahe/spectral_grid.hpp"
#include "ahe/topology.hpp"

namespace ahe {

/// Polarization parameter k: positive real, or the k = infinity sentinel
/// selecting the Hermitian-Einstein (Donaldson) limit.
class Polarization {
public:
    static Polarization finite(double k) {
        if (!(k > 0.0) || !std::isfinite(k)) throw std::invalid_argument("polarization k must be positive and finite");
        return Polarization(k);
    }
    static Polarization infinite() { return Polarization(std::numeric_limits<double>::infinity()); }

    bool is_infinite() const noexcept { return std::isinf(k_); }
    double value() const noexcept { return k_; }
    std::string str() const { return is_infinite() ? std::string("inf") : std::to_string(k_); }

private:
    explicit Polarization(double k) : k_(k) {}
    double k_;
};

/// Curvature quantities of one metric, computed once and shared by the
/// moment map, residual and functionals.
struct MetricAnalysis {
    /// For rank one only Hinv is filled: the connection enters through F alone.
    Connection conn;
    Form11 F;
    Form11 c;             // (i/2pi) F, omega basis
    MatrixField c_omega;  // c ^ omega
    MatrixField c_c;      // c ^ c
    MatrixField K;
    CharNumbers numbers;
};

namespace detail {

/// Line bundles: c, its wedges, K and H^{-1} in one sweep of the lattice.
inline void analyze_line(const SpectralGrid& grid, const MetricField& m, MetricAnalysis& a) {
    const auto& g = grid.geometry().g;
    const Eigen::Matrix2cd gi = grid.geometry().g_inv();
    const std::size_t n = m.H.points();
    a.F = line_curvature(grid, m.H, m.beta);
    a.c = Form11(n, 1);
    a.c_omega = MatrixField(n, 1);
    a.c_c = MatrixField(n, 1);
    a.K = MatrixField(n, 1);
    a.conn.Hinv = MatrixField(n, 1);
    const cd *f11 = a.F(1, 1).data(), *f12 = a.F(1, 2).data(), *f21 = a.F(2, 1).data(), *f22 = a.F(2, 2).data();
    cd *c11 = a.c(1, 1).data(), *c12 = a.c(1, 2).data(), *c21 = a.c(2, 1).data(), *c22 = a.c(2, 2).data();
    cd *co = a.c_omega.data(), *cc = a.c_c.data(), *K = a.K.data(), *hinv = a.conn.Hinv.data();
    const cd* h = m.H.data();
    const double s = 1.0 / pi;
    // K = g^{j kbar} c_{kbar j}; F(k, j) holds the kbar j component.
    const cd k11 = gi(0, 0), k12 = gi(1, 0), k21 = gi(0, 1), k22 = gi(1, 1);
    for (std::size_t p = 0; p < n; ++p) {
        const cd a11 = s * f11[p], a12 = s * f12[p], a21 = s * f21[p], a22 = s * f22[p];
        c11[p] = a11;
        c12[p] = a12;
        c21[p] = a21;
        c22[p] = a22;
        co[p] = g(1, 1) * a11 + g(0, 0) * a22 - g(1, 0) * a12 - g(0, 1) * a21;
        cc[p] = 2.0 * (a11 * a22 - a12 * a21);
        K[p] = k11 * a11 + k12 * a12 + k21 * a21 + k22 * a22;
        hinv[p] = h[p].imag() == 0.0 ? cd{1.0 / h[p].real()} : 1.0 / h[p];
    }
}

}  // namespace detail

inline MetricAnalysis analyze(const SpectralGrid& grid, const MetricField& m) {
    const auto& geom = grid.geometry();
    MetricAnalysis a;
    if (m.rank() == 1) {
        detail::analyze_line(grid, m, a);
    } else {
        a.conn = chern_connection(grid, m.H);
        a.F = curvature(grid, a.conn, m.beta);
        a.c = chern_form(a.F);
        a.c_omega = wedge_omega(a.c, geom);
        a.c_c = wedge_top(a.c, a.c);
        a.K = lambda_contract(a.F, geom);
    }
    a.numbers = char_numbers(grid, m.rank(), chern_integrands(a.c_omega, a.c_c));
    return a;
}

/// mu(D_A) = [exp(k omega I + (i/2pi) F)]^{(4)} as a top coefficient.
struct MomentDensity {
    MatrixField M;
    double k = 0.0;
};

inline MomentDensity moment(const SpectralGrid& grid, const Form11& F, double k) {
    const auto& geom = grid.geometry();
    const Form11 c = chern_form(F);
    MatrixField M = wedge_omega(c, geom);
    M *= cd{k};
    M.axpy(0.5, wedge_top(c, c));
    M.add_identity(k * k * geom.det_g());
    return {std::move(M), k};
}

inline MomentDensity moment(const SpectralGrid& grid, const MetricAnalysis& a, double k) {
    MatrixField M = a.c_omega;
    M *= cd{k};
    M.axpy(0.5, a.c_c);
    M.add_identity(k * k * grid.geometry().det_g());
    return {std::move(M), k};
}

inline MomentDensity moment(const SpectralGrid& grid, const MetricField& m, double k) {
    return moment(grid, curvature(grid, m), k);
}

/// Defect rho; zero exactly at solutions of the AHE equation for this k.
inline MatrixField residual(const SpectralGrid& grid, const MetricAnalysis& a, Polarization k) {
    const auto& geom = grid.geometry();
    const int r = a.F.rank();
    if (k.is_infinite()) {
        MatrixField rho = a.K;
        rho.add_identity(-a.numbers.slope);
        return rho;
    }
    MomentDensity md = moment(grid, a, k.value());
    const double chi = grid.integrate_top(trace(md.M)).real();
    MatrixField rho = std::move(md.M);
    rho *= cd{1.0 / geom.det_g()};
    rho.add_identity(-chi / (r * geom.volume()));
    rho *= cd{1.0 / k.value()};
    return rho;
}

inline MatrixField residual(const SpectralGrid& grid, const MetricField& m, Polarization k) {
    return residual(grid, analyze(grid, m), k);
}

/// S(k) = rho - (K - mu I); zero in the k = infinity limit.
inline MatrixField s_term(const SpectralGrid& grid, const MetricAnalysis& a, Polarization k) {
    MatrixField s = residual(grid, a, k);
    s -= a.K;
    s.add_identity(a.numbers.slope);
    return s;
}

inline MatrixField s_term(const SpectralGrid& grid, const MetricField& m, Polarization k) {
    return s_term(grid, analyze(grid, m), k);
}

/// Quadratic curvature density Q = 1/2 [ (tr_g c)^2 - c_{ik} c_{ki} (g-contracted) ]
/// with c = F / pi, built from index contractions only (no wedge algebra).
inline MatrixField quadratic_density(const Form11& F, const TorusGeometry& geom) {
    const Eigen::Matrix2cd gi = geom.g_inv();
    const int r = F.rank();
    const double s = 1.0 / (pi * pi);
    MatrixField Q(F.points(), r);
    dispatch_rank(r, [&]<int R>() {
        Mat<R> hat(r, r), tmp(r, r);
        for (std::size_t p = 0; p < F.points(); ++p) {
            hat.setZero();
            for (int j = 1; j <= 2; ++j)
                for (int k = 1; k <= 2; ++k) hat += gi(j - 1, k - 1) * mat<R>(F(k, j).at(p), r);
            auto q = mat<R>(Q.at(p), r);
            q.noalias() = hat * hat;
            // g^{j kbar} g^{l mbar} F_{kbar l} F_{mbar j}
            for (int j = 1; j <= 2; ++j)
                for (int k = 1; k <= 2; ++k)
                    for (int l = 1; l <= 2; ++l)
                        for (int mm = 1; mm <= 2; ++mm) {
                            const cd w = gi(j - 1, k - 1) * gi(l - 1, mm - 1);
                            if (w == cd{0.0}) continue;
                            tmp.noalias() = mat<R>(F(k, l).at(p), r) * mat<R>(F(mm, j).at(p), r);
                            q -= w * tmp;
                        }
            q *= 0.5 * s;
        }
    });
    return Q;
}

/// Expansion route: K - mu I + (Q - qbar I) / k, with qbar the
/// omega-average of tr Q / r. Must agree with residual().
inline MatrixField residual_by_expansion(const SpectralGrid& grid, const MetricAnalysis& a, Polarization k) {
    const auto& geom = grid.geometry();
    const int r = a.F.rank();
    MatrixField rho = a.K;
    rho.add_identity(-a.numbers.slope);
    if (k.is_infinite()) return rho;
    MatrixField Q = quadratic_density(a.F, geom);
    const double qbar = grid.integrate_top(trace(Q)).real() / r;
    Q.add_identity(-qbar);
    rho.axpy(1.0 / k.value(), Q);
    return rho;
}

/// Euler characteristic at k read off the moment density: int tr M.
inline double moment_euler_char(const SpectralGrid& grid, const MomentDensity& md) {
    return grid.integrate_top(trace(md.M)).real();
}

}  // namespace ahe
