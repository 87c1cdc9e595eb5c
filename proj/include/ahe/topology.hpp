// topology.hpp - Riemann-Roch numbers by Chern-Weil quadrature on the flat
// torus (Todd class = 1).
#pragma once

#include <cmath>

#include "ahe/bundle.hpp"
#include "ahe/spectral_grid.hpp"

namespace ahe {

/// chi(k) = c2 k^2 + c1 k + c0, with slope and degree.
struct CharNumbers {
    double c0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double slope = 0.0;
    double degree = 0.0;

    double chi(double k) const { return (c2 * k + c1) * k + c0; }
};

/// chi(X, E (x) L^k) = int tr exp((i/2pi) F + k omega I) Td with Td = 1:
/// r k^2 vol + k int ch1 ^ omega + int ch2.
inline CharNumbers char_numbers(const SpectralGrid& grid, int rank, const ChernIntegrands& ci) {
    const auto& geom = grid.geometry();
    CharNumbers cn;
    cn.c2 = rank * geom.volume();
    cn.c1 = grid.integrate_top(ci.ch1_omega).real();
    cn.c0 = grid.integrate_top(ci.ch2).real();
    cn.degree = cn.c1;
    cn.slope = cn.degree / (rank * geom.volume());
    return cn;
}

inline CharNumbers char_numbers(const SpectralGrid& grid, const Form11& F) {
    return char_numbers(grid, F.rank(), chern_integrands(F, grid.geometry()));
}

inline CharNumbers char_numbers(const SpectralGrid& grid, const MetricField& m) {
    return char_numbers(grid, curvature(grid, m));
}

inline double euler_char(const SpectralGrid& grid, const MetricField& m, double k) {
    return char_numbers(grid, m).chi(k);
}

/// mu_E = deg / (rk vol); metric independent.
inline double slope(const SpectralGrid& grid, const MetricField& m) { return char_numbers(grid, m).slope; }

/// Background coefficient making c_1(E) = rank * m [omega] for the standard
/// (integral) omega, so chi(k) = r (k + m)^2 vol is an integer for vol = 1.
inline double integral_beta(int m) { return pi * m; }

}  // namespace ahe
