// initial_data.hpp - band-limited initial metrics H_0 = exp(X)
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "ahe/bundle.hpp"
#include "ahe/spectral_grid.hpp"

namespace ahe {

/// One Fourier term cos(2 pi m.x + phase) * A, A Hermitian r x r.
struct ModeSpec {
    std::array<int, 4> m{};
    double phase = 0.0;
    Eigen::MatrixXcd amp;
};

inline MatrixField mode_sum(const SpectralGrid& grid, const std::vector<ModeSpec>& modes, int rank) {
    MatrixField X(grid.points(), rank);
    for (std::size_t p = 0; p < grid.points(); ++p) {
        const auto x = grid.coordinates(p);
        for (const auto& ms : modes) {
            double s = ms.phase;
            for (int a = 0; a < 4; ++a) s += 2.0 * pi * ms.m[a] * x[a];
            const double v = std::cos(s);
            for (int i = 0; i < rank; ++i)
                for (int j = 0; j < rank; ++j) X(p, i, j) += v * ms.amp(i, j);
        }
    }
    return X;
}

/// Seeded band-limited modes: one per wave vector in a half space of
/// [-band, band]^4 with Gaussian Hermitian amplitudes, rescaled so the
/// amplitude norms sum to `amplitude` (a bound on sup |X|).
inline std::vector<ModeSpec> random_modes(int rank, double amplitude, int band, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * pi);
    std::vector<ModeSpec> out;
    for (int a = -band; a <= band; ++a)
        for (int b = -band; b <= band; ++b)
            for (int c = -band; c <= band; ++c)
                for (int d = -band; d <= band; ++d) {
                    const std::array<int, 4> m{a, b, c, d};
                    const auto nz = std::find_if(m.begin(), m.end(), [](int v) { return v != 0; });
                    if (nz == m.end() || *nz < 0) continue;
                    ModeSpec ms;
                    ms.m = m;
                    ms.phase = phase(rng);
                    Eigen::MatrixXcd A(rank, rank);
                    for (int i = 0; i < rank; ++i)
                        for (int j = 0; j < rank; ++j) A(i, j) = cd{gauss(rng), gauss(rng)};
                    ms.amp = 0.5 * (A + A.adjoint());
                    out.push_back(std::move(ms));
                }
    double total = 0.0;
    for (const auto& ms : out) total += ms.amp.norm();
    for (auto& ms : out) ms.amp *= amplitude / total;
    return out;
}

/// H = exp(sum of modes) with background beta.
inline MetricField metric_from_modes(const SpectralGrid& grid, const std::vector<ModeSpec>& modes, int rank,
                                     double beta = 0.0) {
    const MatrixField X = mode_sum(grid, modes, rank);
    const MatrixField L = MatrixField::identity(grid.points(), rank);
    return MetricField{hermitian_exp(L, X, MatrixField(grid.points(), rank)).H, beta};
}

}  // namespace ahe
