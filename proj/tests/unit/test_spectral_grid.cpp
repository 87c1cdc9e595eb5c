#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace ahe;
namespace o = ahe::oracle;

namespace {

double max_diff(const MatrixField& a, const MatrixField& b) { return max_abs(a - b); }

ScalarField random_smooth(const SpectralGrid& grid, unsigned seed, int band = 2) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<o::Mode> modes;
    for (int a = -band; a <= band; ++a)
        for (int b = -band; b <= band; ++b)
            if (a * a + b * b <= band * band && (a > 0 || (a == 0 && b > 0))) {
                modes.push_back({{a, b, 0, 0}, u(rng), 3.0 * u(rng)});
                modes.push_back({{0, a, b, 1}, u(rng), 3.0 * u(rng)});
            }
    ScalarField re = o::mode_field(grid, modes);
    for (auto& m : modes) m.phase += 1.0;
    ScalarField im = o::mode_field(grid, modes);
    re.axpy(I_unit, im);
    return re;
}

}  // namespace

TEST(TorusGeometry, RejectsBadShapes) {
    EXPECT_THROW(TorusGeometry::standard(6).validate(), ShapeError);
    EXPECT_THROW(TorusGeometry::standard(2).validate(), ShapeError);
    TorusGeometry g = TorusGeometry::standard(8);
    g.g(0, 1) = cd{0.1, 0.2};
    EXPECT_THROW(g.validate(), ShapeError);
    g.g(1, 0) = std::conj(g.g(0, 1));
    EXPECT_NO_THROW(g.validate());
    g.g(1, 1) = -1.0;
    EXPECT_THROW(g.validate(), ShapeError);
}

TEST(TorusGeometry, VolumeByQuadratureMatchesDeterminant) {
    TorusGeometry g = TorusGeometry::standard(8);
    g.g << 2.0, cd(0.3, -0.4), cd(0.3, 0.4), 1.5;
    SpectralGrid grid(g);
    // omega^2/2 coefficient via the wedge of omega with itself
    const Form11 w = omega_form(g, 1);
    const double vol = 0.5 * grid.integrate_top(wedge_top(w, w)).real();
    EXPECT_NEAR(vol / g.volume(), 1.0, 1e-12);
    EXPECT_NEAR(TorusGeometry::standard(8).volume(), 1.0, 0.0);
    g.normalize_volume();
    EXPECT_NEAR(g.volume(), 1.0, 1e-14);
}

TEST(SpectralGrid, RoundTrip) {
    SpectralGrid grid(TorusGeometry::standard(8));
    MatrixField f(grid.points(), 2);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    for (cd& v : f.values()) v = cd{n(rng), n(rng)};
    const MatrixField back = grid.inverse(grid.forward(f));
    EXPECT_LT(max_diff(back, f) / max_abs(f), 1e-12);
}

TEST(SpectralGrid, Parseval) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const ScalarField f = random_smooth(grid, 3);
    const ScalarField fh = grid.forward(f);
    double spec = 0.0;
    for (cd v : fh.values()) spec += std::norm(v);
    spec /= static_cast<double>(grid.points()) * grid.points();
    const double phys = grid.integrate_top(frobenius_sq(f)).real();
    EXPECT_NEAR(spec / phys, 1.0, 1e-10);
}

TEST(SpectralGrid, DerivativeOfConstantIsZero) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const ScalarField c(grid.points(), 1, cd{2.5, -1.0});
    for (int j = 1; j <= 2; ++j) {
        EXPECT_LT(max_abs(grid.deriv_holo(c, j)), 1e-13);
        EXPECT_LT(max_abs(grid.deriv_anti(c, j)), 1e-13);
    }
    EXPECT_LT(max_abs(grid.laplacian(c)), 1e-13);
}

TEST(SpectralGrid, AxisOutOfRange) {
    SpectralGrid grid(TorusGeometry::standard(4));
    const ScalarField c(grid.points(), 1);
    EXPECT_THROW(grid.deriv_holo(c, 0), std::out_of_range);
    EXPECT_THROW(grid.deriv_anti(c, 3), std::out_of_range);
}

TEST(SpectralGrid, ExponentialModeMatchesFiniteDifferences) {
    SpectralGrid grid(TorusGeometry::standard(32));
    const o::Fn e1 = [](const std::array<double, 4>& x) { return std::exp(cd{0, 2 * pi * x[0]}); };
    const ScalarField f = grid.sample(e1);
    const ScalarField d = grid.deriv_holo(f, 1);
    const ScalarField db = grid.deriv_anti(f, 1);
    double err = 0.0, err_closed = 0.0;
    for (std::size_t p = 0; p < grid.points(); p += 997) {
        const auto x = grid.coordinates(p);
        err = std::max(err, std::abs(d.data()[p] - o::fd_holo(e1, x, 1)));
        err = std::max(err, std::abs(db.data()[p] - o::fd_anti(e1, x, 1)));
        err_closed = std::max(err_closed, std::abs(d.data()[p] - cd{0, pi} * f.data()[p]));
    }
    EXPECT_LT(err, 1e-6);
    EXPECT_LT(err_closed, 1e-12);
}

TEST(SpectralGrid, SineInY2MatchesFiniteDifferences) {
    SpectralGrid grid(TorusGeometry::standard(32));
    const o::Fn s = [](const std::array<double, 4>& x) { return cd{std::sin(2 * pi * x[3])}; };
    const ScalarField f = grid.sample(s);
    const ScalarField d = grid.deriv_holo(f, 2);
    double err = 0.0;
    for (std::size_t p = 0; p < grid.points(); p += 1009) {
        const auto x = grid.coordinates(p);
        err = std::max(err, std::abs(d.data()[p] - o::fd_holo(s, x, 2)));
        // d_2 sin(2 pi y2) = -(i/2) 2 pi cos(2 pi y2)
        err = std::max(err, std::abs(d.data()[p] - cd{0, -pi} * std::cos(2 * pi * x[3])));
    }
    EXPECT_LT(err, 1e-6);
}

TEST(SpectralGrid, ConjugationSymmetry) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const ScalarField f = random_smooth(grid, 11);
    ScalarField fc = f;
    for (cd& v : fc.values()) v = std::conj(v);
    for (int k = 1; k <= 2; ++k) {
        ScalarField lhs = grid.deriv_anti(fc, k);
        ScalarField rhs = grid.deriv_holo(f, k);
        for (cd& v : rhs.values()) v = std::conj(v);
        EXPECT_LT(max_diff(lhs, rhs), 1e-11);
    }
}

TEST(SpectralGrid, DerivativesCommute) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const ScalarField f = random_smooth(grid, 12);
    for (int j = 1; j <= 2; ++j)
        for (int k = 1; k <= 2; ++k)
            EXPECT_LT(max_diff(grid.deriv_holo(grid.deriv_anti(f, k), j), grid.deriv_anti(grid.deriv_holo(f, j), k)),
                      1e-10);
}

TEST(SpectralGrid, IntegralOfDerivativeVanishes) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const ScalarField f = random_smooth(grid, 13);
    for (int j = 1; j <= 2; ++j) EXPECT_LT(std::abs(grid.integrate_top(grid.deriv_holo(f, j))), 1e-10);
}

TEST(SpectralGrid, LaplacianConvention) {
    SpectralGrid grid(TorusGeometry::standard(32));
    const o::Fn c = [](const std::array<double, 4>& x) { return cd{std::cos(2 * pi * x[0])}; };
    const ScalarField f = grid.sample(c);
    const ScalarField lap = grid.laplacian(f);
    double err = 0.0, err_fd = 0.0;
    for (std::size_t p = 0; p < grid.points(); p += 1013) {
        const auto x = grid.coordinates(p);
        err = std::max(err, std::abs(lap.data()[p] + 2.0 * pi * pi * f.data()[p]));
        // Delta = 2 (d_j d_jbar) for g = I, i.e. half the Euclidean Laplacian
        const cd fd = 0.5 * (o::fd_axis2(c, x, 0, 0) + o::fd_axis2(c, x, 1, 1) + o::fd_axis2(c, x, 2, 2) +
                             o::fd_axis2(c, x, 3, 3));
        err_fd = std::max(err_fd, std::abs(lap.data()[p] - fd));
    }
    EXPECT_LT(err, 1e-10);
    EXPECT_LT(err_fd, 1e-5);
    EXPECT_NEAR(grid.laplacian_eigenvalue({1, 0, 0, 0}), -2.0 * pi * pi, 1e-12);
}

TEST(SpectralGrid, LaplacianIsContractionOfDerivatives) {
    TorusGeometry g = TorusGeometry::standard(8);
    g.g << 1.3, cd(0.2, 0.1), cd(0.2, -0.1), 0.8;
    SpectralGrid grid(g);
    const ScalarField f = random_smooth(grid, 14);
    const Eigen::Matrix2cd gi = g.g_inv();
    ScalarField ref(grid.points(), 1);
    for (int j = 1; j <= 2; ++j)
        for (int k = 1; k <= 2; ++k) ref.axpy(2.0 * gi(j - 1, k - 1), grid.deriv_holo(grid.deriv_anti(f, k), j));
    EXPECT_LT(max_diff(grid.laplacian(f), ref), 1e-9);
    for (int m = 1; m <= 3; ++m) EXPECT_LT(grid.laplacian_eigenvalue({m, 0, 1, 0}), 0.0);
}

TEST(SpectralGrid, LaplacianLinearity) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const ScalarField f = random_smooth(grid, 15), h = random_smooth(grid, 16);
    const cd a{1.5, -0.5}, b{-0.25, 2.0};
    ScalarField comb = f;
    comb *= a;
    comb.axpy(b, h);
    ScalarField ref = grid.laplacian(f);
    ref *= a;
    ref.axpy(b, grid.laplacian(h));
    EXPECT_LT(max_diff(grid.laplacian(comb), ref), 1e-10);
}

TEST(SpectralGrid, Integrals) {
    SpectralGrid grid(TorusGeometry::standard(8));
    EXPECT_NEAR(std::abs(grid.integrate_top(ScalarField(grid.points(), 1, 1.0)) - 1.0), 0.0, 1e-15);
    const ScalarField s = grid.sample([](const auto& x) { return cd{std::sin(2 * pi * x[0])}; });
    EXPECT_LT(std::abs(grid.integrate_top(s)), 1e-14);
    // cos(2 pi (x1 + y2)) cos(2 pi (x1 + y2) + 0.3) has mean cos(0.3)/2
    const ScalarField a = grid.sample([](const auto& x) { return cd{std::cos(2 * pi * (x[0] + x[3]))}; });
    const ScalarField b = grid.sample([](const auto& x) { return cd{std::cos(2 * pi * (x[0] + x[3]) + 0.3)}; });
    EXPECT_NEAR(grid.integrate_top(pointwise_product(a, b)).real(), 0.5 * std::cos(0.3), 1e-13);
    EXPECT_THROW(grid.integrate_top(MatrixField(grid.points(), 2)), ShapeError);
}

TEST(SpectralGrid, DealiasTruncatesHighModes) {
    SpectralGrid grid(TorusGeometry::standard(8), true);
    const ScalarField hi = grid.sample([](const auto& x) { return cd{std::cos(2 * pi * 3 * x[1])}; });
    const ScalarField lo = grid.sample([](const auto& x) { return cd{std::cos(2 * pi * x[1])}; });
    EXPECT_LT(max_abs(grid.inverse(grid.forward(hi))), 1e-13);
    EXPECT_LT(max_diff(grid.inverse(grid.forward(lo)), lo), 1e-13);
}

TEST(SpectralGrid, ShapeMismatch) {
    SpectralGrid grid(TorusGeometry::standard(8));
    EXPECT_THROW(grid.forward(ScalarField(10, 1)), ShapeError);
    EXPECT_THROW(ScalarField(grid.points(), 1) + ScalarField(grid.points(), 2), ShapeError);
}
