#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace ahe;
namespace o = ahe::oracle;

namespace {

MetricField rank2_metric(const SpectralGrid& grid, double eps, double beta = 0.0) {
    std::vector<o::Mode> modes = {{{1, 0, 0, 0}, eps, 0.3}, {{0, 1, 1, 0}, eps, -0.7}};
    std::vector<Eigen::MatrixXcd> amps = {o::hermitian2(1.0, -0.5, cd{0.4, 0.2}),
                                          o::hermitian2(0.2, 0.7, cd{-0.3, 0.6})};
    return o::exp_metric(o::hermitian_mode_field(grid, modes, amps), beta);
}

// Coefficient of cos(2 pi x1) in log H for a line bundle.
double cos_amplitude(const SpectralGrid& grid, const MatrixField& H) {
    ScalarField u(grid.points(), 1);
    for (std::size_t p = 0; p < grid.points(); ++p) {
        const double x1 = grid.coordinates(p)[0];
        u.data()[p] = std::log(H.data()[p].real()) * std::cos(2 * pi * x1);
    }
    return 2.0 * grid.integrate_top(u).real() / grid.geometry().volume();
}

double decay_error(const SpectralGrid& grid, double dt, Integrator integ, double t_end = 0.5) {
    const double a0 = 0.3;
    FlowConfig cfg;
    cfg.k = Polarization::infinite();
    cfg.dt = dt;
    cfg.t_end = t_end;
    cfg.integrator = integ;
    cfg.stop_tolerance = 0.0;
    const Trajectory tr = run(grid, o::line_metric(grid, {{{1, 0, 0, 0}, a0, 0.0}}), cfg);
    EXPECT_FALSE(tr.failed) << tr.stop_reason;
    return std::abs(cos_amplitude(grid, tr.final_state.m.H) - a0 * std::exp(-pi * t_end));
}

}  // namespace

TEST(Flow, FixedPointUnchanged) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const MetricField m = MetricField::flat(grid.points(), 2, 0.5);
    FlowConfig cfg;
    cfg.k = Polarization::finite(10);
    cfg.dt = 1e-3;
    cfg.t_end = 0.02;
    cfg.stop_tolerance = 0.0;
    const Trajectory tr = run(grid, m, cfg);
    ASSERT_FALSE(tr.failed);
    EXPECT_LT(max_abs(tr.final_state.m.H - m.H), 1e-13);
    for (const auto& row : tr.rows) EXPECT_LT(row.res_linf, 1e-12);
}

TEST(Flow, DonaldsonLimitDecayRate) {
    SpectralGrid grid(TorusGeometry::standard(8));
    EXPECT_LT(decay_error(grid, 0.005, Integrator::rk4), 1e-9);
}

TEST(Flow, Rk4FourthOrder) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const double e1 = decay_error(grid, 0.01, Integrator::rk4);
    const double e2 = decay_error(grid, 0.005, Integrator::rk4);
    const double order = std::log2(e1 / e2);
    EXPECT_GT(order, 3.5);
    EXPECT_LT(order, 4.5);
}

TEST(Flow, ImexSecondOrderAndUnconditionallyStable) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const double e1 = decay_error(grid, 0.02, Integrator::imex);
    const double e2 = decay_error(grid, 0.01, Integrator::imex);
    const double order = std::log2(e1 / e2);
    EXPECT_GT(order, 1.7);
    EXPECT_LT(order, 2.3);
    // Far beyond the explicit bound for N = 8.
    EXPECT_LT(decay_error(grid, 0.1, Integrator::imex), 1e-2);
}

TEST(Flow, Rk4StabilityBoundRejected) {
    SpectralGrid grid(TorusGeometry::standard(8));
    FlowConfig cfg;
    cfg.dt = 0.1;
    EXPECT_THROW(run(grid, MetricField::flat(grid.points(), 1), cfg), FlowError);
    cfg.integrator = Integrator::imex;
    EXPECT_NO_THROW(run(grid, MetricField::flat(grid.points(), 1), cfg));
    EXPECT_NEAR(FlowConfig::rk4_dt_bound(grid.geometry(), 0.8), 0.8 / 64.0, 1e-15);
}

TEST(Flow, UnstableStepReportsFailure) {
    SpectralGrid grid(TorusGeometry::standard(8));
    FlowConfig cfg;
    cfg.k = Polarization::infinite();
    cfg.dt = 0.1;
    cfg.t_end = 10.0;
    cfg.stability_constant = 100.0;
    cfg.stop_tolerance = 0.0;
    const Trajectory tr = run(grid, o::line_metric(grid, {{{1, 1, 0, 0}, 0.3, 0.0}, {{0, 0, 1, 1}, 0.2, 0.5}}), cfg);
    EXPECT_TRUE(tr.failed);
    EXPECT_TRUE(tr.early_stop);
    EXPECT_LT(tr.rows.size(), 101u);
}

TEST(Flow, RowCountAndFinalTime) {
    SpectralGrid grid(TorusGeometry::standard(8));
    FlowConfig cfg;
    cfg.k = Polarization::finite(20);
    cfg.dt = 0.01;
    cfg.t_end = 0.045;
    cfg.stop_tolerance = 0.0;
    const Trajectory tr = run(grid, o::line_metric(grid, {{{1, 0, 0, 0}, 0.1, 0.0}}), cfg);
    ASSERT_EQ(tr.rows.size(), 6u);
    EXPECT_NEAR(tr.rows.back().t, 0.045, 1e-15);
    EXPECT_EQ(tr.stop_reason, "t_end");
    EXPECT_FALSE(tr.early_stop);
}

TEST(Flow, EarlyStopAtConvergence) {
    SpectralGrid grid(TorusGeometry::standard(8));
    FlowConfig cfg;
    cfg.t_end = 1.0;
    cfg.dt = 0.01;
    const Trajectory tr = run(grid, MetricField::flat(grid.points(), 1), cfg);
    EXPECT_TRUE(tr.early_stop);
    EXPECT_FALSE(tr.failed);
    EXPECT_EQ(tr.stop_reason, "converged");
    EXPECT_EQ(tr.rows.size(), 1u);
}

TEST(Flow, RankTwoStaysHermitianPositiveAndConservesLogDet) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const MetricField m0 = rank2_metric(grid, 0.2, 0.4);
    const cd ld0 = grid.integrate_top(log_det(m0.H));
    std::vector<double> drift;
    for (double dt : {0.01, 0.005}) {
        FlowConfig cfg;
        cfg.k = Polarization::finite(20);
        cfg.dt = dt;
        cfg.t_end = 0.1;
        cfg.stop_tolerance = 0.0;
        const Trajectory tr = run(grid, m0, cfg);
        ASSERT_FALSE(tr.failed) << tr.stop_reason;
        const MatrixField& H = tr.final_state.m.H;
        EXPECT_LT(max_abs(H - adjoint(H)), 1e-15);
        EXPECT_GT(positivity(H).min_eigenvalue, 0.0);
        EXPECT_LT(tr.rows.back().res_l2, tr.rows.front().res_l2);
        drift.push_back(std::abs(grid.integrate_top(log_det(H)) - ld0));
    }
    // tr rho integrates to zero, so int log det H is conserved up to the
    // fourth-order time discretization error.
    EXPECT_LT(drift[0], 1e-7);
    EXPECT_GT(drift[0] / drift[1], 10.0);
}

TEST(Flow, ImexMatchesRk4) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const MetricField m0 = rank2_metric(grid, 0.2);
    FlowConfig cfg;
    cfg.k = Polarization::finite(20);
    cfg.dt = 0.005;
    cfg.t_end = 0.05;
    cfg.stop_tolerance = 0.0;
    const Trajectory a = run(grid, m0, cfg);
    cfg.integrator = Integrator::imex;
    const Trajectory b = run(grid, m0, cfg);
    EXPECT_LT(max_abs(a.final_state.m.H - b.final_state.m.H), 1e-4);
}

TEST(Flow, PotentialNonIncreasingWithEnergyIdentity) {
    SpectralGrid grid(TorusGeometry::standard(8));
    FlowConfig cfg;
    cfg.k = Polarization::finite(20);
    cfg.dt = 0.005;
    cfg.t_end = 0.1;
    cfg.stop_tolerance = 0.0;
    const Trajectory tr =
        run(grid, o::line_metric(grid, {{{1, 0, 0, 1}, 0.3, 0.1}, {{0, 1, 1, 0}, 0.2, 0.0}}, 0.4), cfg);
    ASSERT_FALSE(tr.failed);
    const double w = 2.0 * grid.geometry().det_g();
    double energy = 0.0;
    for (std::size_t i = 1; i < tr.rows.size(); ++i) {
        EXPECT_LT(tr.rows[i].dk_hamiltonian, tr.rows[i - 1].dk_hamiltonian);
        const double a = tr.rows[i - 1].res_l2, b = tr.rows[i].res_l2;
        energy += 0.5 * cfg.dt * w * (a * a + b * b);
    }
    EXPECT_NEAR(tr.rows.back().dk_hamiltonian, -energy, 1e-3 * energy);
    EXPECT_LT(tr.final_state.acc.max_imag, 1e-9);
}

TEST(Flow, ObserverSeesEveryRow) {
    SpectralGrid grid(TorusGeometry::standard(8));
    FlowConfig cfg;
    cfg.dt = 0.01;
    cfg.t_end = 0.03;
    cfg.stop_tolerance = 0.0;
    cfg.keep_states = true;
    std::size_t calls = 0;
    const Trajectory tr = run(grid, o::line_metric(grid, {{{0, 1, 0, 0}, 0.1, 0.0}}), cfg,
                              [&](const FlowState& s, const Diagnostics& d) {
                                  EXPECT_DOUBLE_EQ(s.t, d.t);
                                  ++calls;
                              });
    EXPECT_EQ(calls, tr.rows.size());
    EXPECT_EQ(tr.states.size(), tr.rows.size());
}
