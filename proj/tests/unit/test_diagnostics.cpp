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

Trajectory short_flow(const SpectralGrid& grid, const MetricField& m, double k, double dt, int steps) {
    FlowConfig cfg;
    cfg.k = Polarization::finite(k);
    cfg.dt = dt;
    cfg.t_end = dt * steps;
    cfg.stop_tolerance = 0.0;
    cfg.keep_states = true;
    return run(grid, m, cfg);
}

}  // namespace

TEST(CheckReport, RelativeErrorFloor) {
    CheckReport r;
    r.abs_err = 1e-23;
    r.tolerance = 1e-8;
    r.finish();
    EXPECT_DOUBLE_EQ(r.rel_err, 1e-23 / 1e-14);
    EXPECT_TRUE(r.pass);
    r.lhs_norm = 2.0;
    r.rhs_norm = 4.0;
    r.abs_err = 1.0;
    r.finish();
    EXPECT_DOUBLE_EQ(r.rel_err, 0.25);
    EXPECT_FALSE(r.pass);
    const nlohmann::json j = r;
    EXPECT_EQ(j.at("pass").get<bool>(), false);
    EXPECT_DOUBLE_EQ(j.at("rel_err").get<double>(), 0.25);
}

TEST(MomentEvolution, FlatFixedPointBothSidesZero) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const Trajectory tr = short_flow(grid, MetricField::flat(grid.points(), 1), 10, 1e-3, 2);
    const CheckReport r = theorem2_check(grid, tr, 1, 10);
    EXPECT_LT(r.lhs_norm, 1e-12);
    EXPECT_LT(r.rhs_norm, 1e-12);
    EXPECT_TRUE(r.pass);
}

TEST(MomentEvolution, RankOneCenteredDifferenceSecondOrder) {
    SpectralGrid grid(TorusGeometry::standard(16));
    const MetricField m = o::line_metric(grid, {{{1, 0, 0, 0}, 0.1, 0.0}}, 0.3);
    const Trajectory a = short_flow(grid, m, 10, 1e-3, 2);
    const Trajectory b = short_flow(grid, m, 10, 5e-4, 2);
    const CheckReport ra = theorem2_check(grid, a, 1, 10);
    const CheckReport rb = theorem2_check(grid, b, 1, 10);
    EXPECT_TRUE(ra.pass) << ra.rel_err;
    EXPECT_GT(ra.lhs_norm, 1e-2);
    EXPECT_NEAR(ra.rel_err / rb.rel_err, 4.0, 0.4);
}

TEST(MomentEvolution, MissingSnapshotsRejected) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const Trajectory tr = short_flow(grid, MetricField::flat(grid.points(), 1), 10, 1e-3, 2);
    EXPECT_THROW(theorem2_check(grid, tr, 0, 10), std::invalid_argument);
    EXPECT_THROW(theorem2_check(grid, tr, 2, 10), std::invalid_argument);
}

TEST(MomentEvolution, LinearInK) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const MetricField m = o::line_metric(grid, {{{1, 0, 0, 1}, 0.2, 0.0}, {{0, 1, 0, 0}, 0.1, 0.4}}, 0.3);
    const MatrixField phi = o::hermitian_mode_field(grid, {{{0, 0, 1, 0}, 0.3, 0.2}}, {Eigen::MatrixXcd::Ones(1, 1)});
    const CheckReport r = theorem2_k_structure(grid, m, phi, 10);
    EXPECT_TRUE(r.pass) << r.abs_err;
    EXPECT_GT(r.lhs_norm, 1e-2);
}

TEST(MomentEvolution, RankTwoReportedWithRelaxedGate) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const Trajectory tr = short_flow(grid, rank2_metric(grid, 0.1), 10, 1e-3, 2);
    const CheckReport r = theorem2_check(grid, tr, 1, 10);
    EXPECT_GE(r.tolerance, 1e-2);
    EXPECT_FALSE(r.note.empty());
}

TEST(CurvatureIdentities, ZeroCurvature) {
    SpectralGrid grid(TorusGeometry::standard(8));
    for (const auto& r : section5_identity_check(grid, MetricField::flat(grid.points(), 1, 0.0))) {
        EXPECT_LT(r.lhs_norm, 1e-14);
        EXPECT_LT(r.rhs_norm, 1e-14);
        EXPECT_TRUE(r.pass);
    }
}

TEST(CurvatureIdentities, SingleAndTwoModeMetrics) {
    SpectralGrid grid(TorusGeometry::standard(32));
    const std::vector<MetricField> metrics = {
        o::line_metric(grid, {{{1, 0, 0, 0}, 0.3, 0.0}}),
        o::line_metric(grid, {{{1, 0, 0, 1}, 0.2, 0.1}, {{0, 1, 1, 0}, 0.15, -0.4}}),
    };
    for (const auto& m : metrics) {
        const auto reps = section5_identity_check(grid, m);
        ASSERT_EQ(reps.size(), 2u);
        for (const auto& r : reps) {
            EXPECT_TRUE(r.pass) << r.name << " rel_err " << r.rel_err;
            EXPECT_GT(r.lhs_norm, 1e-6) << r.name;
        }
    }
}

TEST(CurvatureIdentities, Preconditions) {
    SpectralGrid grid(TorusGeometry::standard(8));
    EXPECT_THROW(section5_identity_check(grid, MetricField::flat(grid.points(), 2)), std::invalid_argument);
    TorusGeometry g = TorusGeometry::standard(8);
    g.g(0, 0) = 2.0;
    SpectralGrid skew(g);
    EXPECT_THROW(section5_identity_check(skew, MetricField::flat(skew.points(), 1)), std::invalid_argument);
}

TEST(FitExponent, ExactPowerLaw) {
    const std::vector<double> x = {1, 2, 4, 8};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * std::pow(v, -1.7));
    EXPECT_NEAR(fit_exponent(x, y), -1.7, 1e-12);
}

TEST(KLimit, ZeroCurvatureGap) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const CheckReport r = k_limit_check(grid, MetricField::flat(grid.points(), 2), {25, 50});
    EXPECT_TRUE(r.pass);
    EXPECT_LT(r.abs_err, 1e-13);
}

TEST(KLimit, InverseKForRanksOneAndTwo) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const std::vector<double> ks = {25, 50, 100, 200};
    const CheckReport r1 = k_limit_check(grid, o::line_metric(grid, {{{1, 0, 0, 0}, 0.3, 0.0}}, 0.2), ks);
    const CheckReport r2 = k_limit_check(grid, rank2_metric(grid, 0.3, 0.2), ks);
    for (const auto* r : {&r1, &r2}) {
        EXPECT_TRUE(r->pass) << r->lhs_norm;
        EXPECT_NEAR(r->lhs_norm, -1.0, 0.1);
        EXPECT_EQ(r->refinement_orders.size(), 3u);
    }
}

TEST(KLimit, InputValidation) {
    SpectralGrid grid(TorusGeometry::standard(8));
    const MetricField m = MetricField::flat(grid.points(), 1);
    EXPECT_THROW(k_limit_check(grid, m, {25}), std::invalid_argument);
    EXPECT_THROW(k_limit_check(grid, m, {50, 25}), std::invalid_argument);
    EXPECT_THROW(k_limit_check(grid, m, {25, 25}), std::invalid_argument);
}

TEST(Parabolicity, LargeKRunsAreStable) {
    SpectralGrid grid(TorusGeometry::standard(8));
    FlowConfig cfg;
    cfg.dt = 0.01;
    cfg.t_end = 0.2;
    const auto scan = parabolicity_scan(grid, o::line_metric(grid, {{{1, 0, 0, 0}, 0.2, 0.0}}), {50, 20}, cfg);
    ASSERT_EQ(scan.runs.size(), 2u);
    EXPECT_EQ(scan.runs[0].k, 20.0);
    for (const auto& r : scan.runs) {
        EXPECT_TRUE(r.stable) << r.reason;
        EXPECT_TRUE(r.residual_decreasing);
    }
    EXPECT_EQ(scan.smallest_stable_k, 20.0);
}
