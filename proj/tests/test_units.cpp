#include <gtest/gtest.h>

#include "shuttle/estimators.hpp"
#include "shuttle/seeding.hpp"
#include "shuttle/units.hpp"

using namespace shuttle;

TEST(ShuttlingFrequency, ClockRangeEndpoints) {
    auto hi = shuttling_frequency(20.0, 100.0);
    EXPECT_NEAR(hi.f_mhz, 50.0, 1e-12);
    EXPECT_NEAR(hi.f_clk_mhz, 200.0, 1e-12);
    auto lo = shuttling_frequency(4.0, 100.0);
    EXPECT_NEAR(lo.f_mhz, 10.0, 1e-12);
    EXPECT_NEAR(lo.f_clk_mhz, 40.0, 1e-12);
    EXPECT_NEAR(shuttling_frequency(8.0, 200.0).f_mhz, 10.0, 1e-12);
}

TEST(ShuttlingFrequency, RejectsNonPositive) {
    EXPECT_THROW(shuttling_frequency(0.0, 100.0), DomainError);
    EXPECT_THROW(shuttling_frequency(5.0, -1.0), DomainError);
}

TEST(ShuttlingFrequency, PeriodInNs) { EXPECT_NEAR(signal_period(20.0, 100.0), 20.0, 1e-12); }

TEST(ShuttleDuration, TableRows) {
    EXPECT_NEAR(shuttle_duration(10000.0, 20.0), 0.50, 1e-12);
    EXPECT_NEAR(shuttle_duration(10000.0, 5.0), 2.00, 1e-12);
    EXPECT_NEAR(shuttle_duration(10000.0, 10.0), 1.00, 1e-12);
    EXPECT_NEAR(shuttle_duration(10000.0, 15.0), 0.67, 5e-3);
    EXPECT_THROW(shuttle_duration(0.0, 20.0), DomainError);
}

TEST(TimeGrid, WithinAndCovering) {
    auto g = TimeGrid::within(1.0, 0.3);
    EXPECT_EQ(g.n_samples, 4u);
    EXPECT_NEAR(g.duration(), 0.9, 1e-12);
    auto c = TimeGrid::covering(1.0, 0.3);
    EXPECT_EQ(c.n_samples, 5u);
    EXPECT_EQ(TimeGrid::within(500.0, 0.1).n_samples, 5001u);
    EXPECT_NEAR((TimeGrid{0.1, 10}.nyquist_hz()), 5e9, 1.0);
}

TEST(Geometry, PeriodCount) {
    GeometryParams g;
    EXPECT_EQ(g.n_periods(), 25u);
    g.distance = 1050.0;
    EXPECT_THROW(g.validate(), ConfigError);
}

TEST(Physics, DerivedScalars) {
    PhysicalParams p;
    p.g_bar = 2.0;
    p.B_z = 1.0;
    p.delta_g_over_g = 0.1;
    EXPECT_NEAR(p.zeeman(), 2.0 * constants::mu_B, 1e-12);
    EXPECT_NEAR(p.kappa_z(), 0.025 * 2.0 * constants::mu_B, 1e-12);
    EXPECT_NEAR(p.gamma(), -0.05 * constants::mu_B, 1e-12);
    p.T_1v = std::numeric_limits<double>::infinity();
    EXPECT_EQ(p.relaxation_rate(), 0.0);
}

TEST(Power, OperatingPoint) {
    EXPECT_NEAR(power_estimate(1e-12, 0.2, 50e6), 2.0, 1e-12);
    EXPECT_NEAR(power_estimate(1e-12, 0.2, 100e6), 2.0 * power_estimate(1e-12, 0.2, 50e6), 1e-12);
    double f20 = shuttling_frequency(20.0, 100.0).f_mhz * 1e6;
    double f5 = shuttling_frequency(5.0, 100.0).f_mhz * 1e6;
    EXPECT_NEAR(power_estimate(1e-12, 0.2, f20) / power_estimate(1e-12, 0.2, f5), 4.0, 1e-12);
    EXPECT_THROW(power_estimate(0.0, 0.2, 50e6), DomainError);
    EXPECT_THROW(power_estimate(1e-12, -0.2, 50e6), DomainError);
}

TEST(Budget, ReferenceInputs) {
    auto r = surface_code_budget({0.5, 0.2, 0.08, 10.0});
    EXPECT_NEAR(r.t_sc, 24.44, 1e-12);
    EXPECT_NEAR(r.duty_cycle, 0.4501, 5e-5);
}

TEST(Budget, ZeroShuttleAndHomogeneity) {
    EXPECT_EQ(surface_code_budget({0.0, 0.2, 0.08, 10.0}).duty_cycle, 0.0);
    auto a = surface_code_budget({0.5, 0.2, 0.08, 10.0});
    auto b = surface_code_budget({1.5, 0.6, 0.24, 30.0});
    EXPECT_NEAR(a.duty_cycle, b.duty_cycle, 1e-14);
    EXPECT_THROW(surface_code_budget({0.5, 0.0, 0.08, 10.0}), DomainError);
}

TEST(Seeding, DeterministicAndDistinct) {
    EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
    EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
    EXPECT_NE(derive_seed(1, {2}), derive_seed(2, {2}));
    static_assert(derive_seed(5, {1}) == derive_seed(5, {1}));
}
