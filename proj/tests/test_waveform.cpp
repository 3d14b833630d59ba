#include <gtest/gtest.h>

#include <numeric>

#include "shuttle/spectral.hpp"
#include "shuttle/waveform.hpp"

using namespace shuttle;

namespace {

WaveformConfig make_config(double tau, WaveformMode mode, std::size_t periods = 4, double T = 20.0, double dt = 0.1) {
    WaveformConfig cfg;
    cfg.amplitude = 0.1;
    cfg.v_bias = 0.02;
    cfg.mode = mode;
    cfg.rc = RCSchedule::from_tau_set({tau, tau, tau, tau}, 1e-12, T, std::vector<int>(periods, 0));
    cfg.grid = TimeGrid::within(static_cast<double>(periods) * T, dt);
    return cfg;
}

double stddev(const std::vector<double>& x) {
    double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double acc = 0.0;
    for (double v : x)
        acc += (v - m) * (v - m);
    return std::sqrt(acc / static_cast<double>(x.size()));
}

} // namespace

TEST(Tau, ForPeriod) {
    double T = 20.0;
    double R = T * 1e-9 / (constants::two_pi * 1e-12);
    EXPECT_NEAR(tau_for_period(R, 1e-12, T), 1.0, 1e-12);
    EXPECT_NEAR(tau_for_period(3183.0, 1e-12, 20.0), 1.0, 1e-3);
    EXPECT_THROW(tau_for_period(0.0, 1e-12, 20.0), DomainError);
}

TEST(Tau, LadderRoundTrip) {
    auto rc = RCSchedule::from_tau_set(default_tau_set, 1e-12, 50.0, {0, 1, 2, 3});
    for (std::size_t p = 0; p < 4; ++p)
        EXPECT_NEAR(rc.tau(p), default_tau_set[p], 1e-12);
}

TEST(Synthesize, AnalyticStartsAtLowRail) {
    auto cfg = make_config(1.0, WaveformMode::analytic);
    cfg.phase_offsets = {0.0, 0.5 * constants::pi, constants::pi, 1.5 * constants::pi};
    auto w = synthesize(cfg);
    EXPECT_NEAR(w.channels[0][0], cfg.v_bias - cfg.amplitude, 1e-15);
}

TEST(Synthesize, AnalyticRampBeforeHalfTurn) {
    double v = detail::analytic_ramp(0.5 - 1e-14, 1.0);
    EXPECT_NEAR(v, 1.0 - 2.0 * std::exp(-constants::pi), 1e-10);
    EXPECT_NEAR(v, 0.9136, 1e-4);
}

TEST(Synthesize, SmallTauIsSquareWave) {
    auto cfg = make_config(1e-3, WaveformMode::analytic, 2, 20.0, 0.1);
    cfg.phase_offsets = {0.0, 0.5 * constants::pi, constants::pi, 1.5 * constants::pi};
    auto w = synthesize(cfg);
    for (std::size_t i = 0; i < w.grid.n_samples; ++i) {
        double frac = std::fmod(w.grid.t(i) / 20.0, 1.0);
        double edge = std::min({frac, std::abs(frac - 0.5), 1.0 - frac});
        if (edge < 0.01)
            continue;
        double expect = cfg.v_bias + (frac < 0.5 ? cfg.amplitude : -cfg.amplitude);
        EXPECT_NEAR(w.channels[0][i], expect, 1e-9) << "t = " << w.grid.t(i);
    }
}

TEST(Synthesize, PeriodicWithConstantSequence) {
    auto cfg = make_config(0.8, WaveformMode::analytic, 4, 20.0, 0.1);
    auto w = synthesize(cfg);
    const std::size_t per = 200;
    for (std::size_t e = 0; e < 4; ++e)
        for (std::size_t i = 0; i + per < w.grid.n_samples; ++i)
            EXPECT_NEAR(w.channels[e][i + per], w.channels[e][i], 1e-12);
}

TEST(Synthesize, QuarterPeriodPhaseRelation) {
    for (auto mode : {WaveformMode::analytic, WaveformMode::continuous}) {
        auto cfg = make_config(1.2, mode, 4, 20.0, 0.1);
        auto w = synthesize(cfg);
        const std::size_t quarter = 50, per = 200;
        for (std::size_t e = 0; e + 1 < 4; ++e)
            for (std::size_t i = per; i + quarter < w.grid.n_samples; ++i)
                EXPECT_NEAR(w.channels[e + 1][i], w.channels[e][i + quarter], 1e-9);
    }
}

TEST(Synthesize, ContinuousApproachesAnalyticAsTauShrinks) {
    double prev = std::numeric_limits<double>::infinity();
    for (double tau : {1.0, 0.3, 0.1, 0.03}) {
        auto a = synthesize(make_config(tau, WaveformMode::analytic));
        auto c = synthesize(make_config(tau, WaveformMode::continuous));
        double dev = 0.0;
        for (std::size_t e = 0; e < 4; ++e)
            for (std::size_t i = 0; i < a.grid.n_samples; ++i) {
                dev = std::max(dev, std::abs(a.channels[e][i] - c.channels[e][i]));
                EXPECT_LE(c.channels[e][i], 0.02 + 0.1 + 1e-12);
                EXPECT_GE(c.channels[e][i], 0.02 - 0.1 - 1e-12);
            }
        // Once both agree to rounding there is nothing left to shrink.
        EXPECT_TRUE(dev < prev || dev < 1e-13) << tau << ": " << dev << " vs " << prev;
        prev = dev;
    }
    EXPECT_LT(prev, 1e-3 * 0.1 * 20);
}

TEST(Synthesize, ContinuousIsContinuousAcrossTauSwitch) {
    auto cfg = make_config(0.5, WaveformMode::continuous, 2, 20.0, 0.1);
    cfg.rc = RCSchedule::from_tau_set({0.5, 0.8, 1.2, 1.8}, 1e-12, 20.0, {0, 3});
    auto w = synthesize(cfg);
    // |dV/dt| <= 2A/tau * 2 pi/T for the fastest ramp
    const double max_step = 2.0 * cfg.amplitude / 0.5 * constants::two_pi / 20.0 * 0.1;
    for (std::size_t e = 0; e < 4; ++e)
        for (std::size_t i = 1; i < w.grid.n_samples; ++i)
            EXPECT_LE(std::abs(w.channels[e][i] - w.channels[e][i - 1]), max_step * (1 + 1e-9));
}

TEST(Synthesize, ShortSequenceIsConfigError) {
    auto cfg = make_config(1.0, WaveformMode::analytic, 2);
    cfg.rc.sequence = {0};
    EXPECT_THROW(synthesize(cfg), ConfigError);
    cfg.rc.sequence = {0, 4};
    EXPECT_THROW(synthesize(cfg), ConfigError);
}

TEST(Noise, FullBandStd) {
    const std::size_t n = 1u << 20;
    for (auto mode : {NoiseNormalization::fixed_std, NoiseNormalization::constant_density}) {
        auto x = band_limited_noise(n, 0.1, 0.0, 5e9, 2e-3, 42, mode);
        EXPECT_NEAR(stddev(x), 2e-3, 0.05 * 2e-3);
    }
}

TEST(Noise, FixedStdInNarrowBand) {
    auto x = band_limited_noise(1u << 20, 0.1, 1e7, 1e8, 1e-3, 3, NoiseNormalization::fixed_std);
    EXPECT_NEAR(stddev(x), 1e-3, 0.05e-3);
}

TEST(Noise, ConstantDensityScalesWithBandwidth) {
    auto x = band_limited_noise(1u << 20, 0.1, 0.0, 5e8, 1e-3, 3, NoiseNormalization::constant_density);
    EXPECT_NEAR(stddev(x), 1e-3 * std::sqrt(0.1), 0.05 * 1e-3 * std::sqrt(0.1));
}

TEST(Noise, OutOfBandSuppression) {
    const std::size_t n = 1u << 20;
    const double dt_s = 0.1e-9;
    auto x = band_limited_noise(n, 0.1, 1e6, 1e7, 1e-3, 11);
    spectral::cvec c(x.begin(), x.end());
    auto X = spectral::forward(c);
    double in = 0.0, out = 0.0;
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t k = 0; k < n; ++k) {
        double f = spectral::bin_frequency(k, n, dt_s);
        double p = std::norm(X[k]);
        if (f >= 1e6 && f <= 1e7) {
            in += p;
            ++n_in;
        } else {
            out += p;
            ++n_out;
        }
    }
    ASSERT_GT(n_in, 0u);
    double ratio_db = 10.0 * std::log10((in / n_in) / (out / n_out + 1e-300));
    EXPECT_GT(ratio_db, 40.0);
}

TEST(Noise, Deterministic) {
    auto a = band_limited_noise(4096, 0.1, 1e6, 1e9, 1e-3, 99);
    auto b = band_limited_noise(4096, 0.1, 1e6, 1e9, 1e-3, 99);
    auto c = band_limited_noise(4096, 0.1, 1e6, 1e9, 1e-3, 100);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
}

TEST(Noise, ZeroScaleIsIdentity) {
    auto w = synthesize(make_config(1.0, WaveformMode::continuous));
    NoiseSpec spec;
    spec.scale = 0.0;
    auto out = inject_noise(w, spec);
    for (std::size_t e = 0; e < 4; ++e)
        EXPECT_EQ(out.channels[e], w.channels[e]);
}

TEST(Noise, ChannelsIndependent) {
    auto w = synthesize(make_config(1.0, WaveformMode::continuous));
    NoiseSpec spec;
    spec.seed = 5;
    auto out = inject_noise(w, spec);
    std::vector<double> d0(w.grid.n_samples), d1(w.grid.n_samples);
    for (std::size_t i = 0; i < d0.size(); ++i) {
        d0[i] = out.channels[0][i] - w.channels[0][i];
        d1[i] = out.channels[1][i] - w.channels[1][i];
    }
    EXPECT_NE(d0, d1);
}

TEST(Noise, BandAboveNyquistRejected) {
    auto w = synthesize(make_config(1.0, WaveformMode::continuous));
    NoiseSpec spec;
    spec.f_max = 6e9;
    EXPECT_THROW(inject_noise(w, spec), DomainError);
    spec.f_max = 1e6;
    spec.f_min = 2e6;
    EXPECT_THROW(inject_noise(w, spec), DomainError);
}
