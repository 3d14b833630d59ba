#include <gtest/gtest.h>

#include <filesystem>

#include "shuttle/experiments.hpp"

using namespace shuttle;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("shuttle_exp_" + name);
    fs::remove_all(p);
    return p;
}

// Three periods over a short map keep these runs fast.
RunConfig small_config() {
    RunConfig cfg;
    cfg.scenario.geometry.distance = 1200.0;
    cfg.map.params.extent = 1400.0;
    cfg.map.params.seed = 3;
    cfg.dispersion.velocities = {5.0, 20.0};
    cfg.dispersion.n_noise = 6;
    cfg.band_sweep.velocities = {20.0};
    cfg.band_sweep.bands = {{1e6, 1e7}};
    cfg.band_sweep.n_noise = 4;
    cfg.optimize.map_seeds = {1};
    cfg.optimize.n_eval = 4;
    cfg.optimize.baselines = {0, 3};
    cfg.ga.generations = 2;
    cfg.ga.population = 4;
    cfg.ga.n_noise = 2;
    return cfg;
}

} // namespace

TEST(SingleRun, FlatMapNoiseFreeKeepsPurity) {
    auto cfg = small_config();
    cfg.scenario.geometry.distance = 10000.0;
    cfg.map.params.extent = 10200.0;
    cfg.map.params.sigma = 0.0;
    cfg.scenario.noise.scale = 0.0;
    auto out = scratch("single_flat");
    auto r = single_run(cfg, out);
    EXPECT_GE(r.result.spin_purity, 1.0 - 1e-8);
    EXPECT_NEAR(r.result.x_final, 10000.0, 1e-6);
    for (auto f : {"config.toml", "seed.txt", "genome.txt", "summary.csv", "waveforms.csv", "trajectory.csv",
                   "states.csv", "trajectory.svg", "purity.svg"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    fs::remove_all(out);
}

TEST(SingleRun, Deterministic) {
    auto cfg = small_config();
    cfg.single.genome = Genome{2, 0, 1};
    auto a = scratch("single_a"), b = scratch("single_b");
    single_run(cfg, a);
    single_run(cfg, b);
    for (auto f : {"summary.csv", "states.csv", "waveforms.csv", "config.toml"})
        EXPECT_EQ(io::read_text(a / f), io::read_text(b / f)) << f;
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(SingleRun, MissingMapNamesPath) {
    auto cfg = small_config();
    cfg.map.file = "/nonexistent/valley.csv";
    try {
        single_run(cfg, scratch("single_missing"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/valley.csv"), std::string::npos);
    }
}

TEST(SingleRun, WrongGenomeLength) {
    auto cfg = small_config();
    cfg.single.genome = Genome{0, 1};
    EXPECT_THROW(single_run(cfg, scratch("single_len")), ConfigError);
}

TEST(Pipeline, StageTaggedErrors) {
    Scenario sc;
    sc.geometry.distance = 1200.0;
    ValleyMapParams mp;
    mp.extent = 500.0;
    auto short_map = generate_valley_map(mp);
    try {
        run_realization(sc, short_map, Genome{0, 0, 0}, 0);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "dynamics");
    }
}

TEST(Ensemble, FailuresAreRecorded) {
    auto cfg = small_config();
    cfg.map.params.extent = 500.0;
    auto map = resolve_map(cfg.map);
    auto entries = run_ensemble(cfg.scenario, map, Genome{0, 0, 0}, {1, 2, 3}, 1);
    ASSERT_EQ(entries.size(), 3u);
    for (const auto& e : entries) {
        EXPECT_FALSE(e.result);
        EXPECT_FALSE(e.error.empty());
    }
    auto s = summarize(entries, cfg.scenario.final_time(), cfg.scenario.physics);
    EXPECT_EQ(s.failures, 3u);
    EXPECT_FALSE(s.fidelity);
}

TEST(Dispersion, NoiseFreeHasNoSpread) {
    auto cfg = small_config();
    cfg.scenario.noise.scale = 0.0;
    auto out = scratch("disp_clean");
    auto rows = run_dispersion_study(cfg, out);
    ASSERT_EQ(rows.size(), 2u);
    for (const auto& r : rows) {
        ASSERT_TRUE(r.stats.fidelity);
        EXPECT_LT(r.stats.fidelity->sigma_F, 1e-8);
        EXPECT_EQ(r.stats.n, 6u);
    }
    for (auto f : {"config.toml", "seed.txt", "realizations.csv", "summary.csv", "dispersion.svg"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    fs::remove_all(out);
}

TEST(Dispersion, MoreNoiseMoreSpread) {
    auto cfg = small_config();
    cfg.dispersion.velocities = {5.0};
    cfg.dispersion.n_noise = 20;
    cfg.scenario.noise.scale = 0.5;
    auto lo = run_dispersion_study(cfg, scratch("disp_lo"));
    cfg.scenario.noise.scale = 1.0;
    auto hi = run_dispersion_study(cfg, scratch("disp_hi"));
    EXPECT_GT(hi[0].stats.fidelity->sigma_F, lo[0].stats.fidelity->sigma_F);
    fs::remove_all(scratch("disp_lo"));
    fs::remove_all(scratch("disp_hi"));
}

TEST(BandSweep, EmptyBandList) {
    auto cfg = small_config();
    cfg.band_sweep.bands.clear();
    auto out = scratch("band_empty");
    auto rows = run_noise_band_sweep(cfg, out);
    EXPECT_TRUE(rows.empty());
    EXPECT_EQ(io::read_text(out / "summary.csv"), "v_avg,f_min_Hz,f_max_Hz,n,failures,mean_purity,sigma_purity\n");
    fs::remove_all(out);
}

TEST(BandSweep, OneBand) {
    auto cfg = small_config();
    auto out = scratch("band_one");
    auto rows = run_noise_band_sweep(cfg, out);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].stats.failures, 0u);
    EXPECT_GT(rows[0].stats.sigma_purity, 0.0);
    EXPECT_TRUE(fs::exists(out / "band_sweep.svg"));
    fs::remove_all(out);
}

TEST(Optimize, FlatMapGivesNoAdvantage) {
    auto cfg = small_config();
    cfg.map.params.sigma = 0.0;
    cfg.optimize.n_eval = 6;
    auto out = scratch("opt_flat");
    auto res = run_optimize_benchmark(cfg, out);
    ASSERT_EQ(res.maps.size(), 1u);
    const auto& m = res.maps[0];
    ASSERT_TRUE(m.error.empty()) << m.error;
    ASSERT_EQ(m.protocols.size(), 3u);
    const auto& opt = m.protocols[0].stats;
    for (std::size_t b = 1; b < m.protocols.size(); ++b) {
        const auto& base = m.protocols[b].stats;
        double se = std::sqrt((opt.fidelity->sigma_F * opt.fidelity->sigma_F +
                               base.fidelity->sigma_F * base.fidelity->sigma_F) /
                              static_cast<double>(opt.n));
        EXPECT_LT(std::abs(opt.fidelity->F_mean - base.fidelity->F_mean), 2.0 * se + 1e-9);
    }
    for (auto f : {"config.toml", "seed.txt", "realizations.csv", "summary.csv", "history.csv", "optimize.svg",
                   "convergence.svg", "best_genome_map1.txt"})
        EXPECT_TRUE(fs::exists(out / f)) << f;
    fs::remove_all(out);
}

TEST(Optimize, RejectsMapFile) {
    auto cfg = small_config();
    cfg.map.file = "some.csv";
    EXPECT_THROW(run_optimize_benchmark(cfg, scratch("opt_file")), ConfigError);
}
