#pragma once

// Experiment drivers behind the CLI. Every driver writes its resolved config
// snapshot, the master seed, per-realisation and summary CSVs and SVG plots
// into an output directory, and returns the summary numbers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "shuttle/config.hpp"
#include "shuttle/io.hpp"
#include "shuttle/metrics.hpp"
#include "shuttle/optimizer.hpp"
#include "shuttle/pipeline.hpp"
#include "shuttle/seeding.hpp"
#include "shuttle/valley_map.hpp"

namespace shuttle {

namespace fs = std::filesystem;

// Stream tags for derive_seed, one per independent random stream.
namespace seed_tag {
inline constexpr std::uint64_t realization = 0x7265616cULL;
inline constexpr std::uint64_t dispersion = 0x64697370ULL;
inline constexpr std::uint64_t band = 0x62616e64ULL;
inline constexpr std::uint64_t ga = 0x6761ULL;
inline constexpr std::uint64_t held_out = 0x68656c64ULL;
inline constexpr std::uint64_t center = 0x63656e74ULL;
} // namespace seed_tag

inline ValleyMap resolve_map(const MapSource& src) {
    if (src.file) {
        if (!fs::exists(*src.file))
            throw Error("valley map file '" + *src.file + "' does not exist");
        return load_valley_map(*src.file);
    }
    return generate_valley_map(src.params);
}

inline void prepare_output(const fs::path& out, const RunConfig& cfg) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec)
        throw Error("cannot create output directory '" + out.string() + "': " + ec.message());
    io::write_text(out / "config.toml", snapshot_toml(cfg));
    io::write_text(out / "seed.txt", std::to_string(cfg.seed) + "\n");
}

/// Outcome of one realisation inside an ensemble; failures are kept, not dropped.
struct EnsembleEntry {
    std::uint64_t seed = 0;
    std::optional<RealizationResult> result;
    std::string error;
};

inline std::vector<EnsembleEntry> run_ensemble(const Scenario& sc, const ValleyMap& map, const Genome& genome,
                                               const std::vector<std::uint64_t>& seeds, std::size_t threads) {
    return parallel_map(seeds.size(), threads, [&](std::size_t k) {
        EnsembleEntry e;
        e.seed = seeds[k];
        try {
            e.result = run_realization(sc, map, genome, seeds[k]);
        } catch (const std::exception& ex) {
            e.error = ex.what();
        }
        return e;
    });
}

struct EnsembleStats {
    std::size_t n = 0;
    std::size_t failures = 0;
    double mean_purity = std::numeric_limits<double>::quiet_NaN();
    double sigma_purity = std::numeric_limits<double>::quiet_NaN();
    double mean_pv = std::numeric_limits<double>::quiet_NaN();
    /// Empty if every realisation failed.
    std::optional<FidelityReport> fidelity;
    /// F_i aligned with the entries (NaN for failures).
    std::vector<double> F;
};

inline EnsembleStats summarize(const std::vector<EnsembleEntry>& entries, double t_f, const PhysicalParams& params,
                               const std::vector<Mat4>* center_states = nullptr) {
    EnsembleStats s;
    s.n = entries.size();
    std::vector<double> P, pv;
    std::vector<Mat4> states;
    for (const auto& e : entries) {
        if (!e.result) {
            ++s.failures;
            continue;
        }
        P.push_back(e.result->spin_purity);
        if (std::isfinite(e.result->p_v))
            pv.push_back(e.result->p_v);
        states.push_back(e.result->final_state);
    }
    s.F.assign(entries.size(), std::numeric_limits<double>::quiet_NaN());
    if (states.empty())
        return s;
    s.mean_purity = std::accumulate(P.begin(), P.end(), 0.0) / static_cast<double>(P.size());
    s.sigma_purity = population_std<double>(P);
    if (!pv.empty())
        s.mean_pv = std::accumulate(pv.begin(), pv.end(), 0.0) / static_cast<double>(pv.size());
    s.fidelity = center_states && !center_states->empty() ? ensemble_fidelity(states, *center_states, t_f, params)
                                                          : ensemble_fidelity(states, t_f, params);
    std::size_t j = 0;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].result)
            s.F[i] = s.fidelity->F[j++];
    return s;
}

inline std::vector<std::uint64_t> stream_seeds(std::uint64_t master, std::uint64_t tag, std::size_t n,
                                               std::uint64_t sub = 0) {
    std::vector<std::uint64_t> s(n);
    for (std::size_t k = 0; k < n; ++k)
        s[k] = derive_seed(master, {tag, sub, k});
    return s;
}

inline Genome resolve_genome(const RunConfig& cfg) {
    const auto& sr = cfg.single;
    Genome g;
    if (sr.genome)
        g = *sr.genome;
    else if (sr.genome_file)
        g = io::read_genome(*sr.genome_file);
    else
        g = cfg.scenario.constant_genome(sr.constant);
    validate_genome(g, cfg.scenario.n_periods());
    return g;
}

// ---------------------------------------------------------------------------

struct SingleRunResult {
    RealizationResult result;
    std::uint64_t noise_seed = 0;
    double fidelity = 0.0;
};

inline SingleRunResult single_run(const RunConfig& cfg, const fs::path& out) {
    cfg.validate();
    prepare_output(out, cfg);
    const auto& sc = cfg.scenario;
    auto map = resolve_map(cfg.map);
    auto genome = resolve_genome(cfg);

    SingleRunResult r;
    r.noise_seed = derive_seed(cfg.seed, {seed_tag::realization, cfg.single.realization});
    RealizationTrace trace;
    r.result = run_realization(sc, map, genome, r.noise_seed, cfg.single.trace ? &trace : nullptr);
    std::vector<Mat4> one{r.result.final_state};
    r.fidelity = ensemble_fidelity(one, sc.final_time(), sc.physics).F_mean;

    io::write_genome(out / "genome.txt", genome);
    io::CsvTable summary({"spin_purity", "p_v", "fidelity", "x_final_nm", "t_final_ns", "noise_seed",
                          "degenerate_evaluations"});
    summary.add_row({r.result.spin_purity, r.result.p_v, r.fidelity, r.result.x_final, sc.final_time(),
                     io::format_cell(std::to_string(r.noise_seed)),
                     static_cast<long long>(r.result.degenerate_evaluations)});
    summary.write(out / "summary.csv");

    if (cfg.single.trace) {
        io::waveform_table(trace.waveforms).write(out / "waveforms.csv");
        io::trajectory_table(trace.trajectory).write(out / "trajectory.csv");
        io::state_table(trace.trajectory, map, trace.states).write(out / "states.csv");

        const auto& tr = trace.trajectory;
        std::vector<double> t(tr.x.size()), P(trace.states.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = tr.grid.t(i);
        for (std::size_t i = 0; i < P.size(); ++i)
            P[i] = 1.0 - spin_purity(trace.states[i]);
        io::Chart traj{"Dot trajectory", "t (ns)", "x (nm)", false, false, {{"x_qd", t, tr.x, {}, false, true}}};
        io::write_svg(out / "trajectory.svg", traj);
        io::Chart pur{"Spin purity loss", "t (ns)", "1 - P_s", false, false, {{"1 - P_s", t, P, {}, false, true}}};
        io::write_svg(out / "purity.svg", pur);
    }
    return r;
}

// ---------------------------------------------------------------------------

struct DispersionRow {
    double v_avg = 0.0;
    EnsembleStats stats;
};

inline std::vector<DispersionRow> run_dispersion_study(const RunConfig& cfg, const fs::path& out) {
    cfg.validate();
    prepare_output(out, cfg);
    auto map = resolve_map(cfg.map);
    const auto& ds = cfg.dispersion;
    // Paired seeds: realisation k uses the same noise seed at every velocity.
    auto seeds = stream_seeds(cfg.seed, seed_tag::dispersion, std::max<std::size_t>(ds.n_noise, 1));

    io::CsvTable per({"v_avg", "k", "seed", "spin_purity", "p_v", "fidelity", "x_final_nm", "error"});
    io::CsvTable sum({"v_avg", "n", "failures", "mean_purity", "sigma_purity", "mean_fidelity", "sigma_fidelity",
                      "mean_p_v"});
    std::vector<DispersionRow> rows;
    for (double v : ds.velocities) {
        Scenario sc = cfg.scenario;
        sc.v_avg = v;
        sc.validate();
        sc.noise.validate(sc.grid());
        auto genome = sc.constant_genome(ds.baseline);
        validate_genome(genome, sc.n_periods());
        auto used = sc.noisy() ? seeds : std::vector<std::uint64_t>(seeds.begin(), seeds.begin() + 1);
        auto entries = run_ensemble(sc, map, genome, used, cfg.threads);
        if (!sc.noisy())
            entries.assign(seeds.size(), entries.front());
        DispersionRow row{v, summarize(entries, sc.final_time(), sc.physics)};
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const auto& e = entries[k];
            double nan = std::numeric_limits<double>::quiet_NaN();
            per.add_row({v, static_cast<long long>(k), std::to_string(seeds[k]), e.result ? e.result->spin_purity : nan,
                         e.result ? e.result->p_v : nan, row.stats.F[k], e.result ? e.result->x_final : nan, e.error});
        }
        const auto& st = row.stats;
        double nan = std::numeric_limits<double>::quiet_NaN();
        sum.add_row({v, static_cast<long long>(st.n), static_cast<long long>(st.failures), st.mean_purity,
                     st.sigma_purity, st.fidelity ? st.fidelity->F_mean : nan, st.fidelity ? st.fidelity->sigma_F : nan,
                     st.mean_pv});
        rows.push_back(std::move(row));
    }
    per.write(out / "realizations.csv");
    sum.write(out / "summary.csv");

    io::Series sf{"sigma_F", {}, {}, {}, true, true}, sp{"sigma_P", {}, {}, {}, true, true};
    for (const auto& r : rows) {
        sf.x.push_back(r.v_avg);
        sp.x.push_back(r.v_avg);
        sf.y.push_back(r.stats.fidelity ? r.stats.fidelity->sigma_F : std::numeric_limits<double>::quiet_NaN());
        sp.y.push_back(r.stats.sigma_purity);
    }
    io::write_svg(out / "dispersion.svg",
                  {"Fidelity dispersion vs velocity", "v_avg (m/s)", "standard deviation", false, true, {sf, sp}});
    return rows;
}

// ---------------------------------------------------------------------------

struct BandRow {
    double v_avg = 0.0;
    double f_min = 0.0;
    double f_max = 0.0;
    EnsembleStats stats;
};

inline std::vector<BandRow> run_noise_band_sweep(const RunConfig& cfg, const fs::path& out) {
    cfg.validate();
    prepare_output(out, cfg);
    const auto& bs = cfg.band_sweep;
    io::CsvTable per({"v_avg", "f_min_Hz", "f_max_Hz", "k", "seed", "spin_purity", "error"});
    io::CsvTable sum({"v_avg", "f_min_Hz", "f_max_Hz", "n", "failures", "mean_purity", "sigma_purity"});
    std::vector<BandRow> rows;
    if (bs.bands.empty() || bs.velocities.empty()) {
        per.write(out / "realizations.csv");
        sum.write(out / "summary.csv");
        io::write_svg(out / "band_sweep.svg", {"Purity dispersion per noise band", "band centre (Hz)", "sigma_P", true, true, {}});
        return rows;
    }
    auto map = resolve_map(cfg.map);
    auto seeds = stream_seeds(cfg.seed, seed_tag::band, std::max<std::size_t>(bs.n_noise, 1));
    for (double v : bs.velocities) {
        for (auto [lo, hi] : bs.bands) {
            Scenario sc = cfg.scenario;
            sc.v_avg = v;
            sc.noise.f_min = lo;
            sc.noise.f_max = hi;
            sc.validate();
            sc.noise.validate(sc.grid());
            auto genome = sc.constant_genome(bs.baseline);
            validate_genome(genome, sc.n_periods());
            auto entries = run_ensemble(sc, map, genome, seeds, cfg.threads);
            BandRow row{v, lo, hi, summarize(entries, sc.final_time(), sc.physics)};
            for (std::size_t k = 0; k < entries.size(); ++k) {
                const auto& e = entries[k];
                per.add_row({v, lo, hi, static_cast<long long>(k), std::to_string(seeds[k]),
                             e.result ? e.result->spin_purity : std::numeric_limits<double>::quiet_NaN(), e.error});
            }
            sum.add_row({v, lo, hi, static_cast<long long>(row.stats.n), static_cast<long long>(row.stats.failures),
                         row.stats.mean_purity, row.stats.sigma_purity});
            rows.push_back(std::move(row));
        }
    }
    per.write(out / "realizations.csv");
    sum.write(out / "summary.csv");

    io::Chart chart{"Purity dispersion per noise band", "band centre (Hz, geometric)", "sigma_P", true, true, {}};
    for (double v : bs.velocities) {
        io::Series s{io::format_number(v) + " m/s", {}, {}, {}, true, true};
        for (const auto& r : rows)
            if (r.v_avg == v) {
                s.x.push_back(std::sqrt(std::max(r.f_min, 1.0) * r.f_max));
                s.y.push_back(r.stats.sigma_purity);
            }
        chart.series.push_back(std::move(s));
    }
    io::write_svg(out / "band_sweep.svg", chart);
    return rows;
}

// ---------------------------------------------------------------------------

struct ProtocolStats {
    std::string label;
    Genome genome;
    std::vector<EnsembleEntry> entries;
    EnsembleStats stats;
    /// F_i against a center built from a second, disjoint seed set.
    std::vector<double> F_held_out;
    double mean_infidelity = std::numeric_limits<double>::quiet_NaN();
    double mean_infidelity_held_out = std::numeric_limits<double>::quiet_NaN();
    double frac_below = 0.0;
    double frac_below_held_out = 0.0;
    std::size_t below = 0;
    std::size_t below_held_out = 0;
};

struct MapBenchmark {
    std::uint64_t map_seed = 0;
    std::string error;
    std::optional<GAResult> ga;
    /// optimized first, then one entry per constant baseline.
    std::vector<ProtocolStats> protocols;
};

struct OptimizeBenchmarkResult {
    std::vector<MapBenchmark> maps;
    /// Aggregate over all maps, per protocol label: {runs, runs below threshold}.
    std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> aggregate;

    double aggregate_fraction(const std::string& label) const {
        for (const auto& [l, c] : aggregate)
            if (l == label)
                return c.first ? static_cast<double>(c.second) / static_cast<double>(c.first) : 0.0;
        return 0.0;
    }
};

inline std::string baseline_label(int index) { return "constant-" + std::to_string(index); }

inline ProtocolStats evaluate_protocol(const std::string& label, const Genome& genome, const Scenario& sc,
                                       const ValleyMap& map, const std::vector<std::uint64_t>& seeds,
                                       const std::vector<std::uint64_t>& center_seeds, double threshold,
                                       std::size_t threads) {
    ProtocolStats p;
    p.label = label;
    p.genome = genome;
    p.entries = run_ensemble(sc, map, genome, seeds, threads);
    const auto& entries = p.entries;
    p.stats = summarize(entries, sc.final_time(), sc.physics);

    std::vector<Mat4> center;
    for (const auto& e : run_ensemble(sc, map, genome, center_seeds, threads))
        if (e.result)
            center.push_back(e.result->final_state);
    auto held = summarize(entries, sc.final_time(), sc.physics, &center);
    p.F_held_out = held.F;

    auto stats_of = [&](const std::vector<double>& F, double& mean_inf, std::size_t& below, double& frac) {
        double acc = 0.0;
        std::size_t ok = 0;
        below = 0;
        for (double f : F) {
            if (!std::isfinite(f))
                continue;
            acc += 1.0 - f;
            ++ok;
            if (1.0 - f <= threshold)
                ++below;
        }
        mean_inf = ok ? acc / static_cast<double>(ok) : std::numeric_limits<double>::quiet_NaN();
        frac = F.empty() ? 0.0 : static_cast<double>(below) / static_cast<double>(F.size());
    };
    stats_of(p.stats.F, p.mean_infidelity, p.below, p.frac_below);
    stats_of(p.F_held_out, p.mean_infidelity_held_out, p.below_held_out, p.frac_below_held_out);
    return p;
}

inline OptimizeBenchmarkResult run_optimize_benchmark(const RunConfig& cfg, const fs::path& out) {
    cfg.validate();
    prepare_output(out, cfg);
    const auto& os = cfg.optimize;
    if (os.map_seeds.empty())
        throw ConfigError("optimize benchmark needs at least one map seed");
    for (int b : os.baselines)
        if (b < 0 || b >= n_alleles)
            throw ConfigError("baseline index " + std::to_string(b) + " outside {0,1,2,3}");
    if (cfg.map.file)
        throw ConfigError("the optimize benchmark generates its maps from optimize.map_seeds; remove map.file");
    const Scenario& sc = cfg.scenario;
    const std::size_t n_eval = std::max<std::size_t>(os.n_eval, 1);
    // One held-out seed set shared by every protocol and map; disjoint from the GA's seeds.
    auto held_seeds = stream_seeds(cfg.seed, seed_tag::held_out, sc.noisy() ? n_eval : 1);
    auto center_seeds = stream_seeds(cfg.seed, seed_tag::center, sc.noisy() ? n_eval : 1);

    OptimizeBenchmarkResult res;
    io::CsvTable per({"map_seed", "protocol", "k", "seed", "spin_purity", "p_v", "fidelity", "fidelity_held_out", "error"});
    io::CsvTable sum({"map_seed", "protocol", "n", "failures", "mean_purity", "sigma_purity", "mean_infidelity",
                      "sigma_fidelity", "frac_below_threshold", "mean_infidelity_held_out", "frac_below_threshold_held_out",
                      "ga_best_J", "error"});
    io::CsvTable hist({"map_seed", "generation", "best_J", "mean_J", "wall_time_s"});

    for (std::size_t mi = 0; mi < os.map_seeds.size(); ++mi) {
        MapBenchmark mb;
        mb.map_seed = os.map_seeds[mi];
        try {
            ValleyMapParams mp = cfg.map.params;
            mp.seed = mb.map_seed;
            auto map = generate_valley_map(mp);

            GAConfig ga = cfg.ga;
            ga.seed = derive_seed(cfg.seed, {seed_tag::ga, mi});
            ga.threads = cfg.threads;
            mb.ga = optimize_schedule(ga, sc, map);
            io::write_genome(out / ("best_genome_map" + std::to_string(mb.map_seed) + ".txt"), mb.ga->best);
            for (const auto& h : mb.ga->history)
                hist.add_row({std::to_string(mb.map_seed), static_cast<long long>(h.generation), h.best_J, h.mean_J,
                              h.wall_time_s});

            mb.protocols.push_back(evaluate_protocol("optimized", mb.ga->best, sc, map, held_seeds, center_seeds,
                                                     os.threshold, cfg.threads));
            for (int b : os.baselines)
                mb.protocols.push_back(evaluate_protocol(baseline_label(b), sc.constant_genome(b), sc, map, held_seeds,
                                                         center_seeds, os.threshold, cfg.threads));
        } catch (const std::exception& e) {
            mb.error = e.what();
            std::cerr << "map " << mb.map_seed << ": " << e.what() << "\n";
        }

        double nan = std::numeric_limits<double>::quiet_NaN();
        if (!mb.error.empty() && mb.protocols.empty())
            sum.add_row({std::to_string(mb.map_seed), std::string("optimized"), 0LL, 0LL, nan, nan, nan, nan, nan, nan,
                         nan, nan, mb.error});
        for (const auto& p : mb.protocols) {
            const auto& st = p.stats;
            sum.add_row({std::to_string(mb.map_seed), p.label, static_cast<long long>(st.n),
                         static_cast<long long>(st.failures), st.mean_purity, st.sigma_purity, p.mean_infidelity,
                         st.fidelity ? st.fidelity->sigma_F : nan, p.frac_below, p.mean_infidelity_held_out,
                         p.frac_below_held_out, p.label == "optimized" && mb.ga ? mb.ga->best_J : nan, mb.error});
            for (std::size_t k = 0; k < p.entries.size(); ++k) {
                const auto& e = p.entries[k];
                per.add_row({std::to_string(mb.map_seed), p.label, static_cast<long long>(k), std::to_string(e.seed),
                             e.result ? e.result->spin_purity : nan, e.result ? e.result->p_v : nan, st.F[k],
                             p.F_held_out[k], e.error});
            }
        }
        res.maps.push_back(std::move(mb));
    }

    std::vector<std::string> labels{"optimized"};
    for (int b : os.baselines)
        labels.push_back(baseline_label(b));
    for (const auto& l : labels) {
        std::size_t runs = 0, below = 0;
        for (const auto& m : res.maps)
            for (const auto& p : m.protocols)
                if (p.label == l) {
                    runs += p.stats.n;
                    below += p.below;
                }
        res.aggregate.push_back({l, {runs, below}});
        sum.add_row({std::string("all"), l, static_cast<long long>(runs), 0LL, std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::quiet_NaN(),
                     runs ? static_cast<double>(below) / static_cast<double>(runs) : 0.0,
                     std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN(),
                     std::numeric_limits<double>::quiet_NaN(), std::string()});
    }

    per.write(out / "realizations.csv");
    sum.write(out / "summary.csv");
    hist.write(out / "history.csv");

    io::Chart chart{"Mean infidelity per map", "map seed", "1 - F", false, true, {}};
    for (const auto& l : labels) {
        io::Series s{l, {}, {}, {}, true, false};
        for (const auto& m : res.maps)
            for (const auto& p : m.protocols)
                if (p.label == l) {
                    s.x.push_back(static_cast<double>(m.map_seed));
                    s.y.push_back(p.mean_infidelity);
                    s.err.push_back(p.stats.fidelity ? p.stats.fidelity->sigma_F : 0.0);
                }
        chart.series.push_back(std::move(s));
    }
    chart.series.front().lines = true;
    io::write_svg(out / "optimize.svg", chart);

    io::Chart conv{"GA convergence", "generation", "1 - best J", false, true, {}};
    for (const auto& m : res.maps) {
        if (!m.ga)
            continue;
        io::Series s{"map " + std::to_string(m.map_seed), {}, {}, {}, false, true};
        for (const auto& h : m.ga->history) {
            s.x.push_back(static_cast<double>(h.generation));
            s.y.push_back(1.0 - h.best_J);
        }
        conv.series.push_back(std::move(s));
    }
    io::write_svg(out / "convergence.svg", conv);
    return res;
}

} // namespace shuttle
