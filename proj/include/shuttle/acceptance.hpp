#pragma once

// End-to-end acceptance checks, shared by the `selftest` subcommand and the
// acceptance test binary. Each check returns a single pass/fail verdict with a
// one-line summary of the measured quantities. Tolerances are fixed here.

#include <chrono>
#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "shuttle/config.hpp"
#include "shuttle/estimators.hpp"
#include "shuttle/experiments.hpp"
#include "shuttle/io.hpp"
#include "shuttle/optimizer.hpp"
#include "shuttle/pipeline.hpp"

namespace shuttle::acceptance {

struct Options {
    std::size_t threads = 1;
    std::filesystem::path work_dir = std::filesystem::temp_directory_path() / "shuttle-acceptance";
};

struct Verdict {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

namespace detail {

inline std::string sci(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

// Collects sub-checks; the criterion passes only if all of them do.
class Checks {
public:
    void expect(bool ok, const std::string& what) {
        all_ &= ok;
        if (!notes_.empty())
            notes_ += "; ";
        notes_ += (ok ? "" : "FAILED ") + what;
    }
    bool ok() const { return all_; }
    const std::string& notes() const { return notes_; }

private:
    bool all_ = true;
    std::string notes_;
};

inline bool same_to_decimals(double a, double b, int decimals) {
    double s = std::pow(10.0, decimals);
    return std::llround(a * s) == std::llround(b * s);
}

} // namespace detail

// 1. Arithmetic: frequencies, shuttle durations, surface-code budget, power.
inline Verdict arithmetic(const Options&) {
    detail::Checks c;
    auto f = shuttling_frequency(20.0, 100.0);
    c.expect(std::abs(f.f_mhz - 50.0) < 1e-12 && std::abs(f.f_clk_mhz - 200.0) < 1e-12,
             "f = " + io::format_number(f.f_mhz) + " MHz, f_clk = " + io::format_number(f.f_clk_mhz) + " MHz");
    const double v[4] = {5, 10, 15, 20};
    const double table[4] = {2.00, 1.00, 0.67, 0.50};
    bool rows = true;
    for (int i = 0; i < 4; ++i)
        rows &= detail::same_to_decimals(shuttle_duration(10000.0, v[i]), table[i], 2);
    c.expect(rows, "t_shuttle rows 2.00/1.00/0.67/0.50 us");
    auto b = surface_code_budget({0.5, 0.2, 0.08, 10.0});
    c.expect(std::abs(b.t_sc - 24.44) < 1e-9 && detail::same_to_decimals(b.duty_cycle, 0.4501, 4),
             "t_SC = " + io::format_number(b.t_sc) + " us, D = " + io::format_number(b.duty_cycle));
    double p = power_estimate(1e-12, 0.2, 50e6);
    c.expect(std::abs(p - 2.0) < 1e-12, "P = " + io::format_number(p) + " uW");
    return {1, "arithmetic exactness", c.ok(), c.notes()};
}

// 2. Integrator oracles: relaxation, exact exponential, invariants.
inline Verdict integrator_oracles(const Options& opt) {
    detail::Checks c;

    // (a) excited-valley decay, static dot.
    {
        PhysicalParams p;
        p.T_1v = 100.0;
        const cplx delta(12.0, 5.0);
        auto es = local_valley_eigensystem(delta.real(), delta.imag());
        Vec2 up(1.0, 0.0);
        Eigen::Vector4cd psi;
        for (int v = 0; v < 2; ++v)
            for (int k = 0; k < 2; ++k)
                psi(2 * v + k) = es.excited(v) * up(k);
        Mat4 rho0 = psi * psi.adjoint();
        auto grid = TimeGrid::covering(100.0, 0.1);
        auto res = propagate(rho0, grid, [&](double) { return delta; }, p);
        double pe = excited_valley_population(res.final_state, delta.real(), delta.imag());
        double rel = std::abs(pe - std::exp(-1.0)) / std::exp(-1.0);
        c.expect(rel < 1e-6, "decay rel. error " + detail::sci(rel));
    }

    // (b) coherent evolution under constant H against the matrix exponential.
    {
        PhysicalParams p;
        p.T_1v = std::numeric_limits<double>::infinity();
        p.delta_g_over_g = 0.05;
        p.B_z = 0.2;
        const cplx delta(3.0, -4.0);
        std::mt19937_64 rng(11);
        std::normal_distribution<double> n(0.0, 1.0);
        Eigen::Vector4cd psi;
        for (int k = 0; k < 4; ++k)
            psi(k) = cplx(n(rng), n(rng));
        psi.normalize();
        Mat4 rho0 = psi * psi.adjoint();
        TimeGrid grid{0.1, 101};
        PropagationOptions po;
        po.max_substep_rotation = 0.0;
        auto res = propagate(rho0, grid, [&](double) { return delta; }, p, po);
        Mat4 H = build_hamiltonian(delta.real(), delta.imag(), p).total();
        Mat4 U = (cplx(0.0, -grid.duration() / p.hbar) * H).exp();
        double err = (res.final_state - U * rho0 * U.adjoint()).cwiseAbs().maxCoeff();
        c.expect(err < 1e-8, "100-step unitary error " + detail::sci(err));
    }

    // (c) invariants over randomised 2 us shuttles (map, schedule, noise).
    {
        Scenario sc;
        sc.v_avg = 5.0;
        sc.noise = NoiseSpec{};
        sc.noise.scale = 0.1;
        std::size_t failures = 0;
        std::vector<PropagationDiagnostics> diags(100);
        auto errors = parallel_map(100, opt.threads, [&](std::size_t k) -> std::string {
            ValleyMapParams mp;
            mp.seed = 1000 + k;
            auto map = generate_valley_map(mp);
            Genome g(sc.n_periods());
            std::mt19937_64 local(derive_seed(2024, {k}));
            for (auto& a : g)
                a = static_cast<int>(local() % 4);
            try {
                auto w = inject_noise(synthesize(sc.waveform_config(g)), [&] {
                    NoiseSpec ns = sc.noise;
                    ns.seed = derive_seed(77, {k});
                    return ns;
                }());
                auto traj = extract_trajectory(w, default_phase_offsets, sc.geometry.spatial_period());
                auto res = propagate(default_initial_state(map), traj, map, sc.physics, sc.propagation);
                diags[k] = res.diagnostics;
                auto chk = check_state(res.final_state);
                diags[k].min_eigenvalue = std::min(diags[k].min_eigenvalue, chk.min_eigenvalue);
            } catch (const std::exception& e) {
                return e.what();
            }
            return {};
        });
        double tr = 0, he = 0, mn = 0;
        for (std::size_t k = 0; k < 100; ++k) {
            if (!errors[k].empty())
                ++failures;
            tr = std::max(tr, diags[k].max_trace_error);
            he = std::max(he, diags[k].max_hermiticity_error);
            mn = std::min(mn, diags[k].min_eigenvalue);
        }
        c.expect(failures == 0 && tr <= 1e-8 && he <= 1e-8 && mn >= -1e-6,
                 "100 runs: " + std::to_string(failures) + " failures, max trace err " + detail::sci(tr) +
                     ", max herm err " + detail::sci(he) + ", min eig " + detail::sci(mn));
    }
    return {2, "integrator physics oracles", c.ok(), c.notes()};
}

// 3. Phasor trajectory exactness and the potential-minimum oracle.
inline Verdict trajectory_exactness(const Options&) {
    detail::Checks c;
    const double T = 20.0, A = 0.1;
    GeometryParams geo;
    geo.distance = 4000.0;
    const double L = geo.spatial_period();
    ElectrodeWaveforms w;
    w.grid = TimeGrid::covering(10 * T, 0.1);
    for (std::size_t e = 0; e < 4; ++e) {
        w.channels[e].resize(w.grid.n_samples);
        for (std::size_t i = 0; i < w.grid.n_samples; ++i)
            w.channels[e][i] = -A * std::cos(constants::two_pi * w.grid.t(i) / T + default_phase_offsets[e]);
    }
    auto tr = extract_trajectory(w, default_phase_offsets, L);
    double dev = 0.0;
    for (std::size_t i = 0; i < tr.x.size(); ++i)
        dev = std::max(dev, std::abs(tr.x[i] - L * w.grid.t(i) / T));
    c.expect(dev < 1e-6 * L, "phasor max |x - L t/T| = " + detail::sci(dev) + " nm");

    auto xo = potential_minimum_oracle(w, geo);
    double od = 0.0;
    for (std::size_t i = 0; i < xo.size(); ++i)
        od = std::max(od, std::abs(xo[i] - tr.x[i]));
    c.expect(od < 5.0, "oracle max deviation " + io::format_number(std::round(od * 1000) / 1000) + " nm");
    return {3, "trajectory exactness", c.ok(), c.notes()};
}

// 4. Uniform valley splitting: coherence is preserved.
inline Verdict constant_valley_coherence(const Options& opt) {
    detail::Checks c;
    Scenario sc;
    ValleyMapParams mp;
    mp.sigma = 0.0;
    auto map = generate_valley_map(mp);
    auto entries = run_ensemble(sc, map, sc.constant_genome(0), std::vector<std::uint64_t>(5, 0), opt.threads);
    auto st = summarize(entries, sc.final_time(), sc.physics);
    double worst_p = 0.0;
    for (const auto& e : entries)
        worst_p = std::max(worst_p, e.result ? 1.0 - e.result->spin_purity : 1.0);
    double inf = st.fidelity ? 1.0 - st.fidelity->F_mean : 1.0;
    c.expect(st.failures == 0 && worst_p < 1e-8, "1 - P_s = " + detail::sci(worst_p));
    c.expect(inf < 1e-8, "1 - F = " + detail::sci(inf));
    return {4, "constant-valley coherence", c.ok(), c.notes()};
}

/// Five-period map with uniform splitting except for one narrow crossing
/// where Delta_r changes sign, so the valley axis turns by pi over ~`width` nm.
inline ValleyMap notch_map(double x_notch = 1000.0, double width = 6.0) {
    ValleyMap m;
    m.x0 = -100.0;
    m.dx = 0.5;
    std::size_t n = 4401;
    m.delta_r.resize(n);
    m.delta_i.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = m.x_at(i);
        double s = std::tanh((x - x_notch) / width);
        m.delta_r[i] = 20.0 * s;
        m.delta_i[i] = 1.5;
    }
    m.meta.mu_r = 0.0;
    m.meta.mu_i = 1.5;
    m.meta.sigma = 0.0;
    m.meta.corr_length = width;
    m.meta.dx = m.dx;
    m.meta.x_start = m.x0;
    m.meta.extent = static_cast<double>(n - 1) * m.dx;
    return m;
}

inline Scenario notch_scenario() {
    Scenario sc;
    sc.geometry.distance = 2000.0;
    return sc;
}

/// Exhaustive optimum over all 4^5 schedules on the notch map.
inline std::pair<Genome, double> exhaustive_notch_optimum(std::size_t threads) {
    auto sc = notch_scenario();
    auto map = notch_map();
    auto J = parallel_map(1024, threads, [&](std::size_t code) {
        Genome g(5);
        for (std::size_t i = 0; i < 5; ++i)
            g[i] = static_cast<int>((code >> (2 * i)) & 3u);
        return run_realization(sc, map, g, 0).spin_purity;
    });
    auto best = static_cast<std::size_t>(std::max_element(J.begin(), J.end()) - J.begin());
    Genome g(5);
    for (std::size_t i = 0; i < 5; ++i)
        g[i] = static_cast<int>((best >> (2 * i)) & 3u);
    return {g, J[best]};
}

// 5. GA against brute force on the crafted notch map.
inline Verdict ga_oracle(const Options& opt) {
    detail::Checks c;
    auto sc = notch_scenario();
    auto map = notch_map();
    auto [best_g, best_J] = exhaustive_notch_optimum(opt.threads);
    int hits = 0;
    double worst_gap = 0.0;
    for (std::uint64_t s = 1; s <= 10; ++s) {
        GAConfig cfg;
        cfg.seed = s;
        cfg.threads = opt.threads;
        auto r = optimize_schedule(cfg, sc, map);
        double best_seen = 0.0;
        for (const auto& h : r.history)
            best_seen = std::max(best_seen, h.best_J);
        double gap = best_J - best_seen;
        worst_gap = std::max(worst_gap, gap);
        if (gap <= 1e-6)
            ++hits;
    }
    c.expect(hits >= 9, std::to_string(hits) + "/10 seeds within 1e-6 of exhaustive optimum 1 - J* = " +
                            detail::sci(1.0 - best_J) + " (worst gap " + detail::sci(worst_gap) + ")");
    return {5, "GA oracle equivalence", c.ok(), c.notes()};
}

// 6. Optimised schedules beat constant baselines under noise.
inline Verdict optimization_benefit(const Options& opt) {
    detail::Checks c;
    RunConfig cfg;
    cfg.threads = opt.threads;
    cfg.seed = 2026;
    cfg.scenario.v_avg = 20.0;
    cfg.optimize.map_seeds = {1, 2, 3, 4, 5};
    cfg.optimize.n_eval = 50;
    auto res = run_optimize_benchmark(cfg, opt.work_dir / "optimize");
    int better = 0;
    std::string per_map;
    for (const auto& m : res.maps) {
        if (m.protocols.empty())
            continue;
        const auto& o = m.protocols.front();
        bool beats = std::isfinite(o.mean_infidelity);
        double best_base = 1.0;
        for (std::size_t k = 1; k < m.protocols.size(); ++k) {
            best_base = std::min(best_base, m.protocols[k].mean_infidelity);
            beats &= o.mean_infidelity < m.protocols[k].mean_infidelity;
        }
        better += beats;
        per_map += " " + detail::sci(o.mean_infidelity) + "/" + detail::sci(best_base);
    }
    c.expect(better >= 4, std::to_string(better) + "/5 maps improved (opt/best-baseline 1-F:" + per_map + ")");
    double fo = res.aggregate_fraction("optimized");
    double fb = 0.0;
    for (int b : cfg.optimize.baselines)
        fb = std::max(fb, res.aggregate_fraction(baseline_label(b)));
    c.expect(fo > fb, "fraction 1-F <= 1e-4: optimized " + io::format_number(fo) + " vs best baseline " +
                          io::format_number(fb));
    return {6, "optimization benefit", c.ok(), c.notes()};
}

// 7. Dispersion falls with velocity; vanishes without noise.
inline Verdict dispersion_trend(const Options& opt) {
    detail::Checks c;
    RunConfig cfg;
    cfg.threads = opt.threads;
    cfg.seed = 7;
    cfg.dispersion.velocities = {5.0, 20.0};
    cfg.dispersion.n_noise = 50;
    auto noisy = run_dispersion_study(cfg, opt.work_dir / "dispersion");
    double s5 = noisy[0].stats.fidelity->sigma_F, s20 = noisy[1].stats.fidelity->sigma_F;
    c.expect(noisy[0].stats.failures == 0 && noisy[1].stats.failures == 0 && s5 > s20,
             "sigma_F(5) = " + detail::sci(s5) + " > sigma_F(20) = " + detail::sci(s20));

    cfg.scenario.noise.scale = 0.0;
    cfg.dispersion.velocities = {5.0, 10.0, 15.0, 20.0};
    auto quiet = run_dispersion_study(cfg, opt.work_dir / "dispersion-noise-free");
    double worst = 0.0;
    for (const auto& r : quiet)
        worst = std::max(worst, r.stats.fidelity ? r.stats.fidelity->sigma_F : 1.0);
    c.expect(worst < 1e-8, "noise-free max sigma_F = " + detail::sci(worst));
    return {7, "dispersion trend", c.ok(), c.notes()};
}

// 8. Noise near the signal frequency matters more than quasi-static noise,
// and faster transport is less sensitive.
inline Verdict band_trend(const Options& opt) {
    detail::Checks c;
    RunConfig cfg;
    cfg.threads = opt.threads;
    cfg.seed = 8;
    cfg.band_sweep.n_noise = 50;
    cfg.band_sweep.velocities = {20.0};
    cfg.band_sweep.bands = {{1.0, 1e5}, {1e7, 1e8}};
    auto a = run_noise_band_sweep(cfg, opt.work_dir / "band-fixed-velocity");
    double dc = a[0].stats.sigma_purity, near = a[1].stats.sigma_purity;
    c.expect(near > dc, "20 m/s: sigma_P[10-100 MHz] = " + detail::sci(near) + " > sigma_P[1 Hz-100 kHz] = " +
                            detail::sci(dc));

    cfg.band_sweep.velocities = {5.0, 12.0, 20.0};
    cfg.band_sweep.bands = {{1e7, 1e8}};
    auto b = run_noise_band_sweep(cfg, opt.work_dir / "band-fixed-band");
    bool dec = b[0].stats.sigma_purity > b[1].stats.sigma_purity && b[1].stats.sigma_purity > b[2].stats.sigma_purity;
    c.expect(dec, "10-100 MHz: sigma_P(5/12/20 m/s) = " + detail::sci(b[0].stats.sigma_purity) + "/" +
                      detail::sci(b[1].stats.sigma_purity) + "/" + detail::sci(b[2].stats.sigma_purity));
    return {8, "noise-band trend", c.ok(), c.notes()};
}

// 9. Re-running from the persisted snapshot reproduces the summaries bit for bit.
inline Verdict reproducibility(const Options& opt) {
    detail::Checks c;
    namespace fs = std::filesystem;
    auto base = opt.work_dir / "repro";
    RunConfig cfg;
    cfg.threads = opt.threads;
    cfg.seed = 99;
    cfg.dispersion.velocities = {20.0};
    cfg.dispersion.n_noise = 4;
    cfg.band_sweep.velocities = {20.0};
    cfg.band_sweep.bands = {{1e7, 1e8}};
    cfg.band_sweep.n_noise = 4;
    cfg.optimize.map_seeds = {3};
    cfg.optimize.n_eval = 4;
    cfg.optimize.baselines = {0};
    cfg.ga.generations = 2;
    cfg.ga.n_noise = 2;

    using Runner = std::function<void(const RunConfig&, const fs::path&)>;
    std::vector<std::pair<std::string, Runner>> kinds{
        {"single-run", [](const RunConfig& k, const fs::path& o) { single_run(k, o); }},
        {"dispersion", [](const RunConfig& k, const fs::path& o) { run_dispersion_study(k, o); }},
        {"band-sweep", [](const RunConfig& k, const fs::path& o) { run_noise_band_sweep(k, o); }},
        {"optimize", [](const RunConfig& k, const fs::path& o) { run_optimize_benchmark(k, o); }},
    };
    for (const auto& [name, run] : kinds) {
        auto first = base / (name + "-a");
        auto second = base / (name + "-b");
        run(cfg, first);
        auto again = load_config(first / "config.toml");
        // The worker count must not matter either.
        again.threads = opt.threads > 1 ? 1 : 2;
        run(again, second);
        bool same = io::read_text(first / "summary.csv") == io::read_text(second / "summary.csv") &&
                    io::read_text(first / "config.toml").size() > 0;
        c.expect(same, name + (same ? " identical" : " differs"));
    }
    return {9, "reproducibility", c.ok(), c.notes()};
}

struct Criterion {
    int id;
    std::function<Verdict(const Options&)> run;
};

inline std::vector<Criterion> all_criteria() {
    return {{1, arithmetic},           {2, integrator_oracles},     {3, trajectory_exactness},
            {4, constant_valley_coherence}, {5, ga_oracle},          {6, optimization_benefit},
            {7, dispersion_trend},     {8, band_trend},             {9, reproducibility}};
}

/// Run the selected criteria (all if `ids` is empty); one line per criterion on `os`.
inline std::vector<Verdict> run(const Options& opt, const std::vector<int>& ids, std::ostream& os) {
    std::filesystem::create_directories(opt.work_dir);
    std::vector<Verdict> out;
    for (const auto& cr : all_criteria()) {
        if (!ids.empty() && std::find(ids.begin(), ids.end(), cr.id) == ids.end())
            continue;
        auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = cr.run(opt);
        } catch (const std::exception& e) {
            v = {cr.id, "criterion " + std::to_string(cr.id), false, std::string("error: ") + e.what()};
        }
        v.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ostringstream secs;
        secs.precision(1);
        secs << std::fixed << v.seconds;
        os << (v.passed ? "[PASS] " : "[FAIL] ") << v.id << ". " << v.name << ": " << v.detail << " (" << secs.str()
           << " s)" << std::endl;
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace shuttle::acceptance
