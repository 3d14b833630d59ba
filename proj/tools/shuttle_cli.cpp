// Command-line front end: experiments, estimators and the acceptance self-test.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shuttle/acceptance.hpp"
#include "shuttle/config.hpp"
#include "shuttle/estimators.hpp"
#include "shuttle/experiments.hpp"
#include "shuttle/io.hpp"

namespace fs = std::filesystem;
using namespace shuttle;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::size_t> threads;
    std::optional<double> noise_scale;
};

RunConfig resolve(const Globals& g) {
    RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
    if (g.seed)
        cfg.seed = *g.seed;
    if (g.threads)
        cfg.threads = *g.threads;
    if (g.noise_scale)
        cfg.scenario.noise.scale = *g.noise_scale;
    cfg.validate();
    return cfg;
}

fs::path out_dir(const Globals& g, const std::string& fallback) { return g.out.empty() ? fs::path(fallback) : fs::path(g.out); }

std::string fmt(double v) { return io::format_number(v); }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conveyor-mode spin shuttling co-simulation and schedule optimisation"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "TOML configuration file");
    app.add_option("--seed", g.seed, "master seed (overrides the config)");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--noise-scale", g.noise_scale, "noise amplitude multiplier")->check(CLI::NonNegativeNumber);

    auto single = app.add_subcommand("single-run", "one realisation with waveform, trajectory and state traces");
    auto dispersion = app.add_subcommand("dispersion", "fidelity dispersion versus shuttling velocity");
    auto band = app.add_subcommand("band-sweep", "purity dispersion per noise frequency band");
    auto optimize = app.add_subcommand("optimize", "GA optimisation versus constant baselines on several maps");

    auto budget = app.add_subcommand("budget", "surface-code cycle time and shuttling duty cycle");
    BudgetInputs bi;
    std::optional<double> budget_v;
    double budget_distance = 10000.0;
    budget->add_option("--t-shuttle", bi.t_shuttle, "shuttle time (us)")->capture_default_str();
    budget->add_option("--v-avg", budget_v, "derive t_shuttle from this velocity (m/s)");
    budget->add_option("--distance", budget_distance, "shuttle distance for --v-avg (nm)")->capture_default_str();
    budget->add_option("--t-1q", bi.t_1q, "single-qubit gate time (us)")->capture_default_str();
    budget->add_option("--t-2q", bi.t_2q, "two-qubit gate time (us)")->capture_default_str();
    budget->add_option("--t-readout", bi.t_readout, "readout time (us)")->capture_default_str();

    auto power = app.add_subcommand("power", "capacitive switching power C V^2 f");
    double c_eq = 1e-12, v_pp = 0.2;
    std::optional<double> f_hz, power_v;
    double l_pitch = 100.0;
    power->add_option("--c-eq", c_eq, "effective switched capacitance (F)")->capture_default_str();
    power->add_option("--v-pp", v_pp, "peak-to-peak voltage (V)")->capture_default_str();
    power->add_option("--f", f_hz, "signal frequency (Hz)");
    power->add_option("--v-avg", power_v, "derive f from this velocity (m/s)");
    power->add_option("--l-pitch", l_pitch, "gate pitch for --v-avg (nm)")->capture_default_str();

    auto selftest = app.add_subcommand("selftest", "run the acceptance suite");
    std::vector<int> criteria;
    selftest->add_option("--criteria", criteria, "subset of criteria ids (default: all)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*single) {
            auto cfg = resolve(g);
            auto out = out_dir(g, "out/single-run");
            auto r = single_run(cfg, out);
            if (!cfg.map.file)
                save_valley_map(resolve_map(cfg.map), (out / "valley_map.csv").string());
            std::cout << "spin_purity " << fmt(r.result.spin_purity) << "\np_v " << fmt(r.result.p_v) << "\nfidelity "
                      << fmt(r.fidelity) << "\nx_final_nm " << fmt(r.result.x_final) << "\noutput " << out.string()
                      << "\n";
        } else if (*dispersion) {
            auto cfg = resolve(g);
            auto out = out_dir(g, "out/dispersion");
            auto rows = run_dispersion_study(cfg, out);
            std::size_t failures = 0;
            std::cout << "v_avg sigma_F sigma_P mean_F failures\n";
            for (const auto& r : rows) {
                failures += r.stats.failures;
                std::cout << fmt(r.v_avg) << " " << (r.stats.fidelity ? fmt(r.stats.fidelity->sigma_F) : "nan") << " "
                          << fmt(r.stats.sigma_purity) << " "
                          << (r.stats.fidelity ? fmt(r.stats.fidelity->F_mean) : "nan") << " " << r.stats.failures
                          << "\n";
            }
            std::cout << "output " << out.string() << "\n";
            return failures ? 3 : 0;
        } else if (*band) {
            auto cfg = resolve(g);
            auto out = out_dir(g, "out/band-sweep");
            auto rows = run_noise_band_sweep(cfg, out);
            std::size_t failures = 0;
            std::cout << "v_avg f_min_Hz f_max_Hz sigma_P failures\n";
            for (const auto& r : rows) {
                failures += r.stats.failures;
                std::cout << fmt(r.v_avg) << " " << fmt(r.f_min) << " " << fmt(r.f_max) << " "
                          << fmt(r.stats.sigma_purity) << " " << r.stats.failures << "\n";
            }
            std::cout << "output " << out.string() << "\n";
            return failures ? 3 : 0;
        } else if (*optimize) {
            auto cfg = resolve(g);
            auto out = out_dir(g, "out/optimize");
            auto res = run_optimize_benchmark(cfg, out);
            bool failed = false;
            std::cout << "map protocol mean_1-F frac_below\n";
            for (const auto& m : res.maps) {
                failed |= !m.error.empty();
                for (const auto& p : m.protocols) {
                    failed |= p.stats.failures > 0;
                    std::cout << m.map_seed << " " << p.label << " " << fmt(p.mean_infidelity) << " "
                              << fmt(p.frac_below) << "\n";
                }
            }
            for (const auto& [label, counts] : res.aggregate)
                std::cout << "all " << label << " - " << fmt(res.aggregate_fraction(label)) << "\n";
            std::cout << "output " << out.string() << "\n";
            return failed ? 3 : 0;
        } else if (*budget) {
            if (budget_v)
                bi.t_shuttle = shuttle_duration(budget_distance, *budget_v);
            auto r = surface_code_budget(bi);
            std::cout << "t_SC_us " << fmt(r.t_sc) << "\nD_shuttle " << fmt(r.duty_cycle) << "\n";
            if (!g.out.empty()) {
                fs::create_directories(g.out);
                io::CsvTable t({"t_shuttle_us", "t_1q_us", "t_2q_us", "t_readout_us", "t_SC_us", "D_shuttle"});
                t.add_row({bi.t_shuttle, bi.t_1q, bi.t_2q, bi.t_readout, r.t_sc, r.duty_cycle});
                t.write(fs::path(g.out) / "budget.csv");
            }
        } else if (*power) {
            if (f_hz && power_v)
                throw ConfigError("give either --f or --v-avg, not both");
            double f = f_hz ? *f_hz : 50e6;
            if (power_v)
                f = shuttling_frequency(*power_v, l_pitch).f_mhz * 1e6;
            double p = power_estimate(c_eq, v_pp, f);
            std::cout << "P_uW " << fmt(p) << "\n";
            if (!g.out.empty()) {
                fs::create_directories(g.out);
                io::CsvTable t({"C_eq_F", "V_pp_V", "f_Hz", "P_uW"});
                t.add_row({c_eq, v_pp, f, p});
                t.write(fs::path(g.out) / "power.csv");
            }
        } else if (*selftest) {
            acceptance::Options opt;
            if (g.threads)
                opt.threads = *g.threads;
            if (!g.out.empty())
                opt.work_dir = g.out;
            auto verdicts = acceptance::run(opt, criteria, std::cout);
            int failed = 0;
            for (const auto& v : verdicts)
                failed += !v.passed;
            std::cout << verdicts.size() - failed << "/" << verdicts.size() << " criteria passed\n";
            return failed ? 1 : 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
