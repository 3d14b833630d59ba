#pragma once

// One end-to-end realisation: resistor schedule -> waveforms (+ noise) ->
// trajectory -> spin-valley propagation -> final-state metrics.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shuttle/dynamics.hpp"
#include "shuttle/metrics.hpp"
#include "shuttle/trajectory.hpp"
#include "shuttle/units.hpp"
#include "shuttle/valley_map.hpp"
#include "shuttle/waveform.hpp"

namespace shuttle {

using Genome = std::vector<int>;

/// Everything except the valley map and the control sequence.
struct Scenario {
    PhysicalParams physics;
    GeometryParams geometry;
    /// Average shuttling velocity, m/s.
    double v_avg = 20.0;
    double dt = 0.1;
    double amplitude = 0.1;
    double v_bias = 0.0;
    std::array<double, 4> tau_set = default_tau_set;
    /// If set, resistor values (ohm) replace tau_set.
    std::optional<std::array<double, 4>> resistors;
    double capacitance = 1e-12;
    WaveformMode mode = WaveformMode::continuous;
    /// Noise template; the per-realisation seed is filled in by the caller.
    NoiseSpec noise{0.0};
    PropagationOptions propagation;

    double period() const { return signal_period(v_avg, geometry.l_pitch); }
    std::size_t n_periods() const { return geometry.n_periods(); }
    double final_time() const { return grid().duration(); }
    TimeGrid grid() const { return TimeGrid::within(static_cast<double>(n_periods()) * period(), dt); }
    bool noisy() const { return noise.scale > 0 && noise.sigma_V > 0; }

    RCSchedule schedule(const Genome& genome) const {
        RCSchedule rc = resistors ? RCSchedule{*resistors, capacitance, period(), genome}
                                  : RCSchedule::from_tau_set(tau_set, capacitance, period(), genome);
        return rc;
    }

    WaveformConfig waveform_config(const Genome& genome) const {
        WaveformConfig cfg;
        cfg.amplitude = amplitude;
        cfg.v_bias = v_bias;
        cfg.rc = schedule(genome);
        cfg.grid = grid();
        cfg.mode = mode;
        return cfg;
    }

    Genome constant_genome(int index) const { return Genome(n_periods(), index); }

    void validate() const {
        physics.validate();
        geometry.validate();
        if (!(v_avg > 0))
            throw ConfigError("v_avg must be positive");
        if (!(dt > 0))
            throw ConfigError("dt must be positive");
    }
};

/// Spin state at the start of every shuttle: local valley ground at x = 0
/// times (|up> + |down>)/sqrt(2).
inline Mat4 default_initial_state(const ValleyMap& map) { return valley_ground_product_state(map.sample(0.0), spin_plus_x()); }

struct RealizationResult {
    Mat4 final_state;
    double spin_purity = 0.0;
    /// Excited-valley population at the final position; NaN if the valley is degenerate there.
    double p_v = 0.0;
    double x_final = 0.0;
    std::size_t degenerate_evaluations = 0;
};

struct RealizationTrace {
    ElectrodeWaveforms waveforms;
    Trajectory trajectory;
    std::vector<Mat4> states;
};

/// Which pipeline stage raised an error.
class StageError : public Error {
public:
    StageError(std::string stage, const std::exception& cause)
        : Error(stage + ": " + cause.what()), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Run one realisation. noise_seed is ignored for noise-free scenarios.
inline RealizationResult run_realization(const Scenario& sc, const ValleyMap& map, const Genome& genome,
                                         std::uint64_t noise_seed, RealizationTrace* trace = nullptr) {
    ElectrodeWaveforms w;
    try {
        w = synthesize(sc.waveform_config(genome));
        if (sc.noisy()) {
            NoiseSpec ns = sc.noise;
            ns.seed = noise_seed;
            w = inject_noise(w, ns);
        }
    } catch (const std::exception& e) {
        throw StageError("waveform", e);
    }

    Trajectory traj;
    try {
        traj = extract_trajectory(w, default_phase_offsets, sc.geometry.spatial_period());
    } catch (const std::exception& e) {
        throw StageError("trajectory", e);
    }

    PropagationResult pr;
    Mat4 rho0;
    try {
        rho0 = default_initial_state(map);
        PropagationOptions opts = sc.propagation;
        opts.record_states = trace != nullptr;
        pr = propagate(rho0, traj, map, sc.physics, opts);
    } catch (const std::exception& e) {
        throw StageError("dynamics", e);
    }

    RealizationResult r;
    r.final_state = pr.final_state;
    r.spin_purity = spin_purity(pr.final_state);
    r.x_final = traj.x.back();
    r.degenerate_evaluations = pr.diagnostics.degenerate_evaluations;
    auto d = map.sample(r.x_final);
    try {
        r.p_v = excited_valley_population(pr.final_state, d.real(), d.imag());
    } catch (const ValleyDegeneracyError&) {
        r.p_v = std::numeric_limits<double>::quiet_NaN();
    }
    if (trace) {
        trace->waveforms = std::move(w);
        trace->trajectory = std::move(traj);
        trace->states = std::move(pr.states);
    }
    return r;
}

} // namespace shuttle
