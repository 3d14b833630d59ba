#pragma once

// Four-phase RC ramp waveforms and additive band-limited noise.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "shuttle/error.hpp"
#include "shuttle/seeding.hpp"
#include "shuttle/spectral.hpp"
#include "shuttle/units.hpp"

namespace shuttle {

/// Dimensionless ramp constant tau = 2 pi R C / T for R in ohm, C in farad, T in ns.
inline double tau_for_period(double resistance, double capacitance, double period_ns) {
    if (!(resistance > 0) || !(capacitance > 0) || !(period_ns > 0))
        throw DomainError("tau_for_period: R, C and T must be positive");
    return constants::two_pi * resistance * capacitance / (period_ns * 1e-9);
}

/// Per-period resistor selection. Index p of `sequence` picks the resistor
/// that is active for pT <= t < (p+1)T.
struct RCSchedule {
    std::array<double, 4> resistor_values{};
    double capacitance = 1e-12;
    double period = 20.0;
    std::vector<int> sequence;

    /// Resistor ladder that realises the given tau set at period T.
    static RCSchedule from_tau_set(const std::array<double, 4>& taus, double capacitance, double period,
                                   std::vector<int> sequence) {
        RCSchedule rc;
        rc.capacitance = capacitance;
        rc.period = period;
        for (std::size_t k = 0; k < 4; ++k)
            rc.resistor_values[k] = taus[k] * period * 1e-9 / (constants::two_pi * capacitance);
        rc.sequence = std::move(sequence);
        return rc;
    }

    double tau_of_index(int k) const {
        return tau_for_period(resistor_values.at(static_cast<std::size_t>(k)), capacitance, period);
    }
    double tau(std::size_t p) const { return tau_of_index(sequence.at(p)); }

    void validate() const {
        if (sequence.empty())
            throw ConfigError("resistor sequence is empty");
        for (int g : sequence)
            if (g < 0 || g > 3)
                throw ConfigError("resistor index " + std::to_string(g) + " outside {0,1,2,3}");
        for (int k = 0; k < 4; ++k)
            (void)tau_of_index(k);
    }
};

enum class WaveformMode { analytic, continuous };

inline constexpr std::array<double, 4> default_phase_offsets{
    0.25 * constants::pi, 0.75 * constants::pi, 1.25 * constants::pi, 1.75 * constants::pi};

/// Default tau set; a modelling choice, not a measured ladder.
inline constexpr std::array<double, 4> default_tau_set{0.5, 0.8, 1.2, 1.8};

struct WaveformConfig {
    double amplitude = 0.1;
    double v_bias = 0.0;
    std::array<double, 4> phase_offsets = default_phase_offsets;
    RCSchedule rc;
    TimeGrid grid;
    WaveformMode mode = WaveformMode::continuous;

    void validate() const {
        if (!(amplitude >= 0))
            throw ConfigError("amplitude must be non-negative");
        for (std::size_t e = 0; e < 4; ++e) {
            double expect = phase_offsets[0] + 0.5 * constants::pi * static_cast<double>(e);
            if (std::abs(phase_offsets[e] - expect) > 1e-12)
                throw ConfigError("phase offsets must increase in steps of pi/2");
        }
        rc.validate();
        if (grid.n_samples == 0 || !(grid.dt > 0))
            throw ConfigError("empty time grid");
        double periods = grid.duration() / rc.period;
        if (periods > static_cast<double>(rc.sequence.size()) * (1.0 + 1e-12) + 1e-9)
            throw ConfigError("resistor sequence covers " + std::to_string(rc.sequence.size()) +
                              " periods but the grid spans " + std::to_string(periods));
    }
};

struct ElectrodeWaveforms {
    TimeGrid grid;
    std::array<std::vector<double>, 4> channels;
};

namespace detail {

// Normalised ramp (V - V_bias)/A for phase position u (in turns, [0,1)).
inline double analytic_ramp(double frac, double tau) {
    double psi = constants::two_pi * frac;
    if (frac < 0.5)
        return -1.0 + 2.0 * (1.0 - std::exp(-psi / tau));
    return 1.0 - 2.0 * (1.0 - std::exp(-(psi - constants::pi) / tau));
}

// Periodic steady state of the charge-continuous ramp with constant tau.
inline double steady_state_ramp(double frac, double tau) {
    double q = std::exp(-constants::pi / tau);
    double v_high = (1.0 - q) / (1.0 + q);
    double psi = constants::two_pi * frac;
    if (frac < 0.5)
        return 1.0 + (-v_high - 1.0) * std::exp(-psi / tau);
    return -1.0 + (v_high + 1.0) * std::exp(-(psi - constants::pi) / tau);
}

inline std::size_t period_index(double s, std::size_t n_periods) {
    auto p = static_cast<std::size_t>(std::max(0.0, std::floor(s + 1e-12)));
    return std::min(p, n_periods - 1);
}

} // namespace detail

/// Sample the four electrode voltages on cfg.grid.
inline ElectrodeWaveforms synthesize(const WaveformConfig& cfg) {
    cfg.validate();
    const auto& grid = cfg.grid;
    const double T = cfg.rc.period;
    const std::size_t n_periods = cfg.rc.sequence.size();

    std::vector<double> taus(n_periods);
    for (std::size_t p = 0; p < n_periods; ++p)
        taus[p] = cfg.rc.tau(p);

    ElectrodeWaveforms out{grid, {}};
    for (std::size_t e = 0; e < 4; ++e) {
        const double u0 = cfg.phase_offsets[e] / constants::two_pi;
        auto& ch = out.channels[e];
        ch.resize(grid.n_samples);

        if (cfg.mode == WaveformMode::analytic) {
            for (std::size_t i = 0; i < grid.n_samples; ++i) {
                double s = grid.t(i) / T;
                double u = s + u0;
                double frac = u - std::floor(u);
                double tau = taus[detail::period_index(s, n_periods)];
                ch[i] = cfg.v_bias + cfg.amplitude * detail::analytic_ramp(frac, tau);
            }
            continue;
        }

        // Charge-continuous variant: the node relaxes towards the active rail with
        // the active tau, switching rails at half turns and tau at period starts.
        double v = detail::steady_state_ramp(u0 - std::floor(u0), taus[0]);
        ch[0] = cfg.v_bias + cfg.amplitude * v;
        double s = 0.0;
        for (std::size_t i = 1; i < grid.n_samples; ++i) {
            const double s_target = grid.t(i) / T;
            while (s < s_target) {
                double u = s + u0;
                double half = std::floor(2.0 * u + 1e-12);
                double s_rail = (half + 1.0) / 2.0 - u0;
                double s_period = std::floor(s + 1e-12) + 1.0;
                double s_next = std::min({s_target, s_rail, s_period});
                double rail = (static_cast<long long>(half) % 2 == 0) ? 1.0 : -1.0;
                double tau = taus[detail::period_index(s, n_periods)];
                v = rail + (v - rail) * std::exp(-constants::two_pi * (s_next - s) / tau);
                s = s_next;
            }
            ch[i] = cfg.v_bias + cfg.amplitude * v;
        }
    }
    return out;
}

enum class NoiseNormalization {
    /// sigma_V is the standard deviation of the full-band white noise; a
    /// narrower band keeps the same spectral density and therefore less power.
    constant_density,
    /// Every band is rescaled to the standard deviation scale * sigma_V.
    fixed_std,
};

/// Additive Gaussian noise confined to a frequency band.
struct NoiseSpec {
    double scale = 1.0;
    /// Per-sample standard deviation of full-band noise at scale 1 (volt).
    /// Behavioural proxy value.
    double sigma_V = 1e-4;
    double f_min = 1.0;
    double f_max = 5e9;
    std::uint64_t seed = 0;
    NoiseNormalization normalization = NoiseNormalization::constant_density;

    void validate(const TimeGrid& grid) const {
        if (!(scale >= 0))
            throw DomainError("noise scale must be non-negative");
        if (!(sigma_V >= 0))
            throw DomainError("sigma_V must be non-negative");
        if (!(f_min >= 0) || !(f_min < f_max))
            throw DomainError("noise band requires 0 <= f_min < f_max");
        if (f_max > grid.nyquist_hz() * (1.0 + 1e-12))
            throw DomainError("noise band f_max exceeds the grid Nyquist frequency");
    }
};

/// Band-limited zero-mean Gaussian series of length n. White noise of standard
/// deviation `sigma` is filtered in the frequency domain on a record long enough
/// to resolve the band, and the first n samples are kept. With fixed_std the
/// result is rescaled to have expected standard deviation `sigma` regardless of
/// the band.
inline std::vector<double> band_limited_noise(std::size_t n, double dt_ns, double f_min, double f_max,
                                              double sigma, std::uint64_t seed,
                                              NoiseNormalization mode = NoiseNormalization::fixed_std) {
    const double dt_s = dt_ns * 1e-9;
    double resolve = std::ceil(8.0 / ((f_max - f_min) * dt_s));
    std::size_t n_fft = spectral::next_pow2(std::max<std::size_t>(
        n, static_cast<std::size_t>(std::min(resolve, static_cast<double>(1u << 24)))));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    spectral::cvec x(n_fft);
    for (auto& c : x)
        c = normal(rng);

    auto spec = spectral::forward(x);
    std::size_t kept = 0;
    for (std::size_t k = 0; k < n_fft; ++k) {
        double f = spectral::bin_frequency(k, n_fft, dt_s);
        if (f < f_min || f > f_max)
            spec[k] = 0.0;
        else
            ++kept;
    }
    std::vector<double> out(n, 0.0);
    if (kept == 0)
        throw DomainError("noise band contains no frequency bins for this record");
    auto back = spectral::inverse(spec);
    // E|X_k|^2 = n_fft for unit white noise, so the filtered variance is kept/n_fft.
    double norm = mode == NoiseNormalization::fixed_std
                      ? sigma / std::sqrt(static_cast<double>(kept) / static_cast<double>(n_fft))
                      : sigma;
    for (std::size_t i = 0; i < n; ++i)
        out[i] = back[i].real() * norm;
    return out;
}

/// Add one noise realisation to every channel. Channels draw from independent
/// streams derived from spec.seed.
inline ElectrodeWaveforms inject_noise(const ElectrodeWaveforms& w, const NoiseSpec& spec) {
    spec.validate(w.grid);
    ElectrodeWaveforms out = w;
    if (spec.scale == 0.0 || spec.sigma_V == 0.0)
        return out;
    for (std::size_t e = 0; e < 4; ++e) {
        auto noise = band_limited_noise(w.grid.n_samples, w.grid.dt, spec.f_min, spec.f_max,
                                        spec.scale * spec.sigma_V, derive_seed(spec.seed, {e}), spec.normalization);
        for (std::size_t i = 0; i < noise.size(); ++i)
            out.channels[e][i] += noise[i];
    }
    return out;
}

} // namespace shuttle
