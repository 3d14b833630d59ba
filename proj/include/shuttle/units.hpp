#pragma once

// Unit system used throughout: nm, ns, ueV, tesla, volt.
// Velocities in m/s are numerically equal to nm/ns.

#include <cmath>
#include <cstddef>
#include <limits>

#include "shuttle/error.hpp"

namespace shuttle {

namespace constants {
inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;
/// Reduced Planck constant in ueV*ns.
inline constexpr double hbar = 0.6582119569;
/// Bohr magneton in ueV/T.
inline constexpr double mu_B = 57.88381963;
} // namespace constants

struct PhysicalParams {
    double g_bar = 2.0;
    /// Relative g-factor difference between valleys. Not a measured value.
    double delta_g_over_g = 1e-3;
    /// Tesla. Not a measured value.
    double B_z = 0.05;
    /// Valley relaxation time in ns (1 ms).
    double T_1v = 1e6;
    double hbar = constants::hbar;
    double mu_B = constants::mu_B;

    /// Zeeman energy E_Z = g mu_B B_z in ueV.
    double zeeman() const { return g_bar * mu_B * B_z; }
    /// Valley-dependent g-factor coupling kappa_z = (dg/g) E_Z / 4.
    double kappa_z() const { return 0.25 * delta_g_over_g * zeeman(); }
    /// Rotating-frame correction gamma = -(dg/g) |B_z| mu_B / 2.
    double gamma() const { return -0.5 * delta_g_over_g * std::abs(B_z) * mu_B; }
    /// 1/T_1v in 1/ns; zero for an infinite lifetime.
    double relaxation_rate() const { return std::isinf(T_1v) ? 0.0 : 1.0 / T_1v; }

    void validate() const {
        if (!(hbar > 0) || !(mu_B > 0))
            throw DomainError("hbar and mu_B must be positive");
        if (!(T_1v > 0))
            throw DomainError("T_1v must be positive");
        if (!(B_z >= 0))
            throw DomainError("B_z must be non-negative");
        if (!(g_bar >= 0))
            throw DomainError("g_bar must be non-negative");
    }
};

struct GeometryParams {
    /// Gate pitch in nm.
    double l_pitch = 100.0;
    int n_phases = 4;
    /// Total shuttle length in nm.
    double distance = 10000.0;

    /// Spatial period of the travelling potential.
    double spatial_period() const { return n_phases * l_pitch; }

    /// Number of signal periods; one configuration word per period.
    std::size_t n_periods() const {
        double n = distance / spatial_period();
        return static_cast<std::size_t>(std::llround(n));
    }

    void validate() const {
        if (n_phases != 4)
            throw ConfigError("only four-phase wiring is supported");
        if (!(l_pitch > 0))
            throw DomainError("l_pitch must be positive");
        if (!(distance > 0))
            throw DomainError("distance must be positive");
        double n = distance / spatial_period();
        if (std::llround(n) < 1 || std::abs(n - std::llround(n)) > 1e-9 * n)
            throw ConfigError("distance must be a positive integer multiple of 4*l_pitch");
    }
};

/// Uniform sampling grid t_i = i*dt, i = 0..n_samples-1.
struct TimeGrid {
    double dt = 0.1;
    std::size_t n_samples = 0;

    double t(std::size_t i) const { return static_cast<double>(i) * dt; }
    double duration() const { return n_samples ? t(n_samples - 1) : 0.0; }
    /// Nyquist frequency in Hz.
    double nyquist_hz() const { return 0.5 / (dt * 1e-9); }

    /// Largest grid that does not extend past t_end.
    static TimeGrid within(double t_end, double dt) {
        if (!(dt > 0))
            throw DomainError("dt must be positive");
        if (!(t_end >= 0))
            throw DomainError("grid duration must be non-negative");
        auto steps = static_cast<std::size_t>(std::floor(t_end / dt + 1e-9));
        return TimeGrid{dt, steps + 1};
    }

    /// Smallest grid that reaches t_end (inclusive).
    static TimeGrid covering(double t_end, double dt) {
        if (!(dt > 0))
            throw DomainError("dt must be positive");
        if (!(t_end >= 0))
            throw DomainError("grid duration must be non-negative");
        auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
        return TimeGrid{dt, steps + 1};
    }
};

struct ShuttlingFrequency {
    double f_mhz;
    double f_clk_mhz;
};

/// Waveform frequency for conveyor shuttling at v_avg over a four-phase gate set.
inline ShuttlingFrequency shuttling_frequency(double v_avg, double l_pitch) {
    if (!(v_avg > 0) || !(l_pitch > 0))
        throw DomainError("shuttling_frequency: v_avg and l_pitch must be positive");
    // nm/ns / nm = GHz
    double f = v_avg / (4.0 * l_pitch) * 1e3;
    return {f, 4.0 * f};
}

/// Signal period in ns.
inline double signal_period(double v_avg, double l_pitch) {
    return 1e3 / shuttling_frequency(v_avg, l_pitch).f_mhz;
}

/// Shuttle duration in microseconds for a distance in nm.
inline double shuttle_duration(double distance, double v_avg) {
    if (!(distance > 0) || !(v_avg > 0))
        throw DomainError("shuttle_duration: distance and v_avg must be positive");
    return distance / v_avg * 1e-3;
}

} // namespace shuttle
