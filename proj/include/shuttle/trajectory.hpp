#pragma once

// Gate voltages -> quantum-dot trajectory.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <vector>

#include "shuttle/error.hpp"
#include "shuttle/units.hpp"
#include "shuttle/waveform.hpp"

namespace shuttle {

struct Trajectory {
    TimeGrid grid;
    /// Dot position in nm, x[0] = 0.
    std::vector<double> x;
    /// Velocity in m/s (= nm/ns).
    std::vector<double> v;

    /// Linear interpolation of x at time t (clamped to the grid span).
    double position_at(double t) const {
        if (x.empty())
            throw DomainError("empty trajectory");
        double s = t / grid.dt;
        if (s <= 0.0)
            return x.front();
        auto i = static_cast<std::size_t>(s);
        if (i + 1 >= x.size())
            return x.back();
        double w = s - static_cast<double>(i);
        return x[i] + w * (x[i + 1] - x[i]);
    }
};

/// z(t) = sum_e V_e(t) exp(-i phi_e).
inline std::vector<std::complex<double>> phasor(std::span<const std::vector<double>> channels,
                                                std::span<const double> phase_offsets) {
    if (channels.size() != 4 || phase_offsets.size() != 4)
        throw DomainError("phasor requires exactly four channels and four phase offsets");
    const std::size_t n = channels[0].size();
    for (const auto& c : channels)
        if (c.size() != n)
            throw DomainError("phasor channels differ in length");

    std::array<std::complex<double>, 4> rot;
    for (std::size_t e = 0; e < 4; ++e)
        rot[e] = std::polar(1.0, -phase_offsets[e]);

    std::vector<std::complex<double>> z(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::complex<double> acc = 0.0;
        for (std::size_t e = 0; e < 4; ++e)
            acc += channels[e][i] * rot[e];
        z[i] = acc;
    }
    return z;
}

inline std::vector<std::complex<double>> phasor(const ElectrodeWaveforms& w,
                                                const std::array<double, 4>& phase_offsets) {
    return phasor(std::span<const std::vector<double>>(w.channels), std::span<const double>(phase_offsets));
}

/// Unwrap a sequence of angles: consecutive differences are mapped into (-pi, pi].
inline std::vector<double> unwrap_angles(std::span<const double> angles) {
    std::vector<double> out(angles.begin(), angles.end());
    for (std::size_t i = 1; i < out.size(); ++i) {
        double d = angles[i] - angles[i - 1];
        while (d > constants::pi)
            d -= constants::two_pi;
        while (d <= -constants::pi)
            d += constants::two_pi;
        out[i] = out[i - 1] + d;
    }
    return out;
}

/// Continuous argument of z. Throws DegeneratePhasorError if any |z| falls
/// below eps_rel * max|z|.
inline std::vector<double> unwrap_phase(std::span<const std::complex<double>> z, double eps_rel = 1e-9) {
    double zmax = 0.0;
    for (const auto& c : z)
        zmax = std::max(zmax, std::abs(c));
    const double floor = eps_rel * zmax;
    std::vector<double> arg(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        double mag = std::abs(z[i]);
        if (zmax == 0.0 || mag < floor || mag == 0.0)
            throw DegeneratePhasorError("phasor magnitude vanishes at sample " + std::to_string(i) +
                                        "; trajectory undefined");
        arg[i] = std::arg(z[i]);
    }
    return unwrap_angles(arg);
}

/// Central-difference derivative, one-sided at the ends.
inline std::vector<double> differentiate(std::span<const double> y, double dt) {
    const std::size_t n = y.size();
    std::vector<double> d(n, 0.0);
    if (n < 2)
        return d;
    d.front() = (y[1] - y[0]) / dt;
    d.back() = (y[n - 1] - y[n - 2]) / dt;
    for (std::size_t i = 1; i + 1 < n; ++i)
        d[i] = (y[i + 1] - y[i - 1]) / (2.0 * dt);
    return d;
}

/// x(t) = L/(2 pi) (theta(t) - theta(0)).
inline Trajectory trajectory_from_phase(std::span<const double> theta, double spatial_period, const TimeGrid& grid) {
    if (theta.size() != grid.n_samples)
        throw DomainError("phase series does not match the time grid");
    Trajectory tr{grid, std::vector<double>(theta.size()), {}};
    const double k = spatial_period / constants::two_pi;
    for (std::size_t i = 0; i < theta.size(); ++i)
        tr.x[i] = k * (theta[i] - theta[0]);
    tr.v = differentiate(tr.x, grid.dt);
    return tr;
}

/// Phasor route from waveforms to trajectory.
inline Trajectory extract_trajectory(const ElectrodeWaveforms& w, const std::array<double, 4>& phase_offsets,
                                     double spatial_period) {
    auto z = phasor(w, phase_offsets);
    auto theta = unwrap_phase(z);
    return trajectory_from_phase(theta, spatial_period, w.grid);
}

struct OracleOptions {
    /// Gaussian lever-arm width; <= 0 selects l_pitch.
    double lever_width = 0.0;
    double search_step = 0.1;
    /// Extra gates on each side of the shuttle channel.
    int gate_margin = 8;
};

/// Reference trajectory from the minimum of a gate-sum potential
/// U(x,t) = -sum_j V_{c(j)}(t) G(x - j*l_pitch). Slow; validation only.
///
/// Gate j is wired to channel (-j mod 4) so that increasing phasor phase moves
/// the minimum towards +x.
inline std::vector<double> potential_minimum_oracle(const ElectrodeWaveforms& w, const GeometryParams& geometry,
                                                    const OracleOptions& opts = {}) {
    const double pitch = geometry.l_pitch;
    const double width = opts.lever_width > 0 ? opts.lever_width : pitch;
    const double L = geometry.spatial_period();
    const int n_gates = static_cast<int>(std::llround(geometry.distance / pitch));
    const int j_lo = -opts.gate_margin;
    const int j_hi = n_gates + opts.gate_margin;
    const double reach = 6.0 * width;

    auto potential = [&](std::size_t i, double x) {
        int a = std::max(j_lo, static_cast<int>(std::floor((x - reach) / pitch)));
        int b = std::min(j_hi, static_cast<int>(std::ceil((x + reach) / pitch)));
        double u = 0.0;
        for (int j = a; j <= b; ++j) {
            int c = ((-j) % 4 + 4) % 4;
            double d = (x - j * pitch) / width;
            u -= w.channels[static_cast<std::size_t>(c)][i] * std::exp(-0.5 * d * d);
        }
        return u;
    };

    const std::size_t n = w.grid.n_samples;
    const double h = opts.search_step;
    const auto n_pts = static_cast<std::size_t>(std::llround(L / h)) + 1;
    std::vector<double> xs(n), u(n_pts);
    double center = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x0 = center - 0.5 * L;
        for (std::size_t k = 0; k < n_pts; ++k)
            u[k] = potential(i, x0 + static_cast<double>(k) * h);

        auto it = std::min_element(u.begin(), u.end());
        auto k_best = static_cast<std::size_t>(it - u.begin());
        double umin = *it, umax = *std::max_element(u.begin(), u.end());
        double tol = 1e-9 * std::max(umax - umin, std::numeric_limits<double>::min());
        if (k_best == 0 || k_best + 1 == n_pts || umax - umin <= 0.0)
            throw OracleAmbiguityError("potential minimum not bracketed at sample " + std::to_string(i));
        // A second local minimum at a distinct location with the same depth is ambiguous.
        const auto sep = static_cast<std::size_t>(0.25 * pitch / h);
        for (std::size_t k = 1; k + 1 < n_pts; ++k) {
            if (u[k] <= u[k - 1] && u[k] <= u[k + 1] && u[k] - umin <= tol &&
                (k > k_best ? k - k_best : k_best - k) > sep)
                throw OracleAmbiguityError("degenerate potential minima at sample " + std::to_string(i));
        }
        double ym = u[k_best - 1], y0 = u[k_best], yp = u[k_best + 1];
        double denom = ym - 2.0 * y0 + yp;
        double shift = denom > 0 ? 0.5 * (ym - yp) / denom : 0.0;
        xs[i] = x0 + (static_cast<double>(k_best) + shift) * h;
        center = xs[i];
    }
    const double origin = xs.front();
    for (auto& x : xs)
        x -= origin;
    return xs;
}

} // namespace shuttle
