#pragma once

// Spin purity, excited-valley population and rotating-frame ensemble fidelity.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "shuttle/dynamics.hpp"

namespace shuttle {

/// Tr_V rho: reduced spin density matrix.
inline Mat2 reduce_to_spin(const Mat4& rho) {
    Mat2 s = Mat2::Zero();
    for (int v = 0; v < 2; ++v)
        s += rho.block<2, 2>(2 * v, 2 * v);
    return s;
}

/// Tr_s rho: reduced valley density matrix.
inline Mat2 reduce_to_valley(const Mat4& rho) {
    Mat2 r;
    for (int v = 0; v < 2; ++v)
        for (int w = 0; w < 2; ++w)
            r(v, w) = rho(2 * v, 2 * w) + rho(2 * v + 1, 2 * w + 1);
    return r;
}

inline Mat4 ensemble_average(std::span<const Mat4> states) {
    if (states.empty())
        throw DomainError("ensemble is empty");
    Mat4 acc = Mat4::Zero();
    for (const auto& r : states)
        acc += r;
    return acc / static_cast<double>(states.size());
}

/// Tr[(Tr_V rho)^2].
inline double spin_purity(const Mat4& rho) {
    Mat2 s = reduce_to_spin(rho);
    return (s * s).trace().real();
}

/// Purity of the reduced spin state of the ensemble-averaged density matrix.
inline double ensemble_spin_purity(std::span<const Mat4> states) { return spin_purity(ensemble_average(states)); }

/// <e| Tr_s rho |e> for the local excited valley state at Delta.
inline double excited_valley_population(const Mat4& rho, double delta_r, double delta_i,
                                        double eps = default_degeneracy_eps) {
    auto es = local_valley_eigensystem(delta_r, delta_i, eps);
    Mat2 rv = reduce_to_valley(rho);
    return (es.excited.adjoint() * rv * es.excited)(0, 0).real();
}

/// Effective spin frequency (E_Z/2 + gamma)/hbar of the rotating frame, rad/ns.
inline double rotating_frame_frequency(const PhysicalParams& params) {
    return (0.5 * params.zeeman() + params.gamma()) / params.hbar;
}

/// (I (x) U_s)^dag rho (I (x) U_s) with U_s = exp(-i (H_S + gamma sigma_z) t / hbar).
inline Mat4 unrotate(const Mat4& rho, double t, const PhysicalParams& params) {
    if (!(t >= 0))
        throw DomainError("unrotate requires t >= 0");
    double w = rotating_frame_frequency(params) * t;
    Mat2 us = Mat2::Zero();
    us(0, 0) = std::polar(1.0, -w);
    us(1, 1) = std::polar(1.0, w);
    Mat4 U = kron(pauli::identity(), us);
    return U.adjoint() * rho * U;
}

inline Mat2 unrotate_spin(const Mat2& rho_s, double t, const PhysicalParams& params) {
    double w = rotating_frame_frequency(params) * t;
    Mat2 us = Mat2::Zero();
    us(0, 0) = std::polar(1.0, -w);
    us(1, 1) = std::polar(1.0, w);
    return us.adjoint() * rho_s * us;
}

using Bloch = std::array<double, 3>;

inline Bloch bloch_vector(const Mat2& rho_s) {
    return {(rho_s * pauli::x()).trace().real(), (rho_s * pauli::y()).trace().real(),
            (rho_s * pauli::z()).trace().real()};
}

/// Pure state with polar angle theta and azimuth phi.
inline Vec2 bloch_state(double theta, double phi) {
    Vec2 psi;
    psi << std::cos(0.5 * theta), std::polar(std::sin(0.5 * theta), phi);
    return psi;
}

template <class T>
double population_std(std::span<const T> xs) {
    if (xs.empty())
        return 0.0;
    double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double acc = 0.0;
    for (auto x : xs)
        acc += (x - mean) * (x - mean);
    return std::sqrt(acc / static_cast<double>(xs.size()));
}

struct FidelityReport {
    double F_mean = 0.0;
    /// Population standard deviation of F_i.
    double sigma_F = 0.0;
    std::vector<double> F;
    Bloch r_center{};
    double theta = 0.0;
    double phi = 0.0;
    std::vector<Bloch> r;
    /// Set when |r_center| < 1e-9 and the (theta, phi) = (pi/2, 0) convention was used.
    bool degenerate_center = false;
};

struct FidelityCenter {
    Bloch r_center{};
    double theta = 0.0;
    double phi = 0.0;
    bool degenerate = false;
};

/// Unrotated Bloch vectors of the reduced spin states at time t.
inline std::vector<Bloch> unrotated_bloch_vectors(std::span<const Mat4> states, double t, const PhysicalParams& params) {
    std::vector<Bloch> r;
    r.reserve(states.size());
    for (const auto& rho : states)
        r.push_back(bloch_vector(reduce_to_spin(unrotate(rho, t, params))));
    return r;
}

inline FidelityCenter fidelity_center(std::span<const Bloch> r) {
    if (r.empty())
        throw DomainError("fidelity center needs at least one state");
    FidelityCenter c;
    for (const auto& b : r)
        for (int k = 0; k < 3; ++k)
            c.r_center[k] += b[k] / static_cast<double>(r.size());
    double norm = std::sqrt(c.r_center[0] * c.r_center[0] + c.r_center[1] * c.r_center[1] +
                            c.r_center[2] * c.r_center[2]);
    if (norm < 1e-9) {
        c.degenerate = true;
        c.theta = 0.5 * constants::pi;
        c.phi = 0.0;
        return c;
    }
    c.theta = std::acos(std::clamp(c.r_center[2], -1.0, 1.0));
    c.phi = std::atan2(c.r_center[1], c.r_center[0]);
    return c;
}

/// Fidelities of `states` against a center built from `center_states`
/// (pass the same ensemble for the in-sample variant).
inline FidelityReport ensemble_fidelity(std::span<const Mat4> states, std::span<const Mat4> center_states, double t_f,
                                        const PhysicalParams& params) {
    if (states.empty())
        throw DomainError("ensemble_fidelity requires N_noise >= 1");
    auto center_r = unrotated_bloch_vectors(center_states, t_f, params);
    auto c = fidelity_center(center_r);

    FidelityReport rep;
    rep.r_center = c.r_center;
    rep.theta = c.theta;
    rep.phi = c.phi;
    rep.degenerate_center = c.degenerate;
    Vec2 psi = bloch_state(c.theta, c.phi);
    for (const auto& rho : states) {
        Mat2 rs = reduce_to_spin(unrotate(rho, t_f, params));
        rep.r.push_back(bloch_vector(rs));
        rep.F.push_back(std::clamp((psi.adjoint() * rs * psi)(0, 0).real(), 0.0, 1.0));
    }
    rep.F_mean = std::accumulate(rep.F.begin(), rep.F.end(), 0.0) / static_cast<double>(rep.F.size());
    rep.sigma_F = population_std<double>(rep.F);
    return rep;
}

inline FidelityReport ensemble_fidelity(std::span<const Mat4> states, double t_f, const PhysicalParams& params) {
    return ensemble_fidelity(states, states, t_f, params);
}

} // namespace shuttle
