#pragma once

// Spin-valley Hamiltonian and Lindblad propagation.
//
// Basis ordering is valley (x) spin with index 2*v + s; v = 0,1 are the
// valley-z states |+z>, |-z>, s = 0,1 are spin up/down.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shuttle/error.hpp"
#include "shuttle/trajectory.hpp"
#include "shuttle/units.hpp"
#include "shuttle/valley_map.hpp"

namespace shuttle {

using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Vec2 = Eigen::Vector2cd;
using cplx = std::complex<double>;

namespace pauli {
inline Mat2 identity() { return Mat2::Identity(); }
inline Mat2 x() {
    Mat2 m;
    m << 0, 1, 1, 0;
    return m;
}
inline Mat2 y() {
    Mat2 m;
    m << 0, cplx(0, -1), cplx(0, 1), 0;
    return m;
}
inline Mat2 z() {
    Mat2 m;
    m << 1, 0, 0, -1;
    return m;
}
} // namespace pauli

/// Kronecker product valley (x) spin.
inline Mat4 kron(const Mat2& valley, const Mat2& spin) {
    Mat4 out;
    for (int v = 0; v < 2; ++v)
        for (int w = 0; w < 2; ++w)
            out.block<2, 2>(2 * v, 2 * w) = valley(v, w) * spin;
    return out;
}

inline constexpr double default_degeneracy_eps = 1e-6;

struct ValleyEigensystem {
    Vec2 ground;
    Vec2 excited;
    /// Local valley Pauli-z: (Delta_r tau_x + Delta_i tau_y) / |Delta|.
    Mat2 tau_z;
    /// |g><e| on the valley space.
    Mat2 lowering;
    /// lowering (x) I_spin.
    Mat4 lowering_full() const { return kron(lowering, pauli::identity()); }
};

/// Eigenbasis of Delta_r tau_x + Delta_i tau_y from the unit phase e^{i alpha} of Delta.
/// Both eigenvectors have a real positive first component.
inline ValleyEigensystem valley_eigensystem_from_axis(cplx axis) {
    const double r = 1.0 / std::sqrt(2.0);
    ValleyEigensystem es;
    es.excited << r, r * axis;
    es.ground << r, -r * axis;
    es.tau_z << 0, std::conj(axis), axis, 0;
    es.lowering = es.ground * es.excited.adjoint();
    return es;
}

inline ValleyEigensystem local_valley_eigensystem(double delta_r, double delta_i,
                                                  double eps = default_degeneracy_eps) {
    double mag = std::hypot(delta_r, delta_i);
    if (!(mag > eps))
        throw ValleyDegeneracyError("|Delta| = " + std::to_string(mag) + " ueV below degeneracy threshold");
    return valley_eigensystem_from_axis(cplx(delta_r, delta_i) / mag);
}

struct HamiltonianTerms {
    Mat4 H_S;
    Mat4 H_V;
    Mat4 H_VS;
    double E_Z = 0.0;
    double kappa_z = 0.0;

    Mat4 total() const { return H_S + H_V + H_VS; }
};

/// H_VS uses the valley axis `axis` (unit complex); H_V uses Delta itself.
inline HamiltonianTerms build_hamiltonian_with_axis(cplx delta, cplx axis, const PhysicalParams& params) {
    HamiltonianTerms h;
    h.E_Z = params.zeeman();
    h.kappa_z = params.kappa_z();
    h.H_S = kron(pauli::identity(), 0.5 * h.E_Z * pauli::z());
    h.H_V = kron(delta.real() * pauli::x() + delta.imag() * pauli::y(), pauli::identity());
    Mat2 tz;
    tz << 0, std::conj(axis), axis, 0;
    h.H_VS = kron(-h.kappa_z * tz, pauli::z());
    return h;
}

/// H = H_S + Delta_r tau_x + Delta_i tau_y - kappa_z tau~_z (x) sigma_z.
inline HamiltonianTerms build_hamiltonian(double delta_r, double delta_i, const PhysicalParams& params,
                                          double eps = default_degeneracy_eps) {
    double mag = std::hypot(delta_r, delta_i);
    if (!(mag > eps))
        throw ValleyDegeneracyError("H_VS undefined for |Delta| = " + std::to_string(mag) + " ueV");
    cplx d(delta_r, delta_i);
    return build_hamiltonian_with_axis(d, d / mag, params);
}

/// D[L](rho) = L rho L^dag - {L^dag L, rho}/2.
inline Mat4 dissipator(const Mat4& L, const Mat4& rho) {
    Mat4 LdL = L.adjoint() * L;
    return L * rho * L.adjoint() - 0.5 * (LdL * rho + rho * LdL);
}

/// Right-hand side of the master equation.
inline Mat4 lindblad_rhs(const Mat4& H, const Mat4& L, double rate, const Mat4& rho, double hbar) {
    Mat4 comm = H * rho - rho * H;
    Mat4 out = cplx(0, -1.0 / hbar) * comm;
    if (rate > 0)
        out += rate * dissipator(L, rho);
    return out;
}

/// rho = |g(Delta)><g| (x) |spin><spin|.
inline Mat4 valley_ground_product_state(cplx delta, const Vec2& spin) {
    auto es = local_valley_eigensystem(delta.real(), delta.imag());
    Vec2 s = spin.normalized();
    Eigen::Vector4cd psi;
    for (int v = 0; v < 2; ++v)
        for (int k = 0; k < 2; ++k)
            psi(2 * v + k) = es.ground(v) * s(k);
    return psi * psi.adjoint();
}

/// Equator spin state (|up> + |down>)/sqrt(2).
inline Vec2 spin_plus_x() {
    Vec2 s;
    s << 1, 1;
    return s / std::sqrt(2.0);
}

struct StateCheck {
    double trace_error = 0.0;
    double hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;
};

inline StateCheck check_state(const Mat4& rho) {
    StateCheck c;
    c.trace_error = std::abs(rho.trace() - cplx(1.0));
    c.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    Mat4 herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Mat4> es(herm, Eigen::EigenvaluesOnly);
    c.min_eigenvalue = es.eigenvalues().minCoeff();
    return c;
}

inline double purity(const Mat4& rho) { return (rho * rho).trace().real(); }

enum class Integrator {
    /// Fourth-order Magnus step for the coherent part, exact amplitude damping
    /// in Strang splitting for the dissipator.
    exponential,
    /// Classic Runge-Kutta on the full master equation.
    rk4,
};

struct PropagationOptions {
    /// Minimum number of substeps per grid step.
    int substeps = 1;
    /// Exponential integrator only: each grid step is split further so that the
    /// valley precession angle per substep stays below this many radians.
    /// Zero disables the refinement.
    double max_substep_rotation = 0.25;
    Integrator integrator = Integrator::exponential;
    bool record_states = false;
    double degeneracy_eps = default_degeneracy_eps;
    /// Failure thresholds checked during the run.
    double max_trace_error = 1e-8;
    double max_hermiticity_error = 1e-8;
    double min_eigenvalue = -1e-6;
    std::size_t positivity_check_interval = 256;
};

struct PropagationDiagnostics {
    /// Evaluations at which |Delta| fell below the degeneracy threshold and the
    /// previous valley axis was reused.
    std::size_t degenerate_evaluations = 0;
    double max_trace_error = 0.0;
    double max_hermiticity_error = 0.0;
    double min_eigenvalue = 0.0;
};

struct PropagationResult {
    Mat4 final_state;
    /// States at every grid point when requested (index 0 is rho0).
    std::vector<Mat4> states;
    PropagationDiagnostics diagnostics;
};

namespace detail {

// Tracks the local valley axis, holding the last well-defined one through
// near-degenerate points.
class AxisTracker {
public:
    AxisTracker(double eps, PropagationDiagnostics& diag) : eps_(eps), diag_(diag) {}

    cplx operator()(cplx delta) {
        double mag = std::abs(delta);
        if (mag > eps_) {
            axis_ = delta / mag;
            valid_ = true;
        } else {
            ++diag_.degenerate_evaluations;
        }
        return axis_;
    }
    bool valid() const { return valid_; }

private:
    double eps_;
    PropagationDiagnostics& diag_;
    cplx axis_{1.0, 0.0};
    bool valid_ = false;
};

// exp(-i h/hbar (a + c . tau)) for real 3-vector c.
inline Mat2 su2_exponential(double a, double cx, double cy, double cz, double h_over_hbar) {
    double norm = std::sqrt(cx * cx + cy * cy + cz * cz);
    double angle = norm * h_over_hbar;
    cplx phase = std::polar(1.0, -a * h_over_hbar);
    double co = std::cos(angle);
    double si = norm > 0 ? std::sin(angle) / norm : 0.0;
    Mat2 u;
    u(0, 0) = cplx(co, -si * cz);
    u(1, 1) = cplx(co, si * cz);
    u(0, 1) = cplx(0, -si) * cplx(cx, -cy);
    u(1, 0) = cplx(0, -si) * cplx(cx, cy);
    return phase * u;
}

inline Mat4 spin_block_diagonal(const Mat2& up, const Mat2& down) {
    Mat4 u = Mat4::Zero();
    for (int v = 0; v < 2; ++v)
        for (int w = 0; w < 2; ++w) {
            u(2 * v, 2 * w) = up(v, w);
            u(2 * v + 1, 2 * w + 1) = down(v, w);
        }
    return u;
}

// (A (x) I) rho (A (x) I)^dag for a valley operator A.
inline Mat4 valley_sandwich(const Mat2& A, const Mat4& rho) {
    Mat4 out = Mat4::Zero();
    for (int v = 0; v < 2; ++v)
        for (int w = 0; w < 2; ++w) {
            Mat2 acc = Mat2::Zero();
            for (int a = 0; a < 2; ++a) {
                if (A(v, a) == 0.0)
                    continue;
                for (int b = 0; b < 2; ++b)
                    acc += (A(v, a) * std::conj(A(w, b))) * rho.block<2, 2>(2 * a, 2 * b);
            }
            out.block<2, 2>(2 * v, 2 * w) = acc;
        }
    return out;
}

// Exact amplitude damping towards |g> over an interval with decay probability p.
inline Mat4 amplitude_damp(const Mat4& rho, cplx axis, double p) {
    auto es = valley_eigensystem_from_axis(axis);
    Mat2 k0 = es.ground * es.ground.adjoint() + std::sqrt(1.0 - p) * es.excited * es.excited.adjoint();
    Mat2 k1 = std::sqrt(p) * es.lowering;
    return valley_sandwich(k0, rho) + valley_sandwich(k1, rho);
}

} // namespace detail

/// Propagate rho0 over `grid` under the Hamiltonian defined by coupling(t) -> Delta(t).
/// Returns the final state and, if requested, the state at every grid point.
template <class Coupling>
PropagationResult propagate(const Mat4& rho0, const TimeGrid& grid, Coupling&& coupling,
                            const PhysicalParams& params, const PropagationOptions& opts = {}) {
    params.validate();
    if (opts.substeps < 1)
        throw ConfigError("substeps must be >= 1");
    if (!(opts.max_substep_rotation >= 0))
        throw ConfigError("max_substep_rotation must be non-negative");
    {
        auto c0 = check_state(rho0);
        if (c0.trace_error > 1e-9 || c0.hermiticity_error > 1e-10 || c0.min_eigenvalue < -1e-8)
            throw DomainError("initial state is not a valid density matrix");
    }

    PropagationResult res;
    auto& diag = res.diagnostics;
    detail::AxisTracker axis_of(opts.degeneracy_eps, diag);
    axis_of(coupling(0.0));

    const double hbar = params.hbar;
    const double half_ez = 0.5 * params.zeeman();
    const double kappa = params.kappa_z();
    const double rate = params.relaxation_rate();
    const double gauss = std::sqrt(3.0) / 6.0;
    const double p_half = rate > 0 ? -std::expm1(-0.5 * rate * grid.dt) : 0.0;

    Mat4 rho = rho0;
    if (opts.record_states) {
        res.states.reserve(grid.n_samples);
        res.states.push_back(rho);
    }
    diag.min_eigenvalue = check_state(rho0).min_eigenvalue;

    auto hamiltonian_at = [&](double t) {
        cplx d = coupling(t);
        cplx ax = axis_of(d);
        return build_hamiltonian_with_axis(d, ax, params).total();
    };
    auto lowering_at = [&](double t) {
        cplx ax = axis_of(coupling(t));
        return kron(valley_eigensystem_from_axis(ax).lowering, pauli::identity());
    };

    for (std::size_t i = 1; i < grid.n_samples; ++i) {
        const double t0 = grid.t(i - 1);
        // The coherent propagator is accumulated over the substeps and applied
        // once per grid step, between two half steps of exact damping.
        const bool exponential = opts.integrator == Integrator::exponential;
        Mat2 step_u[2] = {Mat2::Identity(), Mat2::Identity()};
        cplx damp_axis{1.0, 0.0};
        if (exponential && rate > 0) {
            damp_axis = axis_of(coupling(t0 + 0.5 * grid.dt));
            rho = detail::amplitude_damp(rho, damp_axis, p_half);
        }
        int substeps = opts.substeps;
        if (exponential && opts.max_substep_rotation > 0) {
            double peak = std::max({std::abs(coupling(t0)), std::abs(coupling(t0 + 0.5 * grid.dt)),
                                    std::abs(coupling(t0 + grid.dt))}) + std::abs(kappa);
            double angle = peak * grid.dt / hbar;
            substeps = std::max(substeps, static_cast<int>(std::ceil(angle / opts.max_substep_rotation)));
        }
        const double h = grid.dt / substeps;
        for (int k = 0; k < substeps; ++k) {
            const double t = t0 + k * h;
            if (opts.integrator == Integrator::exponential) {
                // Gauss-Legendre nodes for the fourth-order Magnus expansion.
                cplx d1 = coupling(t + (0.5 - gauss) * h);
                cplx a1 = axis_of(d1);
                cplx d2 = coupling(t + (0.5 + gauss) * h);
                cplx a2 = axis_of(d2);
                for (int s = 0; s < 2; ++s) {
                    double sign = s == 0 ? 1.0 : -1.0;
                    cplx b1 = d1 - sign * kappa * a1;
                    cplx b2 = d2 - sign * kappa * a2;
                    cplx bm = 0.5 * (b1 + b2);
                    double cz = gauss * (h / hbar) * std::imag(std::conj(b2) * b1);
                    step_u[s] = detail::su2_exponential(sign * half_ez, bm.real(), bm.imag(), cz, h / hbar) * step_u[s];
                }
            } else {
                Mat4 H1 = hamiltonian_at(t), H2 = hamiltonian_at(t + 0.5 * h), H3 = hamiltonian_at(t + h);
                Mat4 L1, L2, L3;
                if (rate > 0) {
                    L1 = lowering_at(t);
                    L2 = lowering_at(t + 0.5 * h);
                    L3 = lowering_at(t + h);
                }
                Mat4 k1 = lindblad_rhs(H1, L1, rate, rho, hbar);
                Mat4 k2 = lindblad_rhs(H2, L2, rate, rho + 0.5 * h * k1, hbar);
                Mat4 k3 = lindblad_rhs(H2, L2, rate, rho + 0.5 * h * k2, hbar);
                Mat4 k4 = lindblad_rhs(H3, L3, rate, rho + h * k3, hbar);
                rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            }
        }
        if (exponential) {
            Mat4 U = detail::spin_block_diagonal(step_u[0], step_u[1]);
            rho = U * rho * U.adjoint();
            if (rate > 0)
                rho = detail::amplitude_damp(rho, damp_axis, p_half);
        }

        double tr_err = std::abs(rho.trace() - cplx(1.0));
        double herm_err = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
        double pur = rho.cwiseAbs2().sum();
        diag.max_trace_error = std::max(diag.max_trace_error, tr_err);
        diag.max_hermiticity_error = std::max(diag.max_hermiticity_error, herm_err);
        bool check_pos = (i % opts.positivity_check_interval == 0) || i + 1 == grid.n_samples;
        if (check_pos)
            diag.min_eigenvalue = std::min(diag.min_eigenvalue, check_state(rho).min_eigenvalue);
        if (!(tr_err <= opts.max_trace_error) || !(herm_err <= opts.max_hermiticity_error) ||
            !(pur <= 1.0 + 1e-6) || !(diag.min_eigenvalue >= opts.min_eigenvalue))
            throw IntegrationError("density matrix invariants violated at t = " + std::to_string(grid.t(i)) +
                                   " ns; reduce the step (more substeps)");
        if (opts.record_states)
            res.states.push_back(rho);
    }
    res.final_state = rho;
    return res;
}

/// Coupling seen by a dot moving along `traj` over `map`.
struct TrajectoryCoupling {
    const Trajectory& traj;
    const ValleyMap& map;
    cplx operator()(double t) const { return map.sample(traj.position_at(t)); }
};

inline PropagationResult propagate(const Mat4& rho0, const Trajectory& traj, const ValleyMap& map,
                                   const PhysicalParams& params, const PropagationOptions& opts = {}) {
    return propagate(rho0, traj.grid, TrajectoryCoupling{traj, map}, params, opts);
}

} // namespace shuttle
