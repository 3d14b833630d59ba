#pragma once

// Closed-form system estimators: switching power and surface-code duty cycle.

#include <cmath>

#include "shuttle/error.hpp"

namespace shuttle {

/// Capacitive switching power C V^2 f in microwatt (C in farad, V in volt, f in Hz).
/// An order-of-magnitude scaling estimate only.
inline double power_estimate(double c_eq, double v_pp, double f_hz) {
    if (!(c_eq > 0) || !(v_pp > 0) || !(f_hz > 0))
        throw DomainError("power_estimate: C_eq, V_pp and f must be positive");
    return c_eq * v_pp * v_pp * f_hz * 1e6;
}

/// Durations in microseconds.
struct BudgetInputs {
    double t_shuttle = 0.5;
    double t_1q = 0.2;
    double t_2q = 0.08;
    double t_readout = 10.0;
};

struct BudgetResult {
    /// Surface-code cycle time, microseconds.
    double t_sc = 0.0;
    /// Fraction of the cycle spent shuttling.
    double duty_cycle = 0.0;
};

/// 22 shuttles, 14 single-qubit gates, 8 two-qubit gates and one readout per cycle.
inline BudgetResult surface_code_budget(const BudgetInputs& in) {
    if (!(in.t_shuttle >= 0) || !(in.t_1q > 0) || !(in.t_2q > 0) || !(in.t_readout > 0))
        throw DomainError("surface_code_budget: durations must be positive (t_shuttle may be zero)");
    BudgetResult r;
    double shuttle = 22.0 * in.t_shuttle;
    r.t_sc = shuttle + 14.0 * in.t_1q + 8.0 * in.t_2q + in.t_readout;
    r.duty_cycle = shuttle / r.t_sc;
    return r;
}

} // namespace shuttle
