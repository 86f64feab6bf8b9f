#pragma once

#include <algorithm>
#include <map>
#include <utility>

#include "semgrid/common.hpp"
#include "semgrid/graph.hpp"

namespace semgrid {

/// Consensus payload exchanged between agents: sigma = [omega, m^p P, n^q Q].
struct SigmaPayload {
    double omega = 0.0;  // rad/s
    double mp_p = 0.0;   // rad/s (droop-scaled active power)
    double nq_q = 0.0;   // V (droop-scaled reactive power)

    bool operator==(const SigmaPayload&) const = default;
};

struct SecondaryGains {
    double g = 1.0;      // convergence parameter
    double kp_w = 0.1;   // H1 proportional
    double ki_w = 42.0;  // H1 integral
    double kp_v = 0.1;   // H2 proportional
    double ki_v = 1.5;   // H2 integral
    // Anti-windup rails: +/- 10x rated droop deflection by default
    // (10 * m_p * P_rating and 10 * n_q * Q_rating).
    double int_w_limit = 10.0 * 9.4e-5 * 32000.0;
    double int_v_limit = 10.0 * 1.3e-3 * 32000.0;

    void validate() const {
        require(g > 0 && ki_w > 0 && ki_v > 0, "secondary_gains: g, ki_w, ki_v must be > 0");
        require(int_w_limit > 0 && int_v_limit > 0, "secondary_gains: windup limits must be > 0");
    }
};

struct SecondaryState {
    double int_w = 0.0;
    double int_v = 0.0;
    double u_p = 0.0;  // latest consensus inputs, kept for tracing
    double u_q = 0.0;
    double d_omega_c = 0.0;
    double d_vc = 0.0;
};

/// Consensus control input for agent j from its currently deliverable
/// neighbor payloads. Missing neighbors contribute zero — staleness and hold
/// semantics are the channel's job, not this function's.
inline std::pair<double, double> consensus_input(const CyberGraph& g, const SecondaryGains& gains,
                                                 int j, const SigmaPayload& sigma_j,
                                                 const std::map<int, SigmaPayload>& received) {
    require(j >= 0 && j < g.n, "consensus_input: agent index out of range");
    double u_p = 0.0;
    double u_q = 0.0;
    for (const auto& [m, a_jm] : g.neighbors(j)) {
        auto it = received.find(m);
        if (it == received.end()) continue;
        const SigmaPayload& sm = it->second;
        u_p += a_jm * ((sm.omega - sigma_j.omega) + (sm.mp_p - sigma_j.mp_p));
        u_q += a_jm * (sm.nq_q - sigma_j.nq_q);
    }
    return {gains.g * u_p, gains.g * u_q};
}

/// One PI update of the correction terms. The PI acts on restoration-positive
/// error (omega_nom - omega_j plus the consensus sums), so positive error
/// raises the correction; integrators clamp at the anti-windup rails.
inline SecondaryState correction_step(const SecondaryGains& gains, const SecondaryState& st,
                                      double omega_nom, double omega_j,
                                      std::pair<double, double> u_final, double dt) {
    require(dt > 0.0, "correction_step: dt must be > 0");
    SecondaryState n = st;
    const double x_w = (omega_nom - omega_j) + u_final.first;
    n.int_w = std::clamp(st.int_w + gains.ki_w * x_w * dt, -gains.int_w_limit, gains.int_w_limit);
    n.d_omega_c = gains.kp_w * x_w + n.int_w;

    const double x_v = u_final.second;
    n.int_v = std::clamp(st.int_v + gains.ki_v * x_v * dt, -gains.int_v_limit, gains.int_v_limit);
    n.d_vc = gains.kp_v * x_v + n.int_v;

    if (!(finite(n.int_w) && finite(n.int_v) && finite(n.d_omega_c) && finite(n.d_vc)))
        throw NumericsError("correction_step: non-finite correction state");
    return n;
}

}  // namespace semgrid
