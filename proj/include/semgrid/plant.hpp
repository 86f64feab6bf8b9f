#pragma once

#include <span>
#include <vector>

#include "semgrid/common.hpp"

namespace semgrid {

/// Per-DER design parameters. Defaults follow the 32 kW test-system ratings;
/// omega_f and t_v parameterize the reduced-order measurement filter and
/// voltage-tracking lag.
struct DerParams {
    double m_p = 9.4e-5;          // active-power droop gain, rad/(W s)
    double n_q = 1.3e-3;          // reactive-power droop gain, V/VAr
    double omega_nom = 314.15;    // rad/s
    double v_nom = 311.12698372208091;  // 220*sqrt(2) V
    double p_rating = 32000.0;    // W
    double omega_f = 31.41;       // power-measurement low-pass cutoff, rad/s
    double t_v = 0.01;            // voltage-loop surrogate time constant, s

    void validate() const {
        require(m_p > 0 && n_q > 0 && omega_nom > 0 && v_nom > 0, "der_params: gains/nominals must be > 0");
        require(p_rating > 0 && omega_f > 0 && t_v > 0, "der_params: rating/filter constants must be > 0");
    }
};

/// Electrical/controller state of one DER.
struct DerState {
    double delta = 0.0;   // electrical angle, rad
    double omega = 0.0;   // rad/s
    double v_d = 0.0;     // V
    double v_q = 0.0;     // V
    double p_filt = 0.0;  // filtered active power, W
    double q_filt = 0.0;  // filtered reactive power, VAr
    double e_dvc = 0.0;   // inner voltage-loop error, d axis, V
    double e_qvc = 0.0;   // inner voltage-loop error, q axis, V

    static DerState at_nominal(const DerParams& p) {
        DerState s;
        s.omega = p.omega_nom;
        s.v_d = p.v_nom;
        return s;
    }
};

struct DroopRefs {
    double omega_star = 0.0;
    double v_d_star = 0.0;
    double v_q_star = 0.0;  // fixed 0 by the droop law
};

struct PowerPq {
    double p_w = 0.0;
    double q_var = 0.0;
};

/// Reduced-order electrical coupling: DC power flow for P (angle based) and a
/// linear voltage-difference model for Q, with per-bus constant-power loads.
/// Lossless by construction: branch flows are antisymmetric, so generation
/// always balances load exactly.
struct LineNetwork {
    int n = 0;
    Mat susceptances;                 // B_jk, p.u., symmetric, zero diagonal
    std::vector<double> load_p_w;     // per-bus active demand, W
    std::vector<double> load_q_var;   // per-bus reactive demand, VAr
    double s_base_w = 32000.0;        // power base for p.u. susceptances
    double q_coef_var_per_v = 1000.0; // VAr per volt of bus-voltage difference at B = 1 p.u.
    double load_scale = 1.0;          // scenario load events multiply this

    static LineNetwork ring(int n, double b_pu, std::vector<double> load_p, std::vector<double> load_q) {
        LineNetwork net;
        net.n = n;
        net.susceptances = Mat::square(n);
        if (n > 1) {
            for (int j = 0; j < n; ++j) {
                net.susceptances(j, (j + 1) % n) = b_pu;
                net.susceptances((j + 1) % n, j) = b_pu;
            }
        }
        net.load_p_w = std::move(load_p);
        net.load_q_var = std::move(load_q);
        net.validate();
        return net;
    }

    void validate() const {
        require(n >= 1, "network: empty");
        require(susceptances.rows() == n && susceptances.cols() == n, "network: susceptance matrix not n x n");
        require(susceptances.symmetric(), "network: susceptances must be symmetric");
        for (int j = 0; j < n; ++j) {
            require(susceptances(j, j) == 0.0, "network: susceptance diagonal must be 0");
            for (int k = 0; k < n; ++k)
                require(susceptances(j, k) >= 0.0, "network: susceptances must be >= 0");
        }
        require(static_cast<int>(load_p_w.size()) == n && static_cast<int>(load_q_var.size()) == n,
                "network: load vectors must have one entry per bus");
        require(s_base_w > 0 && q_coef_var_per_v > 0, "network: base/coupling constants must be > 0");
    }
};

/// Droop references with secondary correction terms applied.
inline DroopRefs droop_references(const DerParams& p, const DerState& s, double d_omega_c, double d_vc) {
    DroopRefs r;
    r.omega_star = p.omega_nom - p.m_p * s.p_filt + d_omega_c;
    r.v_d_star = p.v_nom - p.n_q * s.q_filt + d_vc;
    r.v_q_star = 0.0;
    return r;
}

/// Per-DER electrical powers: local load share plus branch flows.
inline std::vector<PowerPq> electrical_powers(const LineNetwork& net, std::span<const DerState> states) {
    require(static_cast<int>(states.size()) == net.n, "electrical_powers: state count mismatch");
    std::vector<PowerPq> out(net.n);
    for (int j = 0; j < net.n; ++j) {
        const DerState& sj = states[j];
        require(finite(sj.delta) && finite(sj.v_d), "electrical_powers: non-finite state");
        double p = net.load_scale * net.load_p_w[j];
        double q = net.load_scale * net.load_q_var[j];
        for (int k = 0; k < net.n; ++k) {
            const double b = net.susceptances(j, k);
            if (b == 0.0) continue;
            p += b * std::sin(sj.delta - states[k].delta) * net.s_base_w;
            q += b * (sj.v_d - states[k].v_d) * net.q_coef_var_per_v;
        }
        out[j].p_w = p;
        out[j].q_var = q;
    }
    return out;
}

/// One explicit-Euler plant step. Droop is algebraic in omega; power
/// measurements and the dq voltage both follow first-order lags. The inner
/// voltage-loop error signals are what the semantic sampler consumes.
inline DerState step_plant(const DerParams& p, const DerState& s, const DroopRefs& refs,
                           const PowerPq& pw, double dt) {
    require(dt > 0.0 && dt <= 1e-3, "step_plant: dt must be in (0, 1e-3]");
    DerState n = s;
    n.omega = refs.omega_star;
    n.delta = s.delta + (n.omega - p.omega_nom) * dt;
    n.p_filt = s.p_filt + p.omega_f * (pw.p_w - s.p_filt) * dt;
    n.q_filt = s.q_filt + p.omega_f * (pw.q_var - s.q_filt) * dt;
    n.v_d = s.v_d + (refs.v_d_star - s.v_d) / p.t_v * dt;
    n.v_q = s.v_q + (refs.v_q_star - s.v_q) / p.t_v * dt;
    n.e_dvc = refs.v_d_star - n.v_d;
    n.e_qvc = refs.v_q_star - n.v_q;

    if (!(finite(n.delta) && finite(n.omega) && finite(n.v_d) && finite(n.v_q) &&
          finite(n.p_filt) && finite(n.q_filt) && finite(n.e_dvc) && finite(n.e_qvc)))
        throw NumericsError("step_plant: non-finite state");
    if (!(std::abs(n.omega - p.omega_nom) < p.omega_nom))
        throw NumericsError("step_plant: omega outside sanity envelope");
    return n;
}

}  // namespace semgrid
