#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "semgrid/common.hpp"

namespace semgrid {

/// Configuration of the delay-aware semantic sampler (one instance per DER).
struct SamplerConfig {
    int window_w = 1;              // FIR window length W
    int downsample_d = 10;         // downsampling factor D
    std::vector<double> fir{1.0};  // delta[w]; unit impulse = pure decimation
    double alpha = 0.3;            // trigger threshold scale
    double t_const_s = 0.1 / 42.0; // PI time constant T = Kp/Ki in the decay envelope
    double k1 = 0.5;               // feedback gain, p branch
    double k2 = 0.5;               // feedback gain, q branch
    // Absolute floor under the decaying envelope. The envelope alone decays
    // to zero between events, where the residual prediction error (wire
    // fixed-point quantization keeps it near 1e-3) would trigger forever;
    // the floor stands in for the measurement noise floor of a real rig and
    // bounds the held feedback at quiescence.
    double trigger_floor = 5e-3;

    void validate() const {
        require(window_w >= 1, "sampler: W must be >= 1");
        require(downsample_d >= 1, "sampler: D must be >= 1");
        require(alpha > 0.0, "sampler: alpha must be > 0");
        require(t_const_s > 0.0, "sampler: T must be > 0");
        require(static_cast<int>(fir.size()) == window_w, "sampler: FIR must have exactly W taps");
        require(trigger_floor >= 0.0, "sampler: trigger floor must be >= 0");
    }
};

/// Sampler state: raw-sample ring, downsampled pair, prediction error,
/// held reconstruction and the semantic bookkeeping (F, R).
struct SamplerState {
    std::vector<double> ring_d;  // last W raw e^dVC samples, newest first
    std::vector<double> ring_q;
    uint64_t sample_idx = 0;

    double e_dd = 0.0;  // latest downsampled values
    double e_qd = 0.0;
    bool have_downsample = false;

    double e_pred_p = 0.0;  // e_j, error fed to the prediction policy
    double e_pred_q = 0.0;

    double e_recon_p = 0.0;  // e_j^R, sample-and-hold at trigger instants
    double e_recon_q = 0.0;
    bool recon_held = false;
    double last_trigger_s = -kInf;
    uint64_t trigger_count = 0;

    double fresh_f = kInf;  // mirrored channel freshness
    double rel_p = 0.0;     // relevance R
    double rel_q = 0.0;
};

/// Pushes one raw inner-loop error sample; on every D-th sample emits the
/// FIR-windowed downsampled pair e^{dD}, e^{qD}. The ring zero-pads until W
/// samples have been seen.
inline std::optional<std::pair<double, double>> downsample(const SamplerConfig& cfg, SamplerState& st,
                                                           double e_dvc, double e_qvc) {
    st.ring_d.insert(st.ring_d.begin(), e_dvc);
    st.ring_q.insert(st.ring_q.begin(), e_qvc);
    if (static_cast<int>(st.ring_d.size()) > cfg.window_w) {
        st.ring_d.pop_back();
        st.ring_q.pop_back();
    }
    ++st.sample_idx;
    if (st.sample_idx % static_cast<uint64_t>(cfg.downsample_d) != 0) return std::nullopt;

    double dd = 0.0, qd = 0.0;
    for (int w = 0; w < cfg.window_w; ++w) {
        if (w < static_cast<int>(st.ring_d.size())) {
            dd += st.ring_d[w] * cfg.fir[w];
            qd += st.ring_q[w] * cfg.fir[w];
        }
    }
    st.e_dd = dd;
    st.e_qd = qd;
    st.have_downsample = true;
    return std::make_pair(dd, qd);
}

/// e_j = [e^{dD} e^{qD}] - u_j: mismatch between the local inner-loop proxy
/// and the consensus input received over the network.
inline std::pair<double, double> prediction_error(SamplerState& st, std::pair<double, double> u_pq) {
    st.e_pred_p = st.e_dd - u_pq.first;
    st.e_pred_q = st.e_qd - u_pq.second;
    return {st.e_pred_p, st.e_pred_q};
}

/// Prediction-policy trigger: fires when the prediction-error norm exceeds
/// alpha times the decayed inner-loop error envelope. t in the envelope is
/// time since the last scenario disturbance event. On a trigger the
/// reconstruction sample-and-holds the current prediction error.
inline bool trigger_check(const SamplerConfig& cfg, SamplerState& st, double e_dvc, double e_qvc,
                          double now_s, double t_since_event_s) {
    const double pred_norm = std::hypot(st.e_pred_p, st.e_pred_q);
    const double envelope = std::exp(-t_since_event_s / cfg.t_const_s) * std::hypot(e_dvc, e_qvc);
    const double threshold = cfg.alpha * std::max(envelope, cfg.trigger_floor);
    if (!(pred_norm > threshold)) return false;
    st.e_recon_p = st.e_pred_p;
    st.e_recon_q = st.e_pred_q;
    st.recon_held = true;
    st.last_trigger_s = now_s;
    ++st.trigger_count;
    return true;
}

/// Reconstructed signals fed back to the SC with gains k1, k2; zero before
/// the first trigger.
inline std::pair<double, double> feedback(const SamplerConfig& cfg, const SamplerState& st) {
    if (!st.recon_held) return {0.0, 0.0};
    return {cfg.k1 * st.e_recon_p, cfg.k2 * st.e_recon_q};
}

/// Final predictive inputs to the SC.
inline std::pair<double, double> final_input(std::pair<double, double> u_pq,
                                             std::pair<double, double> fb) {
    return {u_pq.first + fb.first, u_pq.second + fb.second};
}

/// Updates the semantic attributes: F mirrors the channel's stream
/// freshness; R is the drift of the prediction error from the held
/// reconstruction, zero while no reconstruction is held.
inline std::pair<double, std::pair<double, double>> update_semantics(SamplerState& st, double channel_f) {
    st.fresh_f = channel_f;
    if (st.recon_held) {
        st.rel_p = st.e_pred_p - st.e_recon_p;
        st.rel_q = st.e_pred_q - st.e_recon_q;
    } else {
        st.rel_p = 0.0;
        st.rel_q = 0.0;
    }
    return {st.fresh_f, {st.rel_p, st.rel_q}};
}

}  // namespace semgrid
