#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "semgrid/common.hpp"
#include "semgrid/graph.hpp"
#include "semgrid/trace.hpp"

namespace semgrid {

struct ObjectiveBands {
    // O1: frequency restoration plus proportional active sharing;
    // O2: proportional reactive sharing. The frequency band is band_frac of
    // the rated droop deflection (trace metadata); the sharing bands apply
    // band_frac directly to the mean-normalized spread.
    double band_frac = 0.02;

    void validate() const {
        require(band_frac > 0.0 && band_frac < 0.5, "bands: band_frac must be in (0, 0.5)");
    }
};

struct ConvergenceResult {
    bool o1_converged = false;
    bool o2_converged = false;
    double tc_o1_s = kInf;  // infinite when not converged
    double tc_o2_s = kInf;
};

struct TriggerStats {
    double rate = 0.0;       // triggers per (SC update x agent), whole trace
    double tail_rate = 0.0;  // same over the final quarter (steady state)
    std::map<int, uint64_t> inter_trigger_hist;  // gap in SC steps -> count
};

struct AoiStats {
    bool any = false;
    double mean_s = 0.0;
    double max_s = 0.0;
};

struct LyapunovReport {
    int violations = 0;
    uint64_t samples = 0;
    std::optional<double> gamma_mean;  // empirical u^2 / u_hat^2 at triggers
};

struct MetricReport {
    ConvergenceResult convergence;
    double sse_o1 = 0.0;
    double sse_o2 = 0.0;
    TriggerStats triggers;
    LyapunovReport lyapunov;
    AoiStats aoi;
};

namespace detail {

struct ObjectiveSeries {
    std::vector<double> t;
    std::vector<double> x1;  // max_j |omega_j - omega_nom|, rad/s
    std::vector<double> x2;  // (max - min) of m^p P, normalized by |mean|
    std::vector<double> x3;  // same for n^q Q
    double droop_scale = 0.0;
};

inline ObjectiveSeries objective_series(const Trace& tr) {
    const int n = tr.n_agents();
    require(n >= 1, "metrics: trace has no n_agents metadata");
    const double omega_nom = tr.meta_num("omega_nom_rad_s", 314.15);
    ObjectiveSeries s;
    s.droop_scale = tr.meta_num("droop_scale_rad_s", 3.008);
    const int tc = tr.col_required("t");
    std::vector<int> c_omega(n), c_mpp(n), c_nqq(n);
    for (int j = 0; j < n; ++j) {
        c_omega[j] = tr.col_required("omega_" + std::to_string(j));
        c_mpp[j] = tr.col_required("mpp_" + std::to_string(j));
        c_nqq[j] = tr.col_required("nqq_" + std::to_string(j));
    }
    const size_t rows = tr.rows();
    s.t.resize(rows);
    s.x1.resize(rows);
    s.x2.resize(rows);
    s.x3.resize(rows);
    for (size_t r = 0; r < rows; ++r) {
        s.t[r] = tr.at(r, tc);
        double dev = 0.0;
        double mp_min = kInf, mp_max = -kInf, mp_sum = 0.0;
        double nq_min = kInf, nq_max = -kInf, nq_sum = 0.0;
        for (int j = 0; j < n; ++j) {
            dev = std::max(dev, std::abs(tr.at(r, c_omega[j]) - omega_nom));
            const double mp = tr.at(r, c_mpp[j]);
            const double nq = tr.at(r, c_nqq[j]);
            mp_min = std::min(mp_min, mp);
            mp_max = std::max(mp_max, mp);
            mp_sum += mp;
            nq_min = std::min(nq_min, nq);
            nq_max = std::max(nq_max, nq);
            nq_sum += nq;
        }
        s.x1[r] = dev;
        const double mp_ref = std::max(std::abs(mp_sum / n), 1e-9 * s.droop_scale);
        const double nq_ref = std::max(std::abs(nq_sum / n), 1e-9 * s.droop_scale);
        s.x2[r] = (mp_max - mp_min) / mp_ref;
        s.x3[r] = (nq_max - nq_min) / nq_ref;
    }
    return s;
}

inline double tail_mean(const std::vector<double>& v, size_t from) {
    double sum = 0.0;
    size_t count = 0;
    for (size_t r = from; r < v.size(); ++r) {
        sum += v[r];
        ++count;
    }
    return count ? sum / count : 0.0;
}

}  // namespace detail

/// T_c per objective: the earliest time after from_event_s from which every
/// later sample of the objective signals stays inside the band around the
/// final-window mean. Diverged traces report the not-converged sentinel.
inline ConvergenceResult convergence_time(const Trace& tr, const ObjectiveBands& bands,
                                          double from_event_s) {
    bands.validate();
    ConvergenceResult res;
    if (tr.meta_num("diverged", 0) != 0.0) return res;

    const auto s = detail::objective_series(tr);
    require(!s.t.empty(), "metrics: empty trace");
    if (s.t.back() < from_event_s + 1.0)
        throw std::invalid_argument("metrics: trace must extend at least 1 s past from_event_s");

    const size_t rows = s.t.size();
    const size_t tail_from = rows - std::max<size_t>(1, rows / 10);
    const double x1_f = detail::tail_mean(s.x1, tail_from);
    const double x2_f = detail::tail_mean(s.x2, tail_from);
    const double x3_f = detail::tail_mean(s.x3, tail_from);
    const double band_w = bands.band_frac * s.droop_scale;
    const double band_rel = bands.band_frac;

    size_t start = 0;
    while (start < rows && s.t[start] < from_event_s) ++start;

    std::optional<size_t> last_bad_o1, last_bad_o2;
    for (size_t r = rows; r-- > start;) {
        const bool ok1 = std::abs(s.x1[r] - x1_f) <= band_w && std::abs(s.x2[r] - x2_f) <= band_rel;
        const bool ok2 = std::abs(s.x3[r] - x3_f) <= band_rel;
        if (!ok1 && !last_bad_o1) last_bad_o1 = r;
        if (!ok2 && !last_bad_o2) last_bad_o2 = r;
        if (last_bad_o1 && last_bad_o2) break;
    }

    auto settle = [&](std::optional<size_t> last_bad) -> std::optional<double> {
        if (!last_bad) return std::max(0.0, s.t[start] - from_event_s);
        const size_t first_ok = *last_bad + 1;
        if (first_ok >= rows) return std::nullopt;  // violated through the end
        return s.t[first_ok] - from_event_s;
    };
    if (auto t1 = settle(last_bad_o1)) {
        res.o1_converged = true;
        res.tc_o1_s = *t1;
    }
    if (auto t2 = settle(last_bad_o2)) {
        res.o2_converged = true;
        res.tc_o2_s = *t2;
    }
    return res;
}

/// Steady-state error over the final 10% window:
///   sse_o1 = mean(max_j |omega_j - omega_nom|) + droop_scale * mean(m^p P spread)
///   sse_o2 = mean(n^q Q spread)
/// (spreads are mean-normalized, so sse_o1 is in rad/s and sse_o2 is relative).
inline std::pair<double, double> steady_state_error(const Trace& tr, const ObjectiveBands& bands) {
    bands.validate();
    const auto s = detail::objective_series(tr);
    require(s.t.size() >= 10, "metrics: trace too short for a final 10% window");
    const size_t tail_from = s.t.size() - std::max<size_t>(1, s.t.size() / 10);
    const double sse_o1 =
        detail::tail_mean(s.x1, tail_from) + s.droop_scale * detail::tail_mean(s.x2, tail_from);
    const double sse_o2 = detail::tail_mean(s.x3, tail_from);
    return {sse_o1, sse_o2};
}

/// Disagreement-decrease monitor over Y = (dVc, dwc): between trigger
/// events, V(k) = sum_j sum_{m in N_j} |Y_m(k) - Y_hat_j(k)|^2 must not
/// increase beyond tolerance outside event-transient windows (0.1 s after
/// each logged scenario event). Y_hat holds the value at the agent's last
/// trigger. "Between trigger events" is taken literally: segments bounded
/// by triggers on both sides. Once sampling goes permanently quiet the held
/// values are stale and the decrease claim no longer applies, so rows after
/// the final trigger are outside the monitored window; traces without any
/// triggers are monitored in full as plain signal traces. Also measures the
/// empirical trigger-evaluation ratio u^2 / u_hat^2, which the analysis
/// names but never pins numerically.
inline LyapunovReport lyapunov_monitor(const Trace& tr, double tol = 1e-9,
                                       double event_mask_s = 0.1) {
    LyapunovReport rep;
    const int n = tr.n_agents();
    require(n >= 1, "metrics: trace has no n_agents metadata");

    // Active graph per row, from metadata.
    std::vector<std::pair<double, Mat>> graphs;
    for (int gi = 0;; ++gi) {
        const auto at_it = tr.meta.find("graph." + std::to_string(gi) + ".at_s");
        const auto w_it = tr.meta.find("graph." + std::to_string(gi) + ".weights");
        if (at_it == tr.meta.end() || w_it == tr.meta.end()) break;
        Mat w = Mat::square(n);
        std::istringstream rows_ss(w_it->second);
        std::string row;
        int r = 0;
        while (std::getline(rows_ss, row, ';') && r < n) {
            std::istringstream cells(row);
            std::string cell;
            int c = 0;
            while (std::getline(cells, cell, ',') && c < n) {
                w(r, c) = std::strtod(cell.c_str(), nullptr);
                ++c;
            }
            ++r;
        }
        graphs.emplace_back(std::strtod(at_it->second.c_str(), nullptr), std::move(w));
    }
    require(!graphs.empty(), "metrics: trace lacks graph metadata for the monitor");

    const int tc = tr.col_required("t");
    std::vector<int> c_dwc(n), c_dvc(n), c_trig(n), c_up(n), c_uq(n);
    for (int j = 0; j < n; ++j) {
        c_dwc[j] = tr.col_required("dwc_" + std::to_string(j));
        c_dvc[j] = tr.col_required("dvc_" + std::to_string(j));
        c_trig[j] = tr.col_required("trig_" + std::to_string(j));
        c_up[j] = tr.col_required("up_" + std::to_string(j));
        c_uq[j] = tr.col_required("uq_" + std::to_string(j));
    }

    std::vector<double> event_times;
    for (const auto& e : tr.events) event_times.push_back(e.t_s);
    auto in_event_mask = [&](double t) {
        for (double te : event_times)
            if (t >= te && t < te + event_mask_s) return true;
        return false;
    };
    auto weights_at = [&](double t) -> const Mat& {
        size_t idx = 0;
        for (size_t i = 0; i < graphs.size(); ++i)
            if (t >= graphs[i].first) idx = i;
        return graphs[idx].second;
    };

    const size_t rows = tr.rows();
    size_t monitored_rows = rows;  // up to the final trigger, when any exist
    bool any_trigger_in_trace = false;
    for (size_t r = rows; r-- > 0 && !any_trigger_in_trace;) {
        for (int j = 0; j < n; ++j)
            if (tr.at(r, c_trig[j]) != 0.0) {
                any_trigger_in_trace = true;
                monitored_rows = r + 1;
                break;
            }
    }
    if (!any_trigger_in_trace) monitored_rows = rows;

    std::vector<double> hat_w(n), hat_v(n);
    std::vector<std::pair<double, double>> u_at_last_trigger(n, {0.0, 0.0});
    std::vector<bool> have_prev_trigger(n, false);
    for (int j = 0; j < n; ++j) {
        hat_w[j] = tr.at(0, c_dwc[j]);
        hat_v[j] = tr.at(0, c_dvc[j]);
    }

    double gamma_sum = 0.0;
    uint64_t gamma_count = 0;
    double v_prev = 0.0;
    bool v_prev_valid = false;

    for (size_t r = 0; r < monitored_rows; ++r) {
        const double t = tr.at(r, tc);
        bool any_trigger = false;
        for (int j = 0; j < n; ++j) {
            if (tr.at(r, c_trig[j]) != 0.0) {
                any_trigger = true;
                const double u2 = tr.at(r, c_up[j]) * tr.at(r, c_up[j]) +
                                  tr.at(r, c_uq[j]) * tr.at(r, c_uq[j]);
                if (have_prev_trigger[j]) {
                    const auto [pu, pq] = u_at_last_trigger[j];
                    const double uh2 = pu * pu + pq * pq;
                    if (uh2 > 0.0 && u2 > 0.0) {
                        gamma_sum += u2 / uh2;
                        ++gamma_count;
                    }
                }
                u_at_last_trigger[j] = {tr.at(r, c_up[j]), tr.at(r, c_uq[j])};
                have_prev_trigger[j] = true;
                hat_w[j] = tr.at(r, c_dwc[j]);
                hat_v[j] = tr.at(r, c_dvc[j]);
            }
        }

        const Mat& w = weights_at(t);
        double v = 0.0;
        for (int j = 0; j < n; ++j)
            for (int m = 0; m < n; ++m) {
                if (w(j, m) <= 0.0) continue;
                const double dw = tr.at(r, c_dwc[m]) - hat_w[j];
                const double dv = tr.at(r, c_dvc[m]) - hat_v[j];
                v += dw * dw + dv * dv;
            }

        if (v_prev_valid && !any_trigger && !in_event_mask(t)) {
            ++rep.samples;
            if (v > v_prev + tol) ++rep.violations;
        }
        v_prev = v;
        v_prev_valid = true;
    }
    if (gamma_count > 0) rep.gamma_mean = gamma_sum / gamma_count;
    return rep;
}

/// Trigger rate and inter-trigger gap histogram. The tail rate covers the
/// final quarter of the trace, the steady-state portion the sparsity claim
/// is about.
inline TriggerStats trigger_stats(const Trace& tr) {
    TriggerStats st;
    const int n = tr.n_agents();
    require(n >= 1, "metrics: trace has no n_agents metadata");
    std::vector<int> c_trig(n);
    for (int j = 0; j < n; ++j) c_trig[j] = tr.col_required("trig_" + std::to_string(j));
    const size_t rows = tr.rows();
    if (rows == 0) return st;

    uint64_t total = 0, tail = 0;
    const size_t tail_from = rows - std::max<size_t>(1, rows / 4);
    for (int j = 0; j < n; ++j) {
        std::optional<size_t> last;
        for (size_t r = 0; r < rows; ++r) {
            if (tr.at(r, c_trig[j]) == 0.0) continue;
            ++total;
            if (r >= tail_from) ++tail;
            if (last) ++st.inter_trigger_hist[static_cast<int>(r - *last)];
            last = r;
        }
    }
    st.rate = static_cast<double>(total) / (static_cast<double>(rows) * n);
    st.tail_rate = static_cast<double>(tail) / (static_cast<double>(rows - tail_from) * n);
    return st;
}

inline AoiStats aoi_stats(const Trace& tr) {
    AoiStats st;
    const int n = tr.n_agents();
    require(n >= 1, "metrics: trace has no n_agents metadata");
    double sum = 0.0;
    uint64_t count = 0;
    for (int j = 0; j < n; ++j) {
        const int c = tr.col_required("F_" + std::to_string(j));
        for (size_t r = 0; r < tr.rows(); ++r) {
            const double f = tr.at(r, c);
            if (!std::isfinite(f)) continue;
            sum += f;
            st.max_s = std::max(st.max_s, f);
            ++count;
        }
    }
    if (count > 0) {
        st.any = true;
        st.mean_s = sum / count;
    }
    return st;
}

inline MetricReport metric_report(const Trace& tr, const ObjectiveBands& bands, double from_event_s) {
    MetricReport rep;
    rep.convergence = convergence_time(tr, bands, from_event_s);
    auto [s1, s2] = steady_state_error(tr, bands);
    rep.sse_o1 = s1;
    rep.sse_o2 = s2;
    rep.triggers = trigger_stats(tr);
    rep.lyapunov = lyapunov_monitor(tr);
    rep.aoi = aoi_stats(tr);
    return rep;
}

}  // namespace semgrid
