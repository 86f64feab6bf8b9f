#pragma once

#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "semgrid/metrics.hpp"
#include "semgrid/scenario.hpp"
#include "semgrid/sim.hpp"

namespace semgrid {

enum class SweepAxis { D, alpha, tau };

inline SweepAxis parse_axis(const std::string& s) {
    if (s == "D" || s == "d") return SweepAxis::D;
    if (s == "alpha") return SweepAxis::alpha;
    if (s == "tau") return SweepAxis::tau;
    throw ValidationError("sweep: unknown axis '" + s + "' (want D, alpha or tau)");
}

struct SweepRow {
    double value = 0.0;
    bool o1_converged = false;
    bool o2_converged = false;
    double tc_o1_s = 0.0;
    double tc_o2_s = 0.0;
    double trigger_rate = 0.0;
};

inline Scenario apply_axis(Scenario scn, SweepAxis axis, double value) {
    switch (axis) {
        case SweepAxis::D: {
            const int d = static_cast<int>(std::llround(value));
            require(d >= 1 && std::abs(value - d) < 1e-9, "sweep: D values must be integers >= 1");
            scn.sampler.downsample_d = d;
            break;
        }
        case SweepAxis::alpha:
            require(value > 0.0, "sweep: alpha values must be > 0");
            scn.sampler.alpha = value;
            break;
        case SweepAxis::tau:
            require(value >= 0.0, "sweep: tau values must be >= 0");
            for (auto& a : scn.attacks) a.attack.latency_s = value;
            break;
    }
    return scn;
}

/// One row per axis value: T_c per objective (sentinel rows allowed) and the
/// trigger rate. With several seeds, converged T_c values are averaged and a
/// value is marked converged only if every seed converged. Runs are
/// independent, so they fan out across a small worker pool and join in order.
inline std::vector<SweepRow> sweep(const Scenario& base, SweepAxis axis,
                                   const std::vector<double>& values,
                                   const std::vector<uint64_t>& seeds, double from_event_s,
                                   const ObjectiveBands& bands = {}) {
    require(!values.empty(), "sweep: empty value list");
    std::vector<uint64_t> seed_list = seeds;
    if (seed_list.empty()) seed_list.push_back(base.seed);

    auto one = [&](double value, uint64_t seed) {
        Scenario scn = apply_axis(base, axis, value);
        scn.seed = seed;
        auto rr = run(scn);
        SweepRow row;
        row.value = value;
        auto conv = convergence_time(rr.trace, bands, from_event_s);
        row.o1_converged = conv.o1_converged;
        row.o2_converged = conv.o2_converged;
        row.tc_o1_s = conv.tc_o1_s;
        row.tc_o2_s = conv.tc_o2_s;
        row.trigger_rate = trigger_stats(rr.trace).rate;
        return row;
    };

    std::vector<std::future<SweepRow>> jobs;
    jobs.reserve(values.size() * seed_list.size());
    for (double v : values)
        for (uint64_t s : seed_list)
            jobs.push_back(std::async(std::launch::async, one, v, s));

    std::vector<SweepRow> rows;
    size_t idx = 0;
    for (double v : values) {
        SweepRow agg;
        agg.value = v;
        agg.o1_converged = true;
        agg.o2_converged = true;
        double tc1 = 0.0, tc2 = 0.0, trig = 0.0;
        for (size_t s = 0; s < seed_list.size(); ++s) {
            SweepRow r = jobs[idx++].get();
            agg.o1_converged = agg.o1_converged && r.o1_converged;
            agg.o2_converged = agg.o2_converged && r.o2_converged;
            tc1 += r.o1_converged ? r.tc_o1_s : 0.0;
            tc2 += r.o2_converged ? r.tc_o2_s : 0.0;
            trig += r.trigger_rate;
        }
        const double n = static_cast<double>(seed_list.size());
        agg.tc_o1_s = agg.o1_converged ? tc1 / n : kInf;
        agg.tc_o2_s = agg.o2_converged ? tc2 / n : kInf;
        agg.trigger_rate = trig / n;
        rows.push_back(agg);
    }
    return rows;
}

inline std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
    const char* axis_name = axis == SweepAxis::D ? "D" : axis == SweepAxis::alpha ? "alpha" : "tau";
    std::ostringstream os;
    os << axis_name << ",tc_o1_s,tc_o2_s,trigger_rate\n";
    for (const auto& r : rows) {
        os << Trace::fmt(r.value) << ",";
        os << (r.o1_converged ? Trace::fmt(r.tc_o1_s) : std::string("dnc")) << ",";
        os << (r.o2_converged ? Trace::fmt(r.tc_o2_s) : std::string("dnc")) << ",";
        os << Trace::fmt(r.trigger_rate) << "\n";
    }
    return os.str();
}

/// Tidy long-format series for one paper-style figure: t, series, agent,
/// value. Time-series figures take one trace; the bar figures (fig10-12)
/// are assembled by the CLI from several labeled traces.
inline std::string plotdata_csv(const Trace& tr, const std::string& figure, int agent) {
    require(tr.rows() > 0, "plotdata: empty trace");
    const int n = tr.n_agents();
    require(n >= 1, "plotdata: trace has no agents");

    struct Series {
        std::string label;
        std::string column_base;
        bool all_agents;
    };
    std::vector<Series> series;
    if (figure == "fig5" || figure == "fig6" || figure == "fig7" || figure == "fig8" ||
        figure == "fig9") {
        // Frequency, active and reactive sharing for all DERs; vd for one.
        series = {{"omega", "omega", true}, {"mp_p", "mpp", true}, {"nq_q", "nqq", true},
                  {"v_d", "vd", false}};
    } else if (figure == "fig13") {
        series = {{"e_dvc", "edvc", false}, {"e_dd", "edd", false},   {"e_pphi", "epphi", false},
                  {"e_qvc", "eqvc", false}, {"e_qd", "eqd", false},   {"e_qphi", "eqphi", false}};
    } else if (figure == "fig14" || figure == "fig15") {
        series = {{"omega", "omega", true}, {"mp_p", "mpp", true}, {"nq_q", "nqq", true},
                  {"F", "F", true},         {"trig", "trig", true}};
    } else {
        throw ValidationError("plotdata: unknown figure id '" + figure + "'");
    }

    require(agent >= 0 && agent < n, "plotdata: agent index out of range");
    const int tc = tr.col_required("t");
    std::ostringstream os;
    os << "t,series,agent,value\n";
    for (const auto& s : series) {
        const int a0 = s.all_agents ? 0 : agent;
        const int a1 = s.all_agents ? n - 1 : agent;
        for (int a = a0; a <= a1; ++a) {
            const int c = tr.col_required(s.column_base + "_" + std::to_string(a));
            for (size_t r = 0; r < tr.rows(); ++r)
                os << Trace::fmt(tr.at(r, tc)) << "," << s.label << "," << a << ","
                   << Trace::fmt(tr.at(r, c)) << "\n";
        }
    }
    return os.str();
}

}  // namespace semgrid
