#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "semgrid/channel.hpp"
#include "semgrid/graph.hpp"
#include "semgrid/plant.hpp"
#include "semgrid/scenario.hpp"
#include "semgrid/secondary.hpp"
#include "semgrid/semantic.hpp"
#include "semgrid/trace.hpp"
#include "semgrid/wire.hpp"

namespace semgrid {

struct RunResult {
    Trace trace;
    bool diverged = false;
    std::string diagnostic;
    uint64_t packets_sent = 0;
    uint64_t packets_dropped = 0;
    uint64_t packets_delivered = 0;
    uint64_t packets_in_flight = 0;
};

namespace detail {

inline double quantize_fixed(double v) { return to_fixed(v) * kFixedScale; }

/// Internal scheduled change; window edges only reset the trigger envelope
/// anchor and land in the event log (attack activity itself is evaluated
/// against wall-clock windows at send time).
struct SimEvent {
    int64_t step = 0;
    enum Kind { kLoad, kGraph, kAttackOn, kAttackOff } kind = kLoad;
    double factor = 1.0;
    size_t index = 0;
    double t_s = 0.0;
};

}  // namespace detail

/// Deterministic fixed-step runner: plant at dt, publish/deliver/consensus/
/// semantic/secondary at the SC period, with scheduled load steps, graph
/// switches and attack windows. Bit-identical traces for identical
/// scenarios and seeds.
class Simulator {
public:
    explicit Simulator(Scenario scn) : scn_(std::move(scn)) { scn_.validate(); }

    RunResult run() {
        init();
        RunResult res;
        const int64_t n_steps = scn_.total_steps();
        const int ratio = scn_.steps_per_sc();

        apply_events_at(0);
        sc_boundary(0.0);
        emit_row(0.0);

        for (int64_t k = 1; k <= n_steps; ++k) {
            const double t = static_cast<double>(k) * scn_.dt_s;
            apply_events_at(k);
            try {
                plant_step(t);
            } catch (const std::exception& e) {
                res.diverged = true;
                res.diagnostic = e.what();
                log_event(t, "divergence_abort", e.what());
                break;
            }
            if (k % ratio == 0) {
                if (const char* why = divergence_check()) {
                    res.diverged = true;
                    res.diagnostic = why;
                    log_event(t, "divergence_abort", why);
                    break;
                }
                try {
                    sc_boundary(t);
                } catch (const std::exception& e) {
                    // Covers payloads blowing past the wire's fixed-point
                    // range between divergence checks.
                    res.diverged = true;
                    res.diagnostic = e.what();
                    log_event(t, "divergence_abort", e.what());
                    break;
                }
                emit_row(t);
            }
        }

        finalize_meta(res);
        res.trace = std::move(trace_);
        return res;
    }

private:
    Scenario scn_;

    std::vector<DerState> states_;
    std::vector<SecondaryState> secs_;
    std::vector<SamplerState> samplers_;
    std::vector<SigmaPayload> sigma_pub_;       // quantized published payloads this boundary
    std::vector<std::pair<double, double>> u_raw_;
    std::vector<std::pair<double, double>> u_final_;
    std::vector<std::pair<double, double>> fb_;
    std::vector<double> fresh_;
    std::vector<int> trig_;
    std::vector<uint64_t> pub_seq_;

    LineNetwork net_;
    size_t graph_idx_ = 0;
    LoopbackBus bus_;
    std::map<std::pair<int, int>, Link> links_;
    std::map<std::pair<int, int>, std::vector<LinkAttack>> link_attacks_;
    std::map<int, SourceHistory> histories_;    // per TSA-victim source, plant-rate
    std::vector<detail::SimEvent> events_;
    size_t next_event_ = 0;
    double anchor_t_ = 0.0;                     // trigger-envelope time anchor
    std::vector<PowerPq> powers_;

    Trace trace_;

    void init() {
        const int n = scn_.n_agents;
        states_.clear();
        for (int j = 0; j < n; ++j) states_.push_back(DerState::at_nominal(scn_.der[j]));
        secs_.assign(n, SecondaryState{});
        samplers_.assign(n, SamplerState{});
        sigma_pub_.assign(n, SigmaPayload{});
        u_raw_.assign(n, {0.0, 0.0});
        u_final_.assign(n, {0.0, 0.0});
        fb_.assign(n, {0.0, 0.0});
        fresh_.assign(n, kInf);
        trig_.assign(n, 0);
        pub_seq_.assign(n, 0);
        net_ = scn_.network;
        graph_idx_ = 0;
        powers_.assign(n, PowerPq{});

        for (const auto& spec : scn_.attacks)
            for (auto link : spec.links) link_attacks_[link].push_back(spec.attack);
        for (auto& [key, atk] : link_attacks_)
            links_.emplace(key, Link(key.first, key.second, scn_.seed));
        for (const auto& spec : scn_.attacks)
            if (spec.attack.tsa_offset_samples != 0)
                for (auto [src, dst] : spec.links) histories_.emplace(src, SourceHistory{});

        build_events();
        setup_columns();
        setup_meta();
        rebuild_subscriptions();
        log_event(0.0, "start", scn_.name);
    }

    void build_events() {
        events_.clear();
        auto to_step = [&](double t) { return std::llround(t / scn_.dt_s); };
        for (size_t i = 0; i < scn_.load_events.size(); ++i)
            events_.push_back({to_step(scn_.load_events[i].at_s), detail::SimEvent::kLoad,
                               scn_.load_events[i].factor, i, scn_.load_events[i].at_s});
        for (size_t i = 1; i < scn_.graphs.size(); ++i)
            events_.push_back({to_step(scn_.graphs[i].at_s), detail::SimEvent::kGraph, 1.0, i,
                               scn_.graphs[i].at_s});
        for (size_t i = 0; i < scn_.attacks.size(); ++i) {
            const auto& a = scn_.attacks[i].attack;
            if (a.window_start_s > 0.0 && a.window_start_s <= scn_.duration_s)
                events_.push_back({to_step(a.window_start_s), detail::SimEvent::kAttackOn, 1.0, i,
                                   a.window_start_s});
            if (std::isfinite(a.window_end_s) && a.window_end_s <= scn_.duration_s)
                events_.push_back({to_step(a.window_end_s), detail::SimEvent::kAttackOff, 1.0, i,
                                   a.window_end_s});
        }
        std::stable_sort(events_.begin(), events_.end(),
                         [](const auto& a, const auto& b) { return a.step < b.step; });
        next_event_ = 0;
    }

    void apply_events_at(int64_t step) {
        while (next_event_ < events_.size() && events_[next_event_].step == step) {
            const auto& ev = events_[next_event_];
            switch (ev.kind) {
                case detail::SimEvent::kLoad:
                    net_.load_scale *= ev.factor;
                    log_event(ev.t_s, "load_scale", "factor=" + Trace::fmt(ev.factor));
                    break;
                case detail::SimEvent::kGraph:
                    graph_idx_ = ev.index;
                    rebuild_subscriptions();
                    log_event(ev.t_s, "graph_switch", "index=" + std::to_string(ev.index));
                    break;
                case detail::SimEvent::kAttackOn:
                    log_event(ev.t_s, "attack_on", "index=" + std::to_string(ev.index));
                    break;
                case detail::SimEvent::kAttackOff:
                    log_event(ev.t_s, "attack_off", "index=" + std::to_string(ev.index));
                    break;
            }
            anchor_t_ = ev.t_s;  // envelope decay restarts at every disturbance
            ++next_event_;
        }
    }

    const CyberGraph& active_graph() const { return scn_.graphs[graph_idx_].graph; }

    void rebuild_subscriptions() {
        bus_.unsubscribe_all();
        const CyberGraph& g = active_graph();
        for (int src = 0; src < scn_.n_agents; ++src) {
            for (int dst = 0; dst < scn_.n_agents; ++dst) {
                const bool edge = (dst != src) && g.weights(dst, src) > 0.0;
                const bool self_link = (dst == src) && links_.count({src, dst}) > 0;
                if (!edge && !self_link) continue;
                ensure_link(src, dst);
                Link* link = &links_.at({src, dst});
                const std::vector<LinkAttack>* attacks = &link_attacks_[{src, dst}];
                const SourceHistory* hist = nullptr;
                if (auto it = histories_.find(src); it != histories_.end()) hist = &it->second;
                bus_.subscribe(src, dst, [this, link, attacks, hist, src, dst](const std::vector<uint8_t>& bytes) {
                    auto decoded = decode(bytes);
                    if (!std::holds_alternative<SvFrame>(decoded)) return;  // loopback never corrupts
                    const SvFrame& f = std::get<SvFrame>(decoded);
                    Packet pkt;
                    pkt.src = src;
                    pkt.dst = dst;
                    pkt.seq = pub_seq_[static_cast<size_t>(src)];
                    pkt.stamp_s = static_cast<double>(f.stamp_us) * 1e-6;
                    pkt.payload = SigmaPayload{f.values[0], f.values[1], f.values[2]};
                    link->send(std::move(pkt), now_, *attacks, hist);
                });
            }
        }
    }

    void ensure_link(int src, int dst) {
        if (!links_.count({src, dst})) {
            links_.emplace(std::make_pair(src, dst), Link(src, dst, scn_.seed));
            link_attacks_[{src, dst}];  // default: no attacks
        }
    }

    SigmaPayload live_sigma(int j) const {
        const DerState& s = states_[j];
        return {s.omega, scn_.der[j].m_p * s.p_filt, scn_.der[j].n_q * s.q_filt};
    }

    void plant_step(double t_next) {
        powers_ = electrical_powers(net_, states_);
        for (int j = 0; j < scn_.n_agents; ++j) {
            const auto refs = droop_references(scn_.der[j], states_[j], secs_[j].d_omega_c, secs_[j].d_vc);
            states_[j] = step_plant(scn_.der[j], states_[j], refs, powers_[j], scn_.dt_s);
            if (scn_.compensation_enabled)
                downsample(scn_.sampler, samplers_[j], states_[j].e_dvc, states_[j].e_qvc);
        }
        // Plant-rate payload history for TSA replay (quantized like the wire).
        for (auto& [src, hist] : histories_) {
            SigmaPayload p = live_sigma(src);
            p.omega = detail::quantize_fixed(p.omega);
            p.mp_p = detail::quantize_fixed(p.mp_p);
            p.nq_q = detail::quantize_fixed(p.nq_q);
            hist.record(t_next, p);
        }
        now_ = t_next;
    }

    void sc_boundary(double t) {
        now_ = t;
        const CyberGraph& g = active_graph();

        // Publish: one frame per agent through the codec; consensus consumes
        // the same quantized payload the frame carries, so converged payload
        // differences cancel exactly.
        for (int j = 0; j < scn_.n_agents; ++j) {
            SigmaPayload live = live_sigma(j);
            SvFrame f;
            f.sv_id = "DER" + std::to_string(j);
            f.conf_rev = 1;
            f.smp_cnt = static_cast<uint16_t>(pub_seq_[j] & 0xFFFF);
            f.stamp_us = static_cast<uint64_t>(std::llround(t * 1e6));
            f.values = {live.omega, live.mp_p, live.nq_q};
            ++pub_seq_[j];
            sigma_pub_[j] = SigmaPayload{detail::quantize_fixed(live.omega),
                                         detail::quantize_fixed(live.mp_p),
                                         detail::quantize_fixed(live.nq_q)};
            bus_.publish(j, encode(f));
        }

        for (auto& [key, link] : links_) link.deliver_due(t);

        for (int j = 0; j < scn_.n_agents; ++j) {
            std::map<int, SigmaPayload> received;
            double max_age = -kInf;
            bool any_link = false;
            for (const auto& [m, w] : g.neighbors(j)) {
                auto it = links_.find({m, j});
                if (it == links_.end()) continue;
                any_link = true;
                ReceiverSlot& slot = it->second.slot();
                if (slot.has_payload) received[m] = slot.last_payload;
                max_age = std::max(max_age, slot.freshness(t));
            }
            fresh_[j] = any_link ? max_age : kInf;

            SigmaPayload sigma_self = sigma_pub_[j];
            if (auto self = links_.find({j, j}); self != links_.end() && self->second.slot().has_payload)
                sigma_self = self->second.slot().last_payload;  // local-delay variant

            u_raw_[j] = consensus_input(g, scn_.gains, j, sigma_self, received);

            trig_[j] = 0;
            if (scn_.compensation_enabled) {
                SamplerState& sp = samplers_[j];
                prediction_error(sp, u_raw_[j]);
                if (trigger_check(scn_.sampler, sp, states_[j].e_dvc, states_[j].e_qvc, t, t - anchor_t_))
                    trig_[j] = 1;
                fb_[j] = feedback(scn_.sampler, sp);
                u_final_[j] = final_input(u_raw_[j], fb_[j]);
                update_semantics(sp, fresh_[j]);
            } else {
                fb_[j] = {0.0, 0.0};
                u_final_[j] = u_raw_[j];
            }
        }

        for (int j = 0; j < scn_.n_agents; ++j)
            secs_[j] = correction_step(scn_.gains, secs_[j], scn_.der[j].omega_nom, states_[j].omega,
                                       u_final_[j], scn_.sc_period_s);
    }

    // Divergence threshold: 1e6 in natural units, generous enough to record
    // bounded instability as oscillation rather than aborting immediately.
    const char* divergence_check() const {
        for (int j = 0; j < scn_.n_agents; ++j) {
            const DerState& s = states_[j];
            if (std::abs(s.v_d) > 1e6 || std::abs(s.v_q) > 1e6) return "bus voltage beyond 1e6";
            if (std::abs(s.p_filt) > 1e6 || std::abs(s.q_filt) > 1e6) return "filtered power beyond 1e6";
            if (std::abs(secs_[j].int_w) > 1e6 || std::abs(secs_[j].int_v) > 1e6)
                return "secondary integrator beyond 1e6";
        }
        return nullptr;
    }

    void setup_columns() {
        trace_.columns = {"t"};
        const char* names[] = {"omega", "mpp", "nqq",  "vd",    "up",    "uq",   "upf",
                               "uqf",   "edvc", "eqvc", "edd",   "eqd",   "epphi", "eqphi",
                               "dwc",   "dvc",  "F",    "Rp",    "Rq",    "trig"};
        for (int j = 0; j < scn_.n_agents; ++j)
            for (const char* base : names)
                trace_.columns.push_back(std::string(base) + "_" + std::to_string(j));
        trace_.data.assign(trace_.columns.size(), {});
    }

    void setup_meta() {
        trace_.meta["scenario"] = scn_.name;
        trace_.meta["seed"] = std::to_string(scn_.seed);
        trace_.meta["n_agents"] = std::to_string(scn_.n_agents);
        trace_.meta["dt_s"] = Trace::fmt(scn_.dt_s);
        trace_.meta["sc_period_s"] = Trace::fmt(scn_.sc_period_s);
        trace_.meta["duration_s"] = Trace::fmt(scn_.duration_s);
        trace_.meta["omega_nom_rad_s"] = Trace::fmt(scn_.der[0].omega_nom);
        double scale = 0.0;
        for (const auto& d : scn_.der) scale += d.m_p * d.p_rating;
        trace_.meta["droop_scale_rad_s"] = Trace::fmt(scale / scn_.n_agents);
        trace_.meta["compensation"] = scn_.compensation_enabled ? "1" : "0";
        for (size_t i = 0; i < scn_.graphs.size(); ++i) {
            const auto& gs = scn_.graphs[i];
            trace_.meta["graph." + std::to_string(i) + ".at_s"] = Trace::fmt(gs.at_s);
            std::string w;
            for (int r = 0; r < gs.graph.n; ++r) {
                if (r) w += ";";
                for (int c = 0; c < gs.graph.n; ++c) {
                    if (c) w += ",";
                    w += Trace::fmt(gs.graph.weights(r, c));
                }
            }
            trace_.meta["graph." + std::to_string(i) + ".weights"] = w;
        }
    }

    void finalize_meta(RunResult& res) {
        for (const auto& [key, link] : links_) {
            res.packets_sent += link.sent();
            res.packets_dropped += link.dropped();
            res.packets_delivered += link.delivered();
            res.packets_in_flight += link.in_flight();
        }
        trace_.meta["diverged"] = res.diverged ? "1" : "0";
        trace_.meta["packets_sent"] = std::to_string(res.packets_sent);
        trace_.meta["packets_dropped"] = std::to_string(res.packets_dropped);
        trace_.meta["packets_delivered"] = std::to_string(res.packets_delivered);
        trace_.meta["packets_in_flight_at_end"] = std::to_string(res.packets_in_flight);
    }

    void emit_row(double t) {
        std::vector<double> row;
        row.reserve(trace_.columns.size());
        row.push_back(t);
        for (int j = 0; j < scn_.n_agents; ++j) {
            const DerState& s = states_[j];
            const SamplerState& sp = samplers_[j];
            row.push_back(s.omega);
            row.push_back(scn_.der[j].m_p * s.p_filt);
            row.push_back(scn_.der[j].n_q * s.q_filt);
            row.push_back(s.v_d);
            row.push_back(u_raw_[j].first);
            row.push_back(u_raw_[j].second);
            row.push_back(u_final_[j].first);
            row.push_back(u_final_[j].second);
            row.push_back(s.e_dvc);
            row.push_back(s.e_qvc);
            row.push_back(sp.e_dd);
            row.push_back(sp.e_qd);
            row.push_back(fb_[j].first);
            row.push_back(fb_[j].second);
            row.push_back(secs_[j].d_omega_c);
            row.push_back(secs_[j].d_vc);
            row.push_back(fresh_[j]);
            row.push_back(sp.rel_p);
            row.push_back(sp.rel_q);
            row.push_back(static_cast<double>(trig_[j]));
        }
        trace_.add_row(row);
    }

    void log_event(double t, const std::string& kind, const std::string& detail) {
        trace_.events.push_back({t, kind, detail});
    }

    double now_ = 0.0;
};

inline RunResult run(const Scenario& scn) { return Simulator(scn).run(); }

}  // namespace semgrid
