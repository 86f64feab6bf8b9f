#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "semgrid/channel.hpp"
#include "semgrid/common.hpp"
#include "semgrid/graph.hpp"
#include "semgrid/plant.hpp"
#include "semgrid/secondary.hpp"
#include "semgrid/semantic.hpp"

namespace semgrid {

/// Scenario file syntax error (CLI exit 2).
class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Scenario semantic error (CLI exit 3).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct GraphSpec {
    double at_s = 0.0;
    CyberGraph graph;
};

struct AttackSpec {
    std::vector<std::pair<int, int>> links;  // directed (src, dst); src == dst is a local delay
    LinkAttack attack;
};

struct LoadEvent {
    double at_s = 0.0;
    double factor = 1.0;
};

/// Declarative experiment: plant, cyber graph(s), gains, sampler, attack
/// schedule and load events. All defaults mirror the reference test-system
/// parameters; every field is settable from the scenario file.
struct Scenario {
    std::string name = "scenario";
    uint64_t seed = 1;
    double dt_s = 1e-4;
    double sc_period_s = 1e-3;
    double duration_s = 10.0;
    bool compensation_enabled = true;

    int n_agents = 0;
    std::vector<GraphSpec> graphs;
    std::vector<DerParams> der;
    LineNetwork network;
    SecondaryGains gains;
    SamplerConfig sampler;
    std::vector<LoadEvent> load_events;
    std::vector<AttackSpec> attacks;

    int steps_per_sc() const { return static_cast<int>(std::llround(sc_period_s / dt_s)); }
    int64_t total_steps() const { return std::llround(duration_s / dt_s); }

    void validate() const {
        if (n_agents < 1) throw ValidationError("scenario: der.count must be >= 1");
        if (!(dt_s > 0.0 && dt_s <= 1e-3)) throw ValidationError("scenario: sim.dt_s must be in (0, 1e-3]");
        if (!(duration_s > 0.0)) throw ValidationError("scenario: sim.duration_s must be > 0");
        const double ratio = sc_period_s / dt_s;
        if (std::abs(ratio - std::llround(ratio)) > 1e-9 * ratio || std::llround(ratio) < 1)
            throw ValidationError("scenario: sim.sc_period_s must be an integer multiple of sim.dt_s");
        if (graphs.empty()) throw ValidationError("scenario: at least one graph required");
        if (graphs.front().at_s != 0.0) throw ValidationError("scenario: first graph must start at t = 0");
        for (size_t i = 0; i + 1 < graphs.size(); ++i)
            if (!(graphs[i].at_s < graphs[i + 1].at_s))
                throw ValidationError("scenario: graph switch times must be strictly increasing");
        for (const auto& gs : graphs) {
            if (gs.graph.n != n_agents) throw ValidationError("scenario: graph size differs from der.count");
            try {
                gs.graph.validate();
            } catch (const std::exception& e) {
                throw ValidationError(std::string("scenario: ") + e.what());
            }
        }
        if (static_cast<int>(der.size()) != n_agents)
            throw ValidationError("scenario: internal der list size mismatch");
        try {
            for (const auto& d : der) d.validate();
            network.validate();
            gains.validate();
            sampler.validate();
        } catch (const std::exception& e) {
            throw ValidationError(std::string("scenario: ") + e.what());
        }
        if (network.n != n_agents) throw ValidationError("scenario: network size differs from der.count");
        for (const auto& a : attacks) {
            try {
                a.attack.validate();
            } catch (const std::exception& e) {
                throw ValidationError(std::string("scenario: ") + e.what());
            }
            if (a.links.empty()) throw ValidationError("scenario: attack with no links");
            for (auto [s, d] : a.links)
                if (s < 0 || s >= n_agents || d < 0 || d >= n_agents)
                    throw ValidationError("scenario: attack link index out of range");
        }
        for (const auto& ev : load_events) {
            if (!(ev.at_s >= 0.0)) throw ValidationError("scenario: load event before t = 0");
            if (!(ev.factor > 0.0)) throw ValidationError("scenario: load factor must be > 0");
        }
    }
};

namespace detail {

struct KeyValue {
    std::string value;
    int line = 0;
    mutable bool used = false;
};

class KvTable {
public:
    std::map<std::string, KeyValue> kv;

    bool has(const std::string& key) const { return kv.count(key) > 0; }

    std::optional<std::string> get(const std::string& key) const {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        it->second.used = true;
        return it->second.value;
    }

    double num(const std::string& key, double fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        return parse_num(key, *v);
    }

    double num_required(const std::string& key) const {
        auto v = get(key);
        if (!v) throw ValidationError("scenario: missing required key " + key);
        return parse_num(key, *v);
    }

    bool flag(const std::string& key, bool fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1") return true;
        if (*v == "false" || *v == "0") return false;
        throw ParseError(line_of(key), "expected true/false for " + key);
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        auto v = get(key);
        return v ? *v : fallback;
    }

    std::vector<double> num_list(const std::string& key) const {
        auto v = get(key);
        if (!v) return {};
        std::vector<double> out;
        std::istringstream ss(*v);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(parse_num(key, cell));
        return out;
    }

    int line_of(const std::string& key) const {
        auto it = kv.find(key);
        return it == kv.end() ? 0 : it->second.line;
    }

    double parse_num(const std::string& key, const std::string& s) const {
        std::string trimmed = trim(s);
        if (trimmed == "inf") return kInf;
        char* end = nullptr;
        const double v = std::strtod(trimmed.c_str(), &end);
        if (end == trimmed.c_str() || *end != '\0')
            throw ParseError(line_of(key), "malformed number '" + trimmed + "' for " + key);
        return v;
    }

    static std::string trim(const std::string& s) {
        size_t a = s.find_first_not_of(" \t");
        size_t b = s.find_last_not_of(" \t");
        if (a == std::string::npos) return "";
        return s.substr(a, b - a + 1);
    }
};

inline KvTable tokenize_scenario(const std::string& text) {
    KvTable table;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = KvTable::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, "expected 'key = value'");
        const std::string key = KvTable::trim(line.substr(0, eq));
        const std::string value = KvTable::trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError(lineno, "empty key");
        if (table.kv.count(key)) throw ParseError(lineno, "duplicate key " + key);
        table.kv[key] = KeyValue{value, lineno, false};
    }
    return table;
}

inline CyberGraph make_graph_from_kv(const KvTable& kv, const std::string& prefix, int n_agents) {
    const std::string preset = kv.text(prefix + ".preset", "complete");
    const int n = static_cast<int>(kv.num(prefix + ".n", n_agents));
    const double w = kv.num(prefix + ".weight", 1.0);
    if (preset == "complete") return CyberGraph::complete(n, w);
    if (preset == "ring") return CyberGraph::ring(n, w);
    if (preset == "line") return CyberGraph::line(n, w);
    if (preset == "matrix") {
        Mat m = Mat::square(n);
        for (int r = 0; r < n; ++r) {
            auto row = kv.num_list(prefix + ".row." + std::to_string(r));
            if (static_cast<int>(row.size()) != n)
                throw ValidationError("scenario: " + prefix + ".row." + std::to_string(r) +
                                      " must have " + std::to_string(n) + " entries");
            for (int c = 0; c < n; ++c) m(r, c) = row[c];
        }
        const bool directed = kv.flag(prefix + ".directed", false);
        return CyberGraph::from_weights(std::move(m), !directed);
    }
    throw ValidationError("scenario: unknown graph preset '" + preset + "'");
}

inline std::vector<std::pair<int, int>> expand_links(const std::string& spec, int n) {
    std::vector<std::pair<int, int>> out;
    if (spec == "all") {
        for (int s = 0; s < n; ++s)
            for (int d = 0; d < n; ++d)
                if (s != d) out.emplace_back(s, d);
        return out;
    }
    if (spec == "ring") {
        for (int j = 0; j < n; ++j) {
            out.emplace_back(j, (j + 1) % n);
            out.emplace_back((j + 1) % n, j);
        }
        return out;
    }
    if (spec.rfind("from:", 0) == 0) {
        const int s = std::stoi(spec.substr(5));
        for (int d = 0; d < n; ++d)
            if (d != s) out.emplace_back(s, d);
        return out;
    }
    if (spec.rfind("self:", 0) == 0) {
        const int j = std::stoi(spec.substr(5));
        out.emplace_back(j, j);
        return out;
    }
    // Explicit list: "0>1 2>3" (whitespace separated).
    std::istringstream ss(spec);
    std::string tok;
    while (ss >> tok) {
        const auto gt = tok.find('>');
        if (gt == std::string::npos)
            throw ValidationError("scenario: malformed link '" + tok + "' (want src>dst)");
        out.emplace_back(std::stoi(tok.substr(0, gt)), std::stoi(tok.substr(gt + 1)));
    }
    if (out.empty()) throw ValidationError("scenario: empty link list '" + spec + "'");
    return out;
}

inline std::vector<std::pair<int, int>> expand_links_unique(const std::string& spec, int n) {
    auto links = expand_links(spec, n);
    std::sort(links.begin(), links.end());
    links.erase(std::unique(links.begin(), links.end()), links.end());
    return links;
}

inline LineNetwork make_network_from_kv(const KvTable& kv, int n) {
    LineNetwork net;
    net.n = n;
    const std::string preset = kv.text("network.preset", "ring");
    const double b = kv.num("network.b_pu", 1.0);
    net.susceptances = Mat::square(n);
    if (preset == "ring" && n > 1) {
        for (int j = 0; j < n; ++j) {
            net.susceptances(j, (j + 1) % n) = b;
            net.susceptances((j + 1) % n, j) = b;
        }
    } else if (preset == "line") {
        for (int j = 0; j + 1 < n; ++j) {
            net.susceptances(j, j + 1) = b;
            net.susceptances(j + 1, j) = b;
        }
    } else if (preset == "complete") {
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                if (j != k) net.susceptances(j, k) = b;
    } else if (preset == "matrix") {
        for (int r = 0; r < n; ++r) {
            auto row = kv.num_list("network.row." + std::to_string(r));
            if (static_cast<int>(row.size()) != n)
                throw ValidationError("scenario: network.row." + std::to_string(r) + " size mismatch");
            for (int c = 0; c < n; ++c) net.susceptances(r, c) = row[c];
        }
    } else if (preset != "ring") {
        throw ValidationError("scenario: unknown network preset '" + preset + "'");
    }
    net.s_base_w = kv.num("network.s_base_w", 32000.0);
    net.q_coef_var_per_v = kv.num("network.q_coef_var_per_v", 1000.0);
    auto lp = kv.num_list("network.load_p_w");
    auto lq = kv.num_list("network.load_q_var");
    if (lp.empty()) lp.assign(n, 16000.0);
    if (lq.empty()) lq.assign(n, 4000.0);
    if (static_cast<int>(lp.size()) == 1) lp.assign(n, lp[0]);
    if (static_cast<int>(lq.size()) == 1) lq.assign(n, lq[0]);
    net.load_p_w = std::move(lp);
    net.load_q_var = std::move(lq);
    return net;
}

}  // namespace detail

/// Parses the flat key-path scenario text. Syntax problems raise ParseError
/// (with the offending line); semantic problems raise ValidationError.
inline Scenario parse_scenario_text(const std::string& text, const std::string& name = "scenario") {
    using namespace detail;
    const KvTable kv = tokenize_scenario(text);

    Scenario scn;
    scn.name = name;
    scn.seed = static_cast<uint64_t>(kv.num("seed", 1));
    scn.dt_s = kv.num("sim.dt_s", 1e-4);
    scn.sc_period_s = kv.num("sim.sc_period_s", 1e-3);
    scn.duration_s = kv.num("sim.duration_s", 10.0);
    scn.compensation_enabled = kv.flag("sim.compensation_enabled", true);
    scn.n_agents = static_cast<int>(kv.num("der.count", 7));
    if (scn.n_agents < 1) throw ValidationError("scenario: der.count must be >= 1");

    // Graph list: graph.0.*, graph.1.* ... with switch times.
    for (int i = 0;; ++i) {
        const std::string prefix = "graph." + std::to_string(i);
        if (!kv.has(prefix + ".at_s") && !kv.has(prefix + ".preset")) break;
        GraphSpec gs;
        gs.at_s = kv.num(prefix + ".at_s", 0.0);
        gs.graph = make_graph_from_kv(kv, prefix, scn.n_agents);
        scn.graphs.push_back(std::move(gs));
    }
    if (scn.graphs.empty()) {
        GraphSpec gs;
        gs.graph = CyberGraph::complete(scn.n_agents);
        scn.graphs.push_back(std::move(gs));
    }

    // Broadcast DER parameters with optional per-agent overrides (der.3.m_p = ...).
    DerParams base;
    base.m_p = kv.num("der.m_p", base.m_p);
    base.n_q = kv.num("der.n_q", base.n_q);
    base.omega_nom = kv.num("der.omega_nom_rad_s", base.omega_nom);
    base.v_nom = kv.num("der.v_nom_v", base.v_nom);
    base.p_rating = kv.num("der.p_rating_w", base.p_rating);
    base.omega_f = kv.num("der.omega_f_rad_s", base.omega_f);
    base.t_v = kv.num("der.t_v_s", base.t_v);
    scn.der.assign(scn.n_agents, base);
    for (int j = 0; j < scn.n_agents; ++j) {
        const std::string p = "der." + std::to_string(j) + ".";
        scn.der[j].m_p = kv.num(p + "m_p", scn.der[j].m_p);
        scn.der[j].n_q = kv.num(p + "n_q", scn.der[j].n_q);
        scn.der[j].t_v = kv.num(p + "t_v_s", scn.der[j].t_v);
        scn.der[j].omega_f = kv.num(p + "omega_f_rad_s", scn.der[j].omega_f);
        scn.der[j].p_rating = kv.num(p + "p_rating_w", scn.der[j].p_rating);
    }

    scn.network = make_network_from_kv(kv, scn.n_agents);

    scn.gains.g = kv.num("gains.g", scn.gains.g);
    scn.gains.kp_w = kv.num("gains.kp_w", scn.gains.kp_w);
    scn.gains.ki_w = kv.num("gains.ki_w", scn.gains.ki_w);
    scn.gains.kp_v = kv.num("gains.kp_v", scn.gains.kp_v);
    scn.gains.ki_v = kv.num("gains.ki_v", scn.gains.ki_v);
    // Anti-windup rails scale with the (broadcast) droop deflection.
    scn.gains.int_w_limit = 10.0 * base.m_p * base.p_rating;
    scn.gains.int_v_limit = 10.0 * base.n_q * base.p_rating;
    scn.gains.int_w_limit = kv.num("gains.int_w_limit", scn.gains.int_w_limit);
    scn.gains.int_v_limit = kv.num("gains.int_v_limit", scn.gains.int_v_limit);

    scn.sampler.window_w = static_cast<int>(kv.num("sampler.window_w", scn.sampler.window_w));
    scn.sampler.downsample_d = static_cast<int>(kv.num("sampler.downsample_d", scn.sampler.downsample_d));
    auto fir = kv.num_list("sampler.fir");
    if (!fir.empty()) scn.sampler.fir = std::move(fir);
    else if (scn.sampler.window_w != static_cast<int>(scn.sampler.fir.size())) {
        scn.sampler.fir.assign(scn.sampler.window_w, 0.0);
        scn.sampler.fir[0] = 1.0;  // unit impulse, pure decimation
    }
    scn.sampler.alpha = kv.num("sampler.alpha", scn.sampler.alpha);
    scn.sampler.t_const_s = kv.num("sampler.t_const_s", scn.sampler.t_const_s);
    scn.sampler.k1 = kv.num("sampler.k1", scn.sampler.k1);
    scn.sampler.k2 = kv.num("sampler.k2", scn.sampler.k2);
    scn.sampler.trigger_floor = kv.num("sampler.trigger_floor", scn.sampler.trigger_floor);

    for (int i = 0;; ++i) {
        const std::string p = "event." + std::to_string(i) + ".";
        if (!kv.has(p + "at_s")) break;
        LoadEvent ev;
        ev.at_s = kv.num_required(p + "at_s");
        const std::string kind = kv.text(p + "kind", "load_scale");
        if (kind != "load_scale")
            throw ValidationError("scenario: unknown event kind '" + kind + "'");
        ev.factor = kv.num(p + "factor", 1.0);
        scn.load_events.push_back(ev);
    }

    for (int i = 0;; ++i) {
        const std::string p = "attack." + std::to_string(i) + ".";
        if (!kv.has(p + "links")) break;
        AttackSpec a;
        a.links = detail::expand_links_unique(kv.text(p + "links", "all"), scn.n_agents);
        a.attack.latency_s = kv.num(p + "latency_s", 0.0);
        a.attack.dropout_p = kv.num(p + "dropout_p", 0.0);
        a.attack.tsa_offset_samples = static_cast<int>(kv.num(p + "tsa_offset_samples", 0));
        a.attack.sample_period_s = kv.num(p + "tsa_sample_period_s", 1e-4);
        a.attack.window_start_s = kv.num(p + "window_start_s", 0.0);
        a.attack.window_end_s = kv.num(p + "window_end_s", kInf);
        scn.attacks.push_back(std::move(a));
    }

    // Reject typos: every key must have been consumed.
    for (const auto& [key, v] : kv.kv)
        if (!v.used) throw ParseError(v.line, "unknown key '" + key + "'");

    scn.validate();
    return scn;
}

inline Scenario load_scenario_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("scenario: cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    std::string name = path;
    const auto slash = name.find_last_of('/');
    if (slash != std::string::npos) name = name.substr(slash + 1);
    const auto dot = name.find_last_of('.');
    if (dot != std::string::npos) name = name.substr(0, dot);
    return parse_scenario_text(ss.str(), name);
}

}  // namespace semgrid
