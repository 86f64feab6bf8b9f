#pragma once

#include <string>

#include "semgrid/scenario.hpp"

namespace testutil {

/// Small 7-agent scenario body shared by the sim/metrics tests; callers
/// append overrides/attacks before parsing (later keys are new keys, the
/// parser rejects duplicates).
inline std::string scenario_text(const std::string& extra, double duration_s = 10.0,
                                 bool compensation = true, uint64_t seed = 42) {
    std::string s;
    s += "seed = " + std::to_string(seed) + "\n";
    s += "sim.dt_s = 1e-4\n";
    s += "sim.sc_period_s = 1e-3\n";
    s += "sim.duration_s = " + std::to_string(duration_s) + "\n";
    s += std::string("sim.compensation_enabled = ") + (compensation ? "true" : "false") + "\n";
    s += "der.count = 7\n";
    s += "graph.0.at_s = 0\n";
    s += "graph.0.preset = complete\n";
    s += "network.preset = ring\n";
    s += "network.b_pu = 1.0\n";
    s += "network.load_p_w = 24000,12000,18000,10000,20000,14000,14000\n";
    s += "network.load_q_var = 7000,3000,5000,2500,6000,4000,4000\n";
    s += "gains.kp_w = 0.1\n";
    s += "gains.ki_w = 4.0\n";
    s += "gains.kp_v = 0.1\n";
    s += "gains.ki_v = 1.5\n";
    s += "sampler.k1 = 0.5\n";
    s += "sampler.k2 = -0.2\n";
    s += "event.0.at_s = 5.0\n";
    s += "event.0.factor = 1.25\n";
    s += extra;
    return s;
}

inline semgrid::Scenario make_scenario(const std::string& extra, double duration_s = 10.0,
                                       bool compensation = true, uint64_t seed = 42) {
    return semgrid::parse_scenario_text(scenario_text(extra, duration_s, compensation, seed),
                                        "test");
}

}  // namespace testutil
