#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "semgrid/metrics.hpp"
#include "semgrid/sim.hpp"
#include "semgrid/wire.hpp"

namespace semgrid {

struct RunOutputs {
    std::filesystem::path trace_csv;
    std::filesystem::path events_jsonl;
    std::filesystem::path manifest_json;
    RunResult result;
};

inline std::string build_identifier() {
    std::string id = "semgrid-1.0.0";
#if defined(__clang__)
    id += " clang-" + std::to_string(__clang_major__) + "." + std::to_string(__clang_minor__);
#elif defined(__GNUC__)
    id += " gcc-" + std::to_string(__GNUC__) + "." + std::to_string(__GNUC_MINOR__);
#endif
    id += " cxx" + std::to_string(__cplusplus / 100 % 100);
    return id;
}

namespace detail {

inline uint32_t file_crc32(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    require(static_cast<bool>(f), "runio: cannot reopen " + p.string());
    uint32_t c = 0xFFFFFFFFu;
    const auto& table = crc32_table();
    char buf[65536];
    while (f.read(buf, sizeof buf) || f.gcount() > 0) {
        const auto n = static_cast<size_t>(f.gcount());
        for (size_t i = 0; i < n; ++i)
            c = table[(c ^ static_cast<uint8_t>(buf[i])) & 0xFFu] ^ (c >> 8);
    }
    return c ^ 0xFFFFFFFFu;
}

inline void write_atomic(const std::filesystem::path& p, const std::string& content) {
    const auto tmp = p.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        require(static_cast<bool>(f), "runio: cannot write " + tmp);
        f << content;
    }
    std::filesystem::rename(tmp, p);
}

}  // namespace detail

/// Runs a scenario and writes trace.csv, events.jsonl and manifest.json under
/// out_dir. The manifest records the scenario (path and content checksum),
/// seed and build id plus per-file checksums: enough to reproduce the run
/// bit-exactly with the same build.
inline RunOutputs run_to_files(const Scenario& scn, const std::string& scenario_path,
                               const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    RunOutputs out;
    out.result = run(scn);

    out.trace_csv = out_dir / "trace.csv";
    detail::write_atomic(out.trace_csv, out.result.trace.to_csv_string());

    out.events_jsonl = out_dir / "events.jsonl";
    {
        std::ostringstream ss;
        for (const auto& e : out.result.trace.events) {
            nlohmann::json j;
            j["t_s"] = e.t_s;
            j["kind"] = e.kind;
            j["detail"] = e.detail;
            ss << j.dump() << "\n";
        }
        detail::write_atomic(out.events_jsonl, ss.str());
    }

    nlohmann::json man;
    man["scenario_path"] = scenario_path;
    man["scenario_name"] = scn.name;
    man["seed"] = scn.seed;
    man["build"] = build_identifier();
    man["diverged"] = out.result.diverged;
    if (out.result.diverged) man["diagnostic"] = out.result.diagnostic;
    man["packets"] = {{"sent", out.result.packets_sent},
                      {"dropped", out.result.packets_dropped},
                      {"delivered", out.result.packets_delivered},
                      {"in_flight_at_end", out.result.packets_in_flight}};
    nlohmann::json files = nlohmann::json::object();
    for (const auto& p : {out.trace_csv, out.events_jsonl}) {
        files[p.filename().string()] = {{"crc32", detail::file_crc32(p)},
                                        {"bytes", std::filesystem::file_size(p)}};
    }
    man["outputs"] = files;
    out.manifest_json = out_dir / "manifest.json";
    detail::write_atomic(out.manifest_json, man.dump(2) + "\n");
    return out;
}

inline Trace read_trace_file(const std::string& path) {
    std::ifstream f(path);
    require(static_cast<bool>(f), "trace: cannot open " + path);
    return Trace::read_csv(f);
}

inline nlohmann::json report_to_json(const MetricReport& rep) {
    nlohmann::json j;
    j["tc_o1_s"] = rep.convergence.o1_converged ? nlohmann::json(rep.convergence.tc_o1_s)
                                                : nlohmann::json(nullptr);
    j["tc_o2_s"] = rep.convergence.o2_converged ? nlohmann::json(rep.convergence.tc_o2_s)
                                                : nlohmann::json(nullptr);
    j["o1_converged"] = rep.convergence.o1_converged;
    j["o2_converged"] = rep.convergence.o2_converged;
    j["sse_o1"] = rep.sse_o1;
    j["sse_o2"] = rep.sse_o2;
    j["trigger_rate"] = rep.triggers.rate;
    j["trigger_rate_tail"] = rep.triggers.tail_rate;
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [gap, count] : rep.triggers.inter_trigger_hist)
        hist[std::to_string(gap)] = count;
    j["inter_trigger_histogram"] = hist;
    j["lyapunov_violations"] = rep.lyapunov.violations;
    j["lyapunov_samples"] = rep.lyapunov.samples;
    j["lyapunov_gamma_mean"] = rep.lyapunov.gamma_mean ? nlohmann::json(*rep.lyapunov.gamma_mean)
                                                       : nlohmann::json(nullptr);
    j["aoi_mean_s"] = rep.aoi.any ? nlohmann::json(rep.aoi.mean_s) : nlohmann::json(nullptr);
    j["aoi_max_s"] = rep.aoi.any ? nlohmann::json(rep.aoi.max_s) : nlohmann::json(nullptr);
    return j;
}

}  // namespace semgrid
