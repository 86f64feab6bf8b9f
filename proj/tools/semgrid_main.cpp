// semgrid: deterministic microgrid secondary-control simulator with an
// adversarial communication layer and delay-aware semantic sampling.
//
// Exit codes: 0 success, 2 scenario parse error, 3 validation/usage error,
// 4 run diverged (partial outputs preserved).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "semgrid/graph.hpp"
#include "semgrid/metrics.hpp"
#include "semgrid/runio.hpp"
#include "semgrid/scenario.hpp"
#include "semgrid/sim.hpp"
#include "semgrid/sweep.hpp"
#include "semgrid/wire.hpp"

namespace {

constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitDiverged = 4;

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    std::istringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        if (cell == "inf") {
            out.push_back(semgrid::kInf);
            continue;
        }
        size_t pos = 0;
        out.push_back(std::stod(cell, &pos));
        if (pos != cell.size()) throw semgrid::ValidationError("malformed number '" + cell + "'");
    }
    return out;
}

semgrid::Scenario load_checked(const std::string& path, uint64_t* seed_override,
                               bool no_compensation) {
    semgrid::Scenario scn = semgrid::load_scenario_file(path);
    if (seed_override) scn.seed = *seed_override;
    if (no_compensation) scn.compensation_enabled = false;
    return scn;
}

semgrid::CyberGraph graph_from_cli(const std::string& preset, int n, double weight,
                                   const std::string& matrix_file, bool directed) {
    if (!matrix_file.empty()) {
        std::ifstream f(matrix_file);
        if (!f) throw semgrid::ValidationError("cannot open matrix file " + matrix_file);
        std::vector<std::vector<double>> rows;
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::vector<double> row;
            std::istringstream ls(line);
            double v;
            while (ls >> v) row.push_back(v);
            if (!row.empty()) rows.push_back(std::move(row));
        }
        const int m = static_cast<int>(rows.size());
        semgrid::Mat w = semgrid::Mat::square(m);
        for (int r = 0; r < m; ++r) {
            if (static_cast<int>(rows[r].size()) != m)
                throw semgrid::ValidationError("matrix file is not square");
            for (int c = 0; c < m; ++c) w(r, c) = rows[r][c];
        }
        return semgrid::CyberGraph::from_weights(std::move(w), !directed);
    }
    if (preset == "complete") return semgrid::CyberGraph::complete(n, weight);
    if (preset == "ring") return semgrid::CyberGraph::ring(n, weight);
    if (preset == "line") return semgrid::CyberGraph::line(n, weight);
    throw semgrid::ValidationError("unknown graph preset '" + preset + "'");
}

std::string hex_encode(const std::vector<uint8_t>& bytes) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xF]);
    }
    return out;
}

std::vector<uint8_t> hex_decode(const std::string& hex) {
    auto nib = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    std::vector<uint8_t> out;
    std::string clean;
    for (char c : hex)
        if (!isspace(static_cast<unsigned char>(c))) clean.push_back(c);
    if (clean.size() % 2 != 0) throw semgrid::ValidationError("hex string has odd length");
    for (size_t i = 0; i < clean.size(); i += 2) {
        const int hi = nib(clean[i]);
        const int lo = nib(clean[i + 1]);
        if (hi < 0 || lo < 0) throw semgrid::ValidationError("invalid hex digit");
        out.push_back(static_cast<uint8_t>((hi << 4) | lo));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semgrid: droop-microgrid consensus simulator with attack injection and "
                 "delay-aware semantic sampling"};
    app.require_subcommand(1);

    // ---- run ----
    auto* cmd_run = app.add_subcommand("run", "run a scenario, write trace/events/manifest");
    std::string run_scn;
    uint64_t run_seed = 0;
    bool run_seed_set = false;
    std::string run_out = []() {
        const char* env = std::getenv("SEMGRID_OUT");
        return env ? std::string(env) : std::string("out");
    }();
    bool run_nocomp = false;
    cmd_run->add_option("scenario", run_scn, "scenario file")->required();
    cmd_run->add_option("--seed", run_seed, "override the scenario seed")
        ->each([&](const std::string&) { run_seed_set = true; });
    cmd_run->add_option("--out", run_out, "output directory (env SEMGRID_OUT, default ./out)");
    cmd_run->add_flag("--no-compensation", run_nocomp, "disable the semantic sampling scheme");

    // ---- bound ----
    auto* cmd_bound = app.add_subcommand("bound", "Laplacian lambda_max and delay bound");
    std::string bound_preset = "complete";
    int bound_n = 7;
    double bound_weight = 1.0;
    std::string bound_matrix;
    bool bound_directed = false;
    bool bound_json = false;
    cmd_bound->add_option("--preset", bound_preset, "complete | ring | line");
    cmd_bound->add_option("--n", bound_n, "agent count");
    cmd_bound->add_option("--weight", bound_weight, "uniform edge weight");
    cmd_bound->add_option("--matrix", bound_matrix, "whitespace matrix file instead of a preset");
    cmd_bound->add_flag("--directed", bound_directed, "treat the matrix as directed");
    cmd_bound->add_flag("--json", bound_json, "JSON output");

    // ---- sweep ----
    auto* cmd_sweep = app.add_subcommand("sweep", "sweep D, alpha or tau and report T_c per value");
    std::string sweep_scn, sweep_axis, sweep_values, sweep_seeds, sweep_out;
    double sweep_from_event = 5.0;
    cmd_sweep->add_option("scenario", sweep_scn, "scenario file")->required();
    cmd_sweep->add_option("--axis", sweep_axis, "D | alpha | tau")->required();
    cmd_sweep->add_option("--values", sweep_values, "comma-separated values")->required();
    cmd_sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds (averaged)");
    cmd_sweep->add_option("--from-event", sweep_from_event, "T_c reference time (default 5)");
    cmd_sweep->add_option("--out", sweep_out, "write CSV here instead of stdout");

    // ---- metrics ----
    auto* cmd_metrics = app.add_subcommand("metrics", "trace CSV in, JSON metric report out");
    std::string metrics_trace;
    double metrics_band = 0.02;
    double metrics_from_event = 5.0;
    cmd_metrics->add_option("trace", metrics_trace, "trace CSV")->required();
    cmd_metrics->add_option("--band", metrics_band, "relative convergence band (default 0.02)");
    cmd_metrics->add_option("--from-event", metrics_from_event, "T_c reference time (default 5)");

    // ---- plotdata ----
    auto* cmd_plot = app.add_subcommand("plotdata", "per-figure tidy CSV series from traces");
    std::string plot_trace, plot_figure;
    int plot_agent = 1;
    std::vector<std::string> plot_labeled;
    double plot_from_event = 5.0;
    double plot_band = 0.02;
    cmd_plot->add_option("trace", plot_trace, "trace CSV (time-series figures)");
    cmd_plot->add_option("--figure", plot_figure, "fig5..fig15 (fig10/11/12 need --trace pairs)")
        ->required();
    cmd_plot->add_option("--agent", plot_agent, "agent for single-agent series (default 1)");
    cmd_plot->add_option("--case", plot_labeled, "label=trace.csv (repeatable, bar figures)");
    cmd_plot->add_option("--from-event", plot_from_event, "T_c reference for bar figures");
    cmd_plot->add_option("--band", plot_band, "band for bar figures");

    // ---- codec ----
    auto* cmd_codec = app.add_subcommand("codec", "encode/decode SV frames as hex");
    auto* codec_enc = cmd_codec->add_subcommand("encode", "fields -> hex");
    std::string enc_sv_id = "DER0";
    uint32_t enc_smp = 0, enc_conf = 1;
    uint64_t enc_stamp = 0;
    std::string enc_values = "0,0,0";
    codec_enc->add_option("--sv-id", enc_sv_id, "ASCII id, <= 32 bytes");
    codec_enc->add_option("--smp-cnt", enc_smp, "16-bit sample counter");
    codec_enc->add_option("--conf-rev", enc_conf, "config revision");
    codec_enc->add_option("--stamp-us", enc_stamp, "timestamp, microseconds");
    codec_enc->add_option("--values", enc_values, "three comma-separated values");
    auto* codec_dec = cmd_codec->add_subcommand("decode", "hex -> fields");
    std::string dec_hex;
    codec_dec->add_option("hex", dec_hex, "hex string (stdin when omitted)");
    cmd_codec->require_subcommand(1);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cmd_run) {
            semgrid::Scenario scn;
            try {
                scn = load_checked(run_scn, run_seed_set ? &run_seed : nullptr, run_nocomp);
            } catch (const semgrid::ParseError& e) {
                std::cerr << "parse error: " << run_scn << ": " << e.what() << "\n";
                return kExitParse;
            }
            auto out = semgrid::run_to_files(scn, run_scn, run_out);
            std::cerr << "trace:    " << out.trace_csv.string() << "\n"
                      << "events:   " << out.events_jsonl.string() << "\n"
                      << "manifest: " << out.manifest_json.string() << "\n";
            if (out.result.diverged) {
                std::cerr << "run diverged: " << out.result.diagnostic << " (partial outputs kept)\n";
                return kExitDiverged;
            }
            return 0;
        }

        if (*cmd_bound) {
            auto g = graph_from_cli(bound_preset, bound_n, bound_weight, bound_matrix,
                                    bound_directed);
            auto rep = semgrid::laplacian_report(g);
            if (bound_json) {
                nlohmann::json j;
                j["n"] = g.n;
                j["preset"] = bound_matrix.empty() ? bound_preset : "matrix";
                j["lambda_max"] = rep.lambda_max;
                j["delay_bound_s"] = rep.delay_bound_s;
                j["advisory"] = rep.bound_advisory;
                std::cout << j.dump(2) << "\n";
            } else {
                std::cout << "graph: " << (bound_matrix.empty() ? bound_preset : "matrix")
                          << " n=" << g.n << "\n";
                std::cout << "lambda_max:    " << semgrid::Trace::fmt(rep.lambda_max) << "\n";
                std::cout << "delay_bound_s: " << semgrid::Trace::fmt(rep.delay_bound_s)
                          << (rep.bound_advisory ? "  (advisory: directed graph)" : "") << "\n";
            }
            return 0;
        }

        if (*cmd_sweep) {
            semgrid::Scenario scn;
            try {
                scn = semgrid::load_scenario_file(sweep_scn);
            } catch (const semgrid::ParseError& e) {
                std::cerr << "parse error: " << sweep_scn << ": " << e.what() << "\n";
                return kExitParse;
            }
            const auto axis = semgrid::parse_axis(sweep_axis);
            const auto values = parse_double_list(sweep_values);
            std::vector<uint64_t> seeds;
            if (!sweep_seeds.empty())
                for (double s : parse_double_list(sweep_seeds))
                    seeds.push_back(static_cast<uint64_t>(s));
            auto rows = semgrid::sweep(scn, axis, values, seeds, sweep_from_event);
            const std::string csv = semgrid::sweep_csv(axis, rows);
            if (sweep_out.empty()) {
                std::cout << csv;
            } else {
                std::ofstream f(sweep_out);
                f << csv;
            }
            return 0;
        }

        if (*cmd_metrics) {
            auto tr = semgrid::read_trace_file(metrics_trace);
            semgrid::ObjectiveBands bands;
            bands.band_frac = metrics_band;
            auto rep = semgrid::metric_report(tr, bands, metrics_from_event);
            std::cout << semgrid::report_to_json(rep).dump(2) << "\n";
            return 0;
        }

        if (*cmd_plot) {
            if (plot_figure == "fig10" || plot_figure == "fig11" || plot_figure == "fig12") {
                if (plot_labeled.empty())
                    throw semgrid::ValidationError(
                        "plotdata: " + plot_figure + " needs repeated --case label=trace.csv");
                semgrid::ObjectiveBands bands;
                bands.band_frac = plot_band;
                std::cout << "label,metric,value\n";
                for (const auto& spec : plot_labeled) {
                    const auto eq = spec.find('=');
                    if (eq == std::string::npos)
                        throw semgrid::ValidationError("plotdata: want label=trace.csv, got " + spec);
                    const std::string label = spec.substr(0, eq);
                    auto tr = semgrid::read_trace_file(spec.substr(eq + 1));
                    if (plot_figure == "fig10") {
                        auto conv = semgrid::convergence_time(tr, bands, plot_from_event);
                        std::cout << label << ",tc_o1_s,"
                                  << (conv.o1_converged ? semgrid::Trace::fmt(conv.tc_o1_s) : "dnc")
                                  << "\n";
                        std::cout << label << ",tc_o2_s,"
                                  << (conv.o2_converged ? semgrid::Trace::fmt(conv.tc_o2_s) : "dnc")
                                  << "\n";
                    } else {
                        auto [s1, s2] = semgrid::steady_state_error(tr, bands);
                        std::cout << label << ",sse_o1," << semgrid::Trace::fmt(s1) << "\n";
                        std::cout << label << ",sse_o2," << semgrid::Trace::fmt(s2) << "\n";
                    }
                }
                return 0;
            }
            if (plot_trace.empty())
                throw semgrid::ValidationError("plotdata: a trace argument is required");
            auto tr = semgrid::read_trace_file(plot_trace);
            std::cout << semgrid::plotdata_csv(tr, plot_figure, plot_agent);
            return 0;
        }

        if (*cmd_codec) {
            if (*codec_enc) {
                semgrid::SvFrame f;
                f.sv_id = enc_sv_id;
                f.smp_cnt = static_cast<uint16_t>(enc_smp);
                f.conf_rev = enc_conf;
                f.stamp_us = enc_stamp;
                const auto vals = parse_double_list(enc_values);
                if (vals.size() != 3)
                    throw semgrid::ValidationError("codec: --values needs exactly three numbers");
                for (int i = 0; i < 3; ++i) f.values[i] = vals[i];
                std::cout << hex_encode(semgrid::encode(f)) << "\n";
                return 0;
            }
            std::string hex = dec_hex;
            if (hex.empty()) {
                std::ostringstream ss;
                ss << std::cin.rdbuf();
                hex = ss.str();
            }
            const auto bytes = hex_decode(hex);
            auto res = semgrid::decode(bytes);
            if (std::holds_alternative<semgrid::DecodeError>(res)) {
                std::cerr << "decode error: " << semgrid::to_string(std::get<semgrid::DecodeError>(res))
                          << "\n";
                return 1;
            }
            const auto& f = std::get<semgrid::SvFrame>(res);
            nlohmann::json j;
            j["sv_id"] = f.sv_id;
            j["smp_cnt"] = f.smp_cnt;
            j["conf_rev"] = f.conf_rev;
            j["stamp_us"] = f.stamp_us;
            j["values"] = {f.values[0], f.values[1], f.values[2]};
            std::cout << j.dump(2) << "\n";
            return 0;
        }
    } catch (const semgrid::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const semgrid::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return 0;
}
