#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "semgrid/metrics.hpp"
#include "semgrid/runio.hpp"
#include "semgrid/scenario.hpp"
#include "semgrid/sweep.hpp"

namespace fs = std::filesystem;
using namespace semgrid;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string out;
};

CmdResult run_cli(const std::string& args) {
    const std::string out_file = (fs::temp_directory_path() / "semgrid_cli_out.txt").string();
    const std::string cmd = std::string(SEMGRID_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
    const int status = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = WEXITSTATUS(status);
    std::ifstream f(out_file);
    std::ostringstream ss;
    ss << f.rdbuf();
    r.out = ss.str();
    return r;
}

fs::path scenario(const char* name) { return fs::path(SEMGRID_SCENARIO_DIR) / name; }

fs::path fresh_dir(const char* name) {
    auto p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("bound: presets match the closed-form values") {
    auto r = run_cli("bound --preset complete --n 7 --json");
    REQUIRE(r.exit_code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(std::abs(j["delay_bound_s"].get<double>() - kPi / 14.0) < 1e-9);

    auto r2 = run_cli("bound --preset ring --n 7 --json");
    REQUIRE(r2.exit_code == 0);
    auto j2 = nlohmann::json::parse(r2.out);
    const double expected = kPi / (2.0 * (2.0 - 2.0 * std::cos(6.0 * kPi / 7.0)));
    CHECK(std::abs(j2["delay_bound_s"].get<double>() - expected) < 1e-9);

    auto r3 = run_cli("bound --preset line --n 2 --json");
    auto j3 = nlohmann::json::parse(r3.out);
    CHECK(std::abs(j3["delay_bound_s"].get<double>() - kPi / 4.0) < 1e-9);
}

TEST_CASE("bound: edgeless graph is a validation error") {
    auto dir = fresh_dir("semgrid_bound");
    const auto mfile = dir / "zero.mat";
    std::ofstream(mfile) << "0 0\n0 0\n";
    auto r = run_cli("bound --matrix " + mfile.string());
    CHECK(r.exit_code == 3);
}

TEST_CASE("run: malformed scenario exits 2 with a line-numbered diagnostic") {
    auto dir = fresh_dir("semgrid_badscn");
    const auto bad = dir / "bad.scn";
    std::ofstream(bad) << "seed = 1\nthis line is wrong\n";
    auto r = run_cli("run " + bad.string());
    CHECK(r.exit_code == 2);
    CHECK(r.out.find("line 2") != std::string::npos);
}

TEST_CASE("run: invalid scenario exits 3") {
    auto dir = fresh_dir("semgrid_invscn");
    const auto bad = dir / "inv.scn";
    std::ofstream(bad) << "der.count = 0\n";
    auto r = run_cli("run " + bad.string());
    CHECK(r.exit_code == 3);
}

TEST_CASE("run: identical seeds give identical output checksums") {
    auto dir_a = fresh_dir("semgrid_det_a");
    auto dir_b = fresh_dir("semgrid_det_b");
    auto scn = scenario("packet_burst.scn").string();
    REQUIRE(run_cli("run " + scn + " --seed 1 --out " + dir_a.string()).exit_code == 0);
    REQUIRE(run_cli("run " + scn + " --seed 1 --out " + dir_b.string()).exit_code == 0);
    auto crc_of = [](const fs::path& p) {
        std::ifstream f(p / "manifest.json");
        auto j = nlohmann::json::parse(f);
        return j["outputs"]["trace.csv"]["crc32"].get<uint64_t>();
    };
    CHECK(crc_of(dir_a) == crc_of(dir_b));

    // Manifest checksums must be recomputable from the files themselves.
    std::ifstream tf(dir_a / "trace.csv", std::ios::binary);
    std::ostringstream ss;
    ss << tf.rdbuf();
    const std::string bytes = ss.str();
    const uint32_t recomputed =
        crc32(reinterpret_cast<const uint8_t*>(bytes.data()), bytes.size());
    CHECK(recomputed == crc_of(dir_a));

    // A different seed must change the recorded seed and the trace bytes.
    auto dir_c = fresh_dir("semgrid_det_c");
    REQUIRE(run_cli("run " + scn + " --seed 2 --out " + dir_c.string()).exit_code == 0);
    std::ifstream mf(dir_c / "manifest.json");
    auto man = nlohmann::json::parse(mf);
    CHECK(man["seed"].get<uint64_t>() == 2);
    CHECK(crc_of(dir_c) != crc_of(dir_a));
}

TEST_CASE("run: divergence exits 4 and keeps partial outputs") {
    auto dir = fresh_dir("semgrid_div");
    const auto scn = dir / "div.scn";
    std::ofstream(scn) << "der.count = 7\n"
                          "sim.duration_s = 10\n"
                          "sim.compensation_enabled = false\n"
                          "gains.kp_w = 0.3\n"
                          "gains.ki_w = 4\n"
                          "attack.0.links = all\n"
                          "attack.0.latency_s = 0.05\n";
    auto r = run_cli("run " + scn.string() + " --out " + dir.string());
    CHECK(r.exit_code == 4);
    CHECK(fs::exists(dir / "trace.csv"));
    CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("metrics consumes a run's trace") {
    auto dir = fresh_dir("semgrid_met");
    REQUIRE(run_cli("run " + scenario("verify_3agent.scn").string() + " --out " + dir.string())
                .exit_code == 0);
    auto r = run_cli("metrics " + (dir / "trace.csv").string() + " --from-event 2.0");
    REQUIRE(r.exit_code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j["o1_converged"].get<bool>());
    CHECK(j["lyapunov_violations"].get<int>() == 0);
}

TEST_CASE("sweep with a single value equals run + metrics composition") {
    // Library-level check of the same code path the CLI drives.
    auto scn = load_scenario_file(scenario("packet_burst.scn").string());
    auto rows = sweep(scn, SweepAxis::alpha, {0.3}, {}, 1.0);
    REQUIRE(rows.size() == 1);
    auto rr = run(scn);
    auto conv = convergence_time(rr.trace, {}, 1.0);
    REQUIRE(rows[0].o1_converged == conv.o1_converged);
    CHECK(rows[0].tc_o1_s == doctest::Approx(conv.tc_o1_s));
    CHECK(rows[0].trigger_rate == doctest::Approx(trigger_stats(rr.trace).rate));
}

TEST_CASE("sweep CLI rejects an empty axis value list") {
    auto r = run_cli("sweep " + scenario("packet_burst.scn").string() + " --axis D --values ''");
    CHECK(r.exit_code != 0);
}

TEST_CASE("plotdata: fig13 emits the six error-signal series for one agent") {
    auto dir = fresh_dir("semgrid_plot");
    REQUIRE(run_cli("run " + scenario("packet_burst.scn").string() + " --out " + dir.string())
                .exit_code == 0);
    auto r = run_cli("plotdata " + (dir / "trace.csv").string() + " --figure fig13 --agent 1");
    REQUIRE(r.exit_code == 0);
    for (const char* s : {"e_dvc", "e_dd", "e_pphi", "e_qvc", "e_qd", "e_qphi"})
        CHECK(r.out.find(std::string(",") + s + ",1,") != std::string::npos);
    CHECK(r.out.find(",e_dvc,0,") == std::string::npos);  // only the requested agent

    auto bad = run_cli("plotdata " + (dir / "trace.csv").string() + " --figure fig99");
    CHECK(bad.exit_code == 3);
}

TEST_CASE("codec round trip through the CLI") {
    auto enc = run_cli("codec encode --sv-id DER1 --smp-cnt 7 --conf-rev 3 --stamp-us 123456 "
                       "--values 314.15,1.5,-2.25");
    REQUIRE(enc.exit_code == 0);
    std::string hex = enc.out;
    while (!hex.empty() && (hex.back() == '\n' || hex.back() == '\r')) hex.pop_back();
    auto dec = run_cli("codec decode " + hex);
    REQUIRE(dec.exit_code == 0);
    auto j = nlohmann::json::parse(dec.out);
    CHECK(j["sv_id"] == "DER1");
    CHECK(j["smp_cnt"] == 7);
    CHECK(j["values"][0].get<double>() == doctest::Approx(314.15));

    // Corrupt one byte: decode must fail loudly.
    hex[10] = hex[10] == '0' ? '1' : '0';
    auto bad = run_cli("codec decode " + hex);
    CHECK(bad.exit_code != 0);
}

}  // TEST_SUITE
