#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tramor/experiment.hpp"

using namespace tramor;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(TRAMOR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

} // namespace

TEST_CASE("config validation names the offending field") {
    auto expect_error = [](const json& j, const std::string& needle) {
        try {
            parse_config(j);
            FAIL("expected ConfigError for " + needle);
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_error(json{{"model", json{{"kind", "heat"}}}}, "model.kind");
    expect_error(json{{"model", json{{"grid", json{{"topology", "moebius"}}}}}},
                 "model.grid.topology");
    expect_error(json{{"offline", json{{"method", "dmd"}}}}, "offline.method");
    expect_error(json{{"offline", json{{"rank", 0}}}}, "offline.rank");
    expect_error(json{{"offline", json{{"path_source", "file"}, {"path_file", "/no/such"}}}},
                 "offline.path_file");
    expect_error(json{{"rom", json{{"phase", "drift"}}}}, "rom.phase");
    expect_error(json{{"rom", json{{"regularization", -1.0}}}}, "rom.regularization");
    expect_error(json{{"fom", json{{"integrator", json{{"scheme", "euler"}}}}}},
                 "fom.integrator.scheme");
    expect_error(json{{"analysis", json{{"bound", json{{"c_tilde", 0.2}}}}}},
                 "analysis.bound.c_tilde");

    // A valid document round-trips through the effective-config printer.
    ExperimentConfig cfg = parse_config(config_to_json(recipe_burgers()));
    CHECK(cfg.model.kind == "burgers");
    CHECK(cfg.offline.rank == 7);
}

TEST_CASE("recipe configurations are self-consistent") {
    for (const ExperimentConfig& cfg :
         {recipe_ade(), recipe_wave(), recipe_burgers(), recipe_ade_nonperiodic()}) {
        ExperimentConfig reparsed = parse_config(config_to_json(cfg));
        CHECK(config_to_json(reparsed) == config_to_json(cfg));
        CHECK_NOTHROW(build_model(reparsed.model));
    }
}

TEST_CASE("cli exit codes: success, config error, unknown recipe") {
    const std::string out = "cli_test_out";
    CHECK(run_cli("rom --out " + out) == 0);
    CHECK(run_cli("fom --out " + out) == 0);
    CHECK(std::filesystem::exists(out + "/snapshots.bin"));
    CHECK(run_cli("offline --out " + out) == 0);
    CHECK(std::filesystem::exists(out + "/decomposition.bin"));
    CHECK(std::filesystem::exists(out + "/singular_values.csv"));

    std::ofstream bad("cli_bad_config.json");
    bad << R"({"model": {"kind": "nonsense"}})";
    bad.close();
    CHECK(run_cli("rom --config cli_bad_config.json") == 2);
    CHECK(run_cli("repro unknown-experiment") == 2);

    // A numerical failure (Newton starved of iterations) exits with 3.
    std::ofstream fail_cfg("cli_fail_config.json");
    fail_cfg << R"({"model": {"kind": "burgers", "mu": 2e-3},
                    "fom": {"integrator": {"tau": 0.25,
                                           "newton": {"max_iter": 1, "tol": 1e-15}}}})";
    fail_cfg.close();
    CHECK(run_cli("fom --config cli_fail_config.json") == 3);
    std::filesystem::remove("cli_fail_config.json");
    std::filesystem::remove("cli_bad_config.json");
    std::filesystem::remove_all(out);
}

TEST_CASE("two identical cli runs produce byte-identical outputs") {
    const std::string out_a = "cli_det_a", out_b = "cli_det_b";
    REQUIRE(run_cli("rom --out " + out_a) == 0);
    REQUIRE(run_cli("rom --out " + out_b) == 0);

    for (const std::string name : {"trajectory.csv", "report.csv", "report.json"})
        CHECK(slurp(out_a + "/" + name) == slurp(out_b + "/" + name));

    // Manifests agree apart from the timestamp field.
    json ma = json::parse(slurp(out_a + "/manifest.json"));
    json mb = json::parse(slurp(out_b + "/manifest.json"));
    ma.erase("timestamp");
    mb.erase("timestamp");
    ma["produced"] = json::array();
    mb["produced"] = json::array(); // paths contain the differing out dirs
    CHECK(ma == mb);

    std::filesystem::remove_all(out_a);
    std::filesystem::remove_all(out_b);
}

TEST_CASE("gnuplot flag emits the whitespace-separated variant") {
    const std::string out = "cli_gnuplot_out";
    REQUIRE(run_cli("rom --out " + out + " --gnuplot") == 0);
    std::ifstream is(out + "/trajectory.csv");
    std::string first;
    std::getline(is, first);
    CHECK(first.find(',') == std::string::npos);
    std::filesystem::remove_all(out);
}
