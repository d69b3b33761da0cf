#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "feplab/experiments.hpp"
#include "feplab/io.hpp"

using namespace feplab;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
    return (fs::temp_directory_path() / ("feplab-test-" + tag)).string();
}

std::map<std::string, double> read_results(const std::string& dir) {
    std::ifstream in(dir + "/results.csv");
    REQUIRE(in.good());
    std::map<std::string, double> rows;
    std::string line;
    std::getline(in, line);
    REQUIRE(line == std::string("quantity,value"));
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        REQUIRE(comma != std::string::npos);
        rows[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    }
    return rows;
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("config: full document round-trips") {
    const std::string text =
        "# demo config\n"
        "experiment = blanket-report\n"
        "seed = 9\n"
        "system.preset = blanket4\n"
        "tolerance = 1e-8\n"
        "n_eval = 16\n";
    const ExperimentConfig config = parse_experiment_config(text);
    CHECK(config.experiment == "blanket-report");
    CHECK(config.seed == 9);
    CHECK(config.system.has_value());
    CHECK(config.partition.has_value());
    CHECK(config.tolerance.value() == doctest::Approx(1e-8));
}

TEST_CASE("config: inline matrices parse at full precision") {
    const std::string text =
        "experiment = simulate\n"
        "system.drift = [[-1.5, 0.25], [0.125, -2.0]]\n"
        "system.noise = [[1, 0], [0, 2]]\n"
        "x0 = [0.5, -0.5]\n";
    const ExperimentConfig config = parse_experiment_config(text);
    CHECK(config.system->drift(0, 0) == -1.5);
    CHECK(config.system->drift(1, 0) == 0.125);
    CHECK(config.system->noise_amplitude(1, 1) == 2.0);
    CHECK(config.x0->size() == 2);
}

TEST_CASE("config: unknown key rejected with ConfigSchema") {
    try {
        (void)parse_experiment_config("experiment = simulate\nbogus_key = 1\n");
        FAIL("expected ConfigSchema");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigSchema);
    }
}

TEST_CASE("config: malformed line rejected with ConfigParse") {
    try {
        (void)parse_experiment_config("experiment simulate\n");
        FAIL("expected ConfigParse");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigParse);
    }
}

TEST_CASE("config: ragged matrix rejected") {
    try {
        (void)parse_experiment_config(
            "experiment = simulate\nsystem.drift = [[1,2],[3]]\nsystem.noise = [[1,0],[0,1]]\n");
        FAIL("expected ConfigSchema");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ConfigSchema);
    }
}

TEST_CASE("config: partition dimension mismatch rejected") {
    try {
        (void)parse_experiment_config(
            "experiment = blanket-report\nsystem.preset = rotation2d\n"
            "partition.external = [0]\npartition.internal = [1]\npartition.sensory = [2]\n");
        FAIL("expected a partition error");
    } catch (const Error& e) {
        CHECK((e.code() == ErrorCode::ConfigSchema || e.code() == ErrorCode::IncompleteCover));
    }
}

TEST_CASE("unknown experiment name raises ExperimentUnknown without artifacts") {
    ExperimentConfig config;
    config.experiment = "nonexistent";
    const std::string out = temp_dir("unknown");
    fs::remove_all(out);
    config.output_dir = out;
    try {
        run_experiment(config);
        FAIL("expected ExperimentUnknown");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::ExperimentUnknown);
    }
    CHECK(!fs::exists(out));
}

TEST_CASE("registry: every experiment runs its bundled defaults and is byte-deterministic") {
    for (const std::string& name : experiment_registry()) {
        ExperimentConfig config;
        config.experiment = name;
        config.seed = 5;
        // Keep the heavy experiments at reduced but representative scale;
        // the acceptance suite runs the full presets.
        if (name == "simulate") config.n_steps = 2000;
        if (name == "agent-relax") {
            config.n_traj = 1500;
            config.horizon = 4.0;
        }
        if (name == "fep-lemma") config.n_traj = 200;
        if (name == "vfe-suite" || name == "efe-suite") config.n_samples = 100;
        if (name == "stationary-check") config.grid_step = 0.1;

        const std::string out_a = temp_dir(name + "-a");
        const std::string out_b = temp_dir(name + "-b");
        fs::remove_all(out_a);
        fs::remove_all(out_b);
        config.output_dir = out_a;
        run_experiment(config);
        config.output_dir = out_b;
        run_experiment(config);

        CAPTURE(name);
        CHECK(fs::exists(out_a + "/results.csv"));
        CHECK(read_text_file(out_a + "/results.csv") == read_text_file(out_b + "/results.csv"));
        CHECK(!read_results(out_a).empty());
        fs::remove_all(out_a);
        fs::remove_all(out_b);
    }
}

TEST_CASE("helmholtz-roundtrip artifact carries the antisymmetry row below 1e-10") {
    ExperimentConfig config;
    config.experiment = "helmholtz-roundtrip";
    const std::string out = temp_dir("roundtrip-row");
    fs::remove_all(out);
    config.output_dir = out;
    run_experiment(config);
    const auto rows = read_results(out);
    REQUIRE(rows.count("max_abs_q_antisymmetry") == 1);
    CHECK(rows.at("max_abs_q_antisymmetry") < 1e-10);
    fs::remove_all(out);
}

TEST_CASE("cli run/validate/list round-trip through argv") {
    const std::string cfg_path = temp_dir("cli-cfg") + ".cfg";
    write_text_file(cfg_path,
                    "experiment = vfe-suite\nseed = 3\nn_samples = 50\n");
    const std::string out = temp_dir("cli-out");
    fs::remove_all(out);

    const char* validate_argv[] = {"feplab", "validate", cfg_path.c_str()};
    CHECK(run_cli(3, validate_argv) == 0);

    const char* run_argv[] = {"feplab", "run", cfg_path.c_str(), "--out", out.c_str()};
    CHECK(run_cli(5, run_argv) == 0);
    CHECK(fs::exists(out + "/results.csv"));

    const char* list_argv[] = {"feplab", "list-experiments"};
    CHECK(run_cli(2, list_argv) == 0);

    const char* bad_argv[] = {"feplab", "run", "/nonexistent/path.cfg"};
    CHECK(run_cli(3, bad_argv) == static_cast<int>(ErrorCode::ConfigParse));
    fs::remove_all(out);
    fs::remove(cfg_path);
}

TEST_CASE("cli: unknown experiment exits with the ExperimentUnknown code") {
    const std::string cfg_path = temp_dir("cli-unknown") + ".cfg";
    write_text_file(cfg_path, "experiment = nonexistent\n");
    const char* argv[] = {"feplab", "run", cfg_path.c_str()};
    CHECK(run_cli(3, argv) == static_cast<int>(ErrorCode::ExperimentUnknown));
    fs::remove(cfg_path);
}

TEST_CASE("seed override changes stochastic outputs") {
    ExperimentConfig config;
    config.experiment = "simulate";
    config.n_steps = 500;
    const std::string out_a = temp_dir("seed-a");
    const std::string out_b = temp_dir("seed-b");
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    config.seed = 1;
    config.output_dir = out_a;
    run_experiment(config);
    config.seed = 2;
    config.output_dir = out_b;
    run_experiment(config);
    CHECK(read_text_file(out_a + "/trajectory.csv") != read_text_file(out_b + "/trajectory.csv"));
    fs::remove_all(out_a);
    fs::remove_all(out_b);
}

}  // TEST_SUITE
