#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feplab/core.hpp"

namespace feplab {

// A run is described by a flat plain-text document of `key = value` lines
// with dotted keys, '#' comments and a strict schema (unknown keys rejected).
struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 0;
    std::string output_dir = "feplab-out";

    std::optional<LinearSystem> system;
    std::optional<PartitionSpec> partition;
    std::optional<Vec> x0;

    std::optional<double> dt;
    std::optional<double> horizon;
    std::optional<double> tolerance;
    std::optional<double> grid_step;
    std::optional<Index> n_steps;
    std::optional<Index> n_traj;
    std::optional<Index> n_eval;
    std::optional<Index> n_samples;
};

ExperimentConfig parse_experiment_config(const std::string& text);

// Named system presets: ou1d, rotation2d, blanket4, blanket4-coupled.
struct SystemPreset {
    LinearSystem system;
    std::optional<PartitionSpec> partition;
};
SystemPreset lookup_preset(const std::string& name);

const std::vector<std::string>& experiment_registry();

// Validates config against the registry and schema without running.
void validate_experiment_config(const ExperimentConfig& config);

// Runs the experiment, writing results.csv (and any figures) into
// config.output_dir via a staging directory with atomic per-file moves.
void run_experiment(const ExperimentConfig& config);

// argv-level entry point used by the feplab binary; returns the process
// exit status and reports errors as a single machine-readable stderr line.
int run_cli(int argc, const char* const* argv);

}  // namespace feplab
