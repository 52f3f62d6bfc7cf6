#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aimdmf/model.hpp"

namespace aimdmf {

/// Parses a model description (INI text, see README). Throws ConfigError with
/// the offending section/key on any problem, including unknown keys.
NetworkModel parse_model(const std::string& text);
NetworkModel load_model(const std::filesystem::path& path);

/// Parses "constant c0", "affine c0 c1" or "power c0 c1 p".
ScalarRate parse_rate(const std::string& text);

enum class ExperimentKind { chaos, equilibrium, scaling, fixedpoint, mckean, dynkin };

ExperimentKind parse_experiment_kind(const std::string& name);
const char* to_string(ExperimentKind kind);

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::fixedpoint;
    std::filesystem::path model_path;  // resolved against the config's directory
    std::optional<NetworkModel> model;  // empty for experiments that need none (scaling)
    std::string source;                 // config text, echoed in the manifest
    std::string model_source;

    // time grid
    double horizon = 10.0;
    double step = 0.05;
    double sample_dt = 1.0;

    // mean-field solver
    std::size_t ensemble = 10000;
    std::size_t reference_ensemble = 100000;
    double picard_tol = 1e-8;
    std::size_t max_iter = 60;

    // initial law: "stationary" (fixed-point law) or an InitLaw string
    std::string init = "stationary";
    std::vector<std::string> class_init;  // per-class overrides, "" = use init

    // particle system
    std::vector<std::size_t> populations{100, 400, 1600};
    std::size_t replicates = 32;
    std::size_t particles = 2000;
    std::vector<double> check_times{2.0, 8.0};

    // packet chain
    std::vector<double> eps{1e-2, 1e-3, 1e-4};
    double factor = 0.5;
    std::size_t samples = 50000;
    double burn_in = 200.0;  // fluid time units
    double thin = 1.0;       // fluid time units between samples

    // fixed point
    double damping = 0.5;
    double fixed_point_tol = 1e-12;
    std::size_t multistart = 8;

    // dynkin
    std::vector<std::string> functions{"x", "x2"};
    std::vector<double> dynkin_times;  // empty: horizon

    /// Throws ConfigError unless every tolerance is positive, lists are sorted, etc.
    void validate() const;
};

ExperimentConfig parse_experiment(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment(const std::filesystem::path& path);

}  // namespace aimdmf
