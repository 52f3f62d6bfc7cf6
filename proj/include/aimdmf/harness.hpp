#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aimdmf/config.hpp"
#include "aimdmf/equilibrium.hpp"
#include "aimdmf/init_law.hpp"
#include "aimdmf/report.hpp"

namespace aimdmf {

struct RunContext {
    std::uint64_t seed = 1;
    std::filesystem::path out = ".";
    int threads = 1;
    bool trace = false;
};

struct ExperimentResult {
    ExperimentKind kind = ExperimentKind::fixedpoint;
    std::vector<Criterion> criteria;
    std::vector<std::string> files;  // written into the output directory
    std::string summary;             // short text for the terminal

    Status status() const;
};

/// Runs one experiment, writing its CSV files, report.md and manifest.txt into
/// ctx.out. Criterion outcomes are returned, not thrown; errors are thrown.
ExperimentResult run_experiment(const ExperimentConfig& config, const RunContext& ctx);

/// CLI exit code: 0 all criteria met, 2 inconclusive, 1 failure.
int exit_code(Status s);

/// Equilibrium of a model by the specialized solver for its topology (when one
/// applies) and by the general damped iteration.
struct EquilibriumSolve {
    std::string specialized_name;  // empty when no specialized solver applies
    std::optional<StationaryLaw> specialized;
    std::optional<FixedPointReport> general;
    std::string general_error;  // set when the general solver found nothing

    /// Specialized solution when available, else the first general cluster.
    const StationaryLaw* best() const;
};

EquilibriumSolve solve_equilibrium(const NetworkModel& model, const FixedPointOptions& options);

/// Per-class initial laws from the config; "stationary" needs the equilibrium law.
std::vector<InitLaw> resolve_init(const ExperimentConfig& config, const StationaryLaw* law);

}  // namespace aimdmf
