// aimdmf <experiment> --config <file> --seed <u64> --out <dir> [--threads n] [--trace]

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "aimdmf/config.hpp"
#include "aimdmf/error.hpp"
#include "aimdmf/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Mean-field AIMD experiments"};
    std::string experiment, config, out;
    std::uint64_t seed = 1;
    int threads = 1;
    bool trace = false;
    app.add_option("experiment", experiment, "chaos | equilibrium | scaling | fixedpoint | mckean | dynkin")
        ->required();
    app.add_option("--config", config, "experiment config file")->required();
    app.add_option("--seed", seed, "root seed")->required();
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--threads", threads, "worker threads (results do not depend on it)")
        ->check(CLI::Range(1, 1024));
    app.add_flag("--trace", trace, "write per-jump event logs where supported");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        const auto kind = aimdmf::parse_experiment_kind(experiment);
        aimdmf::ExperimentConfig cfg = aimdmf::load_experiment(config);
        if (cfg.kind != kind) {
            throw aimdmf::ConfigError(fmt::format("config '{}' describes a {} experiment, not {}", config,
                                                  aimdmf::to_string(cfg.kind), experiment));
        }
        aimdmf::RunContext ctx;
        ctx.seed = seed;
        ctx.out = out;
        ctx.threads = threads;
        ctx.trace = trace;
        const auto result = aimdmf::run_experiment(cfg, ctx);
        for (const auto& c : result.criteria) {
            std::cout << fmt::format("{:<13} {}: {}\n", aimdmf::to_string(c.status), c.name, c.detail);
        }
        std::cout << fmt::format("{}: {} ({})\n", experiment, aimdmf::to_string(result.status()), result.summary);
        std::cout << "outputs in " << out << "\n";
        return aimdmf::exit_code(result.status());
    } catch (const aimdmf::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
