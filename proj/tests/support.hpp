#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aimdmf/config.hpp"
#include "aimdmf/model.hpp"

namespace testing {

inline std::filesystem::path source_dir() { return AIMDMF_SOURCE_DIR; }
inline std::filesystem::path model_file(const std::string& name) {
    return source_dir() / "configs" / "models" / name;
}
inline std::filesystem::path experiment_file(const std::string& name) {
    return source_dir() / "configs" / "experiments" / name;
}

inline aimdmf::ClassSpec constant_class(double r, double p, double a, aimdmf::LossSpec loss) {
    return aimdmf::ClassSpec{r, p, aimdmf::DriftSpec::constant(a), std::move(loss)};
}

/// One node, one class: a, loss g(u), factor r.
inline aimdmf::NetworkModel single(double a, aimdmf::ScalarRate g, double r = 0.5) {
    return aimdmf::NetworkModel(1, 1, {1.0}, {constant_class(r, 1.0, a, aimdmf::LossSpec::aggregate_of(g))});
}

inline aimdmf::NetworkModel canonical() { return aimdmf::load_model(model_file("single_node.cfg")); }

/// K independent classes (zero allocation), each with a = 1, beta = 1.
inline aimdmf::NetworkModel uncoupled(std::size_t K, double r = 0.5) {
    std::vector<aimdmf::ClassSpec> cs;
    for (std::size_t k = 0; k < K; ++k) {
        cs.push_back(constant_class(r, 1.0 / static_cast<double>(K), 1.0,
                                    aimdmf::LossSpec::aggregate_of(aimdmf::ScalarRate::constant(1.0))));
    }
    return aimdmf::NetworkModel(1, K, std::vector<double>(K, 0.0), cs);
}

}  // namespace testing
