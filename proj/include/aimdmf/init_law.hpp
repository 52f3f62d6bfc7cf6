#pragma once

#include <memory>
#include <string>
#include <vector>

#include "aimdmf/equilibrium.hpp"
#include "aimdmf/rng.hpp"

namespace aimdmf {

/// Initial throughput law of one class.
class InitLaw {
public:
    enum class Kind { constant, uniform, exponential, stationary };

    static InitLaw constant(double c);
    static InitLaw uniform(double lo, double hi);
    static InitLaw exponential(double mean);
    static InitLaw stationary(double r, double rho);

    /// Parses "constant 0.5", "uniform 0 2", "exponential 1", "stationary 0.5 1.2".
    static InitLaw parse(const std::string& text);

    double sample(Stream& stream) const;
    double mean() const;
    Kind kind() const noexcept { return kind_; }
    bool deterministic() const noexcept { return kind_ == Kind::constant; }
    std::string describe() const;

private:
    Kind kind_ = Kind::constant;
    double a_ = 0.0;
    double b_ = 0.0;
    std::shared_ptr<const StationaryDistribution> table_;
};

/// One stationary initial law per class, taken from an equilibrium.
std::vector<InitLaw> stationary_init(const StationaryLaw& law);

}  // namespace aimdmf
