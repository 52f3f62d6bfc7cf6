#include "aimdmf/init_law.hpp"

#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "aimdmf/error.hpp"
#include "aimdmf/numerics.hpp"

namespace aimdmf {

InitLaw InitLaw::constant(double c) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("constant initial value must be >= 0");
    InitLaw l;
    l.kind_ = Kind::constant;
    l.a_ = c;
    return l;
}

InitLaw InitLaw::uniform(double lo, double hi) {
    if (!(lo >= 0.0 && hi > lo) || !std::isfinite(hi)) {
        throw ConfigError("uniform initial law needs 0 <= lo < hi");
    }
    InitLaw l;
    l.kind_ = Kind::uniform;
    l.a_ = lo;
    l.b_ = hi;
    return l;
}

InitLaw InitLaw::exponential(double mean) {
    if (!(mean > 0.0) || !std::isfinite(mean)) throw ConfigError("exponential initial law needs mean > 0");
    InitLaw l;
    l.kind_ = Kind::exponential;
    l.a_ = mean;
    return l;
}

InitLaw InitLaw::stationary(double r, double rho) {
    InitLaw l;
    l.kind_ = Kind::stationary;
    l.a_ = r;
    l.b_ = rho;
    l.table_ = std::make_shared<const StationaryDistribution>(r, rho);
    return l;
}

InitLaw InitLaw::parse(const std::string& text) {
    std::istringstream is(text);
    std::string kind;
    is >> kind;
    std::vector<double> args;
    for (double v; is >> v;) args.push_back(v);
    if (!is.eof()) throw ConfigError(fmt::format("cannot parse initial law '{}'", text));
    auto need = [&](std::size_t n) {
        if (args.size() != n) {
            throw ConfigError(fmt::format("initial law '{}' expects {} parameter(s)", kind, n));
        }
    };
    if (kind == "constant") {
        need(1);
        return constant(args[0]);
    }
    if (kind == "uniform") {
        need(2);
        return uniform(args[0], args[1]);
    }
    if (kind == "exponential") {
        need(1);
        return exponential(args[0]);
    }
    if (kind == "stationary") {
        need(2);
        return stationary(args[0], args[1]);
    }
    throw ConfigError(fmt::format("unknown initial law '{}'", kind));
}

double InitLaw::sample(Stream& stream) const {
    switch (kind_) {
        case Kind::constant:
            return a_;
        case Kind::uniform:
            return a_ + (b_ - a_) * stream.uniform();
        case Kind::exponential:
            return a_ * exp_sample(stream);
        case Kind::stationary:
            return table_->sample(stream);
    }
    return a_;
}

double InitLaw::mean() const {
    switch (kind_) {
        case Kind::constant:
        case Kind::exponential:
            return a_;
        case Kind::uniform:
            return 0.5 * (a_ + b_);
        case Kind::stationary:
            return table_->mean();
    }
    return a_;
}

std::string InitLaw::describe() const {
    switch (kind_) {
        case Kind::constant:
            return fmt::format("constant {:.17g}", a_);
        case Kind::uniform:
            return fmt::format("uniform {:.17g} {:.17g}", a_, b_);
        case Kind::exponential:
            return fmt::format("exponential {:.17g}", a_);
        case Kind::stationary:
            return fmt::format("stationary {:.17g} {:.17g}", a_, b_);
    }
    return {};
}

std::vector<InitLaw> stationary_init(const StationaryLaw& law) {
    std::vector<InitLaw> out;
    for (std::size_t k = 0; k < law.r.size(); ++k) out.push_back(InitLaw::stationary(law.r[k], law.rho[k]));
    return out;
}

}  // namespace aimdmf
