#include "aimdmf/numerics.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>

#include "aimdmf/error.hpp"

namespace aimdmf {

double bisect(const ScalarFn& f, double lo, double hi, double xtol, double ftol) {
    if (!(lo <= hi)) throw BracketError(fmt::format("empty bracket [{}, {}]", lo, hi));
    const double flo = f(lo);
    const double fhi = f(hi);
    if (std::isnan(flo) || std::isnan(fhi)) throw NumericError("NaN at bracket endpoint");
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) {
        throw BracketError(
            fmt::format("no sign change on [{}, {}]: f = {}, {}", lo, hi, flo, fhi));
    }
    const auto done = [xtol](double a, double b) { return std::abs(b - a) <= xtol; };
    std::uintmax_t max_iter = 400;
    double root_found = std::numeric_limits<double>::quiet_NaN();
    auto g = [&](double x) {
        const double v = f(x);
        if (std::abs(v) <= ftol) root_found = x;
        return v;
    };
    // boost bisect evaluates the endpoints again; the closure above records an
    // interior point whose residual is already small enough.
    auto stop = [&](double a, double b) { return done(a, b) || !std::isnan(root_found); };
    const auto [a, b] = boost::math::tools::bisect(g, lo, hi, stop, max_iter);
    if (!std::isnan(root_found)) return root_found;
    return 0.5 * (a + b);
}

double quad(const ScalarFn& f, double a, double b, double tol) {
    if (a == b) return 0.0;
    using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
    double error = 0.0;
    double l1 = 0.0;
    // Boost terminates on error <= rel * L1; translate the absolute target using
    // a single-panel estimate of the L1 norm. Below ~50 eps the Kronrod error
    // estimate is rounding noise and refinement never terminates.
    GK::integrate(f, a, b, 0, 0.0, &error, &l1);
    const double rel = std::max(tol / std::max(l1, 1e-300), 1e-14);
    const double value = GK::integrate(f, a, b, 18, rel, &error, &l1);
    if (!std::isfinite(value)) throw NumericError("quadrature produced a non-finite value");
    if (error > std::max(tol, 1e-14 * l1)) {
        throw NumericError(
            fmt::format("quadrature on [{}, {}] did not reach {:.3g} (estimate {:.3g})", a, b, tol, error));
    }
    return value;
}

double ks_distance(std::span<const double> samples, const ScalarFn& cdf) {
    if (samples.empty()) throw ParameterError("KS distance of an empty sample");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (!std::isfinite(sorted[i])) throw ParameterError("KS sample is not finite");
        const double F = cdf(sorted[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - F, F - static_cast<double>(i) / n});
    }
    return std::clamp(d, 0.0, 1.0);
}

double exp_sample(Stream& stream) { return -std::log(stream.uniform_open0()); }

MeanSe mean_se(std::span<const double> xs) {
    MeanSe out;
    if (xs.empty()) return out;
    const double n = static_cast<double>(xs.size());
    double sum = 0.0;
    for (double x : xs) sum += x;
    out.mean = sum / n;
    if (xs.size() < 2) return out;
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (n - 1.0) / n);
    return out;
}

MeanSe batch_mean_se(std::span<const double> xs, std::size_t batches) {
    if (xs.size() < 2 * batches) return mean_se(xs);
    const std::size_t len = xs.size() / batches;
    std::vector<double> means(batches);
    for (std::size_t b = 0; b < batches; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < len; ++i) s += xs[b * len + i];
        means[b] = s / static_cast<double>(len);
    }
    MeanSe out = mean_se(means);
    out.mean = mean_se(xs).mean;
    return out;
}

}  // namespace aimdmf
