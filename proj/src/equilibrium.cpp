#include "aimdmf/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "aimdmf/error.hpp"
#include "aimdmf/numerics.hpp"

namespace aimdmf {

namespace {

// Lower end of every bisection bracket; keeps beta(u) = c u evaluable.
constexpr double kUFloor = 1e-12;
constexpr std::size_t kMaxSeriesTerms = 10000;

void check_factor(double r, bool allow_zero) {
    const bool ok = allow_zero ? (r >= 0.0 && r <= kMaxFactor) : (r > 0.0 && r <= kMaxFactor);
    if (!ok) {
        throw ParameterError(fmt::format("decrease factor r = {} outside the supported domain {}0, {}]",
                                         r, allow_zero ? "[" : "(", kMaxFactor));
    }
}

double tight(double x) { return 8.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x)); }

}  // namespace

// ---------------------------------------------------------------------------
// psi and the stationary density

double psi(double r) {
    check_factor(r, true);
    long double prod = 1.0L;
    const long double rl = r;
    const long double stop = 1e-16L * (1.0L - rl);
    long double r_odd = rl;       // r^{2n-1}
    long double r_even = rl * rl;  // r^{2n}
    while (r_odd > 0.0L) {
        prod *= (1.0L - r_even) / (1.0L - r_odd);
        if (r_even < stop) break;
        r_odd *= rl * rl;
        r_even *= rl * rl;
    }
    return static_cast<double>(std::sqrt(2.0L / std::numbers::pi_v<long double>) * prod);
}

double stationary_density(double r, double rho, double x) {
    check_factor(r, false);
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ParameterError("rho must be > 0");
    if (!(x >= 0.0)) throw ParameterError("density argument must be >= 0");

    const long double rl = r;
    const long double inv_r2 = 1.0L / (rl * rl);
    // W / sqrt(rho) has the rho = 1 law, so rho enters as an inverse scale.
    const long double half_rho_x2 = 0.5L * static_cast<long double>(x) * x / rho;

    long double norm = 1.0L;  // prod_{n>=0} (1 - r^{2n+1})
    for (long double p = rl; p > 1e-22L; p *= rl * rl) norm *= (1.0L - p);

    long double sum = 0.0L;
    long double coef = 1.0L;   // r^{-2n} / prod_{k<=n} (1 - r^{-2k})
    long double scale = 1.0L;  // r^{-2n}
    long double largest = 0.0L;
    bool converged = false;
    for (std::size_t n = 0; n < kMaxSeriesTerms; ++n) {
        if (n > 0) {
            scale *= inv_r2;
            coef *= inv_r2 / (1.0L - scale);
        }
        const long double term = coef * std::exp(-half_rho_x2 * scale);
        sum += term;
        largest = std::max(largest, std::abs(term));
        if (n > 0 && (std::abs(term) <= 1e-16L * std::abs(sum) || std::abs(term) < 1e-300L)) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw NumericError(fmt::format(
            "density series did not converge at r = {}; use a smaller decrease factor", r));
    }
    const long double prefactor = std::sqrt(2.0L / (rho * std::numbers::pi_v<long double>)) / norm;
    // Alternating series: absolute rounding error scales with the largest term.
    const long double rounding = prefactor * largest * 64.0L * std::numeric_limits<long double>::epsilon();
    if (rounding > 1e-9L) {
        throw NumericError(fmt::format(
            "density series loses precision at r = {} (rounding ~{:.2g}); use a smaller decrease factor",
            r, static_cast<double>(rounding)));
    }
    double h = static_cast<double>(prefactor * sum);
    if (h < 0.0) {
        if (h < -1e-12) {
            throw NumericError(fmt::format("density evaluated to {} at x = {}", h, x));
        }
        h = 0.0;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Tabulated law

StationaryDistribution::StationaryDistribution(double r, double rho, std::size_t cells)
    : r_(r), rho_(rho) {
    check_factor(r, false);
    if (!(rho > 0.0)) throw ParameterError("rho must be > 0");
    if (cells < 16) throw ParameterError("stationary table needs at least 16 cells");

    // The leading term behaves like exp(-x^2 / (2 rho)); at x = 10 sqrt(rho) the
    // remaining mass is far below 1e-12.
    const double cutoff = 10.0 * std::sqrt(rho);
    grid_.resize(cells + 1);
    cum_.resize(cells + 1);
    const auto f = [this](double x) { return stationary_density(r_, rho_, x); };
    cum_[0] = 0.0;
    for (std::size_t i = 0; i <= cells; ++i) {
        grid_[i] = cutoff * static_cast<double>(i) / static_cast<double>(cells);
    }
    for (std::size_t i = 0; i < cells; ++i) {
        const double cell = quad(f, grid_[i], grid_[i + 1], 1e-14);
        cum_[i + 1] = cum_[i] + std::max(cell, 0.0);
    }
    if (std::abs(cum_.back() - 1.0) > 1e-9) {
        throw NumericError(fmt::format("stationary table mass {:.15g} is not 1 (r={}, rho={})",
                                       cum_.back(), r, rho));
    }
}

double StationaryDistribution::mean() const { return std::sqrt(rho_) * psi(r_); }

double StationaryDistribution::density(double x) const { return stationary_density(r_, rho_, x); }

double StationaryDistribution::cdf(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= grid_.back()) return cum_.back();
    const double width = grid_[1] - grid_[0];
    const auto i = std::min(static_cast<std::size_t>(x / width), grid_.size() - 2);
    const auto f = [this](double y) { return stationary_density(r_, rho_, y); };
    const double partial =
        boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, grid_[i], x, 0);
    return std::min(cum_[i] + std::max(partial, 0.0), cum_[i + 1]);
}

double StationaryDistribution::quantile(double p) const {
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("quantile level must lie in [0,1]");
    if (p >= cum_.back()) return grid_.back();
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), p);
    const std::size_t i = static_cast<std::size_t>(it - cum_.begin()) - 1;
    const double mass = cum_[i + 1] - cum_[i];
    const double frac = mass > 0.0 ? (p - cum_[i]) / mass : 0.0;
    return grid_[i] + frac * (grid_[i + 1] - grid_[i]);
}

double StationaryDistribution::sample(Stream& stream) const { return quantile(stream.uniform()); }

StationaryDistribution stationary_cdf(double r, double rho) { return StationaryDistribution(r, rho); }

std::vector<double> sample_stationary(double r, double rho, std::size_t n, Stream& stream) {
    const StationaryDistribution law(r, rho);
    std::vector<double> out(n);
    for (auto& x : out) x = law.sample(stream);
    return out;
}

// ---------------------------------------------------------------------------
// Fixed point equation

double StationaryLaw::max_residual() const {
    double m = 0.0;
    for (double v : residual) m = std::max(m, v);
    return m;
}

namespace {

void require_multiplicative(const NetworkModel& model) {
    for (std::size_t k = 0; k < model.classes(); ++k) {
        if (!model.cls(k).loss.multiplicative()) {
            throw UnsupportedModelError(fmt::format(
                "class {}: equilibrium analysis needs a loss rate of the form w * beta(u)", k + 1));
        }
    }
}

double positive_beta(const NetworkModel& model, std::size_t k, std::span<const double> u) {
    const double b = eval_beta(model.cls(k), k, model, u);
    if (!(b > 0.0)) {
        throw ModelError(fmt::format("class {}: beta(u) = {} is not positive at u = [{}]", k + 1, b,
                                     fmt::join(u, ", ")));
    }
    return b;
}

}  // namespace

std::vector<double> fixed_point_map(const NetworkModel& model, std::span<const double> u) {
    require_multiplicative(model);
    std::vector<double> F(model.nodes(), 0.0);
    for (std::size_t k = 0; k < model.classes(); ++k) {
        const ClassSpec& c = model.cls(k);
        const double mean = psi(c.r) * std::sqrt(eval_drift(c, u) / positive_beta(model, k, u));
        for (std::size_t j = 0; j < model.nodes(); ++j) F[j] += model.allocation(j, k) * c.p * mean;
    }
    return F;
}

std::vector<double> fixed_point_residual(const NetworkModel& model, std::span<const double> u) {
    auto F = fixed_point_map(model, u);
    for (std::size_t j = 0; j < F.size(); ++j) F[j] = std::abs(u[j] - F[j]);
    return F;
}

StationaryLaw make_stationary_law(const NetworkModel& model, std::vector<double> u) {
    StationaryLaw law;
    law.residual = fixed_point_residual(model, u);
    for (std::size_t k = 0; k < model.classes(); ++k) {
        const ClassSpec& c = model.cls(k);
        const double rho = eval_drift(c, u) / positive_beta(model, k, u);
        law.r.push_back(c.r);
        law.rho.push_back(rho);
        law.mean.push_back(psi(c.r) * std::sqrt(rho));
    }
    law.u = std::move(u);
    return law;
}

FixedPointReport solve_fixed_point(const NetworkModel& model, const FixedPointOptions& options) {
    require_multiplicative(model);
    if (!(options.damping > 0.0 && options.damping <= 1.0)) {
        throw ParameterError("damping must lie in (0,1]");
    }
    if (!(options.tol > 0.0)) throw ParameterError("tolerance must be > 0");
    const std::size_t J = model.nodes();
    std::vector<double> base = options.u0.empty() ? std::vector<double>(J, 1.0) : options.u0;
    if (base.size() != J) throw ParameterError("initial point has the wrong dimension");

    const std::size_t starts = std::max<std::size_t>(options.multistart, 1);
    Stream stream(options.seed, {0x66697870u});
    FixedPointReport report;
    report.starts = starts;
    std::vector<std::vector<double>> found;
    std::vector<double> last_history;

    for (std::size_t s = 0; s < starts; ++s) {
        std::vector<double> u = base;
        if (s > 0) {
            for (auto& x : u) x = std::max(x, 1e-3) * std::exp(6.0 * stream.uniform() - 3.0);
        }
        std::vector<double> history;
        bool ok = false;
        for (std::size_t it = 0; it < options.max_iter; ++it) {
            const auto F = fixed_point_map(model, u);
            double gap = 0.0;
            for (std::size_t j = 0; j < J; ++j) gap = std::max(gap, std::abs(u[j] - F[j]));
            history.push_back(gap);
            if (gap <= options.tol) {
                ok = true;
                break;
            }
            for (std::size_t j = 0; j < J; ++j) {
                u[j] = (1.0 - options.damping) * u[j] + options.damping * F[j];
            }
        }
        if (ok) {
            ++report.converged_starts;
            found.push_back(u);
        } else {
            last_history = std::move(history);
        }
    }
    if (found.empty()) {
        throw ConvergenceError(fmt::format("fixed-point iteration did not converge from any of {} starts",
                                           starts),
                               std::move(last_history));
    }

    std::sort(found.begin(), found.end());
    std::vector<std::vector<double>> clusters;
    for (auto& u : found) {
        const bool seen = std::any_of(clusters.begin(), clusters.end(), [&](const auto& c) {
            double d = 0.0, norm = 1.0;
            for (std::size_t j = 0; j < J; ++j) {
                d = std::max(d, std::abs(u[j] - c[j]));
                norm = std::max(norm, std::abs(c[j]));
            }
            return d <= 1e-6 * norm;
        });
        if (!seen) clusters.push_back(u);
    }
    for (auto& u : clusters) report.solutions.push_back(make_stationary_law(model, std::move(u)));
    return report;
}

// ---------------------------------------------------------------------------
// Specialised topologies

namespace {

/// beta_k as a function of s = sum_j A_jk u_j, when the loss spec allows it.
std::function<double(double)> scalar_beta(const NetworkModel& model, std::size_t k) {
    const ClassSpec& c = model.cls(k);
    if (c.loss.form == LossSpec::Form::aggregate) {
        const ScalarRate g = c.loss.aggregate;
        return [g](double s) { return g(s); };
    }
    if (c.loss.form == LossSpec::Form::per_node) {
        std::size_t used = 0, node = 0;
        for (std::size_t j = 0; j < model.nodes(); ++j) {
            if (model.allocation(j, k) != 0.0) {
                ++used;
                node = j;
            }
        }
        if (used == 1) {
            const double delta = c.loss.delta;
            const ScalarRate d = c.loss.node_loss[node];
            const double weight = model.allocation(node, k);
            return [delta, d, weight](double s) { return delta + d(s / weight); };
        }
    }
    throw UnsupportedModelError(fmt::format(
        "class {}: topology solvers need beta to depend on the summed utilization of its route", k + 1));
}

double class_alpha(const NetworkModel& model, std::size_t k) {
    const ClassSpec& c = model.cls(k);
    if (c.drift.form != DriftSpec::Form::constant) {
        throw UnsupportedModelError(
            fmt::format("class {}: topology solvers need a constant drift", k + 1));
    }
    return psi(c.r) * c.p * std::sqrt(c.drift.a);
}

bool uses(const NetworkModel& model, std::size_t j, std::size_t k) { return model.allocation(j, k) != 0.0; }

bool unit_pattern(const NetworkModel& model, const std::function<bool(std::size_t, std::size_t)>& on) {
    for (std::size_t j = 0; j < model.nodes(); ++j) {
        for (std::size_t k = 0; k < model.classes(); ++k) {
            const double a = model.allocation(j, k);
            if (on(j, k) ? a != 1.0 : a != 0.0) return false;
        }
    }
    return true;
}

/// Smallest x >= floor with g(x) >= 0 for an increasing g; brackets by doubling.
double increasing_root(const std::function<double(double)>& g, double floor) {
    if (g(floor) >= 0.0) return floor;
    double hi = std::max(1.0, 2.0 * floor);
    for (int i = 0; g(hi) < 0.0; ++i) {
        if (i > 200) throw BracketError("could not bracket root from above");
        hi *= 2.0;
    }
    return bisect(g, floor, hi, tight(hi));
}

void check_positive_beta(const std::function<double(double)>& beta, std::size_t k) {
    if (!(beta(kUFloor) > 0.0)) {
        throw ModelError(fmt::format("class {}: beta is not positive near 0", k + 1));
    }
}

void check_nondecreasing(const std::function<double(double)>& beta, std::size_t k) {
    double prev = beta(kUFloor);
    for (double x = 1e-6; x < 1e6; x *= 1.5) {
        const double b = beta(x);
        if (b < prev) {
            throw UnsupportedModelError(fmt::format("class {}: beta is decreasing near {}", k + 1, x));
        }
        prev = b;
    }
}

}  // namespace

bool is_linear_topology(const NetworkModel& model) {
    const std::size_t J = model.nodes();
    if (model.classes() != J + 1) return false;
    return unit_pattern(model, [J](std::size_t j, std::size_t k) { return k == j || k == J; });
}

bool is_torus_topology(const NetworkModel& model) {
    if (model.nodes() != 3 || model.classes() != 3) return false;
    return unit_pattern(model, [](std::size_t j, std::size_t k) { return j == k || j == (k + 1) % 3; });
}

StationaryLaw solve_single_node(const NetworkModel& model) {
    if (model.nodes() != 1) throw ConfigError("single-node solver needs exactly one node");
    require_multiplicative(model);

    bool monotone = true;
    for (std::size_t k = 0; k < model.classes(); ++k) {
        if (!uses(model, 0, k)) continue;
        double prev = 0.0;
        for (double x = kUFloor; x < 1e6; x = x < 1e-6 ? 1e-6 : x * 1.5) {
            const std::array<double, 1> u{x};
            const double v = std::sqrt(eval_drift(model.cls(k), u) / positive_beta(model, k, u));
            if (x > kUFloor && v > prev * (1.0 + 1e-12)) monotone = false;
            prev = v;
        }
    }
    if (!monotone) {
        FixedPointReport fallback = solve_fixed_point(model);
        StationaryLaw law = fallback.primary();
        law.warnings.emplace_back("class throughput not decreasing in u; used the damped solver");
        return law;
    }

    const auto G = [&model](double x) {
        const std::array<double, 1> u{x};
        return x - fixed_point_map(model, u)[0];
    };
    const double root = increasing_root(G, kUFloor);
    return make_stationary_law(model, {root});
}

StationaryLaw solve_linear_network(const NetworkModel& model) {
    require_multiplicative(model);
    if (!is_linear_topology(model)) {
        throw ConfigError("allocation does not match the linear topology (class j on node j, last class on all)");
    }
    const std::size_t J = model.nodes();
    std::vector<std::function<double(double)>> beta(J + 1);
    std::vector<double> alpha(J + 1);
    for (std::size_t k = 0; k <= J; ++k) {
        beta[k] = scalar_beta(model, k);
        alpha[k] = class_alpha(model, k);
        check_positive_beta(beta[k], k);
        check_nondecreasing(beta[k], k);
    }

    // phi_j(x) = x - alpha_j / sqrt(beta_j(x)) is increasing; invert it.
    const auto phi_inverse = [&](std::size_t j, double y) {
        return increasing_root([&](double x) { return x - alpha[j] / std::sqrt(beta[j](x)) - y; }, kUFloor);
    };
    const auto node_values = [&](double total) {
        const double y = alpha[J] / std::sqrt(beta[J](total));
        std::vector<double> u(J);
        for (std::size_t j = 0; j < J; ++j) u[j] = phi_inverse(j, y);
        return u;
    };
    // total - sum_j phi_j^{-1}(alpha_L / sqrt(beta_L(total))) is increasing in total.
    const auto outer = [&](double total) {
        double s = 0.0;
        for (double v : node_values(total)) s += v;
        return total - s;
    };
    const double total = increasing_root(outer, kUFloor);
    StationaryLaw law = make_stationary_law(model, node_values(total));
    if (law.max_residual() > 1e-9) {
        throw NumericError(fmt::format("linear network residual {} exceeds 1e-9", law.max_residual()));
    }
    return law;
}

StationaryLaw solve_torus(const NetworkModel& model) {
    require_multiplicative(model);
    if (!is_torus_topology(model)) {
        throw ConfigError("allocation does not match the three-node torus (class j on nodes j, j+1)");
    }
    constexpr std::size_t J = 3;
    std::array<std::function<double(double)>, J> beta;
    std::array<double, J> alpha{};
    for (std::size_t k = 0; k < J; ++k) {
        beta[k] = scalar_beta(model, k);
        alpha[k] = class_alpha(model, k);
        check_positive_beta(beta[k], k);
        check_nondecreasing(beta[k], k);
    }

    // x_k(S) solves x = alpha_k / sqrt(beta_k(x + S)).
    const auto x_of = [&](std::size_t k, double S) {
        return increasing_root([&](double x) { return x - alpha[k] / std::sqrt(beta[k](x + S)); }, 0.0);
    };
    const auto outer = [&](double S) {
        double sum = 0.0;
        for (std::size_t k = 0; k < J; ++k) sum += x_of(k, S);
        return S - sum;
    };
    const double S = increasing_root(outer, kUFloor);
    std::array<double, J> y{};
    for (std::size_t k = 0; k < J; ++k) y[k] = x_of(k, S);

    // y is indexed by class. Node j carries classes j-1 and j; the alternative
    // pairing (j, j+1) corresponds to indexing y by node instead.
    std::vector<double> by_class(J), by_node(J);
    for (std::size_t j = 0; j < J; ++j) {
        by_class[j] = y[(j + J - 1) % J] + y[j];
        by_node[j] = y[j] + y[(j + 1) % J];
    }
    StationaryLaw a = make_stationary_law(model, by_class);
    StationaryLaw b = make_stationary_law(model, by_node);
    const double tol = 1e-9;
    if (a.max_residual() <= tol) return a;
    if (b.max_residual() <= tol) return b;
    throw NumericError(fmt::format(
        "torus solution failed the fixed-point residual check: class pairing {:.3g}, node pairing {:.3g}",
        a.max_residual(), b.max_residual()));
}

}  // namespace aimdmf
