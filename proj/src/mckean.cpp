#include "aimdmf/mckean.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "aimdmf/engine.hpp"
#include "aimdmf/error.hpp"
#include "aimdmf/parallel.hpp"
#include "aimdmf/particles.hpp"
#include "aimdmf/rng.hpp"

namespace aimdmf {

namespace {

// Reduction block; fixed so that sums do not depend on the thread count.
constexpr std::size_t kBlock = 512;

struct Ensemble {
    std::vector<std::vector<double>> w0;        // [class][member]
    std::vector<std::vector<Stream>> streams;   // [class][member], positioned after the initial draw
};

Ensemble draw_ensemble(const NetworkModel& model, const McKeanOptions& opt) {
    Ensemble e;
    const std::size_t K = model.classes();
    e.w0.assign(K, std::vector<double>(opt.ensemble));
    e.streams.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        e.streams[k].reserve(opt.ensemble);
        for (std::size_t m = 0; m < opt.ensemble; ++m) {
            Stream s(opt.seed, {opt.experiment, 0, k, m});
            const double w = opt.init[k].sample(s);
            if (!(w >= 0.0)) throw ModelError("initial law produced a negative throughput");
            e.w0[k][m] = w;
            e.streams[k].push_back(s);
        }
    }
    return e;
}

struct PassResult {
    std::vector<std::vector<double>> mean;  // [class][i]
    std::vector<std::vector<double>> se;    // [class][i]
    std::vector<std::vector<double>> paths; // [class][member * points + i] when retained
};

/// Simulates every member under the field (cell i uses field[.][i]).
PassResult ensemble_pass(const NetworkModel& model, const McKeanOptions& opt, const Ensemble& ens,
                         const std::vector<std::vector<double>>& field, std::size_t cells, bool retain) {
    const std::size_t K = model.classes();
    const std::size_t J = model.nodes();
    const std::size_t points = cells + 1;
    const std::size_t M = opt.ensemble;

    // Per-cell coefficients; evaluated once per class.
    std::vector<std::vector<double>> drift(K, std::vector<double>(cells));
    std::vector<std::vector<double>> factor(K, std::vector<double>(cells));
    std::vector<double> u(J);
    for (std::size_t i = 0; i < cells; ++i) {
        for (std::size_t j = 0; j < J; ++j) u[j] = field[j][i];
        for (std::size_t k = 0; k < K; ++k) {
            drift[k][i] = eval_drift(model.cls(k), u);
            factor[k][i] = eval_beta(model.cls(k), k, model, u);
            if (factor[k][i] < 0.0) throw ModelError("negative loss coefficient in mean-field pass");
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        const LossSpec& l = model.cls(k).loss;
        if (!l.multiplicative() && !l.monotone_in_w) {
            throw UnsupportedModelError(fmt::format("class {}: general loss not flagged monotone", k + 1));
        }
    }

    PassResult out;
    out.mean.assign(K, std::vector<double>(points, 0.0));
    out.se.assign(K, std::vector<double>(points, 0.0));
    if (retain) out.paths.assign(K, std::vector<double>(M * points));

    const std::size_t blocks = (M + kBlock - 1) / kBlock;
    // partial[k][b] holds sum and sum of squares per grid point.
    std::vector<std::vector<std::vector<double>>> sums(K, std::vector<std::vector<double>>(blocks));
    std::vector<std::vector<std::vector<double>>> squares(K, std::vector<std::vector<double>>(blocks));

    parallel_for(K * blocks, opt.threads, [&](std::size_t task) {
        const std::size_t k = task / blocks;
        const std::size_t b = task % blocks;
        const ClassSpec& c = model.cls(k);
        std::vector<double> s(points, 0.0), q(points, 0.0);
        const std::size_t end = std::min(M, (b + 1) * kBlock);
        for (std::size_t m = b * kBlock; m < end; ++m) {
            Stream stream = ens.streams[k][m];
            double w = ens.w0[k][m];
            s[0] += w;
            q[0] += w * w;
            if (retain) out.paths[k][m * points] = w;
            for (std::size_t i = 0; i < cells; ++i) {
                const StepResult r =
                    c.loss.multiplicative()
                        ? step_multiplicative(w, drift[k][i], factor[k][i], c.r, opt.step, stream)
                        : step_general(w, drift[k][i], c.r, factor[k][i], c.loss.in_w, opt.step, stream);
                w = r.w;
                if (!std::isfinite(w)) {
                    throw NumericError(fmt::format("class {} member {} diverged at cell {}", k + 1, m, i));
                }
                s[i + 1] += w;
                q[i + 1] += w * w;
                if (retain) out.paths[k][m * points + i + 1] = w;
            }
        }
        sums[k][b] = std::move(s);
        squares[k][b] = std::move(q);
    });

    const double n = static_cast<double>(M);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t i = 0; i < points; ++i) {
            double s = 0.0, q = 0.0;
            for (std::size_t b = 0; b < blocks; ++b) {
                s += sums[k][b][i];
                q += squares[k][b][i];
            }
            const double mean = s / n;
            const double var = M > 1 ? std::max(q - n * mean * mean, 0.0) / (n - 1.0) : 0.0;
            out.mean[k][i] = mean;
            out.se[k][i] = std::sqrt(var / n);
        }
    }
    return out;
}

std::vector<std::vector<double>> field_from_means(const NetworkModel& model,
                                                  const std::vector<std::vector<double>>& mean) {
    const std::size_t points = mean.front().size();
    std::vector<std::vector<double>> u(model.nodes(), std::vector<double>(points));
    std::vector<double> m(model.classes());
    for (std::size_t i = 0; i < points; ++i) {
        for (std::size_t k = 0; k < model.classes(); ++k) m[k] = mean[k][i];
        const auto ui = limit_utilization(m, model);
        for (std::size_t j = 0; j < model.nodes(); ++j) u[j][i] = ui[j];
    }
    return u;
}

void check_options(const NetworkModel& model, const McKeanOptions& opt) {
    if (opt.init.size() != model.classes()) throw ConfigError("need one initial law per class");
    if (opt.ensemble < 2) throw ConfigError("ensemble size must be >= 2");
    if (!(opt.tol > 0.0)) throw ConfigError("Picard tolerance must be > 0");
    if (opt.max_iter < 2) throw ConfigError("max_iter must be >= 2");
}

}  // namespace

std::size_t MeanFieldSolution::index_of(double t) const {
    const double h = step();
    if (h <= 0.0) throw ConfigError("mean-field grid is empty");
    const double x = t / h;
    const double i = std::round(x);
    if (i < 0.0 || i >= static_cast<double>(times.size()) || std::abs(x - i) > 1e-6) {
        throw ConfigError(fmt::format("time {} is not on the mean-field grid", t));
    }
    return static_cast<std::size_t>(i);
}

MeanFieldSolution solve_mckean(const NetworkModel& model, const McKeanOptions& opt) {
    check_options(model, opt);
    const std::size_t cells = whole_steps(opt.horizon, opt.step, "mean-field horizon");
    const std::size_t points = cells + 1;
    const std::size_t J = model.nodes();
    const Ensemble ens = draw_ensemble(model, opt);

    // W^0 = W(0): the field of the constant process.
    std::vector<double> m0(model.classes());
    for (std::size_t k = 0; k < model.classes(); ++k) {
        double s = 0.0;
        for (double w : ens.w0[k]) s += w;
        m0[k] = s / static_cast<double>(opt.ensemble);
    }
    const auto u0 = limit_utilization(m0, model);
    std::vector<std::vector<double>> field(J, std::vector<double>(points));
    for (std::size_t j = 0; j < J; ++j) std::fill(field[j].begin(), field[j].end(), u0[j]);

    MeanFieldSolution sol;
    sol.ensemble = opt.ensemble;
    sol.times.resize(points);
    for (std::size_t i = 0; i < points; ++i) sol.times[i] = static_cast<double>(i) * opt.step;

    std::vector<std::vector<double>> previous;  // u of the previous simulated iterate
    for (std::size_t it = 1; it <= opt.max_iter; ++it) {
        PassResult pass = ensemble_pass(model, opt, ens, field, cells, opt.retain_paths);
        auto u = field_from_means(model, pass.mean);
        sol.iterations = it;
        bool done = false;
        if (!previous.empty()) {
            double delta = 0.0;
            for (std::size_t j = 0; j < J; ++j) {
                for (std::size_t i = 0; i < points; ++i) delta = std::max(delta, std::abs(u[j][i] - previous[j][i]));
            }
            sol.delta_history.push_back(delta);
            done = delta <= opt.tol;
        }
        if (done || it == opt.max_iter) {
            sol.mean = std::move(pass.mean);
            sol.mean_se = std::move(pass.se);
            sol.paths = std::move(pass.paths);
            sol.field = field;
            sol.u = u;
            sol.u_se.assign(J, std::vector<double>(points, 0.0));
            for (std::size_t j = 0; j < J; ++j) {
                for (std::size_t i = 0; i < points; ++i) {
                    double v = 0.0;
                    for (std::size_t k = 0; k < model.classes(); ++k) {
                        const double w = model.allocation(j, k) * model.cls(k).p * sol.mean_se[k][i];
                        v += w * w;
                    }
                    sol.u_se[j][i] = std::sqrt(v);
                }
            }
            sol.converged = done;
            break;
        }
        previous = u;
        field = std::move(u);
    }
    if (!sol.converged && opt.throw_on_nonconvergence) {
        throw ConvergenceError(fmt::format("Picard iteration did not reach {:.3g} in {} iterations", opt.tol,
                                           opt.max_iter),
                               sol.delta_history);
    }
    return sol;
}

std::vector<std::vector<double>> replay_means(const NetworkModel& model, const McKeanOptions& opt,
                                              const std::vector<std::vector<double>>& field) {
    check_options(model, opt);
    const std::size_t cells = whole_steps(opt.horizon, opt.step, "mean-field horizon");
    const Ensemble ens = draw_ensemble(model, opt);
    return ensemble_pass(model, opt, ens, field, cells, false).mean;
}

// ---------------------------------------------------------------------------

TestFunction parse_test_function(const std::string& name) {
    if (name == "one" || name == "1") return TestFunction::one;
    if (name == "x") return TestFunction::identity;
    if (name == "x2" || name == "x^2") return TestFunction::square;
    if (name == "exp" || name == "exp(-x)") return TestFunction::neg_exp;
    throw ConfigError(fmt::format("unknown test function '{}' (one, x, x2, exp)", name));
}

std::string to_string(TestFunction f) {
    switch (f) {
        case TestFunction::one:
            return "one";
        case TestFunction::identity:
            return "x";
        case TestFunction::square:
            return "x2";
        case TestFunction::neg_exp:
            return "exp";
    }
    return {};
}

namespace {

double fval(TestFunction f, double x) {
    switch (f) {
        case TestFunction::one:
            return 1.0;
        case TestFunction::identity:
            return x;
        case TestFunction::square:
            return x * x;
        case TestFunction::neg_exp:
            return std::exp(-x);
    }
    return 0.0;
}

double fprime(TestFunction f, double x) {
    switch (f) {
        case TestFunction::one:
            return 0.0;
        case TestFunction::identity:
            return 1.0;
        case TestFunction::square:
            return 2.0 * x;
        case TestFunction::neg_exp:
            return -std::exp(-x);
    }
    return 0.0;
}

}  // namespace

DynkinResult dynkin_check(const MeanFieldSolution& sol, const NetworkModel& model, TestFunction f,
                          std::size_t k, double t) {
    if (sol.paths.empty()) throw ConfigError("dynkin check needs a solution with retained ensemble paths");
    if (k >= model.classes()) throw ConfigError("class index out of range");
    const std::size_t n = sol.index_of(t);
    const std::size_t cells = sol.times.size() - 1;
    const double h = sol.step();
    const ClassSpec& c = model.cls(k);
    const std::size_t J = model.nodes();

    // Field in force at grid point i (the cell starting there; last point uses the last cell).
    std::vector<double> a(n + 1), u(J);
    std::vector<std::vector<double>> fields(n + 1, std::vector<double>(J));
    for (std::size_t i = 0; i <= n; ++i) {
        const std::size_t cell = std::min(i, cells - 1);
        for (std::size_t j = 0; j < J; ++j) fields[i][j] = sol.field[j][cell];
        a[i] = eval_drift(c, fields[i]);
    }

    std::vector<double> per_member(sol.ensemble);
    for (std::size_t m = 0; m < sol.ensemble; ++m) {
        double integral = 0.0;
        double prev = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            const double w = sol.path_value(k, m, i);
            const double g = a[i] * fprime(f, w) +
                             eval_loss(c, k, model, w, fields[i]) * (fval(f, c.r * w) - fval(f, w));
            if (i > 0) integral += 0.5 * (prev + g) * h;
            prev = g;
        }
        per_member[m] = fval(f, sol.path_value(k, m, n)) - fval(f, sol.path_value(k, m, 0)) - integral;
    }
    double s = 0.0;
    for (double v : per_member) s += v;
    const double M = static_cast<double>(sol.ensemble);
    const double mean = s / M;
    double ss = 0.0;
    for (double v : per_member) ss += (v - mean) * (v - mean);

    DynkinResult out;
    out.t = t;
    out.cls = k;
    out.f = f;
    out.residual = mean;
    out.se = sol.ensemble > 1 ? std::sqrt(ss / (M - 1.0) / M) : 0.0;
    out.note = fmt::format("trapezoid rule on a grid of step {}; bias O(step)", h);
    return out;
}

void write_solution_csv(std::ostream& os, const MeanFieldSolution& sol) {
    os << "t,series,value,se\n";
    for (std::size_t i = 0; i < sol.times.size(); ++i) {
        for (std::size_t j = 0; j < sol.u.size(); ++j) {
            os << fmt::format("{:.17g},u_{},{:.17g},{:.17g}\n", sol.times[i], j + 1, sol.u[j][i], sol.u_se[j][i]);
        }
        for (std::size_t k = 0; k < sol.mean.size(); ++k) {
            os << fmt::format("{:.17g},mean_{},{:.17g},{:.17g}\n", sol.times[i], k + 1, sol.mean[k][i],
                              sol.mean_se[k][i]);
        }
    }
}

std::string diagnostics_text(const MeanFieldSolution& sol) {
    std::ostringstream os;
    os << "{\n";
    os << fmt::format("  ensemble: {}\n", sol.ensemble);
    os << fmt::format("  iterations: {}\n", sol.iterations);
    os << fmt::format("  converged: {}\n", sol.converged);
    os << "  delta_history: [";
    for (std::size_t i = 0; i < sol.delta_history.size(); ++i) {
        os << (i ? ", " : "") << fmt::format("{:.6g}", sol.delta_history[i]);
    }
    os << "]\n}\n";
    return os.str();
}

}  // namespace aimdmf
