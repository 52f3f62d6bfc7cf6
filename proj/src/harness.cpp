#include "aimdmf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "aimdmf/calibration.hpp"
#include "aimdmf/engine.hpp"
#include "aimdmf/error.hpp"
#include "aimdmf/mckean.hpp"
#include "aimdmf/numerics.hpp"
#include "aimdmf/parallel.hpp"
#include "aimdmf/particles.hpp"

#ifndef AIMDMF_VERSION
#define AIMDMF_VERSION "dev"
#endif

namespace aimdmf {

Status ExperimentResult::status() const {
    Status s = Status::pass;
    for (const auto& c : criteria) s = combine(s, c.status);
    return s;
}

int exit_code(Status s) {
    switch (s) {
        case Status::pass:
            return 0;
        case Status::inconclusive:
            return 2;
        case Status::fail:
            return 1;
    }
    return 1;
}

const StationaryLaw* EquilibriumSolve::best() const {
    if (specialized) return &*specialized;
    if (general && !general->solutions.empty()) return &general->primary();
    return nullptr;
}

EquilibriumSolve solve_equilibrium(const NetworkModel& model, const FixedPointOptions& options) {
    EquilibriumSolve out;
    try {
        if (model.nodes() == 1) {
            out.specialized_name = "single-node bisection";
            out.specialized = solve_single_node(model);
        } else if (is_linear_topology(model)) {
            out.specialized_name = "linear network";
            out.specialized = solve_linear_network(model);
        } else if (is_torus_topology(model)) {
            out.specialized_name = "three-node torus";
            out.specialized = solve_torus(model);
        }
    } catch (const UnsupportedModelError&) {
        // rate forms outside the specialized solver's reach; the general solver decides
        out.specialized_name.clear();
        out.specialized.reset();
    }
    try {
        out.general = solve_fixed_point(model, options);
    } catch (const ConvergenceError& e) {
        out.general_error = e.what();
    }
    return out;
}

std::vector<InitLaw> resolve_init(const ExperimentConfig& cfg, const StationaryLaw* law) {
    const std::size_t K = cfg.model->classes();
    std::vector<InitLaw> out;
    for (std::size_t k = 0; k < K; ++k) {
        std::string spec = cfg.init;
        if (!cfg.class_init.empty() && !cfg.class_init[k].empty()) spec = cfg.class_init[k];
        if (spec == "stationary") {
            if (!law) throw ModelError("stationary initial law requested but no fixed point is available");
            out.push_back(InitLaw::stationary(law->r[k], law->rho[k]));
        } else {
            out.push_back(InitLaw::parse(spec));
        }
    }
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

// Stream-path experiment ids; distinct per experiment and sub-run.
constexpr std::uint64_t kChaosReference = 0x100;
constexpr std::uint64_t kChaosParticles = 0x110;
constexpr std::uint64_t kEquilibriumMeanField = 0x200;
constexpr std::uint64_t kEquilibriumParticles = 0x201;
constexpr std::uint64_t kScaling = 0x300;
constexpr std::uint64_t kMcKean = 0x500;
constexpr std::uint64_t kDynkin = 0x600;

std::string g(double x) { return fmt::format("{:.4g}", x); }
std::string full(double x) { return fmt::format("{:.17g}", x); }

bool needs_law(const ExperimentConfig& cfg) {
    if (cfg.init == "stationary" && (cfg.class_init.empty() ||
                                     std::any_of(cfg.class_init.begin(), cfg.class_init.end(),
                                                 [](const std::string& s) { return s.empty(); }))) {
        return true;
    }
    return std::any_of(cfg.class_init.begin(), cfg.class_init.end(),
                       [](const std::string& s) { return s == "stationary"; });
}

FixedPointOptions fixed_point_options(const ExperimentConfig& cfg, const RunContext& ctx) {
    FixedPointOptions o;
    o.damping = cfg.damping;
    o.tol = cfg.fixed_point_tol;
    o.multistart = cfg.multistart;
    o.seed = ctx.seed;
    return o;
}

McKeanOptions mckean_options(const ExperimentConfig& cfg, const RunContext& ctx, std::vector<InitLaw> init,
                             std::size_t ensemble, std::uint64_t experiment) {
    McKeanOptions o;
    o.init = std::move(init);
    o.horizon = cfg.horizon;
    o.step = cfg.step;
    o.ensemble = ensemble;
    o.tol = cfg.picard_tol;
    o.max_iter = cfg.max_iter;
    o.seed = ctx.seed;
    o.experiment = experiment;
    o.threads = ctx.threads;
    return o;
}

std::string law_table(const StationaryLaw& law) {
    std::vector<std::vector<std::string>> nodes, classes;
    for (std::size_t j = 0; j < law.u.size(); ++j) {
        nodes.push_back({std::to_string(j + 1), fmt::format("{:.12g}", law.u[j]), g(law.residual[j])});
    }
    for (std::size_t k = 0; k < law.r.size(); ++k) {
        classes.push_back({std::to_string(k + 1), g(law.r[k]), fmt::format("{:.10g}", law.rho[k]),
                           fmt::format("{:.10g}", law.mean[k])});
    }
    return markdown_table({"node", "u*", "residual"}, nodes) + "\n" +
           markdown_table({"class", "r", "rho", "mean throughput"}, classes);
}

std::string fixed_point_csv(const StationaryLaw& law) {
    std::string s = "class,r,rho,mean,residual\n";
    for (std::size_t k = 0; k < law.r.size(); ++k) {
        s += fmt::format("{},{},{},{},{}\n", k + 1, full(law.r[k]), full(law.rho[k]), full(law.mean[k]),
                         full(law.max_residual()));
    }
    return s;
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

struct Output {
    const RunContext& ctx;
    ExperimentResult& result;
    std::ostringstream body;

    void file(const std::string& name, const std::string& text) {
        write_text(ctx.out, name, text);
        result.files.push_back(name);
    }
};

Criterion picard_criterion(const MeanFieldSolution& sol) {
    const auto& h = sol.delta_history;
    if (!sol.converged) {
        return {"Picard converged", Status::fail,
                fmt::format("no convergence after {} iterations, last delta {}", sol.iterations,
                            h.empty() ? 0.0 : h.back())};
    }
    if (h.size() < 2) {
        return {"Picard delta decreasing", Status::pass,
                fmt::format("converged after {} iterations (delta {})", sol.iterations, h.empty() ? 0.0 : h.back())};
    }
    const bool ok = h.back() < h.front();
    return {"Picard delta decreasing", ok ? Status::pass : Status::fail,
            fmt::format("{} iterations, delta first {:.3g}, last {:.3g}", sol.iterations, h.front(), h.back())};
}

std::vector<Series> mean_series(const MeanFieldSolution& sol) {
    std::vector<Series> s;
    for (std::size_t k = 0; k < sol.mean.size(); ++k) s.push_back({fmt::format("E W_{}", k + 1), sol.times, sol.mean[k]});
    for (std::size_t j = 0; j < sol.u.size(); ++j) s.push_back({fmt::format("u_{}", j + 1), sol.times, sol.u[j]});
    return s;
}

// ---------------------------------------------------------------------------

void run_fixedpoint(const ExperimentConfig& cfg, Output& out) {
    const NetworkModel& model = *cfg.model;
    const EquilibriumSolve eq = solve_equilibrium(model, fixed_point_options(cfg, out.ctx));
    auto& crit = out.result.criteria;
    const StationaryLaw* best = eq.best();
    if (!best) {
        crit.push_back({"fixed point found", Status::fail, eq.general_error});
        out.body << "No fixed point found: " << eq.general_error << "\n";
        out.result.summary = "no fixed point found";
        return;
    }
    out.file("fixedpoint.csv", fixed_point_csv(*best));
    std::string nodes = "node,u,residual\n";
    for (std::size_t j = 0; j < best->u.size(); ++j) {
        nodes += fmt::format("{},{},{}\n", j + 1, full(best->u[j]), full(best->residual[j]));
    }
    out.file("fixedpoint_nodes.csv", nodes);

    out.body << "## Fixed point\n\n"
             << "Solver: " << (eq.specialized ? eq.specialized_name : std::string("general damped iteration"))
             << "\n\n"
             << law_table(*best) << "\n";
    for (const auto& w : best->warnings) out.body << "Warning: " << w << "\n\n";

    const auto residual_ok = [](const StationaryLaw& l) { return l.max_residual() <= calibration::fixed_point_residual; };
    if (eq.specialized) {
        crit.push_back({"specialized residual", residual_ok(*eq.specialized) ? Status::pass : Status::fail,
                        fmt::format("{} residual {:.3g}", eq.specialized_name, eq.specialized->max_residual())});
    }
    if (eq.general) {
        const auto& rep = *eq.general;
        bool all_ok = true;
        double worst = 0.0;
        for (const auto& s : rep.solutions) {
            all_ok = all_ok && residual_ok(s);
            worst = std::max(worst, s.max_residual());
        }
        crit.push_back({"general residual", all_ok ? Status::pass : Status::fail,
                        fmt::format("{} cluster(s) from {} of {} starts, worst residual {:.3g}", rep.solutions.size(),
                                    rep.converged_starts, rep.starts, worst)});
        if (rep.solutions.size() > 1) {
            out.body << "The general solver found " << rep.solutions.size() << " distinct fixed points:\n\n";
            for (const auto& s : rep.solutions) out.body << law_table(s) << "\n";
        }
        if (eq.specialized) {
            double best_gap = std::numeric_limits<double>::infinity();
            for (const auto& s : rep.solutions) best_gap = std::min(best_gap, sup_distance(s.u, eq.specialized->u));
            crit.push_back({"solver agreement", best_gap <= calibration::solver_agreement ? Status::pass : Status::fail,
                            fmt::format("sup |u_specialized - u_general| = {:.3g}", best_gap)});
        }
    } else {
        out.body << "General solver: " << eq.general_error << "\n\n";
        crit.push_back({"general solver", Status::fail, eq.general_error});
    }
    std::string u;
    for (double x : best->u) u += fmt::format(" {:.10g}", x);
    out.result.summary = "u* =" + u;
}

// ---------------------------------------------------------------------------

void run_mckean(const ExperimentConfig& cfg, Output& out) {
    const NetworkModel& model = *cfg.model;
    std::optional<EquilibriumSolve> eq;
    if (needs_law(cfg)) eq = solve_equilibrium(model, fixed_point_options(cfg, out.ctx));
    const StationaryLaw* law = eq ? eq->best() : nullptr;
    McKeanOptions o = mckean_options(cfg, out.ctx, resolve_init(cfg, law), cfg.ensemble, kMcKean);
    o.throw_on_nonconvergence = false;
    o.retain_paths = true;
    const MeanFieldSolution sol = solve_mckean(model, o);

    std::ostringstream csv;
    write_solution_csv(csv, sol);
    out.file("solution.csv", csv.str());
    out.file("diagnostics.txt", diagnostics_text(sol));
    out.file("solution.svg", svg_line_chart("mean-field solution", "t", "value", mean_series(sol)));

    auto& crit = out.result.criteria;
    crit.push_back(picard_criterion(sol));

    // One more pass under the returned field should reproduce the means.
    const auto replay = replay_means(model, o, sol.u);
    double change = 0.0, norm = 0.0;
    for (std::size_t k = 0; k < replay.size(); ++k) {
        change = std::max(change, sup_distance(replay[k], sol.mean[k]));
        for (double m : sol.mean[k]) norm = std::max(norm, std::abs(m));
    }
    const double bound = cfg.picard_tol * (1.0 + norm);
    crit.push_back({"self-consistency", change <= bound ? Status::pass : Status::fail,
                    fmt::format("replay changes the means by {:.3g} (bound {:.3g})", change, bound)});

    // Pathwise growth bound w(t) <= w(0) + drift_bound * t.
    const auto hyp = validate_hypotheses(model);
    std::size_t violations = 0;
    for (std::size_t k = 0; k < model.classes(); ++k) {
        const double abar = hyp.classes[k].drift_bound;
        for (std::size_t m = 0; m < sol.ensemble; ++m) {
            const double w0 = sol.path_value(k, m, 0);
            for (std::size_t i = 0; i < sol.times.size(); ++i) {
                const double lim = w0 + abar * sol.times[i];
                if (sol.path_value(k, m, i) > lim + 1e-9 * (1.0 + lim)) ++violations;
            }
        }
    }
    crit.push_back({"growth bound", violations == 0 ? Status::pass : Status::fail,
                    fmt::format("{} path points above w(0) + drift bound * t", violations)});

    out.body << "## Mean-field solution\n\n"
             << fmt::format("Ensemble M = {}, step {}, horizon {}, {} Picard iterations.\n\n", sol.ensemble,
                            cfg.step, cfg.horizon, sol.iterations)
             << "```\n"
             << diagnostics_text(sol) << "```\n\n";
    std::vector<std::vector<std::string>> rows;
    for (double t : {0.0, 0.25 * cfg.horizon, 0.5 * cfg.horizon, cfg.horizon}) {
        std::size_t i = 0;
        try {
            i = sol.index_of(t);
        } catch (const ConfigError&) {
            continue;
        }
        std::vector<std::string> row{g(t)};
        for (std::size_t k = 0; k < sol.mean.size(); ++k) {
            row.push_back(fmt::format("{:.5g} ± {:.2g}", sol.mean[k][i], sol.mean_se[k][i]));
        }
        rows.push_back(std::move(row));
    }
    std::vector<std::string> header{"t"};
    for (std::size_t k = 0; k < sol.mean.size(); ++k) header.push_back(fmt::format("E W_{}", k + 1));
    out.body << markdown_table(header, rows) << "\n";
    out.result.summary = fmt::format("{} Picard iterations, last delta {:.3g}", sol.iterations,
                                     sol.delta_history.empty() ? 0.0 : sol.delta_history.back());
}

// ---------------------------------------------------------------------------

void run_dynkin(const ExperimentConfig& cfg, Output& out) {
    const NetworkModel& model = *cfg.model;
    std::optional<EquilibriumSolve> eq;
    if (needs_law(cfg)) eq = solve_equilibrium(model, fixed_point_options(cfg, out.ctx));
    const StationaryLaw* law = eq ? eq->best() : nullptr;
    const auto init = resolve_init(cfg, law);

    McKeanOptions coarse = mckean_options(cfg, out.ctx, init, cfg.ensemble, kDynkin);
    coarse.retain_paths = true;
    McKeanOptions fine = coarse;
    fine.step = cfg.step / 2.0;
    const MeanFieldSolution a = solve_mckean(model, coarse);
    const MeanFieldSolution b = solve_mckean(model, fine);

    std::vector<double> times = cfg.dynkin_times;
    if (times.empty()) times.push_back(cfg.horizon);

    std::string csv = "t,class,f,step,residual,se,C,bound\n";
    std::vector<std::vector<std::string>> rows;
    auto& crit = out.result.criteria;
    for (const auto& name : cfg.functions) {
        const TestFunction f = parse_test_function(name);
        for (std::size_t k = 0; k < model.classes(); ++k) {
            for (double t : times) {
                const DynkinResult ra = dynkin_check(a, model, f, k, t);
                const DynkinResult rb = dynkin_check(b, model, f, k, t);
                const double C = 2.0 * std::abs(ra.residual - rb.residual) / cfg.step;
                const double bound = calibration::se_dynkin * ra.se + C * cfg.step;
                const bool ok = f == TestFunction::one ? ra.residual == 0.0 : std::abs(ra.residual) <= bound;
                csv += fmt::format("{},{},{},{},{},{},{},{}\n", full(t), k + 1, name, full(cfg.step),
                                   full(ra.residual), full(ra.se), full(C), full(bound));
                csv += fmt::format("{},{},{},{},{},{},{},{}\n", full(t), k + 1, name, full(fine.step),
                                   full(rb.residual), full(rb.se), full(C), full(bound));
                rows.push_back({name, std::to_string(k + 1), g(t), fmt::format("{:.3g}", ra.residual),
                                fmt::format("{:.3g}", ra.se), fmt::format("{:.3g}", rb.residual), g(C), g(bound),
                                ok ? "yes" : "no"});
                crit.push_back({fmt::format("dynkin f={} class {} t={}", name, k + 1, g(t)),
                                ok ? Status::pass : Status::fail,
                                fmt::format("|R| = {:.3g} vs 4 SE + C dt = {:.3g}", std::abs(ra.residual), bound)});
            }
        }
    }
    out.file("dynkin.csv", csv);
    out.body << "## Dynkin residuals\n\n"
             << fmt::format("Ensemble M = {}, steps {} and {}; C estimated from the two residuals. "
                            "Trapezoid rule in time, bias O(step).\n\n",
                            cfg.ensemble, cfg.step, fine.step)
             << markdown_table({"f", "class", "t", "R(dt)", "SE", "R(dt/2)", "C", "bound", "within"}, rows) << "\n";
    out.result.summary = fmt::format("{} residual checks", rows.size());
}

// ---------------------------------------------------------------------------

void run_equilibrium(const ExperimentConfig& cfg, Output& out) {
    const NetworkModel& model = *cfg.model;
    auto& crit = out.result.criteria;
    const EquilibriumSolve eq = solve_equilibrium(model, fixed_point_options(cfg, out.ctx));
    const StationaryLaw* law = eq.best();
    if (!law) {
        crit.push_back({"fixed point found", Status::fail, eq.general_error});
        out.body << "No fixed point found: " << eq.general_error << "\n";
        out.result.summary = "no fixed point found";
        return;
    }
    out.file("fixedpoint.csv", fixed_point_csv(*law));
    out.body << "## Fixed point\n\n" << law_table(*law) << "\n";
    crit.push_back({"fixed-point residual",
                    law->max_residual() <= calibration::fixed_point_residual ? Status::pass : Status::fail,
                    fmt::format("residual {:.3g}", law->max_residual())});

    const auto init = stationary_init(*law);

    // Mean field started from the product law: u(t) should stay at u*.
    McKeanOptions o = mckean_options(cfg, out.ctx, init, cfg.ensemble, kEquilibriumMeanField);
    o.throw_on_nonconvergence = false;
    const MeanFieldSolution sol = solve_mckean(model, o);
    std::ostringstream csv;
    write_solution_csv(csv, sol);
    out.file("solution.csv", csv.str());

    double sup = 0.0, max_se = 0.0;
    for (std::size_t j = 0; j < model.nodes(); ++j) {
        for (std::size_t i = 0; i < sol.times.size(); ++i) {
            sup = std::max(sup, std::abs(sol.u[j][i] - law->u[j]));
            max_se = std::max(max_se, sol.u_se[j][i]);
        }
    }
    crit.push_back({"mean-field flatness",
                    sup <= calibration::se_flat * max_se ? Status::pass : Status::fail,
                    fmt::format("sup_t |u(t) - u*| = {:.3g}, 3 max SE = {:.3g}", sup, calibration::se_flat * max_se)});
    crit.push_back(picard_criterion(sol));

    std::vector<Series> series;
    for (std::size_t j = 0; j < model.nodes(); ++j) {
        series.push_back({fmt::format("u_{}", j + 1), sol.times, sol.u[j]});
        series.push_back({fmt::format("u*_{}", j + 1), {0.0, cfg.horizon}, {law->u[j], law->u[j]}});
    }
    out.file("flatness.svg", svg_line_chart("utilization from the stationary law", "t", "u", series));

    // Particle system at the fixed point.
    PopulationOptions p;
    p.counts.assign(model.classes(), cfg.particles);
    p.init = init;
    p.horizon = cfg.horizon;
    p.step = cfg.step;
    p.sample_dt = cfg.sample_dt;
    p.snapshot_times = {cfg.horizon};
    p.seed = out.ctx.seed;
    p.experiment = kEquilibriumParticles;
    p.threads = out.ctx.threads;
    const TrajectoryRecord rec = simulate_population(model, p);
    std::ostringstream snap;
    write_snapshot_csv(snap, rec);
    out.file("snapshot.csv", snap.str());

    std::string ks_csv = "class,n,ks,threshold\n";
    std::vector<std::vector<std::string>> rows;
    for (std::size_t k = 0; k < model.classes(); ++k) {
        const auto xs = export_empirical(rec, cfg.horizon, k);
        const StationaryDistribution d(law->r[k], law->rho[k]);
        const double ks = ks_distance(xs, [&d](double x) { return d.cdf(x); });
        ks_csv += fmt::format("{},{},{},{}\n", k + 1, xs.size(), full(ks), full(calibration::ks_population));
        rows.push_back({std::to_string(k + 1), std::to_string(xs.size()), fmt::format("{:.4f}", ks)});
        crit.push_back({fmt::format("class {} marginal KS", k + 1),
                        ks <= calibration::ks_population ? Status::pass : Status::fail,
                        fmt::format("KS = {:.4f} at N = {} (threshold {})", ks, xs.size(), calibration::ks_population)});
    }
    out.file("marginals.csv", ks_csv);
    out.body << "## Mean-field flatness\n\n"
             << fmt::format("M = {}, step {}, horizon {}: sup_t |u(t) - u*| = {:.4g}, max SE = {:.3g}.\n\n",
                            cfg.ensemble, cfg.step, cfg.horizon, sup, max_se)
             << "## Particle marginals at t = T\n\n"
             << markdown_table({"class", "N", "KS"}, rows) << "\n";
    out.result.summary = fmt::format("sup |u - u*| = {:.3g} (3 SE = {:.3g})", sup, 3 * max_se);
}

// ---------------------------------------------------------------------------

void run_scaling(const ExperimentConfig& cfg, Output& out) {
    auto& crit = out.result.criteria;
    const StationaryDistribution fluid(cfg.factor, 1.0);
    const auto cdf = [&fluid](double x) { return fluid.cdf(x); };

    std::string csv = "eps,samples,ks,threshold\n";
    std::vector<std::vector<std::string>> rows;
    std::vector<std::pair<double, double>> ks_by_eps;
    for (std::size_t i = 0; i < cfg.eps.size(); ++i) {
        const double eps = cfg.eps[i];
        if (eps == 0.0) {
            crit.push_back({"eps = 0", Status::inconclusive,
                            "degenerate: without losses the chain grows without bound and has no stationary law"});
            rows.push_back({"0", "-", "degenerate"});
            continue;
        }
        const double se = std::sqrt(eps);
        Stream stream(out.ctx.seed, {kScaling, i});
        const auto w0 = static_cast<std::int64_t>(std::llround(psi(cfg.factor) / se));
        const auto burn = static_cast<std::size_t>(std::ceil(cfg.burn_in / se));
        const auto thin = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.thin / se)));
        const auto chain = sample_discrete_aimd(eps, cfg.factor, w0, burn, thin, cfg.samples, stream);
        std::vector<double> xs(chain.size());
        for (std::size_t n = 0; n < chain.size(); ++n) xs[n] = se * static_cast<double>(chain[n]);
        const double ks = ks_distance(xs, cdf);
        ks_by_eps.emplace_back(eps, ks);
        csv += fmt::format("{},{},{},{}\n", full(eps), xs.size(), full(ks), full(calibration::ks_single));
        rows.push_back({g(eps), std::to_string(xs.size()), fmt::format("{:.4f}", ks)});
    }
    out.file("scaling.csv", csv);

    if (!ks_by_eps.empty()) {
        std::sort(ks_by_eps.begin(), ks_by_eps.end(), [](auto& a, auto& b) { return a.first > b.first; });
        const auto [eps_min, ks_min] = ks_by_eps.back();
        crit.push_back({fmt::format("KS at eps = {}", g(eps_min)),
                        ks_min <= calibration::ks_single ? Status::pass : Status::fail,
                        fmt::format("KS = {:.4f} (threshold {})", ks_min, calibration::ks_single)});
        bool monotone = true;
        for (std::size_t i = 1; i < ks_by_eps.size(); ++i) monotone = monotone && ks_by_eps[i].second <= ks_by_eps[i - 1].second;
        if (ks_by_eps.size() > 1) {
            std::string seq;
            for (const auto& [e, k] : ks_by_eps) seq += fmt::format(" {:.4f}", k);
            crit.push_back({"KS nonincreasing as eps decreases", monotone ? Status::pass : Status::fail, "KS:" + seq});
        }
        std::vector<double> le, lk;
        for (const auto& [e, k] : ks_by_eps) {
            le.push_back(std::log10(e));
            lk.push_back(k);
        }
        out.file("scaling.svg", svg_line_chart("packet chain vs fluid law", "log10 eps", "KS", {{"KS", le, lk}}));
    }
    out.body << "## Packet-level chain\n\n"
             << fmt::format("r = {}, {} samples of sqrt(eps) W after burn-in {} and spacing {} (fluid time).\n\n",
                            cfg.factor, cfg.samples, cfg.burn_in, cfg.thin)
             << markdown_table({"eps", "samples", "KS"}, rows) << "\n";
    out.result.summary = fmt::format("{} eps values", cfg.eps.size());
}

// ---------------------------------------------------------------------------

void run_chaos(const ExperimentConfig& cfg, Output& out) {
    const NetworkModel& model = *cfg.model;
    const std::size_t K = model.classes();
    auto& crit = out.result.criteria;
    for (double t : cfg.check_times) whole_steps(t, cfg.sample_dt, "check time");

    std::optional<EquilibriumSolve> eq;
    if (needs_law(cfg)) eq = solve_equilibrium(model, fixed_point_options(cfg, out.ctx));
    const auto init = resolve_init(cfg, eq ? eq->best() : nullptr);

    McKeanOptions mo = mckean_options(cfg, out.ctx, init, cfg.reference_ensemble, kChaosReference);
    const MeanFieldSolution ref = solve_mckean(model, mo);
    {
        std::ostringstream csv;
        write_solution_csv(csv, ref);
        out.file("meanfield.csv", csv.str());
    }

    std::ofstream chaos_csv(out.ctx.out / "chaos.csv", std::ios::binary | std::ios::trunc);
    std::ofstream cross_csv(out.ctx.out / "cross.csv", std::ios::binary | std::ios::trunc);
    if (!chaos_csv || !cross_csv) throw Error("cannot write chaos output files");
    out.result.files.push_back("chaos.csv");
    out.result.files.push_back("cross.csv");
    chaos_csv << "N,t,class,meanfield,err,err_se,pair_cov,pair_cov_se\n";
    cross_csv << "N,t,k,l,cov,cov_se\n";

    std::vector<ChaosMetrics> metrics;
    std::vector<std::vector<std::size_t>> class_counts;
    std::string notes;
    for (std::size_t n = 0; n < cfg.populations.size(); ++n) {
        const std::size_t N = cfg.populations[n];
        std::vector<std::size_t> counts(K);
        for (std::size_t k = 0; k < K; ++k) {
            counts[k] = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                     std::llround(static_cast<double>(N * K) * model.cls(k).p)));
        }
        std::size_t total = 0;
        for (auto c : counts) total += c;
        for (std::size_t k = 0; k < K; ++k) {
            const double gap = std::abs(static_cast<double>(counts[k]) / static_cast<double>(total) - model.cls(k).p);
            if (gap > 1e-12) {
                notes += fmt::format("N = {}: class {} share {} differs from p = {}.\n", N, k + 1,
                                     static_cast<double>(counts[k]) / static_cast<double>(total), model.cls(k).p);
            }
        }
        class_counts.push_back(counts);

        std::vector<TrajectoryRecord> records(cfg.replicates);
        parallel_for(cfg.replicates, out.ctx.threads, [&](std::size_t r) {
            PopulationOptions p;
            p.counts = counts;
            p.init = init;
            p.horizon = cfg.horizon;
            p.step = cfg.step;
            p.sample_dt = cfg.sample_dt;
            p.seed = out.ctx.seed;
            p.experiment = kChaosParticles + n;
            p.replicate = r;
            p.trace = out.ctx.trace && n == 0 && r == 0;
            records[r] = simulate_population(model, p);
        });
        if (out.ctx.trace && n == 0) {
            std::string trace = "t,class,particle,event,value\n";
            for (const auto& j : records[0].jumps) {
                trace += fmt::format("{},{},{},pre,{}\n", full(j.t), j.cls + 1, j.particle + 1, full(j.before));
                trace += fmt::format("{},{},{},post,{}\n", full(j.t), j.cls + 1, j.particle + 1, full(j.after));
            }
            out.file("trace.csv", trace);
        }
        ChaosMetrics m = chaos_metrics(records, ref);
        for (const auto& row : m.rows) {
            chaos_csv << fmt::format("{},{},{},{},{},{},{},{}\n", N, full(row.t), row.cls + 1, full(row.meanfield),
                                     full(row.err), full(row.err_se), full(row.pair_cov), full(row.pair_cov_se));
        }
        for (const auto& c : m.cross) {
            cross_csv << fmt::format("{},{},{},{},{},{}\n", N, full(c.t), c.k + 1, c.l + 1, full(c.cov),
                                     full(c.cov_se));
        }
        chaos_csv.flush();
        cross_csv.flush();
        if (m.identical_seed_input) {
            crit.push_back({fmt::format("replicates distinct at N = {}", N), Status::fail,
                            "replicates are identical; seeds or replicate ids repeat"});
        }
        metrics.push_back(std::move(m));
    }

    // N-scaling table and criteria.
    std::vector<std::string> header{"N"};
    for (double t : cfg.check_times) {
        for (std::size_t k = 0; k < K; ++k) header.push_back(fmt::format("err_{}(t={})", k + 1, g(t)));
    }
    std::vector<std::vector<std::string>> rows;
    for (std::size_t n = 0; n < metrics.size(); ++n) {
        std::vector<std::string> row{std::to_string(cfg.populations[n])};
        for (double t : cfg.check_times) {
            for (std::size_t k = 0; k < K; ++k) {
                const auto& r = metrics[n].at(t, k);
                row.push_back(fmt::format("{:.4g} ± {:.2g}", r.err, r.err_se));
            }
        }
        rows.push_back(std::move(row));
    }
    std::vector<std::string> ratio_row{"ratio"};
    const std::size_t last = metrics.size() - 1;
    for (double t : cfg.check_times) {
        for (std::size_t k = 0; k < K; ++k) {
            // strictly decreasing in N
            bool decreasing = true;
            double gap = std::numeric_limits<double>::infinity(), gap_se = 0.0;
            for (std::size_t n = 1; n < metrics.size(); ++n) {
                const auto& a = metrics[n - 1].at(t, k);
                const auto& b = metrics[n].at(t, k);
                decreasing = decreasing && b.err < a.err;
                if (a.err - b.err < gap) {
                    gap = a.err - b.err;
                    gap_se = std::hypot(a.err_se, b.err_se);
                }
            }
            if (metrics.size() > 1) {
                crit.push_back(mc_criterion(fmt::format("err_{} decreasing in N at t={}", k + 1, g(t)), decreasing,
                                            gap_se, std::max(gap, 0.0),
                                            fmt::format("smallest decrease {:.3g} (SE {:.2g})", gap, gap_se)));
            }
            const auto& lo = metrics.front().at(t, k);
            const auto& hi = metrics[last].at(t, k);
            const double ratio = lo.err / hi.err;
            const double ratio_se = ratio * std::hypot(lo.err_se / lo.err, hi.err_se / hi.err);
            ratio_row.push_back(fmt::format("{:.3g} ± {:.2g}", ratio, ratio_se));
            if (metrics.size() > 1) {
                const bool in_band = ratio >= calibration::ratio_lo && ratio <= calibration::ratio_hi;
                crit.push_back(mc_criterion(
                    fmt::format("err ratio N={}/N={} class {} t={}", cfg.populations.front(), cfg.populations.back(),
                                k + 1, g(t)),
                    in_band, ratio_se, 0.5 * (calibration::ratio_hi - calibration::ratio_lo),
                    fmt::format("ratio {:.3g} in [{}, {}]", ratio, calibration::ratio_lo, calibration::ratio_hi)));
            }
            const bool small = std::abs(hi.pair_cov) <= calibration::se_covariance * hi.pair_cov_se;
            crit.push_back({fmt::format("tagged pair covariance class {} t={} N={}", k + 1, g(t), cfg.populations.back()),
                            small ? Status::pass : Status::fail,
                            fmt::format("cov = {:.3g}, 3 SE = {:.3g}", hi.pair_cov,
                                        calibration::se_covariance * hi.pair_cov_se)});
        }
    }
    rows.push_back(std::move(ratio_row));

    std::vector<Series> series;
    for (std::size_t k = 0; k < K; ++k) {
        Series s{fmt::format("class {}", k + 1), {}, {}};
        for (std::size_t n = 0; n < metrics.size(); ++n) {
            s.x.push_back(std::log10(static_cast<double>(cfg.populations[n])));
            s.y.push_back(std::log10(metrics[n].at(cfg.check_times.back(), k).err));
        }
        series.push_back(std::move(s));
    }
    out.file("chaos.svg", svg_line_chart(fmt::format("err at t = {}", g(cfg.check_times.back())), "log10 N",
                                         "log10 err", series));

    out.body << "## Propagation of chaos\n\n"
             << fmt::format("R = {} replicates per N, step {}, mean-field reference with M = {} ({} Picard "
                            "iterations). N is the per-class population when proportions are equal.\n\n",
                            cfg.replicates, cfg.step, cfg.reference_ensemble, ref.iterations)
             << markdown_table(header, rows) << "\n";
    if (!notes.empty()) out.body << notes << "\n";
    std::vector<std::vector<std::string>> cov_rows;
    for (double t : cfg.check_times) {
        for (std::size_t k = 0; k < K; ++k) {
            const auto& r = metrics[last].at(t, k);
            cov_rows.push_back({g(t), std::to_string(k + 1), fmt::format("{:.3g}", r.pair_cov),
                                fmt::format("{:.3g}", r.pair_cov_se)});
        }
    }
    out.body << fmt::format("Tagged-pair covariance at N = {}:\n\n", cfg.populations.back())
             << markdown_table({"t", "class", "cov", "SE"}, cov_rows) << "\n";
    out.result.summary = fmt::format("{} population sizes, {} replicates", cfg.populations.size(), cfg.replicates);
}

std::string manifest(const ExperimentConfig& cfg, const RunContext& ctx, const ExperimentResult& result,
                     double wall) {
    std::ostringstream os;
    os << "[run]\n";
    os << "experiment = " << to_string(cfg.kind) << "\n";
    os << "seed = " << ctx.seed << "\n";
    os << "threads = " << ctx.threads << "\n";
    os << "trace = " << (ctx.trace ? "true" : "false") << "\n";
    os << "version = " << AIMDMF_VERSION << "\n";
    os << fmt::format("wall_time_s = {:.3f}\n", wall);
    os << "status = " << to_string(result.status()) << "\n";
    os << "outputs =";
    for (const auto& f : result.files) os << ' ' << f;
    os << "\n\n[config]\n" << cfg.source;
    if (!cfg.source.empty() && cfg.source.back() != '\n') os << '\n';
    if (cfg.model) {
        os << "\n[model " << cfg.model_path.filename().string() << "]\n" << cfg.model_source;
        if (!cfg.model_source.empty() && cfg.model_source.back() != '\n') os << '\n';
    }
    return os.str();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunContext& ctx) {
    ensure_writable(ctx.out);
    cfg.validate();
    const auto start = Clock::now();
    ExperimentResult result;
    result.kind = cfg.kind;
    Output out{ctx, result, {}};
    switch (cfg.kind) {
        case ExperimentKind::chaos:
            run_chaos(cfg, out);
            break;
        case ExperimentKind::equilibrium:
            run_equilibrium(cfg, out);
            break;
        case ExperimentKind::scaling:
            run_scaling(cfg, out);
            break;
        case ExperimentKind::fixedpoint:
            run_fixedpoint(cfg, out);
            break;
        case ExperimentKind::mckean:
            run_mckean(cfg, out);
            break;
        case ExperimentKind::dynkin:
            run_dynkin(cfg, out);
            break;
    }
    const double wall = std::chrono::duration<double>(Clock::now() - start).count();

    std::ostringstream report;
    report << "# " << to_string(cfg.kind) << " experiment\n\n";
    report << fmt::format("Seed {}; status **{}**.", ctx.seed, to_string(result.status()));
    if (cfg.model) report << " Model `" << cfg.model_path.filename().string() << "`.";
    report << "\n\n## Criteria\n\n";
    std::vector<std::vector<std::string>> rows;
    for (const auto& c : result.criteria) rows.push_back({c.name, to_string(c.status), c.detail});
    report << markdown_table({"criterion", "status", "detail"}, rows) << "\n";
    if (cfg.model) report << "## Hypotheses\n\n```\n" << validate_hypotheses(*cfg.model).to_text() << "```\n\n";
    report << out.body.str();
    write_text(ctx.out, "report.md", report.str());
    result.files.push_back("report.md");
    write_text(ctx.out, "manifest.txt", manifest(cfg, ctx, result, wall));
    return result;
}

}  // namespace aimdmf
