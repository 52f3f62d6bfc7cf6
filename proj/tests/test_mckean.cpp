#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "aimdmf/config.hpp"
#include "aimdmf/equilibrium.hpp"
#include "aimdmf/error.hpp"
#include "aimdmf/harness.hpp"
#include "aimdmf/mckean.hpp"
#include "aimdmf/numerics.hpp"
#include "aimdmf/particles.hpp"
#include "support.hpp"

using namespace aimdmf;

namespace {

McKeanOptions options(std::vector<InitLaw> init, std::size_t M, double horizon = 10.0, double step = 0.05) {
    McKeanOptions o;
    o.init = std::move(init);
    o.ensemble = M;
    o.horizon = horizon;
    o.step = step;
    return o;
}

}  // namespace

TEST_CASE("no interaction converges in two iterations") {
    const NetworkModel m = testing::uncoupled(2);
    const auto sol = solve_mckean(m, options({InitLaw::uniform(0, 2), InitLaw::constant(1.0)}, 500, 2.0));
    CHECK(sol.converged);
    CHECK(sol.iterations == 2);
    REQUIRE(sol.delta_history.size() == 1);
    CHECK(sol.delta_history[0] == 0.0);
}

TEST_CASE("utilization path is the limit utilization of the means") {
    const NetworkModel m = load_model(testing::model_file("linear.cfg"));
    const auto sol = solve_mckean(m, options(std::vector<InitLaw>(4, InitLaw::uniform(0, 2)), 400, 3.0));
    CHECK(sol.converged);
    std::vector<double> means(4);
    for (std::size_t i = 0; i < sol.times.size(); ++i) {
        for (std::size_t k = 0; k < 4; ++k) means[k] = sol.mean[k][i];
        const auto u = limit_utilization(means, m);
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(u[j] - sol.u[j][i]) <= 1e-12);
    }
    CHECK(sol.delta_history.back() <= 1e-8);
}

TEST_CASE("non-convergence carries the update history") {
    const NetworkModel m = testing::canonical();
    auto o = options({InitLaw::constant(0.0), InitLaw::constant(0.0)}, 200, 5.0);
    o.max_iter = 3;
    try {
        solve_mckean(m, o);
        FAIL("expected a convergence error");
    } catch (const ConvergenceError& e) {
        CHECK(e.history().size() == 2);
        CHECK(e.history()[0] > 1e-8);
    }
    o.throw_on_nonconvergence = false;
    const auto sol = solve_mckean(m, o);
    CHECK_FALSE(sol.converged);
    CHECK(sol.iterations == 3);
}

TEST_CASE("stationary start stays at the fixed point") {
    const NetworkModel m = testing::canonical();
    const auto law = solve_single_node(m);
    const auto sol = solve_mckean(m, options(stationary_init(law), 10000));
    double sup = 0.0, se = 0.0;
    for (std::size_t i = 0; i < sol.times.size(); ++i) {
        sup = std::max(sup, std::abs(sol.u[0][i] - law.u[0]));
        se = std::max(se, sol.u_se[0][i]);
    }
    CAPTURE(sup);
    CAPTURE(se);
    CHECK(sup <= 3.0 * se);
}

TEST_CASE("replaying the returned field reproduces the means") {
    const NetworkModel m = testing::canonical();
    const auto o = options({InitLaw::uniform(0, 2), InitLaw::uniform(0, 2)}, 1000);
    const auto sol = solve_mckean(m, o);
    const auto means = replay_means(m, o, sol.u);
    double sup_m = 0.0, diff = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
        for (std::size_t i = 0; i < sol.times.size(); ++i) {
            sup_m = std::max(sup_m, std::abs(sol.mean[k][i]));
            diff = std::max(diff, std::abs(means[k][i] - sol.mean[k][i]));
        }
    }
    CHECK(diff <= o.tol * (1.0 + sup_m));
}

TEST_CASE("ensemble paths obey the drift growth bound") {
    const NetworkModel m = testing::canonical();
    auto o = options({InitLaw::uniform(0, 2), InitLaw::exponential(1.0)}, 500);
    o.retain_paths = true;
    const auto sol = solve_mckean(m, o);
    const auto hyp = validate_hypotheses(m);
    for (std::size_t k = 0; k < 2; ++k) {
        const double abar = hyp.classes[k].drift_bound;
        for (std::size_t mem = 0; mem < sol.ensemble; ++mem) {
            const double w0 = sol.path_value(k, mem, 0);
            for (std::size_t i = 0; i < sol.times.size(); ++i) {
                CHECK(sol.path_value(k, mem, i) <= w0 + abar * sol.times[i] + 1e-12);
            }
        }
    }
}

TEST_CASE("Dynkin degenerate and error cases") {
    const NetworkModel m = testing::canonical();
    auto o = options({InitLaw::uniform(0, 2), InitLaw::uniform(0, 2)}, 300, 2.0);
    o.retain_paths = true;
    const auto sol = solve_mckean(m, o);
    const auto one = dynkin_check(sol, m, TestFunction::one, 0, 2.0);
    CHECK(one.residual == 0.0);
    CHECK(one.se == 0.0);
    CHECK(parse_test_function("x2") == TestFunction::square);
    CHECK_THROWS_AS(parse_test_function("sin"), ConfigError);
    CHECK_THROWS_AS(dynkin_check(sol, m, TestFunction::identity, 0, 1.01), ConfigError);
    o.retain_paths = false;
    const auto bare = solve_mckean(m, o);
    CHECK_THROWS_AS(dynkin_check(bare, m, TestFunction::identity, 0, 1.0), ConfigError);
}

TEST_CASE("mean field agrees with the particle system") {
    const NetworkModel m = testing::canonical();
    const std::vector<InitLaw> init{InitLaw::uniform(0, 2), InitLaw::uniform(0, 2)};
    auto o = options(init, 4000);
    o.experiment = 5;
    const auto sol = solve_mckean(m, o);

    PopulationOptions p;
    p.counts = {2000, 2000};
    p.init = init;
    p.horizon = 10.0;
    p.step = 0.05;
    p.sample_dt = 1.0;
    p.snapshot_times = {1.0, 5.0, 10.0};
    p.experiment = 6;
    const auto rec = simulate_population(m, p);
    for (double t : {1.0, 5.0, 10.0}) {
        for (std::size_t k = 0; k < 2; ++k) {
            const auto xs = export_empirical(rec, t, k);
            const auto part = mean_se(xs);
            const std::size_t i = sol.index_of(t);
            CAPTURE(t);
            CAPTURE(k);
            CHECK(std::abs(part.mean - sol.mean[k][i]) <= 4.0 * std::hypot(part.se, sol.mean_se[k][i]));
        }
    }
}

TEST_CASE("Picard updates shrink on every shipped config") {
    for (const char* name : {"mckean.cfg", "mckean_transient.cfg", "dynkin.cfg", "dynkin_transient.cfg"}) {
        CAPTURE(name);
        const auto cfg = load_experiment(testing::experiment_file(name));
        const auto law = solve_equilibrium(*cfg.model, FixedPointOptions{});
        auto o = options(resolve_init(cfg, law.best()), 500, cfg.horizon, cfg.step);
        o.max_iter = cfg.max_iter;
        o.tol = cfg.picard_tol;
        const auto sol = solve_mckean(*cfg.model, o);
        REQUIRE(sol.delta_history.size() >= 1);
        CHECK(sol.delta_history.back() < sol.delta_history.front());
    }
}

TEST_CASE("transient run from zero") {
    const NetworkModel m = testing::canonical();
    const std::vector<InitLaw> zero{InitLaw::constant(0.0), InitLaw::constant(0.0)};
    const auto coarse = solve_mckean(m, options(zero, 2000));
    auto fo = options(zero, 8000, 10.0, 0.025);
    fo.experiment = 1;
    const auto fine = solve_mckean(m, fo);

    SUBCASE("golden curve") {
        // Frozen from the first implementation (seed 1, M = 2000, step 0.05).
        const double golden[2][3] = {{0.90894906855485036, 1.3438301756119242, 1.3602882755990271},
                                     {1.6505792467331513, 1.9227111723008123, 1.9310399825888911}};
        const double times[3] = {1.0, 5.0, 10.0};
        for (std::size_t k = 0; k < 2; ++k) {
            for (std::size_t q = 0; q < 3; ++q) {
                CHECK(coarse.mean[k][coarse.index_of(times[q])] == doctest::Approx(golden[k][q]).epsilon(1e-12));
            }
        }
    }
    SUBCASE("rises then saturates") {
        for (std::size_t k = 0; k < 2; ++k) {
            const auto& mk = coarse.mean[k];
            CHECK(mk[0] == 0.0);
            for (std::size_t i = 1; i <= coarse.index_of(1.0); ++i) CHECK(mk[i] > mk[i - 1]);
            const std::size_t i9 = coarse.index_of(9.0), i10 = coarse.index_of(10.0);
            CHECK(std::abs(mk[i10] - mk[i9]) <= 4.0 * std::hypot(coarse.mean_se[k][i9], coarse.mean_se[k][i10]));
        }
    }
    SUBCASE("self-convergence under M -> 4M and step -> step/2") {
        for (std::size_t k = 0; k < 2; ++k) {
            for (double t : {1.0, 5.0, 10.0}) {
                const std::size_t a = coarse.index_of(t), b = fine.index_of(t);
                CHECK(std::abs(coarse.mean[k][a] - fine.mean[k][b]) <=
                      4.0 * std::hypot(coarse.mean_se[k][a], fine.mean_se[k][b]));
            }
        }
    }
}

TEST_CASE("solution CSV and diagnostics") {
    const NetworkModel m = testing::canonical();
    const auto sol = solve_mckean(m, options({InitLaw::constant(1.0), InitLaw::constant(1.0)}, 200, 1.0, 0.5));
    std::ostringstream os;
    write_solution_csv(os, sol);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,series,value,se");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 3 * (1 + 2));
    CHECK(diagnostics_text(sol).find("delta_history") != std::string::npos);
}
