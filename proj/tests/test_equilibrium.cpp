#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "aimdmf/calibration.hpp"
#include "aimdmf/equilibrium.hpp"
#include "aimdmf/error.hpp"
#include "aimdmf/init_law.hpp"
#include "aimdmf/numerics.hpp"
#include "support.hpp"

using namespace aimdmf;

namespace {

// Direct product, long double, 200 factors.
double psi_product(double r) {
    long double p = 1.0L;
    for (int n = 1; n <= 200; ++n) {
        p *= (1.0L - std::pow(static_cast<long double>(r), 2 * n)) /
             (1.0L - std::pow(static_cast<long double>(r), 2 * n - 1));
    }
    return static_cast<double>(std::sqrt(2.0L / std::numbers::pi_v<long double>) * p);
}

// Closed-form CDF as a series of error functions.
double cdf_erf(double r, double rho, double x) {
    long double P = 1.0L;
    for (int n = 0; n < 400; ++n) P *= 1.0L - std::pow(static_cast<long double>(r), 2 * n + 1);
    long double sum = 0.0L, denom = 1.0L;
    const long double rl = r;
    for (int n = 0; n < 60; ++n) {
        if (n > 0) denom *= 1.0L - std::pow(rl, -2 * n);
        const long double c = std::pow(rl, -2 * n) / denom;
        sum += c * std::pow(rl, n) * std::erf(static_cast<long double>(x) * std::pow(rl, -n) / std::sqrt(2.0L * rho));
        if (std::abs(c * std::pow(rl, n)) < 1e-30L) break;
    }
    return static_cast<double>(sum / P);
}

NetworkModel linear_model(std::size_t J, std::vector<double> a, std::vector<ScalarRate> g) {
    std::vector<double> A(J * (J + 1), 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        A[j * (J + 1) + j] = 1.0;
        A[j * (J + 1) + J] = 1.0;
    }
    std::vector<ClassSpec> cs;
    for (std::size_t k = 0; k <= J; ++k) {
        cs.push_back(testing::constant_class(0.5, 1.0 / static_cast<double>(J + 1), a[k], LossSpec::aggregate_of(g[k])));
    }
    return NetworkModel(J, J + 1, A, cs);
}

NetworkModel torus_model(std::vector<double> a) {
    std::vector<ClassSpec> cs;
    for (double ak : a) {
        cs.push_back(testing::constant_class(0.5, 1.0 / 3.0, ak,
                                             LossSpec::aggregate_of(ScalarRate::affine(0.0, 1.0))));
    }
    return NetworkModel(3, 3, {1, 0, 1, 1, 1, 0, 0, 1, 1}, cs);
}

}  // namespace

TEST_CASE("psi values") {
    CHECK(psi(0.0) == doctest::Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-15));
    CHECK(std::abs(psi(0.5) - 1.30983327465802066437) <= 1e-10);
    for (double r : {0.1, 0.3, 0.5, 0.7, 0.9}) CHECK(std::abs(psi(r) - psi_product(r)) <= 1e-10);
    CHECK_THROWS_AS(psi(1.0), ParameterError);
    CHECK_THROWS_AS(psi(-0.1), ParameterError);
    CHECK_THROWS_AS(stationary_density(0.0, 1.0, 1.0), ParameterError);
    CHECK_THROWS_AS(stationary_density(0.5, 0.0, 1.0), ParameterError);
}

TEST_CASE("stationary density integrates to one and has mean sqrt(rho) psi") {
    for (double r : {0.3, 0.5, 0.8}) {
        for (double rho : {0.25, 1.0, 4.0}) {
            CAPTURE(r);
            CAPTURE(rho);
            const double cut = 20.0 * std::sqrt(rho);
            const double mass = quad([&](double x) { return stationary_density(r, rho, x); }, 0.0, cut, 1e-12);
            CHECK(std::abs(mass - 1.0) <= 1e-8);
            const double mean = quad([&](double x) { return x * stationary_density(r, rho, x); }, 0.0, cut, 1e-12);
            CHECK(std::abs(mean - std::sqrt(rho) * psi(r)) <= 1e-6);
        }
    }
}

TEST_CASE("stationary density scaling and sign") {
    for (double rho : {0.1, 2.0, 9.0}) {
        for (double x : {0.0, 0.3, 1.0, 2.5}) {
            const double lhs = stationary_density(0.5, rho, x);
            const double rhs = stationary_density(0.5, 1.0, x / std::sqrt(rho)) / std::sqrt(rho);
            CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, rhs));
        }
    }
    for (int i = 0; i < 10000; ++i) CHECK(stationary_density(0.7, 1.5, i * 1e-3) >= 0.0);
}

TEST_CASE("tabulated CDF agrees with the error-function series") {
    for (double r : {0.3, 0.5, 0.8}) {
        for (double rho : {0.5, 2.0}) {
            const StationaryDistribution H(r, rho);
            CHECK(H.cdf(0.0) == 0.0);
            CHECK(std::abs(H.cdf(H.cutoff()) - 1.0) <= 1e-9);
            CHECK(std::abs(H.total_mass() - 1.0) <= 1e-9);
            CHECK(H.mean() == doctest::Approx(std::sqrt(rho) * psi(r)));
            for (double z : {0.1, 0.5, 1.0, 2.0, 4.0}) {
                const double x = z * std::sqrt(rho);
                CHECK(std::abs(H.cdf(x) - cdf_erf(r, rho, x)) <= 1e-9);
            }
            // The quantile interpolates linearly inside a table cell, so it lands
            // within one cell width of the exact root.
            const double width = H.cutoff() / 4096.0;
            for (double q : {0.05, 0.25, 0.5, 0.75, 0.95}) {
                const double exact = bisect([&](double x) { return cdf_erf(r, rho, x) - q; }, 0.0, H.cutoff(), 1e-13);
                CHECK(std::abs(H.quantile(q) - exact) <= width);
            }
        }
    }
}

TEST_CASE("stationary sampler") {
    const StationaryDistribution H(0.5, 1.3);
    Stream s(8, {1});
    const std::vector<double> xs = sample_stationary(0.5, 1.3, 100000, s);
    const double med = H.quantile(0.5);
    double below = 0.0;
    for (double x : xs) below += x < med ? 1.0 : 0.0;
    CHECK(std::abs(below / static_cast<double>(xs.size()) - 0.5) <= 0.006);
    CHECK(ks_distance(xs, [&](double x) { return H.cdf(x); }) <= 0.006);
}

TEST_CASE("single-node fixed points with closed forms") {
    const double p = psi(0.5);
    for (double c : {0.5, 1.0, 4.0}) {
        const auto law = solve_single_node(testing::single(1.0, ScalarRate::constant(c)));
        CHECK(std::abs(law.u[0] - p / std::sqrt(c)) <= 1e-10);
    }
    const auto law = solve_single_node(testing::single(1.0, ScalarRate::affine(0.0, 1.0)));
    CHECK(std::abs(law.u[0] - std::pow(p, 2.0 / 3.0)) <= 1e-10);
    CHECK(law.max_residual() <= calibration::fixed_point_residual);
}

TEST_CASE("canonical single-node equilibrium") {
    const NetworkModel m = testing::canonical();
    const auto law = solve_single_node(m);
    CHECK(std::abs(law.u[0] - 1.64581920629) <= 1e-10);
    CHECK(law.rho[0] == doctest::Approx(1.08353).epsilon(1e-5));
    CHECK(law.rho[1] == doctest::Approx(2.16706).epsilon(1e-5));
    CHECK(law.rho[1] / law.rho[0] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(law.mean[1] / law.mean[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));

    FixedPointOptions opts;
    opts.multistart = 16;
    const auto rep = solve_fixed_point(m, opts);
    CHECK(rep.solutions.size() == 1);
    CHECK(rep.converged_starts == rep.starts);
    CHECK(std::abs(rep.primary().u[0] - law.u[0]) <= calibration::solver_agreement);
}

TEST_CASE("linear networks") {
    SUBCASE("symmetric two-node line") {
        const auto m = linear_model(2, {1, 1, 2}, {ScalarRate::affine(0, 1), ScalarRate::affine(0, 1), ScalarRate::affine(0, 1)});
        const auto law = solve_linear_network(m);
        CHECK(law.u[0] == doctest::Approx(law.u[1]).epsilon(1e-12));
        CHECK(law.max_residual() <= calibration::fixed_point_residual);
    }
    SUBCASE("route class with a constant loss decouples") {
        // With a constant route loss the long class mean is fixed; each node then
        // solves u = y + alpha_j / sqrt(u).
        const auto m = linear_model(2, {1, 3, 1}, {ScalarRate::affine(0, 1), ScalarRate::affine(0, 1), ScalarRate::constant(4.0)});
        const auto law = solve_linear_network(m);
        const double alpha_long = psi(0.5) / 3.0 * std::sqrt(1.0 / 4.0);
        for (std::size_t j = 0; j < 2; ++j) {
            const double alpha = psi(0.5) / 3.0 * std::sqrt(m.cls(j).drift.a);
            const double u = bisect([&](double x) { return x - alpha_long - alpha / std::sqrt(x); }, 1e-9, 100.0, 1e-15);
            CHECK(std::abs(law.u[j] - u) <= 1e-10);
        }
    }
    SUBCASE("generic three-node line") {
        const NetworkModel m = load_model(testing::model_file("linear.cfg"));
        const auto law = solve_linear_network(m);
        CHECK(law.max_residual() <= calibration::fixed_point_residual);
        FixedPointOptions opts;
        opts.multistart = 16;
        const auto rep = solve_fixed_point(m, opts);
        CHECK(rep.solutions.size() == 1);
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(rep.primary().u[j] - law.u[j]) <= calibration::solver_agreement);
    }
}

TEST_CASE("three-node torus") {
    SUBCASE("symmetric drift") {
        const double alpha = psi(0.5) / 3.0 * std::sqrt(1.7);
        const auto law = solve_torus(torus_model({1.7, 1.7, 1.7}));
        for (double u : law.u) CHECK(std::abs(u - std::pow(std::sqrt(2.0) * alpha, 2.0 / 3.0)) <= 1e-10);
    }
    SUBCASE("shipped symmetric case has unit utilization") {
        const auto law = solve_torus(load_model(testing::model_file("torus_symmetric.cfg")));
        for (double u : law.u) CHECK(std::abs(u - 1.0) <= 1e-10);
    }
    SUBCASE("asymmetric drifts") {
        const NetworkModel m = load_model(testing::model_file("torus3.cfg"));
        const auto law = solve_torus(m);
        CHECK(law.max_residual() <= calibration::fixed_point_residual);
        FixedPointOptions opts;
        opts.multistart = 16;
        const auto rep = solve_fixed_point(m, opts);
        CHECK(rep.solutions.size() == 1);
        for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(rep.primary().u[j] - law.u[j]) <= calibration::solver_agreement);
    }
}

TEST_CASE("non-positive loss coefficient is a model error") {
    const auto m = testing::single(1.0, ScalarRate::constant(0.0));
    const std::vector<double> u{1.0};
    CHECK_THROWS_AS(fixed_point_map(m, u), ModelError);
    CHECK_THROWS_AS(solve_single_node(m), ModelError);
}

TEST_CASE("stationary initial laws") {
    const auto law = solve_single_node(testing::canonical());
    const auto init = stationary_init(law);
    REQUIRE(init.size() == 2);
    for (std::size_t k = 0; k < 2; ++k) CHECK(init[k].mean() == doctest::Approx(law.mean[k]).epsilon(1e-12));
    CHECK(InitLaw::parse("uniform 0 2").mean() == 1.0);
    CHECK(InitLaw::parse("constant 0.5").deterministic());
    CHECK_THROWS_AS(InitLaw::parse("gamma 1 2"), ConfigError);
}
