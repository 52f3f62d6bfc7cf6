#include <doctest.h>

#include <cmath>
#include <random>
#include <type_traits>

#include "aimdmf/config.hpp"
#include "aimdmf/error.hpp"
#include "aimdmf/model.hpp"
#include "support.hpp"

using namespace aimdmf;
using testing::constant_class;

namespace {

NetworkModel two_by_two() {
    // A = [[1,0],[1,1]]
    std::vector<ClassSpec> cs{constant_class(0.5, 0.5, 1.0, LossSpec::aggregate_of(ScalarRate::constant(1.0))),
                              constant_class(0.5, 0.5, 1.0, LossSpec::aggregate_of(ScalarRate::constant(1.0)))};
    return NetworkModel(2, 2, {1, 0, 1, 1}, cs, std::vector<std::size_t>{2, 2});
}

}  // namespace

TEST_CASE("utilization examples") {
    const NetworkModel one = testing::single(1.0, ScalarRate::constant(1.0));
    std::vector<std::vector<double>> zero{{0.0, 0.0, 0.0}};
    CHECK(utilization(zero, one)[0] == 0.0);

    std::vector<std::vector<double>> w{{3.0, 5.0}};
    CHECK(utilization(w, one)[0] == doctest::Approx(4.0).epsilon(1e-15));

    const NetworkModel m = two_by_two();
    std::vector<std::vector<double>> s{{2.0, 2.0}, {4.0, 4.0}};
    const auto u = utilization(s, m);
    CHECK(u[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(u[1] == doctest::Approx(3.0).epsilon(1e-15));

    // brute force: sum over every particle of (1/|N|) A_jk w
    double brute1 = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
        for (double x : s[k]) brute1 += m.allocation(1, k) * x / 4.0;
    }
    CHECK(u[1] == doctest::Approx(brute1).epsilon(1e-15));
}

TEST_CASE("utilization rejects an empty declared class") {
    const NetworkModel m = two_by_two();
    std::vector<std::vector<double>> s{{2.0, 2.0}, {}};
    CHECK_THROWS_AS(utilization(s, m), ConfigError);
}

TEST_CASE("limit_utilization examples") {
    const NetworkModel one = testing::single(1.0, ScalarRate::constant(1.0));
    const std::vector<double> m0{0.0};
    CHECK(limit_utilization(m0, one)[0] == 0.0);
    const std::vector<double> m1{2.75};
    CHECK(limit_utilization(m1, one)[0] == 2.75);

    std::vector<ClassSpec> cs{constant_class(0.5, 0.25, 1.0, LossSpec::aggregate_of(ScalarRate::constant(1.0))),
                              constant_class(0.5, 0.75, 1.0, LossSpec::aggregate_of(ScalarRate::constant(1.0)))};
    const NetworkModel m(1, 2, {1, 1}, cs);
    const std::vector<double> means{4.0, 8.0};
    CHECK(limit_utilization(means, m)[0] == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("rate evaluation examples") {
    const NetworkModel one = testing::single(1.0, ScalarRate::affine(0.1, 1.0));
    const std::vector<double> u{0.9};
    CHECK(eval_loss(one.cls(0), 0, one, 0.0, u) == 0.0);

    ClassSpec rec{0.5, 1.0, DriftSpec::reciprocal(0.25, {ScalarRate{}}), LossSpec::per_node(0.1, {ScalarRate::affine(0, 1)})};
    const NetworkModel m(1, 1, {1.0}, {rec});
    CHECK(eval_drift(m.cls(0), u) == doctest::Approx(4.0).epsilon(1e-15));
    // beta = delta + u_1 with delta = 0.1, u_1 = 0.9, w = 2
    CHECK(eval_loss(m.cls(0), 0, m, 2.0, u) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("reciprocal drift stays below 1/tau") {
    ClassSpec rec{0.5, 1.0, DriftSpec::reciprocal(0.5, {ScalarRate::power(0.0, 2.0, 1.5)}),
                  LossSpec::per_node(0.1, {ScalarRate::affine(0, 1)})};
    const NetworkModel m(1, 1, {1.0}, {rec});
    for (double x : {0.0, 0.1, 1.0, 10.0, 1e6}) {
        const std::vector<double> u{x};
        CHECK(eval_drift(m.cls(0), u) <= 2.0);
    }
    CHECK(m.cls(0).drift.bound() == 2.0);
}

TEST_CASE("hypothesis report branches") {
    SUBCASE("constant drift, affine beta: gaussian branch") {
        const auto rep = validate_hypotheses(testing::single(1.0, ScalarRate::affine(0.1, 0.5)));
        CHECK(rep.classes[0].branch == ClassHypotheses::MomentBranch::gaussian);
        CHECK(rep.classes[0].drift_bounded);
        CHECK(rep.all_hold());
    }
    SUBCASE("general loss affine in w and u: exponential branch") {
        ClassSpec c{0.5, 1.0, DriftSpec::constant(1.0),
                    LossSpec::general(ScalarRate::affine(0.5, 1.0), 0.1, {ScalarRate::affine(0, 1)}, true)};
        const auto rep = validate_hypotheses(NetworkModel(1, 1, {1.0}, {c}));
        CHECK(rep.classes[0].branch == ClassHypotheses::MomentBranch::exponential);
    }
    SUBCASE("square-root node loss is flagged") {
        ClassSpec c{0.5, 1.0, DriftSpec::constant(1.0), LossSpec::per_node(0.1, {ScalarRate::power(0, 1, 0.5)})};
        const auto rep = validate_hypotheses(NetworkModel(1, 1, {1.0}, {c}));
        CHECK_FALSE(rep.classes[0].loss_lipschitz);
        CHECK_FALSE(rep.classes[0].warnings.empty());
        CHECK(rep.to_text().find("Lipschitz") != std::string::npos);
    }
}

TEST_CASE("structural validation") {
    const auto loss = LossSpec::aggregate_of(ScalarRate::constant(1.0));
    CHECK_THROWS_AS(NetworkModel(1, 2, {1, 1}, {constant_class(0.5, 0.5, 1, loss), constant_class(0.5, 0.4, 1, loss)}),
                    ConfigError);
    CHECK_THROWS_AS(NetworkModel(1, 1, {1}, {constant_class(1.0, 1.0, 1, loss)}), ConfigError);
    CHECK_THROWS_AS(NetworkModel(1, 1, {1, 1}, {constant_class(0.5, 1.0, 1, loss)}), ConfigError);
    // A_jk = 0 with a nonzero per-node loss term
    ClassSpec c{0.5, 1.0, DriftSpec::constant(1.0), LossSpec::per_node(0.1, {ScalarRate::affine(0, 1), ScalarRate::affine(0, 1)})};
    CHECK_THROWS_AS(NetworkModel(2, 1, {1, 0}, {c}), ConfigError);
    CHECK_THROWS_AS(ScalarRate::affine(1.0, -0.5), ConfigError);
    CHECK_THROWS_AS(ScalarRate::power(0.0, 1.0, 0.0), ConfigError);
}

TEST_CASE("utilization agrees with its limit on constant states") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> U(0.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t J = 1 + gen() % 3, K = 1 + gen() % 4;
        std::vector<double> A(J * K);
        for (auto& x : A) x = U(gen);
        std::vector<std::size_t> counts(K);
        std::size_t total = 0;
        for (auto& n : counts) total += (n = 1 + gen() % 5);
        std::vector<ClassSpec> cs;
        for (std::size_t k = 0; k < K; ++k) {
            cs.push_back(constant_class(0.5, static_cast<double>(counts[k]) / static_cast<double>(total), 1.0,
                                        LossSpec::aggregate_of(ScalarRate::constant(1.0))));
        }
        const NetworkModel m(J, K, A, cs, counts);
        std::vector<std::vector<double>> states(K);
        std::vector<double> means(K);
        for (std::size_t k = 0; k < K; ++k) {
            means[k] = U(gen);
            states[k].assign(counts[k], means[k]);
        }
        const auto a = utilization(states, m);
        const auto b = limit_utilization(means, m);
        for (std::size_t j = 0; j < J; ++j) CHECK(std::abs(a[j] - b[j]) <= 1e-12 * (1.0 + b[j]));
    }
}

TEST_CASE("drift has no own-state argument") {
    // The drift is a function of the class and the utilization only.
    static_assert(std::is_same_v<decltype(&eval_drift), double (*)(const ClassSpec&, std::span<const double>)>);
    const NetworkModel m = testing::canonical();
    const std::vector<double> u{1.3};
    CHECK(eval_drift(m.cls(1), u) == eval_drift(m.cls(1), u));
}

TEST_CASE("rates are finite and nonnegative on a wide box") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> C(0.0, 5.0), X(0.0, 1e6), P(0.1, 3.0);
    for (int i = 0; i < 2000; ++i) {
        const ScalarRate rates[] = {ScalarRate::constant(C(gen)), ScalarRate::affine(C(gen), C(gen)),
                                    ScalarRate::power(C(gen), C(gen), P(gen))};
        const double x = X(gen);
        for (const auto& r : rates) {
            const double v = r(x);
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
        }
    }
}

TEST_CASE("shipped model files load") {
    for (const char* f : {"single_node.cfg", "linear.cfg", "torus3.cfg", "torus_symmetric.cfg", "uncoupled.cfg"}) {
        CAPTURE(f);
        CHECK_NOTHROW(load_model(testing::model_file(f)));
    }
    CHECK_THROWS_AS(load_model(testing::model_file("invalid_decreasing.cfg")), ConfigError);
    const NetworkModel m = testing::canonical();
    CHECK(m.nodes() == 1);
    CHECK(m.classes() == 2);
    CHECK(m.cls(1).drift.a == 2.0);
}

TEST_CASE("model parser rejects unknown and malformed input") {
    const std::string base = "[network]\nnodes = 1\nclasses = 1\nallocation = 1\n[class.1]\nr = 0.5\np = 1\n"
                             "drift.kind = constant\ndrift.a = 1\nloss.form = aggregate\nloss.g = affine 0.1 1\n";
    CHECK_NOTHROW(parse_model(base));
    CHECK_THROWS_AS(parse_model(base + "colour = red\n"), ConfigError);
    CHECK_THROWS_AS(parse_model(base + "[extra]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_model("[network]\nnodes = 1\nclasses = 2\nallocation = 1 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_rate("affine 1"), ConfigError);
    CHECK_THROWS_AS(parse_rate("cubic 1 2"), ConfigError);
    CHECK(parse_rate("power 0.5 2 1.5")(4.0) == doctest::Approx(16.5));
}
