#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "aimdmf/config.hpp"
#include "aimdmf/equilibrium.hpp"
#include "aimdmf/error.hpp"
#include "aimdmf/harness.hpp"
#include "aimdmf/report.hpp"
#include "support.hpp"

using namespace aimdmf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("aimdmf_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

RunContext context(const fs::path& out, std::uint64_t seed = 1, int threads = 1) {
    RunContext ctx;
    ctx.seed = seed;
    ctx.out = out;
    ctx.threads = threads;
    return ctx;
}

}  // namespace

TEST_CASE("experiment config errors") {
    const fs::path base = testing::experiment_file("chaos.cfg").parent_path();
    const std::string head = "[experiment]\nkind = chaos\nmodel = ../models/single_node.cfg\n";
    CHECK_NOTHROW(parse_experiment(head, base));
    CHECK_THROWS_AS(parse_experiment(head + "colour = red\n", base), ConfigError);
    CHECK_THROWS_AS(parse_experiment(head + "populations = 400 100\n", base), ConfigError);
    CHECK_THROWS_AS(parse_experiment(head + "ensemble = 10\n", base), ConfigError);
    CHECK_THROWS_AS(parse_experiment(head + "picard_tol = 0\n", base), ConfigError);
    CHECK_THROWS_AS(parse_experiment("[experiment]\nkind = chaos\nmodel = ../models/missing.cfg\n", base), ConfigError);
    CHECK_THROWS_AS(parse_experiment("[experiment]\nkind = chaos\n", base), ConfigError);
    CHECK_THROWS_AS(parse_experiment("[experiment]\nkind = teleport\n", base), ConfigError);
    CHECK_THROWS_AS(load_experiment(testing::experiment_file("equilibrium_invalid.cfg")), ConfigError);
    CHECK_NOTHROW(parse_experiment("[experiment]\nkind = scaling\neps = 1e-2, 1e-3\n", base));
}

TEST_CASE("every shipped experiment config loads") {
    for (const auto& entry : fs::directory_iterator(testing::source_dir() / "configs" / "experiments")) {
        if (entry.path().filename() == "equilibrium_invalid.cfg") continue;
        CAPTURE(entry.path().string());
        CHECK_NOTHROW(load_experiment(entry.path()));
    }
}

TEST_CASE("fixedpoint wrapper reproduces the solver") {
    const auto cfg = load_experiment(testing::experiment_file("fixedpoint_single_node.cfg"));
    const fs::path out = scratch("fixedpoint");
    const auto result = run_experiment(cfg, context(out));
    CHECK(result.status() == Status::pass);
    const std::string nodes = slurp(out / "fixedpoint_nodes.csv");
    std::istringstream is(nodes);
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(header == "node,u,residual");
    const double u = std::stod(row.substr(row.find(',') + 1));
    CHECK(u == solve_single_node(*cfg.model).u[0]);
    CHECK(std::abs(u - 1.64581920629) <= 1e-10);
    CHECK(fs::exists(out / "report.md"));
    CHECK(slurp(out / "manifest.txt").find("experiment = fixedpoint") != std::string::npos);
}

TEST_CASE("the same seed reproduces every output byte") {
    auto cfg = load_experiment(testing::experiment_file("mckean.cfg"));
    cfg.ensemble = 500;
    cfg.horizon = 2.0;
    const fs::path a = scratch("repeat_a"), b = scratch("repeat_b"), c = scratch("repeat_c");
    const auto ra = run_experiment(cfg, context(a, 7));
    run_experiment(cfg, context(b, 7, 4));
    run_experiment(cfg, context(c, 8));
    REQUIRE_FALSE(ra.files.empty());
    bool any_differs = false;
    for (const auto& f : ra.files) {
        if (f.ends_with(".csv")) {
            CAPTURE(f);
            CHECK(slurp(a / f) == slurp(b / f));
            any_differs = any_differs || slurp(a / f) != slurp(c / f);
        }
    }
    CHECK(any_differs);
}

TEST_CASE("exit codes and statuses") {
    CHECK(exit_code(Status::pass) == 0);
    CHECK(exit_code(Status::inconclusive) == 2);
    CHECK(exit_code(Status::fail) == 1);
    CHECK(combine(Status::pass, Status::inconclusive) == Status::inconclusive);
    CHECK(combine(Status::fail, Status::inconclusive) == Status::fail);
    CHECK(mc_criterion("x", true, 0.1, 0.05, "d").status == Status::inconclusive);
    CHECK(mc_criterion("x", true, 0.01, 0.05, "d").status == Status::pass);
    CHECK(mc_criterion("x", false, 0.1, 0.05, "d").status == Status::fail);
    ExperimentResult r;
    r.criteria = {{"a", Status::pass, ""}, {"b", Status::inconclusive, ""}};
    CHECK(r.status() == Status::inconclusive);
}

TEST_CASE("report helpers") {
    const auto t = markdown_table({"a", "b"}, {{"1", "2"}});
    CHECK(t == "| a | b |\n| --- | --- |\n| 1 | 2 |\n");
    CHECK_THROWS_AS(markdown_table({"a", "b"}, {{"1"}}), Error);
    const auto svg = svg_line_chart("t<1>", "x", "y", {{"s", {0, 1}, {0, 1}}});
    CHECK(svg.find("t&lt;1&gt;") != std::string::npos);
    CHECK(svg.starts_with("<svg"));
}
