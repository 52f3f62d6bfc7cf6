#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "aimdmf/init_law.hpp"
#include "aimdmf/model.hpp"

namespace aimdmf {

/// Monte Carlo solution of the nonlinear (mean-field) equation on a time grid.
struct MeanFieldSolution {
    std::vector<double> times;                 // t_0 = 0 < ... < t_G = T
    std::vector<std::vector<double>> u;        // [node][i] = limit_utilization(mean(t_i))
    std::vector<std::vector<double>> u_se;     // [node][i]
    std::vector<std::vector<double>> field;    // [node][i] field that drove cell [t_i, t_{i+1})
    std::vector<std::vector<double>> mean;     // [class][i]
    std::vector<std::vector<double>> mean_se;  // [class][i]
    /// Retained ensemble values, [class][member * times.size() + i]; empty unless requested.
    std::vector<std::vector<double>> paths;
    std::size_t ensemble = 0;
    std::size_t iterations = 0;
    std::vector<double> delta_history;  // sup-norm change between consecutive simulated iterates
    bool converged = false;

    double step() const { return times.size() > 1 ? times[1] - times[0] : 0.0; }
    /// Grid index of t; throws if t is not a grid point.
    std::size_t index_of(double t) const;
    double path_value(std::size_t k, std::size_t member, std::size_t i) const {
        return paths[k][member * times.size() + i];
    }
};

struct McKeanOptions {
    std::vector<InitLaw> init;  // one per class
    double horizon = 10.0;
    double step = 0.05;
    std::size_t ensemble = 10000;
    double tol = 1e-8;
    std::size_t max_iter = 60;
    std::uint64_t seed = 1;
    std::uint64_t experiment = 0;
    int threads = 1;
    bool retain_paths = false;
    /// When false, a run that hits max_iter is returned with converged = false.
    bool throw_on_nonconvergence = true;
};

/// Picard iteration on the utilization path with common random numbers:
/// initial values and per-member streams are drawn once, every iteration
/// replays them under the previous field.
MeanFieldSolution solve_mckean(const NetworkModel& model, const McKeanOptions& options);

/// One more ensemble pass under a given field path ([node][i]); returns class means [class][i].
std::vector<std::vector<double>> replay_means(const NetworkModel& model, const McKeanOptions& options,
                                              const std::vector<std::vector<double>>& field);

enum class TestFunction { one, identity, square, neg_exp };

TestFunction parse_test_function(const std::string& name);
std::string to_string(TestFunction f);

struct DynkinResult {
    double t = 0.0;
    std::size_t cls = 0;
    TestFunction f = TestFunction::identity;
    double residual = 0.0;
    double se = 0.0;
    std::string note;
};

/// E f(W_k(t)) - E f(W_k(0)) - int_0^t E[generator f](s) ds, with the time
/// integral taken by the trapezoid rule over grid values of each retained path.
DynkinResult dynkin_check(const MeanFieldSolution& solution, const NetworkModel& model, TestFunction f,
                          std::size_t k, double t);

/// Solution CSV `t,series,value,se` with series u_j and mean_k (1-based).
void write_solution_csv(std::ostream& os, const MeanFieldSolution& solution);
/// Plain-text block with the iteration diagnostics.
std::string diagnostics_text(const MeanFieldSolution& solution);

}  // namespace aimdmf
