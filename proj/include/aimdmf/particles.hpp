#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "aimdmf/init_law.hpp"
#include "aimdmf/model.hpp"

namespace aimdmf {

struct MeanFieldSolution;

/// Throughputs of every connection plus the cached scaled utilization.
class PopulationState {
public:
    PopulationState(const NetworkModel& model, std::vector<std::vector<double>> w, double t = 0.0);

    const std::vector<std::vector<double>>& throughputs() const noexcept { return w_; }
    std::vector<std::vector<double>>& mutable_throughputs() noexcept { return w_; }
    const std::vector<double>& utilization() const noexcept { return u_; }
    double time() const noexcept { return t_; }

    /// Recomputes the utilization after throughputs changed.
    void refresh(const NetworkModel& model, double t);

private:
    std::vector<std::vector<double>> w_;
    std::vector<double> u_;
    double t_;
};

/// Order-independent utilization: class sums are taken over sorted values so any
/// relabelling of particles gives the same floating-point result.
std::vector<double> exchangeable_utilization(std::span<const std::vector<double>> w,
                                             const NetworkModel& model);

struct Snapshot {
    double t = 0.0;
    std::vector<std::vector<double>> w;  // per class
};

struct TracedJump {
    double t = 0.0;
    std::size_t cls = 0;
    std::size_t particle = 0;
    double before = 0.0;
    double after = 0.0;
};

/// Sampled statistics of one particle-system run.
struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<std::vector<double>> mean;     // [class][sample]
    std::vector<std::vector<double>> tagged1;  // [class][sample]
    std::vector<std::vector<double>> tagged2;  // [class][sample], NaN when N_k < 2
    std::vector<std::vector<double>> u;        // [node][sample]
    std::vector<Snapshot> snapshots;
    std::vector<TracedJump> jumps;
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;
    std::size_t total_jumps = 0;
};

struct PopulationOptions {
    std::vector<std::size_t> counts;  // N_k >= 1
    std::vector<InitLaw> init;        // one per class
    /// Overrides `init` when non-empty (one vector per class).
    std::vector<std::vector<double>> initial_states;
    /// Optional per-class stream relabelling: particle n uses stream path stream_ids[k][n].
    std::vector<std::vector<std::uint64_t>> stream_ids;
    double horizon = 10.0;
    double step = 0.05;
    double sample_dt = 0.05;
    std::vector<double> snapshot_times;
    std::uint64_t seed = 1;
    std::uint64_t experiment = 0;
    std::uint64_t replicate = 0;
    int threads = 1;
    bool trace = false;
};

/// Operator splitting: at each step start the utilization is computed from the
/// current state and frozen, every particle is then advanced exactly over the
/// step with its own stream.
TrajectoryRecord simulate_population(const NetworkModel& model, const PopulationOptions& options);

/// Per (sample time, class) statistics over replicate runs against a mean-field reference.
struct ChaosRow {
    double t = 0.0;
    std::size_t cls = 0;
    double meanfield = 0.0;
    double err = 0.0;       // replicate mean of |mean_k(t) - E W_k(t)|
    double err_se = 0.0;
    double pair_cov = 0.0;  // cov(tagged1, tagged2) across replicates
    double pair_cov_se = 0.0;
};

struct CrossRow {
    double t = 0.0;
    std::size_t k = 0;
    std::size_t l = 0;
    double cov = 0.0;
    double cov_se = 0.0;
};

struct ChaosMetrics {
    std::vector<ChaosRow> rows;
    std::vector<CrossRow> cross;
    bool identical_seed_input = false;

    const ChaosRow& at(double t, std::size_t k) const;
};

ChaosMetrics chaos_metrics(std::span<const TrajectoryRecord> records, const MeanFieldSolution& meanfield);

/// Throughputs of class k at snapshot time t.
std::vector<double> export_empirical(const TrajectoryRecord& record, double t, std::size_t k);

/// Trajectory CSV `t,class,metric,value`; node metrics use class 0.
void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& record);
/// Snapshot CSV `t,class,particle,w`.
void write_snapshot_csv(std::ostream& os, const TrajectoryRecord& record);

/// Number of whole steps of length `step` in `span`; throws unless span is a multiple.
std::size_t whole_steps(double span, double step, const char* what);

}  // namespace aimdmf
