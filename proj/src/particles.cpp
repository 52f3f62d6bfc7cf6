#include "aimdmf/particles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <utility>

#include <fmt/format.h>

#include "aimdmf/engine.hpp"
#include "aimdmf/error.hpp"
#include "aimdmf/mckean.hpp"
#include "aimdmf/parallel.hpp"
#include "aimdmf/rng.hpp"

namespace aimdmf {

std::size_t whole_steps(double span, double step, const char* what) {
    if (!(step > 0.0)) throw ConfigError(fmt::format("{}: step must be > 0", what));
    if (!(span >= 0.0)) throw ConfigError(fmt::format("{}: must be >= 0", what));
    const double x = span / step;
    const double n = std::round(x);
    if (std::abs(x - n) > 1e-6 * std::max(1.0, n)) {
        throw ConfigError(fmt::format("{} = {} is not a multiple of the step {}", what, span, step));
    }
    return static_cast<std::size_t>(n);
}

std::vector<double> exchangeable_utilization(std::span<const std::vector<double>> w,
                                             const NetworkModel& model) {
    std::vector<std::vector<double>> sorted(w.begin(), w.end());
    for (auto& v : sorted) std::sort(v.begin(), v.end());
    return utilization(sorted, model);
}

PopulationState::PopulationState(const NetworkModel& model, std::vector<std::vector<double>> w, double t)
    : w_(std::move(w)), t_(t) {
    u_ = exchangeable_utilization(w_, model);
}

void PopulationState::refresh(const NetworkModel& model, double t) {
    u_ = exchangeable_utilization(w_, model);
    t_ = t;
}

namespace {

struct ClassCoefficients {
    double drift = 0.0;
    double factor = 0.0;
};

void record_sample(TrajectoryRecord& rec, const PopulationState& state) {
    rec.times.push_back(state.time());
    const auto& w = state.throughputs();
    for (std::size_t k = 0; k < w.size(); ++k) {
        double s = 0.0;
        std::vector<double> sorted = w[k];
        std::sort(sorted.begin(), sorted.end());
        for (double x : sorted) s += x;
        rec.mean[k].push_back(s / static_cast<double>(w[k].size()));
        rec.tagged1[k].push_back(w[k][0]);
        rec.tagged2[k].push_back(w[k].size() > 1 ? w[k][1] : std::numeric_limits<double>::quiet_NaN());
    }
    for (std::size_t j = 0; j < state.utilization().size(); ++j) rec.u[j].push_back(state.utilization()[j]);
}

}  // namespace

TrajectoryRecord simulate_population(const NetworkModel& model, const PopulationOptions& opt) {
    const std::size_t K = model.classes();
    const std::size_t J = model.nodes();
    const bool explicit_init = !opt.initial_states.empty();
    if (explicit_init) {
        if (opt.initial_states.size() != K) throw ConfigError("need one initial state vector per class");
    } else {
        if (opt.counts.size() != K) throw ConfigError("need one population count per class");
        if (opt.init.size() != K) throw ConfigError("need one initial law per class");
    }
    std::vector<std::size_t> counts(K);
    for (std::size_t k = 0; k < K; ++k) {
        counts[k] = explicit_init ? opt.initial_states[k].size() : opt.counts[k];
        if (counts[k] < 1) throw ConfigError(fmt::format("class {} needs at least one connection", k + 1));
    }
    if (!opt.stream_ids.empty()) {
        if (opt.stream_ids.size() != K) throw ConfigError("stream relabelling needs one vector per class");
        for (std::size_t k = 0; k < K; ++k) {
            if (opt.stream_ids[k].size() != counts[k]) throw ConfigError("stream relabelling has the wrong size");
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        const LossSpec& l = model.cls(k).loss;
        if (!l.multiplicative() && !l.monotone_in_w) {
            throw UnsupportedModelError(fmt::format(
                "class {}: general loss is not flagged monotone in w; the particle engine cannot run it", k + 1));
        }
    }
    if (!(opt.horizon >= opt.step)) throw ConfigError("horizon must be at least one step");
    const std::size_t steps = whole_steps(opt.horizon, opt.step, "horizon");
    const std::size_t per_sample = whole_steps(opt.sample_dt, opt.step, "sample interval");
    if (per_sample == 0) throw ConfigError("sample interval must be at least one step");
    std::set<std::size_t> snapshot_steps;
    for (double t : opt.snapshot_times) snapshot_steps.insert(whole_steps(t, opt.step, "snapshot time"));

    // Streams and initial values.
    std::vector<std::size_t> offset(K + 1, 0);
    for (std::size_t k = 0; k < K; ++k) offset[k + 1] = offset[k] + counts[k];
    const std::size_t total = offset[K];
    std::vector<Stream> streams;
    streams.reserve(total);
    std::vector<std::vector<double>> w(K);
    for (std::size_t k = 0; k < K; ++k) {
        w[k].resize(counts[k]);
        for (std::size_t n = 0; n < counts[k]; ++n) {
            const std::uint64_t id = opt.stream_ids.empty() ? n : opt.stream_ids[k][n];
            streams.emplace_back(opt.seed, std::initializer_list<std::uint64_t>{opt.experiment, opt.replicate, k, id});
            w[k][n] = explicit_init ? opt.initial_states[k][n] : opt.init[k].sample(streams.back());
            if (!(w[k][n] >= 0.0)) throw ModelError("initial throughput must be >= 0");
        }
    }

    PopulationState state(model, std::move(w), 0.0);
    TrajectoryRecord rec;
    rec.seed = opt.seed;
    rec.replicate = opt.replicate;
    rec.mean.resize(K);
    rec.tagged1.resize(K);
    rec.tagged2.resize(K);
    rec.u.resize(J);
    record_sample(rec, state);
    if (snapshot_steps.count(0)) rec.snapshots.push_back({0.0, state.throughputs()});

    std::vector<ClassCoefficients> coef(K);
    std::vector<std::vector<JumpEvent>> events(opt.trace ? total : 0);
    std::vector<std::size_t> jumps(total, 0);

    for (std::size_t step = 0; step < steps; ++step) {
        const double t0 = static_cast<double>(step) * opt.step;
        const auto& u = state.utilization();
        for (std::size_t k = 0; k < K; ++k) {
            coef[k].drift = eval_drift(model.cls(k), u);
            coef[k].factor = eval_beta(model.cls(k), k, model, u);
        }
        auto& ws = state.mutable_throughputs();
        parallel_for(total, opt.threads, [&](std::size_t idx) {
            const std::size_t k =
                static_cast<std::size_t>(std::upper_bound(offset.begin(), offset.end(), idx) - offset.begin()) - 1;
            const std::size_t n = idx - offset[k];
            const ClassSpec& c = model.cls(k);
            std::vector<JumpEvent>* ev = opt.trace ? &events[idx] : nullptr;
            const double before = ws[k][n];
            const StepResult r =
                c.loss.multiplicative()
                    ? step_multiplicative(before, coef[k].drift, coef[k].factor, c.r, opt.step, streams[idx], ev, t0)
                    : step_general(before, coef[k].drift, c.r, coef[k].factor, c.loss.in_w, opt.step,
                                   streams[idx], ev, t0);
            if (!std::isfinite(r.w) || r.w < 0.0) {
                throw NumericError(fmt::format(
                    "particle state failure at t = {}: class {} particle {} went from {} to {} "
                    "(drift {}, loss factor {}, u = [{}])",
                    t0, k + 1, n, before, r.w, coef[k].drift, coef[k].factor, fmt::join(u, ", ")));
            }
            ws[k][n] = r.w;
            jumps[idx] += r.jumps;
        });
        const double t1 = static_cast<double>(step + 1) * opt.step;
        state.refresh(model, t1);
        if (opt.trace) {
            for (std::size_t k = 0; k < K; ++k) {
                for (std::size_t n = 0; n < counts[k]; ++n) {
                    auto& ev = events[offset[k] + n];
                    for (const auto& e : ev) rec.jumps.push_back({e.t, k, n, e.before, e.after});
                    ev.clear();
                }
            }
        }
        if ((step + 1) % per_sample == 0) record_sample(rec, state);
        if (snapshot_steps.count(step + 1)) rec.snapshots.push_back({t1, state.throughputs()});
    }
    for (std::size_t j : jumps) rec.total_jumps += j;
    return rec;
}

// ---------------------------------------------------------------------------

const ChaosRow& ChaosMetrics::at(double t, std::size_t k) const {
    for (const auto& r : rows) {
        if (r.cls == k && std::abs(r.t - t) < 1e-9) return r;
    }
    throw ConfigError(fmt::format("no chaos metrics for t = {}, class {}", t, k + 1));
}

namespace {

std::pair<double, double> covariance_se(std::span<const double> x, std::span<const double> y) {
    const std::size_t R = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < R; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(R);
    my /= static_cast<double>(R);
    std::vector<double> z(R);
    for (std::size_t i = 0; i < R; ++i) z[i] = (x[i] - mx) * (y[i] - my);
    double s = 0.0;
    for (double v : z) s += v;
    const double cov = s / static_cast<double>(R - 1);
    const double zm = s / static_cast<double>(R);
    double ss = 0.0;
    for (double v : z) ss += (v - zm) * (v - zm);
    const double se = std::sqrt(ss / static_cast<double>(R - 1) / static_cast<double>(R)) *
                      static_cast<double>(R) / static_cast<double>(R - 1);
    return {cov, se};
}

}  // namespace

ChaosMetrics chaos_metrics(std::span<const TrajectoryRecord> records, const MeanFieldSolution& mf) {
    if (records.size() < 2) throw ConfigError("chaos metrics need at least two replicates");
    const auto& first = records.front();
    for (const auto& r : records) {
        if (r.times != first.times || r.mean.size() != first.mean.size()) {
            throw ConfigError("replicate records have mismatched sampling grids");
        }
    }
    ChaosMetrics out;
    std::set<std::pair<std::uint64_t, std::uint64_t>> ids;
    for (const auto& r : records) {
        if (!ids.insert({r.seed, r.replicate}).second) out.identical_seed_input = true;
    }

    const std::size_t R = records.size();
    const std::size_t K = first.mean.size();
    std::vector<double> x(R), y(R), e(R);
    for (std::size_t i = 0; i < first.times.size(); ++i) {
        const double t = first.times[i];
        const std::size_t g = mf.index_of(t);
        for (std::size_t k = 0; k < K; ++k) {
            ChaosRow row;
            row.t = t;
            row.cls = k;
            row.meanfield = mf.mean[k][g];
            for (std::size_t r = 0; r < R; ++r) {
                e[r] = std::abs(records[r].mean[k][i] - row.meanfield);
                x[r] = records[r].tagged1[k][i];
                y[r] = records[r].tagged2[k][i];
            }
            double s = 0.0;
            for (double v : e) s += v;
            row.err = s / static_cast<double>(R);
            double ss = 0.0;
            for (double v : e) ss += (v - row.err) * (v - row.err);
            row.err_se = std::sqrt(ss / static_cast<double>(R - 1) / static_cast<double>(R));
            std::tie(row.pair_cov, row.pair_cov_se) = covariance_se(x, y);
            out.rows.push_back(row);
        }
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t l = k + 1; l < K; ++l) {
                for (std::size_t r = 0; r < R; ++r) {
                    x[r] = records[r].tagged1[k][i];
                    y[r] = records[r].tagged1[l][i];
                }
                CrossRow c;
                c.t = t;
                c.k = k;
                c.l = l;
                std::tie(c.cov, c.cov_se) = covariance_se(x, y);
                out.cross.push_back(c);
            }
        }
    }
    // Identical replicates also show up as zero spread everywhere.
    bool all_same = true;
    for (const auto& r : records) {
        if (r.mean != first.mean) {
            all_same = false;
            break;
        }
    }
    if (all_same) out.identical_seed_input = true;
    return out;
}

std::vector<double> export_empirical(const TrajectoryRecord& record, double t, std::size_t k) {
    for (const auto& s : record.snapshots) {
        if (std::abs(s.t - t) < 1e-9) {
            if (k >= s.w.size()) throw ConfigError("class index out of range");
            return s.w[k];
        }
    }
    throw ConfigError(fmt::format("no snapshot retained at t = {}", t));
}

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& rec) {
    os << "t,class,metric,value\n";
    for (std::size_t i = 0; i < rec.times.size(); ++i) {
        const double t = rec.times[i];
        for (std::size_t k = 0; k < rec.mean.size(); ++k) {
            os << fmt::format("{:.17g},{},mean,{:.17g}\n", t, k + 1, rec.mean[k][i]);
            os << fmt::format("{:.17g},{},tagged1,{:.17g}\n", t, k + 1, rec.tagged1[k][i]);
            os << fmt::format("{:.17g},{},tagged2,{:.17g}\n", t, k + 1, rec.tagged2[k][i]);
        }
        for (std::size_t j = 0; j < rec.u.size(); ++j) {
            os << fmt::format("{:.17g},0,u_{},{:.17g}\n", t, j + 1, rec.u[j][i]);
        }
    }
}

void write_snapshot_csv(std::ostream& os, const TrajectoryRecord& rec) {
    os << "t,class,particle,w\n";
    for (const auto& s : rec.snapshots) {
        for (std::size_t k = 0; k < s.w.size(); ++k) {
            for (std::size_t n = 0; n < s.w[k].size(); ++n) {
                os << fmt::format("{:.17g},{},{},{:.17g}\n", s.t, k + 1, n + 1, s.w[k][n]);
            }
        }
    }
}

}  // namespace aimdmf
