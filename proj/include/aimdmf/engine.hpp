#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "aimdmf/model.hpp"
#include "aimdmf/rng.hpp"

namespace aimdmf {

/// Time to the next loss of a connection at throughput w growing at rate a,
/// losing at rate beta * w(s). Solves beta * (w t + a t^2 / 2) = E exactly.
/// Returns +inf when no loss can ever occur (a = 0, w = 0).
double next_jump_time(double w, double a, double beta, double E);

/// Exact sample path of one AIMD connection with constant (a, beta, r).
class ConnectionPath {
public:
    ConnectionPath(double w0, double a, double beta, double r, double horizon);

    void add_jump(double t, double w_after);

    /// Throughput at time t in [0, horizon], right-continuous.
    double at(double t) const;
    /// Time integral of w over [0, horizon].
    double integral() const;
    /// Time integral of w over [from, to], 0 <= from <= to <= horizon.
    double integral(double from, double to) const;

    double w0() const noexcept { return w0_; }
    double drift() const noexcept { return a_; }
    double beta() const noexcept { return beta_; }
    double factor() const noexcept { return r_; }
    double horizon() const noexcept { return horizon_; }
    const std::vector<double>& jump_times() const noexcept { return times_; }
    const std::vector<double>& post_jump_values() const noexcept { return values_; }

private:
    double w0_, a_, beta_, r_, horizon_;
    std::vector<double> times_;
    std::vector<double> values_;
};

ConnectionPath simulate_connection(double w0, double a, double beta, double r, double horizon,
                                   Stream& stream);

/// One loss event, for tracing.
struct JumpEvent {
    double t = 0.0;
    double before = 0.0;
    double after = 0.0;
};

struct StepResult {
    double w = 0.0;
    std::size_t jumps = 0;
};

/// Advance one class-k connection over [t0, t0 + h] with the utilization frozen
/// at u. Multiplicative loss uses exact hazard inversion; the general form uses
/// thinning against the in-step bound b(w + a h, u). When `events` is non-null,
/// every jump is appended with absolute time.
StepResult step_frozen_field(double w, const NetworkModel& model, std::size_t k,
                             std::span<const double> u, double h, Stream& stream,
                             std::vector<JumpEvent>* events = nullptr, double t0 = 0.0);

/// Same kernel with pre-evaluated coefficients (multiplicative loss).
StepResult step_multiplicative(double w, double a, double beta, double r, double h, Stream& stream,
                               std::vector<JumpEvent>* events = nullptr, double t0 = 0.0);

/// Thinning kernel for the general form b(w, u) = h(w) * factor with h nondecreasing.
StepResult step_general(double w, double a, double r, double factor, const ScalarRate& in_w, double h,
                        Stream& stream, std::vector<JumpEvent>* events = nullptr, double t0 = 0.0);

/// Packet-level window chain: W -> W + 1 with probability (1 - eps)^W, else
/// floor(r W); W = 0 moves to 1. Returns W_0..W_steps.
std::vector<std::int64_t> simulate_discrete_aimd(double eps, double r, std::size_t steps,
                                                 std::int64_t w0, Stream& stream);

/// Same chain, recording only every `thin`-th state after `burn_in` steps.
std::vector<std::int64_t> sample_discrete_aimd(double eps, double r, std::int64_t w0,
                                               std::size_t burn_in, std::size_t thin,
                                               std::size_t samples, Stream& stream);

/// CSV `t,event,value` for one traced connection.
void write_event_log(std::ostream& os, std::span<const JumpEvent> events);

}  // namespace aimdmf
