#include "aimdmf/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "aimdmf/error.hpp"
#include "aimdmf/numerics.hpp"

namespace aimdmf {

double next_jump_time(double w, double a, double beta, double E) {
    if (!(beta > 0.0)) throw ParameterError(fmt::format("loss coefficient must be > 0, got {}", beta));
    if (!(w >= 0.0) || !(a >= 0.0) || !(E >= 0.0)) {
        throw ParameterError(fmt::format("next_jump_time needs w, a, E >= 0 (w={}, a={}, E={})", w, a, E));
    }
    if (E == 0.0) return 0.0;
    const double e = E / beta;
    if (a > 0.0) {
        // Root of a t^2 / 2 + w t - e = 0 written without cancellation.
        return 2.0 * e / (w + std::sqrt(w * w + 2.0 * a * e));
    }
    if (w > 0.0) return e / w;
    return std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------

ConnectionPath::ConnectionPath(double w0, double a, double beta, double r, double horizon)
    : w0_(w0), a_(a), beta_(beta), r_(r), horizon_(horizon) {}

void ConnectionPath::add_jump(double t, double w_after) {
    times_.push_back(t);
    values_.push_back(w_after);
}

double ConnectionPath::at(double t) const {
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    if (it == times_.begin()) return w0_ + a_ * t;
    const std::size_t i = static_cast<std::size_t>(it - times_.begin()) - 1;
    return values_[i] + a_ * (t - times_[i]);
}

double ConnectionPath::integral() const {
    double total = 0.0;
    double t = 0.0;
    double w = w0_;
    for (std::size_t i = 0; i <= times_.size(); ++i) {
        const double t_end = i < times_.size() ? times_[i] : horizon_;
        const double dt = t_end - t;
        total += w * dt + 0.5 * a_ * dt * dt;
        if (i < times_.size()) {
            t = times_[i];
            w = values_[i];
        }
    }
    return total;
}

double ConnectionPath::integral(double from, double to) const {
    if (!(from >= 0.0 && from <= to && to <= horizon_)) throw ParameterError("integration window outside the path");
    auto it = std::upper_bound(times_.begin(), times_.end(), from);
    double total = 0.0;
    double t = from;
    double w = at(from);
    for (; it != times_.end() && *it <= to; ++it) {
        const double dt = *it - t;
        total += w * dt + 0.5 * a_ * dt * dt;
        t = *it;
        w = values_[static_cast<std::size_t>(it - times_.begin())];
    }
    const double dt = to - t;
    return total + w * dt + 0.5 * a_ * dt * dt;
}

ConnectionPath simulate_connection(double w0, double a, double beta, double r, double horizon,
                                   Stream& stream) {
    if (!(w0 >= 0.0) || !(a >= 0.0) || !(a > 0.0 || w0 > 0.0)) {
        throw ParameterError("simulate_connection needs w0 >= 0, a >= 0 and a > 0 or w0 > 0");
    }
    if (!(beta > 0.0)) throw ParameterError("simulate_connection needs beta > 0");
    if (!(r > 0.0 && r < 1.0)) throw ParameterError("simulate_connection needs r in (0,1)");
    if (!(horizon > 0.0)) throw ParameterError("simulate_connection needs a positive horizon");

    ConnectionPath path(w0, a, beta, r, horizon);
    double t = 0.0;
    double w = w0;
    for (;;) {
        const double tau = next_jump_time(w, a, beta, exp_sample(stream));
        if (t + tau > horizon) break;
        t += tau;
        w = r * (w + a * tau);
        path.add_jump(t, w);
    }
    return path;
}

// ---------------------------------------------------------------------------

StepResult step_multiplicative(double w, double a, double beta, double r, double h, Stream& stream,
                               std::vector<JumpEvent>* events, double t0) {
    if (!(h > 0.0)) throw ParameterError("step length must be > 0");
    if (!(beta >= 0.0)) throw ModelError(fmt::format("loss coefficient {} is negative", beta));
    StepResult out{w, 0};
    if (beta == 0.0) {
        out.w = w + a * h;
        return out;
    }
    double elapsed = 0.0;
    for (;;) {
        const double tau = next_jump_time(out.w, a, beta, exp_sample(stream));
        if (tau >= h - elapsed) {
            out.w += a * (h - elapsed);
            return out;
        }
        elapsed += tau;
        const double before = out.w + a * tau;
        out.w = r * before;
        ++out.jumps;
        if (events) events->push_back({t0 + elapsed, before, out.w});
    }
}

StepResult step_general(double w, double a, double r, double factor, const ScalarRate& in_w, double h,
                        Stream& stream, std::vector<JumpEvent>* events, double t0) {
    if (!(h > 0.0)) throw ParameterError("step length must be > 0");
    StepResult out{w, 0};
    double elapsed = 0.0;
    while (elapsed < h) {
        const double remaining = h - elapsed;
        // b is nondecreasing in w and w only grows between jumps.
        const double bound = in_w(out.w + a * remaining) * factor;
        if (!(bound >= 0.0) || !std::isfinite(bound)) {
            throw ModelError(fmt::format("loss bound evaluated to {}", bound));
        }
        if (bound == 0.0) {
            out.w += a * remaining;
            return out;
        }
        const double s = exp_sample(stream) / bound;
        if (s >= remaining) {
            out.w += a * remaining;
            return out;
        }
        elapsed += s;
        const double ws = out.w + a * s;
        const double accept = in_w(ws) * factor / bound;
        if (stream.uniform() < accept) {
            out.w = r * ws;
            ++out.jumps;
            if (events) events->push_back({t0 + elapsed, ws, out.w});
        } else {
            out.w = ws;
        }
    }
    return out;
}

StepResult step_frozen_field(double w, const NetworkModel& model, std::size_t k,
                             std::span<const double> u, double h, Stream& stream,
                             std::vector<JumpEvent>* events, double t0) {
    const ClassSpec& cls = model.cls(k);
    const double a = eval_drift(cls, u);
    const double factor = eval_beta(cls, k, model, u);
    if (cls.loss.multiplicative()) {
        return step_multiplicative(w, a, factor, cls.r, h, stream, events, t0);
    }
    if (!cls.loss.monotone_in_w) {
        throw UnsupportedModelError(fmt::format(
            "class {}: general loss form is not flagged monotone in w; thinning bound unavailable",
            k + 1));
    }
    return step_general(w, a, cls.r, factor, cls.loss.in_w, h, stream, events, t0);
}

// ---------------------------------------------------------------------------

namespace {

void check_chain_args(double eps, double r, std::int64_t w0) {
    if (!(eps >= 0.0 && eps < 1.0)) throw ParameterError("packet loss probability must lie in [0,1)");
    if (!(r > 0.0 && r < 1.0)) throw ParameterError("r must lie in (0,1)");
    if (w0 < 0) throw ParameterError("initial window must be >= 0");
}

inline std::int64_t chain_step(std::int64_t w, double log_keep, double r, Stream& stream) {
    if (w == 0) return 1;
    const double p_no_loss = std::exp(static_cast<double>(w) * log_keep);
    if (stream.uniform() < p_no_loss) return w + 1;
    return static_cast<std::int64_t>(std::floor(r * static_cast<double>(w)));
}

}  // namespace

std::vector<std::int64_t> simulate_discrete_aimd(double eps, double r, std::size_t steps,
                                                 std::int64_t w0, Stream& stream) {
    check_chain_args(eps, r, w0);
    const double log_keep = std::log1p(-eps);
    std::vector<std::int64_t> chain;
    chain.reserve(steps + 1);
    chain.push_back(w0);
    for (std::size_t n = 0; n < steps; ++n) chain.push_back(chain_step(chain.back(), log_keep, r, stream));
    return chain;
}

std::vector<std::int64_t> sample_discrete_aimd(double eps, double r, std::int64_t w0,
                                               std::size_t burn_in, std::size_t thin,
                                               std::size_t samples, Stream& stream) {
    check_chain_args(eps, r, w0);
    if (thin == 0) throw ParameterError("thinning interval must be >= 1");
    const double log_keep = std::log1p(-eps);
    std::int64_t w = w0;
    for (std::size_t n = 0; n < burn_in; ++n) w = chain_step(w, log_keep, r, stream);
    std::vector<std::int64_t> out;
    out.reserve(samples);
    while (out.size() < samples) {
        for (std::size_t n = 0; n < thin; ++n) w = chain_step(w, log_keep, r, stream);
        out.push_back(w);
    }
    return out;
}

void write_event_log(std::ostream& os, std::span<const JumpEvent> events) {
    os << "t,event,value\n";
    for (const auto& e : events) {
        os << fmt::format("{:.17g},pre,{:.17g}\n", e.t, e.before);
        os << fmt::format("{:.17g},post,{:.17g}\n", e.t, e.after);
    }
}

}  // namespace aimdmf
