#include "aimdmf/model.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "aimdmf/error.hpp"

namespace aimdmf {

namespace {

void require_finite_nonneg(double v, const char* what) {
    if (!std::isfinite(v) || v < 0.0) {
        throw ConfigError(fmt::format("{} must be finite and >= 0, got {}", what, v));
    }
}

double checked_rate(double v, const char* what) {
    if (std::isnan(v) || v < 0.0) {
        throw ModelError(fmt::format("{} evaluated to {}", what, v));
    }
    return v;
}

void check_state(std::span<const double> u) {
    for (double x : u) {
        if (std::isnan(x) || x < 0.0) {
            throw ModelError(fmt::format("utilization component {} is not >= 0", x));
        }
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// ScalarRate

ScalarRate::ScalarRate(Kind kind, double c0, double c1, double exponent)
    : kind_(kind), c0_(c0), c1_(c1), exponent_(exponent) {
    require_finite_nonneg(c0, "rate coefficient c0");
    require_finite_nonneg(c1, "rate coefficient c1");
    if (!std::isfinite(exponent) || exponent <= 0.0) {
        throw ConfigError(fmt::format("rate exponent must be > 0, got {}", exponent));
    }
}

ScalarRate ScalarRate::constant(double c0) { return {Kind::constant, c0, 0.0, 1.0}; }
ScalarRate ScalarRate::affine(double c0, double c1) { return {Kind::affine, c0, c1, 1.0}; }
ScalarRate ScalarRate::power(double c0, double c1, double exponent) {
    return {Kind::power, c0, c1, exponent};
}

double ScalarRate::operator()(double x) const {
    switch (kind_) {
        case Kind::constant:
            return c0_;
        case Kind::affine:
            return c0_ + c1_ * x;
        case Kind::power:
            return c0_ + c1_ * std::pow(x, exponent_);
    }
    return c0_;
}

bool ScalarRate::is_zero() const noexcept { return c0_ == 0.0 && (is_constant()); }

bool ScalarRate::is_constant() const noexcept { return kind_ == Kind::constant || c1_ == 0.0; }

bool ScalarRate::locally_lipschitz() const noexcept {
    return is_constant() || kind_ != Kind::power || exponent_ >= 1.0;
}

bool ScalarRate::globally_lipschitz() const noexcept {
    return is_constant() || kind_ == Kind::affine || exponent_ == 1.0;
}

std::string ScalarRate::describe() const {
    switch (kind_) {
        case Kind::constant:
            return fmt::format("constant {}", c0_);
        case Kind::affine:
            return fmt::format("affine {} {}", c0_, c1_);
        case Kind::power:
            return fmt::format("power {} {} {}", c0_, c1_, exponent_);
    }
    return {};
}

// ---------------------------------------------------------------------------
// DriftSpec / LossSpec

DriftSpec DriftSpec::constant(double a) {
    if (!std::isfinite(a) || a <= 0.0) {
        throw ConfigError(fmt::format("constant drift must be > 0, got {}", a));
    }
    DriftSpec d;
    d.form = Form::constant;
    d.a = a;
    return d;
}

DriftSpec DriftSpec::reciprocal(double tau, std::vector<ScalarRate> node_delay) {
    if (!std::isfinite(tau) || tau <= 0.0) {
        throw ConfigError(fmt::format("round trip time tau must be > 0, got {}", tau));
    }
    DriftSpec d;
    d.form = Form::reciprocal;
    d.tau = tau;
    d.node_delay = std::move(node_delay);
    return d;
}

double DriftSpec::bound() const { return form == Form::constant ? a : 1.0 / tau; }

LossSpec LossSpec::per_node(double delta, std::vector<ScalarRate> node_loss) {
    require_finite_nonneg(delta, "loss delta");
    LossSpec l;
    l.form = Form::per_node;
    l.delta = delta;
    l.node_loss = std::move(node_loss);
    return l;
}

LossSpec LossSpec::aggregate_of(ScalarRate g) {
    LossSpec l;
    l.form = Form::aggregate;
    l.aggregate = g;
    return l;
}

LossSpec LossSpec::general(ScalarRate in_w, double delta, std::vector<ScalarRate> node_loss,
                           bool monotone_in_w) {
    require_finite_nonneg(delta, "loss delta");
    LossSpec l;
    l.form = Form::general;
    l.in_w = in_w;
    l.delta = delta;
    l.node_loss = std::move(node_loss);
    l.monotone_in_w = monotone_in_w;
    return l;
}

// ---------------------------------------------------------------------------
// NetworkModel

NetworkModel::NetworkModel(std::size_t nodes, std::size_t classes, std::vector<double> allocation,
                           std::vector<ClassSpec> class_specs,
                           std::optional<std::vector<std::size_t>> counts)
    : nodes_(nodes),
      classes_(classes),
      allocation_(std::move(allocation)),
      classes_spec_(std::move(class_specs)),
      counts_(std::move(counts)) {
    validate();
}

NetworkModel NetworkModel::with_counts(std::vector<std::size_t> counts) const {
    return NetworkModel(nodes_, classes_, allocation_, classes_spec_, std::move(counts));
}

void NetworkModel::validate() const {
    if (nodes_ < 1) throw ConfigError("network needs at least one node");
    if (classes_ < 1) throw ConfigError("network needs at least one class");
    if (allocation_.size() != nodes_ * classes_) {
        throw ConfigError(fmt::format("allocation has {} entries, expected J*K = {}",
                                      allocation_.size(), nodes_ * classes_));
    }
    for (double a : allocation_) require_finite_nonneg(a, "allocation entry");
    if (classes_spec_.size() != classes_) {
        throw ConfigError(fmt::format("{} class sections for K = {}", classes_spec_.size(), classes_));
    }
    double psum = 0.0;
    for (std::size_t k = 0; k < classes_; ++k) {
        const ClassSpec& c = classes_spec_[k];
        if (!(c.r > 0.0 && c.r < 1.0)) {
            throw ConfigError(fmt::format("class {}: r must lie in (0,1), got {}", k + 1, c.r));
        }
        if (!std::isfinite(c.p) || c.p < 0.0) {
            throw ConfigError(fmt::format("class {}: p must be >= 0, got {}", k + 1, c.p));
        }
        psum += c.p;

        auto check_nodes = [&](const std::vector<ScalarRate>& terms, const char* what) {
            if (terms.size() != nodes_) {
                throw ConfigError(fmt::format("class {}: {} has {} node terms, expected {}", k + 1,
                                              what, terms.size(), nodes_));
            }
            for (std::size_t j = 0; j < nodes_; ++j) {
                if (allocation(j, k) == 0.0 && !terms[j].is_zero()) {
                    throw ConfigError(fmt::format(
                        "class {}: {} on node {} must vanish because A[{}][{}] = 0", k + 1, what,
                        j + 1, j + 1, k + 1));
                }
            }
        };
        if (c.drift.form == DriftSpec::Form::reciprocal) {
            if (!(c.drift.tau > 0.0)) throw ConfigError("reciprocal drift needs tau > 0");
            check_nodes(c.drift.node_delay, "drift delay");
        } else if (!(c.drift.a > 0.0) || !std::isfinite(c.drift.a)) {
            throw ConfigError(fmt::format("class {}: constant drift must be > 0", k + 1));
        }
        if (c.loss.form != LossSpec::Form::aggregate) check_nodes(c.loss.node_loss, "loss");
    }
    if (std::abs(psum - 1.0) > 1e-12) {
        throw ConfigError(fmt::format("class proportions sum to {:.17g}, expected 1", psum));
    }
    if (counts_) {
        if (counts_->size() != classes_) {
            throw ConfigError(fmt::format("counts has {} entries for K = {}", counts_->size(), classes_));
        }
    }
}

// ---------------------------------------------------------------------------
// Utilization and rates

std::vector<double> utilization(std::span<const std::vector<double>> states,
                                const NetworkModel& model) {
    const std::size_t K = model.classes();
    if (states.size() != K) {
        throw ConfigError(fmt::format("{} class state vectors for K = {}", states.size(), K));
    }
    std::size_t total = 0;
    for (std::size_t k = 0; k < K; ++k) {
        if (model.counts() && (*model.counts())[k] > 0 && states[k].empty()) {
            throw ConfigError(fmt::format("class {} declares N = {} but has no particles", k + 1,
                                          (*model.counts())[k]));
        }
        total += states[k].size();
    }
    std::vector<double> u(model.nodes(), 0.0);
    if (total == 0) return u;
    for (std::size_t k = 0; k < K; ++k) {
        if (states[k].empty()) continue;
        double sum = 0.0;
        for (double w : states[k]) {
            if (!(w >= 0.0)) throw ModelError(fmt::format("negative or NaN throughput {}", w));
            sum += w;
        }
        // (N_k/|N|) * (sum / N_k) = sum / |N|
        const double weighted = sum / static_cast<double>(total);
        for (std::size_t j = 0; j < model.nodes(); ++j) u[j] += model.allocation(j, k) * weighted;
    }
    return u;
}

std::vector<double> limit_utilization(std::span<const double> means, const NetworkModel& model) {
    std::vector<double> u(model.nodes(), 0.0);
    for (std::size_t j = 0; j < model.nodes(); ++j) {
        for (std::size_t k = 0; k < model.classes(); ++k) {
            u[j] += model.allocation(j, k) * model.cls(k).p * means[k];
        }
    }
    return u;
}

double eval_drift(const ClassSpec& cls, std::span<const double> u) {
    check_state(u);
    if (cls.drift.form == DriftSpec::Form::constant) return cls.drift.a;
    double denom = cls.drift.tau;
    for (std::size_t j = 0; j < u.size(); ++j) denom += cls.drift.node_delay[j](u[j]);
    return checked_rate(1.0 / denom, "drift");
}

double eval_beta(const ClassSpec& cls, std::size_t k, const NetworkModel& model,
                 std::span<const double> u) {
    check_state(u);
    const LossSpec& l = cls.loss;
    if (l.form == LossSpec::Form::aggregate) {
        double s = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) s += model.allocation(j, k) * u[j];
        return checked_rate(l.aggregate(s), "loss beta");
    }
    double beta = l.delta;
    for (std::size_t j = 0; j < u.size(); ++j) beta += l.node_loss[j](u[j]);
    return checked_rate(beta, l.form == LossSpec::Form::general ? "loss u-factor" : "loss beta");
}

double eval_loss(const ClassSpec& cls, std::size_t k, const NetworkModel& model, double w,
                 std::span<const double> u) {
    if (!(w >= 0.0)) throw ModelError(fmt::format("throughput {} is not >= 0", w));
    const double factor = eval_beta(cls, k, model, u);
    if (cls.loss.form == LossSpec::Form::general) {
        return checked_rate(cls.loss.in_w(w) * factor, "loss");
    }
    return checked_rate(w * factor, "loss");
}

// ---------------------------------------------------------------------------
// Hypotheses

const char* to_string(ClassHypotheses::MomentBranch b) {
    switch (b) {
        case ClassHypotheses::MomentBranch::exponential:
            return "exponential moment";
        case ClassHypotheses::MomentBranch::gaussian:
            return "gaussian moment";
        case ClassHypotheses::MomentBranch::none:
            break;
    }
    return "none";
}

bool HypothesisReport::all_hold() const {
    for (const auto& c : classes) {
        if (!c.drift_bounded || !c.drift_lipschitz || !c.loss_lipschitz ||
            c.branch == ClassHypotheses::MomentBranch::none) {
            return false;
        }
    }
    return true;
}

std::string HypothesisReport::to_text() const {
    std::ostringstream os;
    for (std::size_t k = 0; k < classes.size(); ++k) {
        const auto& c = classes[k];
        os << fmt::format(
            "class {}: drift bounded={} (bound {:.6g}) drift lipschitz={} loss lipschitz={} "
            "moment condition={}\n",
            k + 1, c.drift_bounded, c.drift_bound, c.drift_lipschitz, c.loss_lipschitz,
            to_string(c.branch));
        for (const auto& w : c.warnings) os << "  warning: " << w << '\n';
    }
    return os.str();
}

HypothesisReport validate_hypotheses(const NetworkModel& model) {
    HypothesisReport report;
    for (std::size_t k = 0; k < model.classes(); ++k) {
        const ClassSpec& c = model.cls(k);
        ClassHypotheses h;
        h.drift_bound = c.drift.bound();
        h.drift_bounded = std::isfinite(h.drift_bound);
        if (c.drift.form == DriftSpec::Form::reciprocal) {
            for (std::size_t j = 0; j < c.drift.node_delay.size(); ++j) {
                if (!c.drift.node_delay[j].locally_lipschitz()) {
                    h.drift_lipschitz = false;
                    h.warnings.push_back(fmt::format(
                        "drift delay on node {} ({}) is not Lipschitz at 0", j + 1,
                        c.drift.node_delay[j].describe()));
                }
            }
        }

        auto scan = [&](const ScalarRate& s, const std::string& where) {
            if (!s.locally_lipschitz()) {
                h.loss_lipschitz = false;
                h.warnings.push_back(
                    fmt::format("{} ({}) is not Lipschitz at 0", where, s.describe()));
            }
        };
        if (c.loss.form == LossSpec::Form::aggregate) {
            scan(c.loss.aggregate, "aggregate loss");
        } else {
            for (std::size_t j = 0; j < c.loss.node_loss.size(); ++j) {
                scan(c.loss.node_loss[j], fmt::format("loss term on node {}", j + 1));
            }
        }
        if (c.loss.form == LossSpec::Form::general) {
            scan(c.loss.in_w, "loss factor in w");
            if (!c.loss.monotone_in_w) {
                h.warnings.emplace_back("general loss is not flagged monotone in w; engines reject it");
            }
            if (h.loss_lipschitz) {
                h.branch = ClassHypotheses::MomentBranch::exponential;
                h.warnings.emplace_back(
                    "exponential moment branch: initial law needs a uniform exponential moment of some order");
            }
        } else if (h.loss_lipschitz) {
            h.branch = ClassHypotheses::MomentBranch::gaussian;
            h.warnings.emplace_back(
                "Gaussian moment branch: initial law needs a uniform Gaussian moment of some order");
        }
        if (h.branch == ClassHypotheses::MomentBranch::none) {
            h.warnings.emplace_back(
                "no moment condition branch applies; existence/uniqueness guarantees withdrawn");
        }
        report.classes.push_back(std::move(h));
    }
    return report;
}

}  // namespace aimdmf
