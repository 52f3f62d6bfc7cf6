#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aimdmf {

/// Monotone nonnegative scalar function of one nonnegative argument.
///
///   constant : c0
///   affine   : c0 + c1 * x
///   power    : c0 + c1 * x^p
///
/// Construction rejects negative coefficients and non-positive exponents, so
/// every instance is finite, nonnegative and nondecreasing on [0, inf).
class ScalarRate {
public:
    enum class Kind { constant, affine, power };

    ScalarRate() = default;  // identically zero

    static ScalarRate constant(double c0);
    static ScalarRate affine(double c0, double c1);
    static ScalarRate power(double c0, double c1, double exponent);

    double operator()(double x) const;

    Kind kind() const noexcept { return kind_; }
    double c0() const noexcept { return c0_; }
    double c1() const noexcept { return c1_; }
    double exponent() const noexcept { return exponent_; }

    /// True when the function is identically zero.
    bool is_zero() const noexcept;
    /// True when the function does not depend on x.
    bool is_constant() const noexcept;
    /// Locally Lipschitz on [0, X] for every X; fails only for a power below one.
    bool locally_lipschitz() const noexcept;
    /// Globally Lipschitz on [0, inf).
    bool globally_lipschitz() const noexcept;

    std::string describe() const;

private:
    ScalarRate(Kind kind, double c0, double c1, double exponent);

    Kind kind_ = Kind::constant;
    double c0_ = 0.0;
    double c1_ = 0.0;
    double exponent_ = 1.0;
};

/// Additive-increase rate a_k(u). Never depends on the connection's own state.
struct DriftSpec {
    enum class Form { constant, reciprocal };

    Form form = Form::constant;
    double a = 1.0;                  // constant form
    double tau = 1.0;                // reciprocal form: round trip time
    std::vector<ScalarRate> node_delay;  // reciprocal form: t_jk, one per node

    static DriftSpec constant(double a);
    static DriftSpec reciprocal(double tau, std::vector<ScalarRate> node_delay);

    /// a_k(u) <= bound() for every u >= 0.
    double bound() const;
};

/// Loss intensity of a class.
///
/// Multiplicative forms give b(w, u) = w * beta(u) with either
///   per-node   beta(u) = delta + sum_j d_j(u_j)
///   aggregate  beta(u) = g(sum_j A_jk u_j).
/// The general form is b(w, u) = h(w) * (delta + sum_j d_j(u_j)), and must be
/// flagged monotone in w before any engine accepts it.
struct LossSpec {
    enum class Form { per_node, aggregate, general };

    Form form = Form::per_node;
    double delta = 0.0;
    std::vector<ScalarRate> node_loss;  // per_node and general forms
    ScalarRate aggregate;               // aggregate form
    ScalarRate in_w;                    // general form
    bool monotone_in_w = false;         // general form

    static LossSpec per_node(double delta, std::vector<ScalarRate> node_loss);
    static LossSpec aggregate_of(ScalarRate g);
    static LossSpec general(ScalarRate in_w, double delta, std::vector<ScalarRate> node_loss,
                            bool monotone_in_w);

    bool multiplicative() const noexcept { return form != Form::general; }
};

struct ClassSpec {
    double r = 0.5;   // multiplicative decrease factor, in (0, 1)
    double p = 1.0;   // asymptotic proportion
    DriftSpec drift;
    LossSpec loss;
};

/// J nodes, K classes, J x K allocation matrix and the per-class rate laws.
/// Immutable after construction; validate() is run by the constructor.
class NetworkModel {
public:
    NetworkModel(std::size_t nodes, std::size_t classes, std::vector<double> allocation,
                 std::vector<ClassSpec> class_specs,
                 std::optional<std::vector<std::size_t>> counts = std::nullopt);

    std::size_t nodes() const noexcept { return nodes_; }
    std::size_t classes() const noexcept { return classes_; }
    double allocation(std::size_t j, std::size_t k) const { return allocation_[j * classes_ + k]; }
    std::span<const double> allocation_row_major() const noexcept { return allocation_; }
    const ClassSpec& cls(std::size_t k) const { return classes_spec_.at(k); }
    const std::vector<ClassSpec>& class_specs() const noexcept { return classes_spec_; }
    const std::optional<std::vector<std::size_t>>& counts() const noexcept { return counts_; }

    /// Same model with a different population vector.
    NetworkModel with_counts(std::vector<std::size_t> counts) const;

private:
    void validate() const;

    std::size_t nodes_;
    std::size_t classes_;
    std::vector<double> allocation_;
    std::vector<ClassSpec> classes_spec_;
    std::optional<std::vector<std::size_t>> counts_;
};

/// Scaled weighted throughput of a finite population:
///   u_j = sum_k (N_k / |N|) A_jk mean(states[k]).
std::vector<double> utilization(std::span<const std::vector<double>> states,
                                const NetworkModel& model);

/// Mean-field utilization u_j = sum_k A_jk p_k means_k.
std::vector<double> limit_utilization(std::span<const double> means, const NetworkModel& model);

double eval_drift(const ClassSpec& cls, std::span<const double> u);

/// beta_k(u) for multiplicative loss forms. Needs the model for the aggregate form.
double eval_beta(const ClassSpec& cls, std::size_t k, const NetworkModel& model,
                 std::span<const double> u);

/// b_k(w, u); zero at w = 0 for the multiplicative forms.
double eval_loss(const ClassSpec& cls, std::size_t k, const NetworkModel& model, double w,
                 std::span<const double> u);

/// Per-class summary of which well-posedness hypotheses a model meets.
struct ClassHypotheses {
    enum class MomentBranch { none, exponential, gaussian };

    bool drift_bounded = true;
    double drift_bound = 0.0;
    bool drift_lipschitz = true;
    bool loss_lipschitz = true;
    MomentBranch branch = MomentBranch::none;
    std::vector<std::string> warnings;
};

struct HypothesisReport {
    std::vector<ClassHypotheses> classes;

    bool all_hold() const;
    std::string to_text() const;
};

/// Structural problems throw ConfigError from the NetworkModel constructor;
/// everything reported here is advisory.
HypothesisReport validate_hypotheses(const NetworkModel& model);

const char* to_string(ClassHypotheses::MomentBranch b);

}  // namespace aimdmf
