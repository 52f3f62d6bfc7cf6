#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aimdmf/model.hpp"
#include "aimdmf/rng.hpp"

namespace aimdmf {

/// Largest decrease factor accepted by psi and the stationary density.
inline constexpr double kMaxFactor = 0.999;

/// psi(r) = sqrt(2/pi) prod_{n>=1} (1 - r^{2n}) / (1 - r^{2n-1}); the stationary
/// mean of an AIMD connection with a = beta = 1.
double psi(double r);

/// Stationary density H_{r,rho}(x) of a connection with rho = a / beta.
double stationary_density(double r, double rho, double x);

/// Tabulated stationary law: CDF by cell-wise quadrature of the density,
/// inverse-CDF sampler with linear interpolation inside cells.
class StationaryDistribution {
public:
    StationaryDistribution(double r, double rho, std::size_t cells = 4096);

    double r() const noexcept { return r_; }
    double rho() const noexcept { return rho_; }
    double mean() const;

    double density(double x) const;
    double cdf(double x) const;
    double quantile(double p) const;
    double sample(Stream& stream) const;

    /// Right end of the table; the mass beyond it is below 1e-12.
    double cutoff() const noexcept { return grid_.back(); }
    /// CDF at the cutoff (1 up to quadrature error).
    double total_mass() const noexcept { return cum_.back(); }

private:
    double r_, rho_;
    std::vector<double> grid_;
    std::vector<double> cum_;
};

StationaryDistribution stationary_cdf(double r, double rho);
std::vector<double> sample_stationary(double r, double rho, std::size_t n, Stream& stream);

/// Equilibrium of the mean-field limit: fixed point u* and the per-class laws.
struct StationaryLaw {
    std::vector<double> u;         // fixed point, one entry per node
    std::vector<double> r;         // per class
    std::vector<double> rho;       // a_k(u*) / beta_k(u*)
    std::vector<double> mean;      // psi(r_k) sqrt(rho_k)
    std::vector<double> residual;  // |u_j - F_j(u)| per node
    std::vector<std::string> warnings;

    double max_residual() const;
};

/// Right-hand side of the fixed-point equation
///   F_j(u) = sum_k A_jk p_k psi(r_k) sqrt(a_k(u) / beta_k(u)).
std::vector<double> fixed_point_map(const NetworkModel& model, std::span<const double> u);
std::vector<double> fixed_point_residual(const NetworkModel& model, std::span<const double> u);
StationaryLaw make_stationary_law(const NetworkModel& model, std::vector<double> u);

struct FixedPointOptions {
    std::vector<double> u0;  // empty: all ones
    double damping = 0.5;
    double tol = 1e-12;
    std::size_t max_iter = 100000;
    std::size_t multistart = 8;
    std::uint64_t seed = 1;
};

struct FixedPointReport {
    std::vector<StationaryLaw> solutions;  // distinct clusters, sorted by u
    std::size_t starts = 0;
    std::size_t converged_starts = 0;

    const StationaryLaw& primary() const { return solutions.front(); }
};

/// Damped iteration u <- (1 - theta) u + theta F(u) from several starts.
FixedPointReport solve_fixed_point(const NetworkModel& model, const FixedPointOptions& options = {});

/// J = 1: bisection on the strictly increasing G(u) = u - F(u).
StationaryLaw solve_single_node(const NetworkModel& model);

/// J nodes, class j on node j only, class J+1 on every node.
StationaryLaw solve_linear_network(const NetworkModel& model);

/// Three nodes in a ring, class j on nodes j and j+1.
StationaryLaw solve_torus(const NetworkModel& model);

/// Topology recognisers used by the CLI to pick a specialised solver.
bool is_linear_topology(const NetworkModel& model);
bool is_torus_topology(const NetworkModel& model);

}  // namespace aimdmf
