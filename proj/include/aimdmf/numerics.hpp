#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "aimdmf/rng.hpp"

namespace aimdmf {

using ScalarFn = std::function<double(double)>;

/// Root of a monotone function on [lo, hi]. Stops when |f(x)| <= ftol or the
/// bracket is narrower than xtol. Throws BracketError without a sign change.
double bisect(const ScalarFn& f, double lo, double hi, double xtol, double ftol = 0.0);

/// Adaptive Gauss-Kronrod integral of f on [a, b] with absolute error target tol.
/// Throws NumericError when the error estimate cannot be brought under tol.
double quad(const ScalarFn& f, double a, double b, double tol);

/// One-sample Kolmogorov-Smirnov statistic sup |F_n - F|. The sample is copied and sorted.
double ks_distance(std::span<const double> samples, const ScalarFn& cdf);

/// Exponential(1) variate -ln(U), U uniform on (0, 1].
double exp_sample(Stream& stream);

/// Sample mean and its standard error.
struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(std::span<const double> xs);

/// Mean with a batch-means standard error, for autocorrelated series.
MeanSe batch_mean_se(std::span<const double> xs, std::size_t batches = 50);

}  // namespace aimdmf
