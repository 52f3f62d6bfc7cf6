#pragma once

// Acceptance thresholds used by the experiment harness and the acceptance
// suite. None of these come from theory; they are desk-scale calibration
// choices and live here so they can be audited in one place.

namespace aimdmf::calibration {

// KS distance of 5e4 stationary samples of one connection (or of the scaled
// packet chain) against the fluid law. Sampling noise alone is ~0.006 at this n;
// 0.02 leaves room for residual correlation between thinned samples.
inline constexpr double ks_single = 0.02;

// KS distance of one class of N_k = 2000 particles against its equilibrium law.
// Noise ~1.36 / sqrt(2000) = 0.030 at 95%, so 0.03 is a tight bar; particles
// are also weakly dependent through the finite-N field.
inline constexpr double ks_population = 0.03;

// err(N_min) / err(N_max) for N in {100, ..., 1600}: ideal 4 under the 1/sqrt(N)
// rate; the band absorbs replicate noise at R = 32.
inline constexpr double ratio_lo = 2.5;
inline constexpr double ratio_hi = 6.5;

// Standard-error multipliers.
inline constexpr double se_flat = 3.0;        // mean-field stationarity
inline constexpr double se_covariance = 3.0;  // tagged-pair covariance around 0
inline constexpr double se_dynkin = 4.0;      // Dynkin residual
inline constexpr double se_time_average = 3.0;

// Fixed-point checks.
inline constexpr double fixed_point_residual = 1e-9;
inline constexpr double solver_agreement = 1e-7;

}  // namespace aimdmf::calibration
