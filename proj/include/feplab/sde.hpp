#pragma once

#include <cstdint>
#include <functional>

#include "feplab/core.hpp"

namespace feplab {

using DriftFn = std::function<Vec(const Vec&)>;

struct IntegratorConfig {
    double dt = 1e-3;
    Index n_steps = 1000;
    std::uint64_t seed = 0;
    // Euler-Maruyama is the only scheme: additive state-independent noise
    // makes higher strong-order methods unnecessary at verification scale.
};

// Emits a warning string (empty if fine) for the dt * max|Re lambda| < 0.5
// stability guard on linear systems.
std::string stability_warning(const LinearSystem& system, const IntegratorConfig& cfg);

struct EnsembleStats {
    Vec sample_mean;
    Mat sample_covariance;
    Index n_samples = 0;
    Vec standard_errors;  // of the mean, per coordinate
};

// x_{k+1} = x_k + f(x_k) dt + sqrt(2 Gamma dt) xi_k. Bit-exact reproducible
// from cfg.seed. Throws NumericalBlowup when any state norm exceeds 1e12.
Trajectory integrate_em(const DriftFn& drift, const Mat& noise_amplitude, const Vec& x0,
                        const IntegratorConfig& cfg);
Trajectory integrate_em(const LinearSystem& system, const Vec& x0, const IntegratorConfig& cfg);

// Final states of n_traj independent trajectories; trajectory k uses stream
// seed cfg.seed + k. Rows in trajectory-index order.
Mat ensemble_final_states(const LinearSystem& system, const Vec& x0, const IntegratorConfig& cfg,
                          Index n_traj);

// Ensemble states captured at the given step indices (the same streams as
// ensemble_final_states). Returns one (n_traj x dim) matrix per checkpoint.
std::vector<Mat> ensemble_checkpoint_states(const LinearSystem& system, const Mat& x0_rows,
                                            const IntegratorConfig& cfg,
                                            const std::vector<Index>& checkpoint_steps);

EnsembleStats sample_ensemble(const LinearSystem& system, const Vec& x0,
                              const IntegratorConfig& cfg, Index n_traj);

EnsembleStats moment_stats(const Mat& samples);  // rows are samples

struct ErgodicityReport {
    Mat time_avg_cov;      // second moments along one long trajectory, post burn-in
    Mat ensemble_cov;      // second moments across the ensemble at final time
    double max_rel_discrepancy = 0.0;
    Vec window_third_variances;  // trace of second moments per post-burn-in third
    bool non_stationary_flag = false;
    double burn_in_fraction = 0.1;
};

// Compares time averages along one trajectory of cfg.n_steps against an
// ensemble of n_traj trajectories run for cfg.n_steps / ensemble_step_divisor
// steps (the ensemble only needs to reach stationarity, not match the time
// horizon).
ErgodicityReport ergodicity_report(const LinearSystem& system, const Vec& x0,
                                   const IntegratorConfig& cfg, Index n_traj,
                                   Index ensemble_step_divisor = 100);

// CSV export: header t,x0,...,xN then one row per step, 17 significant digits.
std::string trajectory_to_csv(const Trajectory& traj);

}  // namespace feplab
