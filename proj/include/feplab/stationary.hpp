#pragma once

#include "feplab/core.hpp"
#include "feplab/sde.hpp"

namespace feplab {

// Solves B Sigma + Sigma B^T + 2 Gamma = 0 by Kronecker vectorization and
// returns N(0, Sigma). Verification-scale solver: dimension capped at 20.
GaussianDensity solve_lyapunov(const LinearSystem& system);

// max|B Sigma + Sigma B^T + 2 Gamma|
double lyapunov_residual(const LinearSystem& system, const Mat& sigma);

struct FPResidualReport {
    std::vector<GridAxis> axes;  // same grid as the candidate
    Vec residual_field;          // flat, boundary ring left at zero
    double l2_norm = 0.0;        // sqrt(sum r^2 * cell volume), interior cells
    double linf_norm = 0.0;      // max |r|, interior cells
    double grid_step = 0.0;
};

// Fokker-Planck stationarity residual -div(f p) + sum_jk Gamma_jk d_j d_k p
// with second-order central differences on interior cells.
FPResidualReport fp_residual(const DriftFn& drift, const Mat& noise_amplitude,
                             const GridDensity& candidate);
FPResidualReport fp_residual(const LinearSystem& system, const GridDensity& candidate);

// Moment-matching estimator: N(sample mean, unbiased sample covariance).
GaussianDensity fit_empirical_gaussian(const Mat& samples);  // rows are samples

}  // namespace feplab
