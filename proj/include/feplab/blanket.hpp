#pragma once

#include "feplab/core.hpp"

namespace feplab {

struct BlanketReport {
    double max_cross_precision = 0.0;  // max |Pi_ei| entry
    bool passes = false;
    double tolerance = 0.0;
};

// Gaussian Markov blanket condition: external-internal precision block is
// zero. passes <=> max_cross_precision < tolerance.
BlanketReport blanket_check_gaussian(const GaussianDensity& density,
                                     const PartitionSpec& partition, double tolerance);

// Default tolerances: algebraic constructions vs moment-matched empirical
// precisions (3 / sqrt(N) scaling).
inline constexpr double kExactBlanketTolerance = 1e-8;
inline double empirical_blanket_tolerance(Index n_samples) {
    return 3.0 / std::sqrt(static_cast<double>(n_samples));
}

// KL[p* || p*(e|b) p*(i|b) p*(b)] in closed form: the factorized Gaussian
// keeps the blanket marginal and both conditionals, and zeroes the
// conditional e-i cross covariance.
double kl_factorization(const GaussianDensity& density, const PartitionSpec& partition);

// The factorized Gaussian itself (exposed for the projection/idempotence
// property).
GaussianDensity blanket_factorize(const GaussianDensity& density, const PartitionSpec& partition);

struct ConnectivityReport {
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> functional_adjacency;
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> statistical_adjacency;
    double agreement_ratio = 0.0;  // fraction of off-diagonal pairs that agree
};

// Functional adjacency thresholds |B_jk| > tau_f; statistical adjacency
// thresholds |Pi_jk| > tau_s with Pi from the Lyapunov NESS. Both matrices
// are symmetrized by OR for reporting.
ConnectivityReport connectivity_report(const LinearSystem& system, const PartitionSpec& partition,
                                       double tau_f, double tau_s);

}  // namespace feplab
