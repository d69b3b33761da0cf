#pragma once

#include <cstdint>

#include "feplab/core.hpp"
#include "feplab/stationary.hpp"

namespace feplab {

struct HelmholtzDecomposition {
    Mat gamma;               // dissipative amplitude
    Mat q;                   // solenoidal, antisymmetric
    GaussianDensity density; // the potential's NESS density
};

// Q = B Sigma + Gamma with Sigma from the Lyapunov solve. Antisymmetry of Q
// is inherited from the Lyapunov identity and asserted, not assumed.
HelmholtzDecomposition decompose_linear(const LinearSystem& system);

// B = -(Gamma - Q) Pi; exact algebraic inverse of decompose_linear.
LinearSystem reconstruct_drift(const HelmholtzDecomposition& decomp);

struct StationarityReport {
    double fp_norm = 0.0;                    // Fokker-Planck residual of the reconstruction
    double solenoidal_divergence_norm = 0.0; // norm of div(Q grad p*)
};

// Analytic mode: closed-form residuals of the Gaussian density evaluated at
// n_probes points drawn from it. Accepts a raw (gamma, q) pair so perturbed,
// non-antisymmetric Q matrices can be probed.
StationarityReport stationarity_identity_check(const Mat& gamma, const Mat& q,
                                               const GaussianDensity& density,
                                               Index n_probes = 256, std::uint64_t seed = 0);
StationarityReport stationarity_identity_check(const HelmholtzDecomposition& decomp,
                                               Index n_probes = 256, std::uint64_t seed = 0);

// Grid mode: central-difference residuals of the tabulated density.
StationarityReport stationarity_identity_check(const Mat& gamma, const Mat& q,
                                               const GaussianDensity& density,
                                               const GridDensity& grid);
StationarityReport stationarity_identity_check(const HelmholtzDecomposition& decomp,
                                               const GridDensity& grid);

// E_{p*}[(Q grad ln p*)^T (Gamma grad ln p*)]; zero exactly when the
// solenoidal flow is orthogonal to the dissipative one in expectation.
double flow_orthogonality_expectation(const HelmholtzDecomposition& decomp);

enum class FlowSubset { External, Autonomous };

struct MarginalFlowReport {
    Mat lhs_flows;  // conditional-average drift rows, one eval point per row
    Mat rhs_flows;  // solenoidal gradient flow on the marginal, per point
    double max_abs_gap = 0.0;               // conditioned reading; nonzero under Q coupling
    double max_abs_gap_own_marginal = 0.0;  // subset-marginal reading; exact for linear systems
    double solenoidal_coupling_norm = 0.0;  // Frobenius norm of Q off the role-block diagonal
};

// Evaluates both readings of the marginal flow statement at n_eval points
// drawn from the NESS density and reports the gaps; never asserts.
MarginalFlowReport marginal_flow_check(const LinearSystem& system, const PartitionSpec& partition,
                                       const HelmholtzDecomposition& decomp, FlowSubset subset,
                                       Index n_eval, std::uint64_t seed = 0);

// CSV export with #block headers for Gamma, Q, Sigma.
std::string decomposition_to_csv(const HelmholtzDecomposition& decomp);

}  // namespace feplab
