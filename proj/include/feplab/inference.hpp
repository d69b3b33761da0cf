#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "feplab/core.hpp"

namespace feplab {

// ---------------------------------------------------------------------------
// Conditional modes and the synchronization map.
// ---------------------------------------------------------------------------

struct ConditionalMoments {
    Vec i_mode;
    Vec e_mode;
    Mat cond_cov_i;
    Mat cond_cov_e;
};

// Most likely internal/external states given a blanket state (the argmax of a
// Gaussian conditional is its mean); covariances by Schur complement.
ConditionalMoments conditional_moments(const GaussianDensity& density,
                                       const PartitionSpec& partition, const Vec& blanket_values);

struct SyncMap {
    Mat internal_map;   // M_i, centered: i(b) - mu_i = M_i (b - mu_b)
    Mat external_map;   // M_e
    Mat sigma;          // S = M_e M_i^+
    bool exact_inverse = false;  // M_i square and invertible
    double lsq_residual = 0.0;   // ||S M_i - M_e||_F, zero when S is exact
};

SyncMap sigma_linear(const GaussianDensity& density, const PartitionSpec& partition);

// ---------------------------------------------------------------------------
// Variational free energy.
// ---------------------------------------------------------------------------

struct VariationalDist {
    Vec probabilities;
};

VariationalDist make_variational(const Vec& probabilities);

struct FreeEnergyReport {
    double value = 0.0;    // nats
    double energy = 0.0;   // E_q[-ln p(H,D)]
    double entropy = 0.0;  // H[q]
    double accuracy = 0.0;  // E_q[ln p(D|H)], stored as the expected log-likelihood
    double complexity = 0.0;  // KL[q || prior]
    double evidence_bound_slack = 0.0;  // value - (-ln evidence) >= 0
};

// F = E_q[ln q - ln p(H,D)] over an enumerable hypothesis set; prior and
// likelihood are vectors over the same hypotheses, the datum is implicit.
FreeEnergyReport vfe_discrete(const VariationalDist& q, const Vec& prior, const Vec& likelihood);

std::vector<std::pair<std::string, double>> free_energy_rows(const FreeEnergyReport& report);

// ---------------------------------------------------------------------------
// Surprisal decomposition and particular free energy.
// ---------------------------------------------------------------------------

struct SurprisalDecomposition {
    double surprisal = 0.0;
    double inaccuracy = 0.0;
    double complexity = 0.0;
};

// Discrete joint over (external outcome x particular outcome); identity
// -ln p(pi) = E_{p(e|pi)}[-ln p(pi|e)] + KL[p(e|pi) || p(e)].
SurprisalDecomposition surprisal_decomposition(const Mat& joint_table, Index particular_column);

// Gaussian case, evaluated at the given particular-state values (ordered by
// the sorted particular index set).
SurprisalDecomposition surprisal_decomposition(const GaussianDensity& density,
                                               const PartitionSpec& partition,
                                               const Vec& particular_values);

// VFE of a Gaussian variational density q over the external states against
// the joint NESS density at a fixed particular state.
FreeEnergyReport vfe_gaussian(const GaussianDensity& q, const GaussianDensity& joint,
                              const PartitionSpec& partition, const Vec& particular_values);

// Surprisal -ln p*(i,s,a); equals vfe_gaussian with q equal to the exact
// conditional p*(e|pi) (asserted internally to 1e-10).
double particular_fe(const GaussianDensity& density, const PartitionSpec& partition,
                     const Vec& particular_values);

struct LaplaceVfe {
    double value = 0.0;  // -ln p*(i,b)
    Vec grad_internal;   // -grad_i ln p*(i,b)
};

LaplaceVfe laplace_vfe(const GaussianDensity& density, const PartitionSpec& partition,
                       const Vec& blanket_values, const Vec& internal_values);

// E_{e ~ q}[-ln N(c + A e; target_mean, target_cov)] in closed form. Shared
// by the Gaussian free-energy evaluations.
double expected_nll_affine(const Mat& target_cov, const Vec& target_mean, const Vec& c,
                           const Mat& a, const GaussianDensity& q);

// ---------------------------------------------------------------------------
// Free-energy-lemma diagnostic. Reports flow alignments without asserting
// them: the conditions under which the three flows coincide are exactly what
// the diagnostic is meant to quantify.
// ---------------------------------------------------------------------------

struct FepLemmaConfig {
    Index n_blanket_samples = 8;
    Index n_traj = 1250;       // trajectories per blanket sample
    double horizon = 0.2;
    double dt = 0.005;
    std::uint64_t seed = 0;
};

struct FepLemmaReport {
    Mat blanket_points;     // n_samples x |b|
    Mat chain_rule_flows;   // n_samples x |i|; mode map pushed through the blanket flow
    Mat ao_form_flows;      // n_samples x |i|; sigma-transformed external gradient flow
    Mat simulated_flows;    // n_samples x |i|; Monte Carlo finite difference of E[i-mode]
    double alignment_chain_vs_sim = 0.0;  // mean cosine
    double alignment_ao_vs_sim = 0.0;
    double norm_ratio_chain_vs_sim = 0.0;
    double norm_ratio_ao_vs_sim = 0.0;
    double norm_ratio_chain_vs_ao = 0.0;
};

FepLemmaReport fep_lemma_check(const LinearSystem& system, const PartitionSpec& partition,
                               const FepLemmaConfig& cfg);

std::vector<std::pair<std::string, double>> fep_lemma_rows(const FepLemmaReport& report);

// ---------------------------------------------------------------------------
// Information geometry.
// ---------------------------------------------------------------------------

struct MetricReport {
    Mat fisher;
    double kl_quadratic_gap = 0.0;  // |KL - 1/2 delta^T Fisher delta|
};

// Fisher metric of the Gaussian mean family with fixed covariance; the KL of
// a mean shift is exactly its quadratic form.
MetricReport fisher_metric_gaussian(const Mat& covariance, const Vec& mean, const Vec& probe);

struct DualGeometryReport {
    Mat intrinsic_fisher;  // precision of the internal conditional family
    Mat extrinsic_fisher;  // pullback S^T cond_cov_e^-1 S through the sigma map
};

DualGeometryReport dual_geometry_report(const GaussianDensity& density,
                                        const PartitionSpec& partition);

}  // namespace feplab
