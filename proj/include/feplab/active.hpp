#pragma once

#include <utility>
#include <vector>

#include "feplab/core.hpp"
#include "feplab/sde.hpp"

namespace feplab {

struct DiscreteJoint {
    Mat table;  // rows: external outcomes, cols: particular outcomes
};

DiscreteJoint make_discrete_joint(const Mat& table);

struct EfeReport {
    double value = 0.0;      // G, nats
    double ambiguity = 0.0;  // E_pred[-ln target(pi|e)]
    double risk = 0.0;       // E_pred(pi)[ KL[pred(e|pi) || target(e)] ]
    double bound_slack = 0.0;  // G + E_pred[ln pred(pi)] = KL[pred || target]
};

// G = sum pred(e,pi) [ln pred(e|pi) - ln target(e,pi)].
EfeReport efe_discrete(const DiscreteJoint& pred, const DiscreteJoint& target);

std::vector<std::pair<std::string, double>> efe_rows(const EfeReport& report);

// Active-state flow -(Gamma_aa - Q_aa) grad_a E_q[-ln p*(i,s,a|e)] with q the
// exact Gaussian conditional p*(e|pi) at the point; closed-form gradient of
// the inaccuracy term.
Vec inaccuracy_gradient_flow(const GaussianDensity& density, const PartitionSpec& partition,
                             const Mat& gamma, const Mat& q, const Vec& point);

// B = -(Gamma - Q) Pi_target; Hurwitz by construction for SPD Gamma and
// antisymmetric Q (asserted, with the Lyapunov round-trip checked to 1e-8).
LinearSystem synthesize_system(const GaussianDensity& target, const Mat& gamma, const Mat& q);

struct AgentRelaxReport {
    std::vector<std::pair<double, double>> kl_curve;  // (t, KL[empirical_t || target])
    double final_kl = 0.0;
    std::vector<double> checkpoint_times;
    std::vector<EnsembleStats> checkpoint_stats;
};

// Relaxation of the synthesized system toward the target density; empirical
// Gaussians are moment-matched at checkpoints and scored by closed-form KL.
AgentRelaxReport agent_relax(const GaussianDensity& target, const Mat& gamma, const Mat& q,
                             const Vec& x0, const IntegratorConfig& cfg, Index n_traj,
                             Index n_checkpoints = 20);

}  // namespace feplab
