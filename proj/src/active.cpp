#include "feplab/active.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "feplab/stationary.hpp"

namespace feplab {

DiscreteJoint make_discrete_joint(const Mat& table) {
    if (table.minCoeff() < 0.0)
        throw Error(ErrorCode::InvalidDensity, "joint table entries must be non-negative");
    if (std::abs(table.sum() - 1.0) > 1e-12)
        throw Error(ErrorCode::InvalidDensity, "joint table must sum to 1");
    return DiscreteJoint{table};
}

EfeReport efe_discrete(const DiscreteJoint& pred, const DiscreteJoint& target) {
    const Mat& p = pred.table;
    const Mat& t = target.table;
    if (p.rows() != t.rows() || p.cols() != t.cols())
        throw Error(ErrorCode::SupportMismatch, "pred and target tables differ in shape");

    const Vec pred_pi = p.colwise().sum();
    const Vec target_pi = t.colwise().sum();
    const Vec target_e = t.rowwise().sum();

    EfeReport report;
    double expected_log_pred_pi = 0.0;
    for (Index e = 0; e < p.rows(); ++e) {
        for (Index c = 0; c < p.cols(); ++c) {
            const double mass = p(e, c);
            if (mass <= 0.0) continue;
            if (t(e, c) <= 0.0) {
                std::ostringstream msg;
                msg << "pred assigns mass to cell (" << e << "," << c
                    << ") outside the target support";
                throw Error(ErrorCode::SupportMismatch, msg.str());
            }
            const double pred_e_given_pi = mass / pred_pi(c);
            report.value += mass * (std::log(pred_e_given_pi) - std::log(t(e, c)));
            report.ambiguity += mass * -std::log(t(e, c) / target_e(e));
            report.risk += mass * (std::log(pred_e_given_pi) - std::log(target_e(e)));
            expected_log_pred_pi += mass * std::log(pred_pi(c));
        }
    }
    report.bound_slack = report.value + expected_log_pred_pi;
    return report;
}

std::vector<std::pair<std::string, double>> efe_rows(const EfeReport& report) {
    return {{"value", report.value},
            {"ambiguity", report.ambiguity},
            {"risk", report.risk},
            {"bound_slack", report.bound_slack}};
}

Vec inaccuracy_gradient_flow(const GaussianDensity& density, const PartitionSpec& partition,
                             const Mat& gamma, const Mat& q, const Vec& point) {
    const PartitionSpec part = validate_partition(partition, density.dim());
    const IndexSet pi = part.particular();
    const IndexSet e = part.external;
    const IndexSet a = part.active;
    if (point.size() != density.dim())
        throw Error(ErrorCode::SingularBlock, "evaluation point dimension mismatch");

    // Inaccuracy(pi) = E_{p*(e|pi)}[-ln p*(pi|e)] is quadratic in pi with
    // curvature W^T S^-1 W, W = S Sigma_pipi^-1 (S the Schur complement of
    // the particular block). Its gradient is Sigma_pipi^-1 S Sigma_pipi^-1
    // (pi - mu_pi).
    const Mat sigma_pp = submatrix(density.covariance(), pi, pi);
    const Mat sigma_pe = submatrix(density.covariance(), pi, e);
    const Mat sigma_ee = submatrix(density.covariance(), e, e);
    Eigen::LLT<Mat> llt_ee(sigma_ee);
    if (llt_ee.info() != Eigen::Success)
        throw Error(ErrorCode::SingularBlock, "external covariance block is singular");
    const Mat schur = sigma_pp - sigma_pe * llt_ee.solve(sigma_pe.transpose());
    Eigen::LLT<Mat> llt_pp(sigma_pp);
    if (llt_pp.info() != Eigen::Success)
        throw Error(ErrorCode::SingularBlock, "particular covariance block is singular");

    const Vec centered = subvector(point, pi) - subvector(density.mean(), pi);
    const Vec grad_pi = llt_pp.solve(schur * llt_pp.solve(centered));
    const Vec grad_a = subvector(grad_pi, positions_in(a, pi));

    const Mat gq_aa = submatrix(gamma, a, a) - submatrix(q, a, a);
    return -(gq_aa * grad_a);
}

LinearSystem synthesize_system(const GaussianDensity& target, const Mat& gamma, const Mat& q) {
    Eigen::LLT<Mat> llt((gamma + gamma.transpose()) / 2.0);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::InvalidDensity, "gamma must be symmetric positive definite");
    const double asym = (q + q.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10) {
        std::ostringstream msg;
        msg << "solenoidal matrix not antisymmetric (|Q + Q^T| = " << asym << ")";
        throw Error(ErrorCode::AntisymmetryViolation, msg.str());
    }

    LinearSystem system{-(gamma - q) * target.precision(), (gamma + gamma.transpose()) / 2.0};
    // Guard: cannot trigger for SPD gamma and antisymmetric q, but asserted.
    if (!is_hurwitz(system.drift))
        throw Error(ErrorCode::NotHurwitz, "synthesized drift is not Hurwitz");
    const GaussianDensity recovered = solve_lyapunov(system);
    const double gap = (recovered.covariance() - target.covariance()).cwiseAbs().maxCoeff();
    if (gap > 1e-8) {
        std::ostringstream msg;
        msg << "synthesized system does not reproduce the target covariance (gap " << gap << ")";
        throw Error(ErrorCode::IllConditioned, msg.str());
    }
    return system;
}

AgentRelaxReport agent_relax(const GaussianDensity& target, const Mat& gamma, const Mat& q,
                             const Vec& x0, const IntegratorConfig& cfg, Index n_traj,
                             Index n_checkpoints) {
    if (gamma.cwiseAbs().maxCoeff() == 0.0 && q.cwiseAbs().maxCoeff() == 0.0)
        throw Error(ErrorCode::NoDynamics, "zero drift and zero diffusion: nothing to relax");
    if (n_traj < 1000)
        throw Error(ErrorCode::InsufficientSamples, "agent_relax requires n_traj >= 1000");
    const LinearSystem system = synthesize_system(target, gamma, q);

    std::vector<Index> steps;
    for (Index c = 1; c <= n_checkpoints; ++c)
        steps.push_back(std::max<Index>(1, cfg.n_steps * c / n_checkpoints));
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());

    Mat x0_rows(n_traj, x0.size());
    x0_rows.rowwise() = x0.transpose();
    const std::vector<Mat> checkpoints = ensemble_checkpoint_states(system, x0_rows, cfg, steps);

    AgentRelaxReport report;
    for (std::size_t c = 0; c < steps.size(); ++c) {
        const double t = static_cast<double>(steps[c]) * cfg.dt;
        const EnsembleStats stats = moment_stats(checkpoints[c]);
        const GaussianDensity empirical =
            GaussianDensity::from_moments(stats.sample_mean, stats.sample_covariance);
        const double kl = gaussian_kl(empirical, target);
        report.kl_curve.emplace_back(t, kl);
        report.checkpoint_times.push_back(t);
        report.checkpoint_stats.push_back(stats);
    }
    report.final_kl = report.kl_curve.back().second;
    return report;
}

}  // namespace feplab
