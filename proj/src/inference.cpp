#include "feplab/inference.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "feplab/blanket.hpp"
#include "feplab/helmholtz.hpp"
#include "feplab/parallel.hpp"
#include "feplab/rng.hpp"

namespace feplab {

namespace {


Mat pseudo_inverse(const Mat& m, double rank_tol = 1e-12) {
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    const double thresh = rank_tol * std::max(m.rows(), m.cols()) *
                          (s.size() > 0 ? s(0) : 0.0);
    Vec inv = Vec::Zero(s.size());
    for (Index k = 0; k < s.size(); ++k)
        if (s(k) > thresh) inv(k) = 1.0 / s(k);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Index svd_rank(const Mat& m, double rank_tol = 1e-10) {
    Eigen::JacobiSVD<Mat> svd(m);
    const Vec& s = svd.singularValues();
    if (s.size() == 0) return 0;
    const double thresh = rank_tol * std::max(m.rows(), m.cols()) * s(0);
    Index rank = 0;
    for (Index k = 0; k < s.size(); ++k)
        if (s(k) > thresh) ++rank;
    return rank;
}

double cosine(const Vec& a, const Vec& b) {
    const double na = a.norm(), nb = b.norm();
    if (na < 1e-300 || nb < 1e-300) return 0.0;
    return a.dot(b) / (na * nb);
}

}  // namespace

ConditionalMoments conditional_moments(const GaussianDensity& density,
                                       const PartitionSpec& partition, const Vec& blanket_values) {
    const PartitionSpec part = validate_partition(partition, density.dim());
    const IndexSet b = part.blanket();
    if (blanket_values.size() != static_cast<Index>(b.size()))
        throw Error(ErrorCode::SingularBlanketBlock, "blanket value dimension mismatch");
    try {
        const GaussianDensity cond_i = density.conditional(part.internal, b, blanket_values);
        const GaussianDensity cond_e = density.conditional(part.external, b, blanket_values);
        return ConditionalMoments{cond_i.mean(), cond_e.mean(), cond_i.covariance(),
                                  cond_e.covariance()};
    } catch (const Error& e) {
        if (e.code() == ErrorCode::SingularBlock)
            throw Error(ErrorCode::SingularBlanketBlock, e.what());
        throw;
    }
}

SyncMap sigma_linear(const GaussianDensity& density, const PartitionSpec& partition) {
    const PartitionSpec part = validate_partition(partition, density.dim());
    const IndexSet b = part.blanket();
    const Mat sigma_bb = submatrix(density.covariance(), b, b);
    Eigen::LLT<Mat> llt(sigma_bb);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::SingularBlanketBlock, "blanket covariance block is singular");

    SyncMap map;
    map.internal_map =
        (llt.solve(submatrix(density.covariance(), part.internal, b).transpose())).transpose();
    map.external_map =
        (llt.solve(submatrix(density.covariance(), part.external, b).transpose())).transpose();

    const Index rank = svd_rank(map.internal_map);
    const Index full = std::min<Index>(static_cast<Index>(part.internal.size()),
                                       static_cast<Index>(b.size()));
    if (rank < full) {
        std::ostringstream msg;
        msg << "internal mode map is rank deficient (rank " << rank << " < " << full
            << "); no unique internal-to-external mapping";
        throw Error(ErrorCode::NonInjective, msg.str());
    }
    map.sigma = map.external_map * pseudo_inverse(map.internal_map);
    map.exact_inverse = part.internal.size() == b.size() && rank == static_cast<Index>(b.size());
    map.lsq_residual = (map.sigma * map.internal_map - map.external_map).norm();
    return map;
}

VariationalDist make_variational(const Vec& probabilities) {
    if (probabilities.minCoeff() < 0.0)
        throw Error(ErrorCode::InvalidDensity, "variational probabilities must be non-negative");
    if (std::abs(probabilities.sum() - 1.0) > 1e-12)
        throw Error(ErrorCode::InvalidDensity, "variational probabilities must sum to 1");
    return VariationalDist{probabilities};
}

FreeEnergyReport vfe_discrete(const VariationalDist& q, const Vec& prior, const Vec& likelihood) {
    if (prior.size() != likelihood.size() || prior.size() != q.probabilities.size())
        throw Error(ErrorCode::SupportMismatch, "hypothesis set sizes differ");

    FreeEnergyReport report;
    double evidence = 0.0;
    for (Index h = 0; h < prior.size(); ++h) {
        const double joint = prior(h) * likelihood(h);
        evidence += joint;
        const double qh = q.probabilities(h);
        if (qh <= 0.0) continue;
        if (joint <= 0.0) {
            std::ostringstream msg;
            msg << "q assigns mass " << qh << " to hypothesis " << h << " with zero joint density";
            throw Error(ErrorCode::SupportMismatch, msg.str());
        }
        report.energy += qh * -std::log(joint);
        report.entropy += qh * -std::log(qh);
        report.accuracy += qh * std::log(likelihood(h));
        report.complexity += qh * std::log(qh / prior(h));
    }
    report.value = report.energy - report.entropy;
    report.evidence_bound_slack = report.value + std::log(evidence);
    return report;
}

std::vector<std::pair<std::string, double>> free_energy_rows(const FreeEnergyReport& report) {
    return {{"value", report.value},
            {"energy", report.energy},
            {"entropy", report.entropy},
            {"accuracy", report.accuracy},
            {"complexity", report.complexity},
            {"evidence_bound_slack", report.evidence_bound_slack}};
}

SurprisalDecomposition surprisal_decomposition(const Mat& joint_table, Index particular_column) {
    if (particular_column < 0 || particular_column >= joint_table.cols())
        throw Error(ErrorCode::ZeroMarginal, "particular column out of range");
    const double p_pi = joint_table.col(particular_column).sum();
    if (p_pi <= 0.0)
        throw Error(ErrorCode::ZeroMarginal, "particular state has zero marginal probability");

    SurprisalDecomposition out;
    out.surprisal = -std::log(p_pi);
    const double total = joint_table.sum();
    for (Index e = 0; e < joint_table.rows(); ++e) {
        const double cell = joint_table(e, particular_column);
        if (cell <= 0.0) continue;
        const double e_given_pi = cell / p_pi;
        const double row_sum = joint_table.row(e).sum();
        const double pi_given_e = cell / row_sum;
        const double p_e = row_sum / total;
        out.inaccuracy += e_given_pi * -std::log(pi_given_e);
        out.complexity += e_given_pi * std::log(e_given_pi / p_e);
    }
    return out;
}

double expected_nll_affine(const Mat& target_cov, const Vec& target_mean, const Vec& c,
                           const Mat& a, const GaussianDensity& q) {
    const Index dim = target_cov.rows();
    Eigen::LLT<Mat> llt(target_cov);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::SingularBlock, "target covariance not positive definite");
    const double logdet = 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
    const Vec m = c + a * q.mean() - target_mean;
    const Mat propagated = a * q.covariance() * a.transpose();
    const double trace_term = llt.solve(propagated).trace();
    const double quad = m.dot(llt.solve(m));
    return 0.5 * (static_cast<double>(dim) * std::log(2.0 * std::numbers::pi) + logdet +
                  trace_term + quad);
}

SurprisalDecomposition surprisal_decomposition(const GaussianDensity& density,
                                               const PartitionSpec& partition,
                                               const Vec& particular_values) {
    const PartitionSpec part = validate_partition(partition, density.dim());
    const IndexSet pi = part.particular();
    const IndexSet e = part.external;
    if (particular_values.size() != static_cast<Index>(pi.size()))
        throw Error(ErrorCode::ZeroMarginal, "particular value dimension mismatch");

    SurprisalDecomposition out;
    out.surprisal = -density.marginal(pi).log_density(particular_values);

    const GaussianDensity q = density.conditional(e, pi, particular_values);  // p*(e|pi)
    // Conditional pi | e evaluated at the fixed particular values: an affine
    // function of e under q.
    const Mat sigma_ee = submatrix(density.covariance(), e, e);
    const Mat sigma_pe = submatrix(density.covariance(), pi, e);
    Eigen::LLT<Mat> llt(sigma_ee);
    const Mat gain = llt.solve(sigma_pe.transpose()).transpose();  // Sigma_pe Sigma_ee^-1
    const Mat cond_cov = submatrix(density.covariance(), pi, pi) - gain * sigma_pe.transpose();
    const Vec mu_pi = subvector(density.mean(), pi);
    const Vec mu_e = subvector(density.mean(), e);
    out.inaccuracy = expected_nll_affine((cond_cov + cond_cov.transpose()) / 2.0, particular_values,
                                         mu_pi - gain * mu_e, gain, q);
    out.complexity = gaussian_kl(q, density.marginal(e));
    return out;
}

FreeEnergyReport vfe_gaussian(const GaussianDensity& q, const GaussianDensity& joint,
                              const PartitionSpec& partition, const Vec& particular_values) {
    const PartitionSpec part = validate_partition(partition, joint.dim());
    const IndexSet pi = part.particular();
    const IndexSet e = part.external;
    const Index n = joint.dim();
    if (q.dim() != static_cast<Index>(e.size()))
        throw Error(ErrorCode::SupportMismatch, "q dimension must match the external set");

    // Full state as an affine function of e: x = c + A e with pi fixed.
    Vec c = scatter(particular_values, pi, n);
    Mat a = Mat::Zero(n, static_cast<Index>(e.size()));
    for (std::size_t k = 0; k < e.size(); ++k) a(e[k], static_cast<Index>(k)) = 1.0;

    FreeEnergyReport report;
    report.energy = expected_nll_affine(joint.covariance(), joint.mean(), c, a, q);
    report.entropy = q.entropy();
    report.value = report.energy - report.entropy;

    const Mat sigma_ee = submatrix(joint.covariance(), e, e);
    const Mat sigma_pe = submatrix(joint.covariance(), pi, e);
    Eigen::LLT<Mat> llt(sigma_ee);
    const Mat gain = llt.solve(sigma_pe.transpose()).transpose();
    const Mat cond_cov = submatrix(joint.covariance(), pi, pi) - gain * sigma_pe.transpose();
    const Vec mu_pi = subvector(joint.mean(), pi);
    const Vec mu_e = subvector(joint.mean(), e);
    report.accuracy = -expected_nll_affine((cond_cov + cond_cov.transpose()) / 2.0,
                                           particular_values, mu_pi - gain * mu_e, gain, q);
    report.complexity = gaussian_kl(q, joint.marginal(e));

    const double surprisal = -joint.marginal(pi).log_density(particular_values);
    report.evidence_bound_slack = report.value - surprisal;
    return report;
}

double particular_fe(const GaussianDensity& density, const PartitionSpec& partition,
                     const Vec& particular_values) {
    const PartitionSpec part = validate_partition(partition, density.dim());
    const IndexSet pi = part.particular();
    const double surprisal = -density.marginal(pi).log_density(particular_values);

    const GaussianDensity exact_posterior = density.conditional(part.external, pi, particular_values);
    const FreeEnergyReport vfe = vfe_gaussian(exact_posterior, density, part, particular_values);
    if (std::abs(vfe.value - surprisal) > 1e-10)
        throw std::logic_error("particular free energy does not match exact-posterior VFE");
    return surprisal;
}

LaplaceVfe laplace_vfe(const GaussianDensity& density, const PartitionSpec& partition,
                       const Vec& blanket_values, const Vec& internal_values) {
    const PartitionSpec part = validate_partition(partition, density.dim());
    const IndexSet b = part.blanket();
    const IndexSet i = part.internal;
    const IndexSet m = index_union(i, b);
    if (blanket_values.size() != static_cast<Index>(b.size()) ||
        internal_values.size() != static_cast<Index>(i.size()))
        throw Error(ErrorCode::SingularBlock, "laplace_vfe value dimension mismatch");

    Vec z(static_cast<Index>(m.size()));
    const IndexSet i_pos = positions_in(i, m);
    const IndexSet b_pos = positions_in(b, m);
    for (std::size_t k = 0; k < i.size(); ++k) z(i_pos[k]) = internal_values(static_cast<Index>(k));
    for (std::size_t k = 0; k < b.size(); ++k) z(b_pos[k]) = blanket_values(static_cast<Index>(k));

    const GaussianDensity marg = density.marginal(m);
    LaplaceVfe out;
    out.value = -marg.log_density(z);
    const Vec full_grad = -marg.log_density_gradient(z);  // grad of -ln p
    out.grad_internal = subvector(full_grad, i_pos);
    return out;
}

FepLemmaReport fep_lemma_check(const LinearSystem& system, const PartitionSpec& partition,
                               const FepLemmaConfig& cfg) {
    const PartitionSpec part = validate_partition(partition, system.dim());
    const HelmholtzDecomposition decomp = decompose_linear(system);
    const BlanketReport bl = blanket_check_gaussian(decomp.density, part, kExactBlanketTolerance);
    if (!bl.passes)
        throw Error(ErrorCode::BlanketViolated, "NESS density violates the blanket condition");
    const SyncMap sync = sigma_linear(decomp.density, part);

    const IndexSet b = part.blanket();
    const IndexSet e = part.external;
    const IndexSet i = part.internal;
    IndexSet rest;  // everything outside the blanket
    for (Index d = 0; d < system.dim(); ++d)
        if (std::find(b.begin(), b.end(), d) == b.end()) rest.push_back(d);

    const Mat& sigma = decomp.density.covariance();
    const Mat sigma_bb = submatrix(sigma, b, b);
    const Mat sigma_bb_inv = sigma_bb.llt().solve(Mat::Identity(sigma_bb.rows(), sigma_bb.cols()));
    const Mat sigma_ee = submatrix(sigma, e, e);
    const Mat sigma_ee_inv = sigma_ee.llt().solve(Mat::Identity(sigma_ee.rows(), sigma_ee.cols()));
    const Mat gq_bb = submatrix(decomp.gamma, b, b) - submatrix(decomp.q, b, b);
    const Mat gq_ee = submatrix(decomp.gamma, e, e) - submatrix(decomp.q, e, e);
    const Mat sigma_pinv = pseudo_inverse(sync.sigma);

    // Conditional of the non-blanket states given b.
    const Mat sigma_rb = submatrix(sigma, rest, b);
    const Mat cond_gain = sigma_rb * sigma_bb_inv;
    Mat cond_cov = submatrix(sigma, rest, rest) - cond_gain * sigma_rb.transpose();
    const Mat cond_chol = Eigen::LLT<Mat>((cond_cov + cond_cov.transpose()) / 2.0).matrixL();
    const Mat blanket_chol = Eigen::LLT<Mat>(sigma_bb).matrixL();

    // sqrt(2 Gamma dt) via symmetric square root.
    Eigen::SelfAdjointEigenSolver<Mat> es(2.0 * cfg.dt * system.noise_amplitude);
    const Mat noise_tf =
        es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
        es.eigenvectors().transpose();
    const Index n_steps = static_cast<Index>(std::llround(cfg.horizon / cfg.dt));
    const Index dim = system.dim();

    FepLemmaReport report;
    report.blanket_points.resize(cfg.n_blanket_samples, static_cast<Index>(b.size()));
    report.chain_rule_flows.resize(cfg.n_blanket_samples, static_cast<Index>(i.size()));
    report.ao_form_flows.resize(cfg.n_blanket_samples, static_cast<Index>(i.size()));
    report.simulated_flows.resize(cfg.n_blanket_samples, static_cast<Index>(i.size()));

    CounterRng blanket_rng(cfg.seed, 3001);
    double cos_chain = 0.0, cos_ao = 0.0;
    double ratio_chain = 0.0, ratio_ao = 0.0, ratio_chain_ao = 0.0;

    for (Index j = 0; j < cfg.n_blanket_samples; ++j) {
        Vec xi(static_cast<Index>(b.size()));
        for (Index d = 0; d < xi.size(); ++d) xi(d) = blanket_rng.next_normal();
        const Vec b0 = blanket_chol * xi;
        report.blanket_points.row(j) = b0.transpose();

        // (a) mode map composed with the blanket's own marginal flow.
        const Vec chain = sync.internal_map * (-(gq_bb * (sigma_bb_inv * b0)));
        // (b) the sigma-transformed external-marginal gradient flow. For a
        // square sigma map this is exactly the displayed
        // (Gamma_sigma - Q_sigma) grad_i F composition.
        const Vec e_mode = sync.external_map * b0;
        const Vec ao = sigma_pinv * (gq_ee * (-(sigma_ee_inv * e_mode)));

        // (c) Monte Carlo finite difference of E[i-mode] over the horizon.
        // The accumulated diffusion noise in the blanket coordinates is
        // subtracted as an exactly zero-mean control variate.
        const Vec cond_mean = cond_gain * b0;
        Vec sum_i_mode = Vec::Zero(static_cast<Index>(i.size()));
        std::vector<Vec> partial(static_cast<std::size_t>(cfg.n_traj),
                                 Vec::Zero(static_cast<Index>(i.size())));
        parallel_for_chunks(cfg.n_traj, [&](Index begin, Index end) {
            Vec x(dim), noise(dim), eta_b(static_cast<Index>(b.size()));
            Vec xi_local(dim);
            for (Index k = begin; k < end; ++k) {
                CounterRng rng(cfg.seed, 50000 + static_cast<std::uint64_t>(j) * 1000000 +
                                             static_cast<std::uint64_t>(k));
                Vec xi0(static_cast<Index>(rest.size()));
                for (Index d = 0; d < xi0.size(); ++d) xi0(d) = rng.next_normal();
                const Vec rest0 = cond_mean + cond_chol * xi0;
                x.setZero();
                for (std::size_t r = 0; r < rest.size(); ++r) x(rest[r]) = rest0(static_cast<Index>(r));
                for (std::size_t r = 0; r < b.size(); ++r) x(b[r]) = b0(static_cast<Index>(r));
                eta_b.setZero();
                for (Index step = 0; step < n_steps; ++step) {
                    for (Index d = 0; d < dim; ++d) xi_local(d) = rng.next_normal();
                    noise = noise_tf * xi_local;
                    x += system.drift * x * cfg.dt + noise;
                    for (std::size_t r = 0; r < b.size(); ++r) eta_b(static_cast<Index>(r)) += noise(b[r]);
                }
                Vec b_t(static_cast<Index>(b.size()));
                for (std::size_t r = 0; r < b.size(); ++r) b_t(static_cast<Index>(r)) = x(b[r]);
                partial[static_cast<std::size_t>(k)] = sync.internal_map * (b_t - eta_b);
            }
        });
        for (const Vec& v : partial) sum_i_mode += v;  // trajectory-index order
        const Vec mean_i_mode = sum_i_mode / static_cast<double>(cfg.n_traj);
        const Vec sim = (mean_i_mode - sync.internal_map * b0) / cfg.horizon;

        report.chain_rule_flows.row(j) = chain.transpose();
        report.ao_form_flows.row(j) = ao.transpose();
        report.simulated_flows.row(j) = sim.transpose();

        cos_chain += cosine(chain, sim);
        cos_ao += cosine(ao, sim);
        ratio_chain += chain.norm() / std::max(sim.norm(), 1e-300);
        ratio_ao += ao.norm() / std::max(sim.norm(), 1e-300);
        ratio_chain_ao += chain.norm() / std::max(ao.norm(), 1e-300);
    }

    const double ns = static_cast<double>(cfg.n_blanket_samples);
    report.alignment_chain_vs_sim = cos_chain / ns;
    report.alignment_ao_vs_sim = cos_ao / ns;
    report.norm_ratio_chain_vs_sim = ratio_chain / ns;
    report.norm_ratio_ao_vs_sim = ratio_ao / ns;
    report.norm_ratio_chain_vs_ao = ratio_chain_ao / ns;
    return report;
}

std::vector<std::pair<std::string, double>> fep_lemma_rows(const FepLemmaReport& report) {
    return {{"alignment_chain_vs_sim", report.alignment_chain_vs_sim},
            {"alignment_ao_vs_sim", report.alignment_ao_vs_sim},
            {"norm_ratio_chain_vs_sim", report.norm_ratio_chain_vs_sim},
            {"norm_ratio_ao_vs_sim", report.norm_ratio_ao_vs_sim},
            {"norm_ratio_chain_vs_ao", report.norm_ratio_chain_vs_ao}};
}

MetricReport fisher_metric_gaussian(const Mat& covariance, const Vec& mean, const Vec& probe) {
    const GaussianDensity base = GaussianDensity::from_moments(mean, covariance);
    const GaussianDensity shifted = GaussianDensity::from_moments(mean + probe, covariance);
    MetricReport report;
    report.fisher = base.precision();
    const double kl = gaussian_kl(base, shifted);
    const double quadratic = 0.5 * probe.dot(report.fisher * probe);
    report.kl_quadratic_gap = std::abs(kl - quadratic);
    return report;
}

DualGeometryReport dual_geometry_report(const GaussianDensity& density,
                                        const PartitionSpec& partition) {
    const PartitionSpec part = validate_partition(partition, density.dim());
    const SyncMap sync = sigma_linear(density, part);
    const IndexSet b = part.blanket();
    const Vec mu_b = subvector(density.mean(), b);
    const ConditionalMoments cm = conditional_moments(density, part, mu_b);

    DualGeometryReport report;
    report.intrinsic_fisher =
        cm.cond_cov_i.llt().solve(Mat::Identity(cm.cond_cov_i.rows(), cm.cond_cov_i.cols()));
    const Mat prec_e =
        cm.cond_cov_e.llt().solve(Mat::Identity(cm.cond_cov_e.rows(), cm.cond_cov_e.cols()));
    report.extrinsic_fisher = sync.sigma.transpose() * prec_e * sync.sigma;
    return report;
}

}  // namespace feplab
