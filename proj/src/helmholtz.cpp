#include "feplab/helmholtz.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

#include "feplab/blanket.hpp"
#include "feplab/io.hpp"
#include "feplab/rng.hpp"

namespace feplab {

namespace {

void require_spd(const Mat& gamma, const char* what) {
    Eigen::LLT<Mat> llt((gamma + gamma.transpose()) / 2.0);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::InvalidDensity, std::string(what) + " must be symmetric positive definite");
}

Vec sample_gaussian(const GaussianDensity& density, const Mat& chol_lower, CounterRng& rng) {
    Vec xi(density.dim());
    for (Index d = 0; d < xi.size(); ++d) xi(d) = rng.next_normal();
    return density.mean() + chol_lower * xi;
}

}  // namespace

HelmholtzDecomposition decompose_linear(const LinearSystem& system) {
    require_spd(system.noise_amplitude, "noise amplitude for decomposition");
    GaussianDensity density = solve_lyapunov(system);
    Mat q = system.drift * density.covariance() + system.noise_amplitude;
    const double asym = (q + q.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8) {
        std::ostringstream msg;
        msg << "solenoidal antisymmetry violated by " << asym << " (ill-conditioned system)";
        throw Error(ErrorCode::AntisymmetryViolation, msg.str());
    }
    return HelmholtzDecomposition{system.noise_amplitude, q, std::move(density)};
}

LinearSystem reconstruct_drift(const HelmholtzDecomposition& decomp) {
    Mat b = -(decomp.gamma - decomp.q) * decomp.density.precision();
    return LinearSystem{std::move(b), decomp.gamma};
}

StationarityReport stationarity_identity_check(const Mat& gamma, const Mat& q,
                                               const GaussianDensity& density, Index n_probes,
                                               std::uint64_t seed) {
    // Closed forms for Gaussian p and linear flow f(x) = A (x - mu):
    //   div(f p)        = [tr(A) - d^T A^T Pi d] p
    //   sum G_jk d_j d_k p = [d^T Pi G Pi d - tr(G Pi)] p
    //   div(Q grad p)   = [d^T Pi Q^T Pi d - tr(Q^T Pi)] p, d = x - mu
    const Mat& pi = density.precision();
    const Mat a = -(gamma - q) * pi;
    const Mat chol = Eigen::LLT<Mat>(density.covariance()).matrixL();
    CounterRng rng(seed, 7001);

    StationarityReport report;
    for (Index k = 0; k < n_probes; ++k) {
        const Vec x = sample_gaussian(density, chol, rng);
        const Vec d = x - density.mean();
        const double p = std::exp(density.log_density(x));
        const Vec pid = pi * d;
        const double divergence = (a.trace() - d.dot(a.transpose() * pid)) * p;
        const double diffusion = (pid.dot(gamma * pid) - (gamma * pi).trace()) * p;
        const double solenoidal = (pid.dot(q.transpose() * pid) - (q.transpose() * pi).trace()) * p;
        report.fp_norm = std::max(report.fp_norm, std::abs(-divergence + diffusion));
        report.solenoidal_divergence_norm =
            std::max(report.solenoidal_divergence_norm, std::abs(solenoidal));
    }
    return report;
}

StationarityReport stationarity_identity_check(const HelmholtzDecomposition& decomp,
                                               Index n_probes, std::uint64_t seed) {
    return stationarity_identity_check(decomp.gamma, decomp.q, decomp.density, n_probes, seed);
}

StationarityReport stationarity_identity_check(const Mat& gamma, const Mat& q,
                                               const GaussianDensity& density,
                                               const GridDensity& grid) {
    const Mat b = -(gamma - q) * density.precision();
    const LinearSystem reconstructed{b, gamma};
    StationarityReport report;
    report.fp_norm = fp_residual(reconstructed, grid).l2_norm;
    // div(Q grad p) alone: a pure "diffusion" stencil with Q as the
    // coefficient matrix and no drift term.
    const FPResidualReport sol =
        fp_residual([dim = density.dim()](const Vec&) { return Vec::Zero(dim); }, q, grid);
    report.solenoidal_divergence_norm = sol.l2_norm;
    return report;
}

StationarityReport stationarity_identity_check(const HelmholtzDecomposition& decomp,
                                               const GridDensity& grid) {
    return stationarity_identity_check(decomp.gamma, decomp.q, decomp.density, grid);
}

double flow_orthogonality_expectation(const HelmholtzDecomposition& decomp) {
    const Mat& pi = decomp.density.precision();
    const Mat m = pi * decomp.q.transpose() * decomp.gamma * pi;
    return expected_quadratic(m, Vec::Zero(pi.rows()), decomp.density.covariance());
}

MarginalFlowReport marginal_flow_check(const LinearSystem& system, const PartitionSpec& partition,
                                       const HelmholtzDecomposition& decomp, FlowSubset subset,
                                       Index n_eval, std::uint64_t seed) {
    const Index n = system.dim();
    const PartitionSpec part = validate_partition(partition, n);
    const BlanketReport blanket = blanket_check_gaussian(decomp.density, part, 1e-8);
    if (!blanket.passes) {
        std::ostringstream msg;
        msg << "Markov blanket violated: max |Pi_ei| = " << blanket.max_cross_precision;
        throw Error(ErrorCode::BlanketViolated, msg.str());
    }

    const IndexSet u = (subset == FlowSubset::External) ? part.external : part.autonomous();
    // Conditioning set of the contested reading: the marginal the lemma's
    // right-hand side differentiates. External flow: the (e,b) marginal of
    // the displayed statement. Autonomous flow: the particular states.
    const IndexSet m = (subset == FlowSubset::External)
                           ? index_union(part.external, part.blanket())
                           : part.particular();

    const Mat& sigma = decomp.density.covariance();
    const Mat gq = decomp.gamma - decomp.q;

    auto reading_maps = [&](const IndexSet& cond) {
        const Mat sigma_cc = submatrix(sigma, cond, cond);
        const Mat sigma_cc_inv = sigma_cc.llt().solve(Mat::Identity(sigma_cc.rows(), sigma_cc.cols()));
        Mat cols(n, static_cast<Index>(cond.size()));
        for (std::size_t k = 0; k < cond.size(); ++k) cols.col(static_cast<Index>(k)) = sigma.col(cond[k]);
        // E[f_u | x_cond] = [B Sigma_{:,cond} Sigma_cc^-1 x_cond]_u
        const Mat lhs_map = submatrix(Mat(system.drift * cols * sigma_cc_inv), u, all_indices(static_cast<Index>(cond.size())));
        // (Gamma_uu - Q_uu) grad_u ln p*(x_cond) = -(Gamma-Q)_uu [Sigma_cc^-1 x_cond]_u
        const IndexSet u_in_cond = positions_in(u, cond);
        Mat grad_rows(static_cast<Index>(u.size()), static_cast<Index>(cond.size()));
        for (std::size_t k = 0; k < u_in_cond.size(); ++k)
            grad_rows.row(static_cast<Index>(k)) = sigma_cc_inv.row(u_in_cond[k]);
        const Mat rhs_map = -submatrix(gq, u, u) * grad_rows;
        return std::pair<Mat, Mat>(lhs_map, rhs_map);
    };

    const auto [lhs_map, rhs_map] = reading_maps(m);
    const auto [own_lhs_map, own_rhs_map] = reading_maps(u);

    const Mat chol = Eigen::LLT<Mat>(sigma).matrixL();
    CounterRng rng(seed, 7002);

    MarginalFlowReport report;
    report.lhs_flows.resize(n_eval, static_cast<Index>(u.size()));
    report.rhs_flows.resize(n_eval, static_cast<Index>(u.size()));
    for (Index k = 0; k < n_eval; ++k) {
        const Vec x = sample_gaussian(decomp.density, chol, rng);
        const Vec xm = subvector(x, m);
        const Vec xu = subvector(x, u);
        report.lhs_flows.row(k) = (lhs_map * xm).transpose();
        report.rhs_flows.row(k) = (rhs_map * xm).transpose();
        report.max_abs_gap = std::max(report.max_abs_gap,
                                      (lhs_map * xm - rhs_map * xm).cwiseAbs().maxCoeff());
        report.max_abs_gap_own_marginal =
            std::max(report.max_abs_gap_own_marginal,
                     (own_lhs_map * xu - own_rhs_map * xu).cwiseAbs().maxCoeff());
    }

    Mat off_diag = decomp.q;
    for (const IndexSet* role : {&part.external, &part.sensory, &part.active, &part.internal})
        for (Index r : *role)
            for (Index c : *role) off_diag(r, c) = 0.0;
    report.solenoidal_coupling_norm = off_diag.norm();
    return report;
}

std::string decomposition_to_csv(const HelmholtzDecomposition& decomp) {
    return matrix_blocks_to_csv({{"gamma", decomp.gamma},
                                 {"q", decomp.q},
                                 {"sigma", decomp.density.covariance()}});
}

}  // namespace feplab
