#include "feplab/blanket.hpp"

#include <cmath>

#include "feplab/stationary.hpp"

namespace feplab {

BlanketReport blanket_check_gaussian(const GaussianDensity& density,
                                     const PartitionSpec& partition, double tolerance) {
    const PartitionSpec part = validate_partition(partition, density.dim());
    const Mat cross = submatrix(density.precision(), part.external, part.internal);
    BlanketReport report;
    report.max_cross_precision = cross.cwiseAbs().maxCoeff();
    report.tolerance = tolerance;
    report.passes = report.max_cross_precision < tolerance;
    return report;
}

GaussianDensity blanket_factorize(const GaussianDensity& density, const PartitionSpec& partition) {
    const PartitionSpec part = validate_partition(partition, density.dim());
    const IndexSet e = part.external;
    const IndexSet i = part.internal;
    const IndexSet b = part.blanket();

    const Mat sigma_bb = submatrix(density.covariance(), b, b);
    Eigen::LLT<Mat> llt(sigma_bb);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::SingularBlock, "blanket covariance block is singular");
    const Mat sigma_eb = submatrix(density.covariance(), e, b);
    const Mat sigma_ib = submatrix(density.covariance(), i, b);
    // Same blanket marginal, same e|b and i|b conditionals, conditional e-i
    // cross covariance set to zero: Sigma~_ei = Sigma_eb Sigma_bb^-1 Sigma_bi.
    const Mat cross_ei = sigma_eb * llt.solve(sigma_ib.transpose());

    Mat cov = density.covariance();
    for (std::size_t r = 0; r < e.size(); ++r)
        for (std::size_t c = 0; c < i.size(); ++c) {
            cov(e[r], i[c]) = cross_ei(static_cast<Index>(r), static_cast<Index>(c));
            cov(i[c], e[r]) = cross_ei(static_cast<Index>(r), static_cast<Index>(c));
        }
    return GaussianDensity::from_moments(density.mean(), cov);
}

double kl_factorization(const GaussianDensity& density, const PartitionSpec& partition) {
    return gaussian_kl(density, blanket_factorize(density, partition));
}

ConnectivityReport connectivity_report(const LinearSystem& system, const PartitionSpec& partition,
                                       double tau_f, double tau_s) {
    const Index n = system.dim();
    validate_partition(partition, n);
    const GaussianDensity ness = solve_lyapunov(system);  // NotHurwitz propagates

    ConnectivityReport report;
    report.functional_adjacency.resize(n, n);
    report.statistical_adjacency.resize(n, n);
    report.functional_adjacency.setConstant(false);
    report.statistical_adjacency.setConstant(false);

    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c) {
            if (r == c) continue;
            // OR-symmetrized for reporting.
            const bool func = std::abs(system.drift(r, c)) > tau_f ||
                              std::abs(system.drift(c, r)) > tau_f;
            const bool stat = std::abs(ness.precision()(r, c)) > tau_s ||
                              std::abs(ness.precision()(c, r)) > tau_s;
            report.functional_adjacency(r, c) = func;
            report.statistical_adjacency(r, c) = stat;
        }

    Index agree = 0, pairs = 0;
    for (Index r = 0; r < n; ++r)
        for (Index c = r + 1; c < n; ++c) {
            ++pairs;
            if (report.functional_adjacency(r, c) == report.statistical_adjacency(r, c)) ++agree;
        }
    report.agreement_ratio = pairs > 0 ? static_cast<double>(agree) / static_cast<double>(pairs) : 1.0;
    return report;
}

}  // namespace feplab
