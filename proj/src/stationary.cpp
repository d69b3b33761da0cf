#include "feplab/stationary.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

#include "feplab/parallel.hpp"

namespace feplab {

namespace {

constexpr Index kMaxLyapunovDim = 20;
constexpr Index kMinCellsPerAxis = 32;

}  // namespace

double lyapunov_residual(const LinearSystem& system, const Mat& sigma) {
    return (system.drift * sigma + sigma * system.drift.transpose() + 2.0 * system.noise_amplitude)
        .cwiseAbs()
        .maxCoeff();
}

GaussianDensity solve_lyapunov(const LinearSystem& system) {
    const Index n = system.dim();
    if (n > kMaxLyapunovDim)
        throw Error(ErrorCode::DimensionTooHigh, "Kronecker Lyapunov solve capped at dimension 20");
    const double max_re = max_eigen_real_part(system.drift);
    if (max_re >= 0.0) {
        std::ostringstream msg;
        msg << "drift is not Hurwitz (max Re lambda = " << max_re << "); no stationary density";
        throw Error(ErrorCode::NotHurwitz, msg.str());
    }

    // vec(B S + S B^T) = (I (x) B + B (x) I) vec(S), column-major vec.
    const Mat& b = system.drift;
    Mat kron = Mat::Zero(n * n, n * n);
    for (Index i = 0; i < n; ++i)
        kron.block(i * n, i * n, n, n) += b;  // I (x) B
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            for (Index k = 0; k < n; ++k)
                kron(i * n + k, j * n + k) += b(i, j);  // B (x) I
    Vec rhs(n * n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) rhs(j * n + i) = -2.0 * system.noise_amplitude(i, j);

    const Vec solution = kron.partialPivLu().solve(rhs);
    Mat sigma(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) sigma(i, j) = solution(j * n + i);
    sigma = ((sigma + sigma.transpose()) / 2.0).eval();

    const double residual = lyapunov_residual(system, sigma);
    if (!(residual < 1e-10)) {
        std::ostringstream msg;
        msg << "Lyapunov solve residual " << residual << " exceeds 1e-10";
        throw Error(ErrorCode::IllConditioned, msg.str());
    }
    try {
        return GaussianDensity::from_moments(Vec::Zero(n), sigma);
    } catch (const Error&) {
        throw Error(ErrorCode::IllConditioned,
                    "stationary covariance not positive definite (degenerate noise?)");
    }
}

FPResidualReport fp_residual(const DriftFn& drift, const Mat& noise_amplitude,
                             const GridDensity& candidate) {
    const Index dim = candidate.dim();
    if (dim > 3) throw Error(ErrorCode::DimensionTooHigh, "grid residual supports dimension <= 3");
    for (const auto& ax : candidate.axes())
        if (ax.points() < kMinCellsPerAxis)
            throw Error(ErrorCode::GridTooCoarse, "fewer than 32 cells per axis");

    const Index total = candidate.total_points();
    // Drift evaluated once per grid point.
    Mat f(total, dim);
    parallel_for_chunks(total, [&](Index begin, Index end) {
        for (Index flat = begin; flat < end; ++flat)
            f.row(flat) = drift(candidate.point_at(candidate.unflatten(flat))).transpose();
    });

    std::vector<Index> stride(static_cast<std::size_t>(dim), 1);
    for (Index d = dim - 2; d >= 0; --d)
        stride[static_cast<std::size_t>(d)] =
            stride[static_cast<std::size_t>(d + 1)] * candidate.axes()[static_cast<std::size_t>(d + 1)].points();

    const Vec& p = candidate.values();
    FPResidualReport report;
    report.axes = candidate.axes();
    report.residual_field = Vec::Zero(total);
    report.grid_step = candidate.axes()[0].step;

    auto is_interior = [&](const std::vector<Index>& idx) {
        for (std::size_t d = 0; d < idx.size(); ++d)
            if (idx[d] == 0 || idx[d] == candidate.axes()[d].points() - 1) return false;
        return true;
    };

    parallel_for_chunks(total, [&](Index begin, Index end) {
        for (Index flat = begin; flat < end; ++flat) {
            const auto idx = candidate.unflatten(flat);
            if (!is_interior(idx)) continue;
            double divergence = 0.0;
            for (Index d = 0; d < dim; ++d) {
                const Index s = stride[static_cast<std::size_t>(d)];
                const double h = candidate.axes()[static_cast<std::size_t>(d)].step;
                divergence += (f(flat + s, d) * p(flat + s) - f(flat - s, d) * p(flat - s)) / (2.0 * h);
            }
            double diffusion = 0.0;
            for (Index a = 0; a < dim; ++a) {
                const Index sa = stride[static_cast<std::size_t>(a)];
                const double ha = candidate.axes()[static_cast<std::size_t>(a)].step;
                diffusion +=
                    noise_amplitude(a, a) * (p(flat + sa) - 2.0 * p(flat) + p(flat - sa)) / (ha * ha);
                for (Index c = a + 1; c < dim; ++c) {
                    // Symmetrized pair coefficient: contracting an
                    // antisymmetric matrix against the mixed stencil must
                    // vanish identically.
                    const double coeff = noise_amplitude(a, c) + noise_amplitude(c, a);
                    if (coeff == 0.0) continue;
                    const Index sc = stride[static_cast<std::size_t>(c)];
                    const double hc = candidate.axes()[static_cast<std::size_t>(c)].step;
                    const double mixed = (p(flat + sa + sc) - p(flat + sa - sc) - p(flat - sa + sc) +
                                          p(flat - sa - sc)) /
                                         (4.0 * ha * hc);
                    diffusion += coeff * mixed;
                }
            }
            report.residual_field(flat) = -divergence + diffusion;
        }
    });

    const double cell = candidate.cell_volume();
    double sum_sq = 0.0;
    double max_abs = 0.0;
    for (Index flat = 0; flat < total; ++flat) {
        const double r = report.residual_field(flat);
        sum_sq += r * r;
        max_abs = std::max(max_abs, std::abs(r));
    }
    report.l2_norm = std::sqrt(sum_sq * cell);
    report.linf_norm = max_abs;
    return report;
}

FPResidualReport fp_residual(const LinearSystem& system, const GridDensity& candidate) {
    const Mat b = system.drift;
    return fp_residual([&b](const Vec& x) -> Vec { return b * x; }, system.noise_amplitude,
                       candidate);
}

GaussianDensity fit_empirical_gaussian(const Mat& samples) {
    const Index n = samples.rows();
    const Index dim = samples.cols();
    if (n < dim + 2)
        throw Error(ErrorCode::InsufficientSamples, "need at least dim + 2 samples");
    const Vec mean = samples.colwise().mean();
    const Mat centered = samples.rowwise() - mean.transpose();
    const Mat cov = centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::LLT<Mat> llt(cov);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::SingularCovariance, "sample covariance is singular");
    return GaussianDensity::from_moments(mean, cov);
}

}  // namespace feplab
