#include "feplab/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace feplab {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::OverlappingSets: return "OverlappingSets";
        case ErrorCode::IncompleteCover: return "IncompleteCover";
        case ErrorCode::EmptyRole: return "EmptyRole";
        case ErrorCode::InvalidDensity: return "InvalidDensity";
        case ErrorCode::NumericalBlowup: return "NumericalBlowup";
        case ErrorCode::InsufficientSamples: return "InsufficientSamples";
        case ErrorCode::NotHurwitz: return "NotHurwitz";
        case ErrorCode::IllConditioned: return "IllConditioned";
        case ErrorCode::GridTooCoarse: return "GridTooCoarse";
        case ErrorCode::DimensionTooHigh: return "DimensionTooHigh";
        case ErrorCode::SingularCovariance: return "SingularCovariance";
        case ErrorCode::AntisymmetryViolation: return "AntisymmetryViolation";
        case ErrorCode::BlanketViolated: return "BlanketViolated";
        case ErrorCode::SingularBlock: return "SingularBlock";
        case ErrorCode::SingularBlanketBlock: return "SingularBlanketBlock";
        case ErrorCode::NonInjective: return "NonInjective";
        case ErrorCode::SupportMismatch: return "SupportMismatch";
        case ErrorCode::ZeroMarginal: return "ZeroMarginal";
        case ErrorCode::NoDynamics: return "NoDynamics";
        case ErrorCode::ConfigParse: return "ConfigParse";
        case ErrorCode::ConfigSchema: return "ConfigSchema";
        case ErrorCode::ExperimentUnknown: return "ExperimentUnknown";
    }
    return "Unknown";
}

Vec scatter(const Vec& values, const IndexSet& idx, Index n) {
    Vec out = Vec::Zero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) out(idx[k]) = values(static_cast<Index>(k));
    return out;
}

IndexSet index_union(const IndexSet& a, const IndexSet& b) {
    IndexSet out = a;
    out.insert(out.end(), b.begin(), b.end());
    std::sort(out.begin(), out.end());
    return out;
}

IndexSet all_indices(Index n) {
    IndexSet out(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = i;
    return out;
}

IndexSet positions_in(const IndexSet& subset, const IndexSet& superset) {
    IndexSet out;
    out.reserve(subset.size());
    for (Index v : subset) {
        auto it = std::find(superset.begin(), superset.end(), v);
        if (it == superset.end())
            throw Error(ErrorCode::IncompleteCover, "index not contained in superset");
        out.push_back(static_cast<Index>(it - superset.begin()));
    }
    return out;
}

PartitionSpec validate_partition(const PartitionSpec& spec, Index n) {
    PartitionSpec out = spec;
    for (IndexSet* role : {&out.external, &out.sensory, &out.active, &out.internal})
        std::sort(role->begin(), role->end());

    std::vector<int> owner(static_cast<std::size_t>(n), -1);
    const IndexSet* roles[4] = {&out.external, &out.sensory, &out.active, &out.internal};
    const char* names[4] = {"external", "sensory", "active", "internal"};
    for (int r = 0; r < 4; ++r) {
        for (Index i : *roles[r]) {
            if (i < 0 || i >= n) {
                std::ostringstream msg;
                msg << names[r] << " index " << i << " outside [0," << n << ")";
                throw Error(ErrorCode::IncompleteCover, msg.str());
            }
            if (owner[static_cast<std::size_t>(i)] >= 0) {
                std::ostringstream msg;
                msg << "index " << i << " assigned to both " << names[owner[static_cast<std::size_t>(i)]]
                    << " and " << names[r];
                throw Error(ErrorCode::OverlappingSets, msg.str());
            }
            owner[static_cast<std::size_t>(i)] = r;
        }
    }
    for (Index i = 0; i < n; ++i) {
        if (owner[static_cast<std::size_t>(i)] < 0) {
            std::ostringstream msg;
            msg << "index " << i << " not assigned to any role";
            throw Error(ErrorCode::IncompleteCover, msg.str());
        }
    }
    if (out.external.empty()) throw Error(ErrorCode::EmptyRole, "external set is empty");
    if (out.internal.empty()) throw Error(ErrorCode::EmptyRole, "internal set is empty");
    return out;
}

LinearSystem make_linear_system(const Mat& drift, const Mat& noise_amplitude) {
    if (drift.rows() != drift.cols())
        throw Error(ErrorCode::InvalidDensity, "drift matrix must be square");
    if (noise_amplitude.rows() != drift.rows() || noise_amplitude.cols() != drift.cols())
        throw Error(ErrorCode::InvalidDensity, "noise amplitude dimension mismatch");
    const double asym = (noise_amplitude - noise_amplitude.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12)
        throw Error(ErrorCode::InvalidDensity, "noise amplitude must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(noise_amplitude);
    if (es.eigenvalues().minCoeff() < -1e-12)
        throw Error(ErrorCode::InvalidDensity, "noise amplitude must be positive semi-definite");
    return LinearSystem{drift, (noise_amplitude + noise_amplitude.transpose()) / 2.0};
}

double max_eigen_real_part(const Mat& drift) {
    Eigen::EigenSolver<Mat> es(drift, /*computeEigenvectors=*/false);
    return es.eigenvalues().real().maxCoeff();
}

bool is_hurwitz(const Mat& drift, double margin) {
    return max_eigen_real_part(drift) < -margin;
}

// ---------------------------------------------------------------------------

GaussianDensity GaussianDensity::from_moments(const Vec& mean, const Mat& covariance) {
    if (covariance.rows() != covariance.cols() || covariance.rows() != mean.size())
        throw Error(ErrorCode::InvalidDensity, "covariance dimension mismatch");
    Mat sym = (covariance + covariance.transpose()) / 2.0;
    Eigen::LLT<Mat> llt(sym);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::InvalidDensity, "covariance not positive definite");
    GaussianDensity g;
    g.mean_ = mean;
    g.covariance_ = sym;
    g.precision_ = llt.solve(Mat::Identity(sym.rows(), sym.cols()));
    g.precision_ = (g.precision_ + g.precision_.transpose()).eval() / 2.0;
    return g;
}

GaussianDensity GaussianDensity::from_precision(const Vec& mean, const Mat& precision) {
    Mat sym = (precision + precision.transpose()) / 2.0;
    Eigen::LLT<Mat> llt(sym);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::InvalidDensity, "precision not positive definite");
    Mat cov = llt.solve(Mat::Identity(sym.rows(), sym.cols()));
    GaussianDensity g = from_moments(mean, cov);
    return g;
}

double GaussianDensity::log_density(const Vec& x) const {
    const Vec d = x - mean_;
    const double quad = d.dot(precision_ * d);
    Eigen::LLT<Mat> llt(covariance_);
    const double logdet = 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
    return -0.5 * (quad + logdet + static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi));
}

Vec GaussianDensity::log_density_gradient(const Vec& x) const {
    return -(precision_ * (x - mean_));
}

double GaussianDensity::entropy() const {
    Eigen::LLT<Mat> llt(covariance_);
    const double logdet = 2.0 * Mat(llt.matrixL()).diagonal().array().log().sum();
    return 0.5 * (static_cast<double>(dim()) * (1.0 + std::log(2.0 * std::numbers::pi)) + logdet);
}

GaussianDensity GaussianDensity::marginal(const IndexSet& keep) const {
    return from_moments(subvector(mean_, keep), submatrix(covariance_, keep, keep));
}

GaussianDensity GaussianDensity::conditional(const IndexSet& keep, const IndexSet& given,
                                             const Vec& given_values) const {
    const Mat sigma_gg = submatrix(covariance_, given, given);
    Eigen::LLT<Mat> llt(sigma_gg);
    if (llt.info() != Eigen::Success)
        throw Error(ErrorCode::SingularBlock, "conditioning block not positive definite");
    const Mat sigma_kg = submatrix(covariance_, keep, given);
    const Mat gain = llt.solve(sigma_kg.transpose()).transpose();  // Sigma_kg Sigma_gg^-1
    const Vec mean = subvector(mean_, keep) + gain * (given_values - subvector(mean_, given));
    const Mat cov = submatrix(covariance_, keep, keep) - gain * sigma_kg.transpose();
    return from_moments(mean, (cov + cov.transpose()) / 2.0);
}

double GaussianDensity::max_roundtrip_error() const {
    return (precision_ * covariance_ - Mat::Identity(dim(), dim())).cwiseAbs().maxCoeff();
}

double gaussian_kl(const GaussianDensity& a, const GaussianDensity& b) {
    if (a.dim() != b.dim())
        throw Error(ErrorCode::InvalidDensity, "KL between densities of different dimension");
    const Index n = a.dim();
    const Vec d = b.mean() - a.mean();
    const double trace_term = (b.precision() * a.covariance()).trace();
    const double quad = d.dot(b.precision() * d);
    Eigen::LLT<Mat> la(a.covariance()), lb(b.covariance());
    const double logdet_a = 2.0 * Mat(la.matrixL()).diagonal().array().log().sum();
    const double logdet_b = 2.0 * Mat(lb.matrixL()).diagonal().array().log().sum();
    return 0.5 * (trace_term + quad - static_cast<double>(n) + logdet_b - logdet_a);
}

double expected_quadratic(const Mat& m, const Vec& mean, const Mat& cov) {
    return (m * cov).trace() + mean.dot(m * mean);
}

// ---------------------------------------------------------------------------

Index GridAxis::points() const {
    return static_cast<Index>(std::llround((upper - lower) / step)) + 1;
}

GridDensity::GridDensity(std::vector<GridAxis> axes, Vec values)
    : axes_(std::move(axes)), values_(std::move(values)) {
    if (dim() > 3)
        throw Error(ErrorCode::DimensionTooHigh, "grid densities support at most 3 dimensions");
    Index total = 1;
    for (const auto& ax : axes_) {
        if (ax.step <= 0.0 || ax.upper <= ax.lower)
            throw Error(ErrorCode::InvalidDensity, "grid axis must have positive extent and step");
        total *= ax.points();
    }
    if (values_.size() != total)
        throw Error(ErrorCode::InvalidDensity, "grid value count does not match axes");
    if (values_.minCoeff() < 0.0)
        throw Error(ErrorCode::InvalidDensity, "grid density values must be non-negative");
}

double GridDensity::cell_volume() const {
    double v = 1.0;
    for (const auto& ax : axes_) v *= ax.step;
    return v;
}

Index GridDensity::total_points() const { return values_.size(); }

Index GridDensity::flat_index(const std::vector<Index>& idx) const {
    Index flat = 0;
    for (std::size_t d = 0; d < axes_.size(); ++d) flat = flat * axes_[d].points() + idx[d];
    return flat;
}

std::vector<Index> GridDensity::unflatten(Index flat) const {
    std::vector<Index> idx(axes_.size());
    for (std::size_t d = axes_.size(); d-- > 0;) {
        idx[d] = flat % axes_[d].points();
        flat /= axes_[d].points();
    }
    return idx;
}

Vec GridDensity::point_at(const std::vector<Index>& idx) const {
    Vec x(dim());
    for (std::size_t d = 0; d < axes_.size(); ++d)
        x(static_cast<Index>(d)) = axes_[d].lower + static_cast<double>(idx[d]) * axes_[d].step;
    return x;
}

double GridDensity::mass() const { return values_.sum() * cell_volume(); }

bool GridDensity::is_normalized(double tol) const { return std::abs(mass() - 1.0) <= tol; }

void GridDensity::renormalize() {
    const double m = mass();
    if (m <= 0.0) throw Error(ErrorCode::InvalidDensity, "cannot renormalize zero-mass grid");
    values_ /= m;
}

GridDensity GridDensity::tabulate_gaussian(const GaussianDensity& g, double step,
                                           double span_sigmas) {
    std::vector<GridAxis> axes;
    for (Index d = 0; d < g.dim(); ++d) {
        const double sd = std::sqrt(g.covariance()(d, d));
        const double half = span_sigmas * sd;
        const Index half_cells = static_cast<Index>(std::ceil(half / step));
        GridAxis ax;
        ax.lower = g.mean()(d) - static_cast<double>(half_cells) * step;
        ax.upper = g.mean()(d) + static_cast<double>(half_cells) * step;
        ax.step = step;
        axes.push_back(ax);
    }
    Index total = 1;
    for (const auto& ax : axes) total *= ax.points();
    Vec values(total);
    GridDensity grid(axes, Vec::Zero(total));
    for (Index flat = 0; flat < total; ++flat) {
        values(flat) = std::exp(g.log_density(grid.point_at(grid.unflatten(flat))));
    }
    GridDensity out(axes, values);
    out.renormalize();
    return out;
}

}  // namespace feplab
