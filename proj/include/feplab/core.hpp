#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "feplab/errors.hpp"

namespace feplab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;
using IndexSet = std::vector<Index>;

// ---------------------------------------------------------------------------
// Index-set slicing. Free functions so callers can slice any dense expression
// without materialising permutation matrices.
// ---------------------------------------------------------------------------

template <typename Derived>
Mat submatrix(const Eigen::MatrixBase<Derived>& m, const IndexSet& rows,
              const IndexSet& cols) {
    Mat out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
            out(static_cast<Index>(r), static_cast<Index>(c)) = m(rows[r], cols[c]);
    return out;
}

template <typename Derived>
Vec subvector(const Eigen::MatrixBase<Derived>& v, const IndexSet& idx) {
    Vec out(static_cast<Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Index>(k)) = v(idx[k]);
    return out;
}

// Scatter `values` into a zero vector of dimension n at positions idx.
Vec scatter(const Vec& values, const IndexSet& idx, Index n);

IndexSet index_union(const IndexSet& a, const IndexSet& b);
IndexSet all_indices(Index n);

// Position of each element of `subset` inside `superset` (throws if missing).
IndexSet positions_in(const IndexSet& subset, const IndexSet& superset);

// ---------------------------------------------------------------------------
// Partition of the state coordinates into external / sensory / active /
// internal roles. Derived sets (blanket, autonomous, particular) are always
// computed, never stored.
// ---------------------------------------------------------------------------

struct PartitionSpec {
    IndexSet external;
    IndexSet sensory;
    IndexSet active;
    IndexSet internal;

    IndexSet blanket() const { return index_union(sensory, active); }
    IndexSet autonomous() const { return index_union(active, internal); }
    IndexSet particular() const { return index_union(index_union(internal, sensory), active); }
};

// Checks pairwise disjointness, full coverage of {0..n-1} and non-empty
// external/internal roles. Returns the spec with each role sorted.
PartitionSpec validate_partition(const PartitionSpec& spec, Index n);

// ---------------------------------------------------------------------------
// Linear Langevin system dx/dt = B x + omega, omega white Gaussian with
// covariance 2*Gamma.
// ---------------------------------------------------------------------------

struct LinearSystem {
    Mat drift;            // B, n x n
    Mat noise_amplitude;  // Gamma, n x n, symmetric PSD

    Index dim() const { return drift.rows(); }
};

LinearSystem make_linear_system(const Mat& drift, const Mat& noise_amplitude);

// Largest real part over the spectrum of B.
double max_eigen_real_part(const Mat& drift);
bool is_hurwitz(const Mat& drift, double margin = 0.0);

// ---------------------------------------------------------------------------
// Gaussian density with cached precision.
// ---------------------------------------------------------------------------

class GaussianDensity {
public:
    GaussianDensity() = default;

    static GaussianDensity from_moments(const Vec& mean, const Mat& covariance);
    static GaussianDensity from_precision(const Vec& mean, const Mat& precision);

    Index dim() const { return mean_.size(); }
    const Vec& mean() const { return mean_; }
    const Mat& covariance() const { return covariance_; }
    const Mat& precision() const { return precision_; }

    double log_density(const Vec& x) const;
    // Gradient of ln p at x: -Pi (x - mu).
    Vec log_density_gradient(const Vec& x) const;
    double entropy() const;

    // Marginal over the given coordinates.
    GaussianDensity marginal(const IndexSet& keep) const;
    // Conditional of `keep` given observed values at `given`.
    GaussianDensity conditional(const IndexSet& keep, const IndexSet& given,
                                const Vec& given_values) const;

    double max_roundtrip_error() const;  // max|Pi*Sigma - I|

private:
    Vec mean_;
    Mat covariance_;
    Mat precision_;
};

// KL[a || b] for Gaussians of equal dimension, in nats.
double gaussian_kl(const GaussianDensity& a, const GaussianDensity& b);

// E_{N(mean,cov)}[x^T M x]
double expected_quadratic(const Mat& m, const Vec& mean, const Mat& cov);

// ---------------------------------------------------------------------------
// Tabulated density on a regular grid (dimension <= 3).
// ---------------------------------------------------------------------------

struct GridAxis {
    double lower = 0.0;
    double upper = 0.0;
    double step = 0.0;

    Index points() const;
};

class GridDensity {
public:
    GridDensity() = default;
    GridDensity(std::vector<GridAxis> axes, Vec values);

    Index dim() const { return static_cast<Index>(axes_.size()); }
    const std::vector<GridAxis>& axes() const { return axes_; }
    const Vec& values() const { return values_; }

    double cell_volume() const;
    Index total_points() const;

    Index flat_index(const std::vector<Index>& idx) const;
    std::vector<Index> unflatten(Index flat) const;
    Vec point_at(const std::vector<Index>& idx) const;

    double mass() const;  // sum * cell volume
    bool is_normalized(double tol = 1e-6) const;
    void renormalize();

    // Tabulates a Gaussian on [mean - span*sd, mean + span*sd] per axis.
    static GridDensity tabulate_gaussian(const GaussianDensity& g, double step,
                                         double span_sigmas = 6.0);

private:
    std::vector<GridAxis> axes_;
    Vec values_;
};

// ---------------------------------------------------------------------------
// Sample path of the SDE.
// ---------------------------------------------------------------------------

struct Trajectory {
    Vec times;      // strictly increasing, uniform spacing
    Mat states;     // one row per time point
    std::uint64_t seed = 0;

    Index n_steps() const { return times.size() > 0 ? times.size() - 1 : 0; }
    Index dim() const { return states.cols(); }
};

}  // namespace feplab
