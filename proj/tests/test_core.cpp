#include <doctest.h>

#include <cmath>
#include <numbers>

#include "feplab/core.hpp"

using namespace feplab;

TEST_SUITE("core") {

TEST_CASE("partition: canonical four-way split validates") {
    PartitionSpec spec;
    spec.external = {0};
    spec.sensory = {1};
    spec.active = {2};
    spec.internal = {3};
    const PartitionSpec valid = validate_partition(spec, 4);
    CHECK(valid.blanket() == IndexSet{1, 2});
    CHECK(valid.autonomous() == IndexSet{2, 3});
    CHECK(valid.particular() == IndexSet{1, 2, 3});
}

TEST_CASE("partition: reused index raises OverlappingSets") {
    PartitionSpec spec;
    spec.external = {0};
    spec.sensory = {1};
    spec.active = {1};
    spec.internal = {2};
    try {
        validate_partition(spec, 3);
        FAIL("expected OverlappingSets");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::OverlappingSets);
    }
}

TEST_CASE("partition: empty internal raises EmptyRole") {
    PartitionSpec spec;
    spec.external = {0};
    spec.sensory = {1};
    spec.active = {2, 3};
    try {
        validate_partition(spec, 4);
        FAIL("expected EmptyRole");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyRole);
    }
}

TEST_CASE("partition: unassigned index raises IncompleteCover") {
    PartitionSpec spec;
    spec.external = {0};
    spec.sensory = {1};
    spec.active = {2};
    spec.internal = {3};
    try {
        validate_partition(spec, 5);
        FAIL("expected IncompleteCover");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IncompleteCover);
    }
}

TEST_CASE("partition: role sizes always cover the dimension") {
    // |e|+|s|+|a|+|i| = n for every valid partition.
    PartitionSpec spec;
    spec.external = {4, 0};
    spec.sensory = {2};
    spec.active = {5};
    spec.internal = {1, 3};
    const PartitionSpec valid = validate_partition(spec, 6);
    CHECK(valid.external.size() + valid.sensory.size() + valid.active.size() +
              valid.internal.size() ==
          6);
    CHECK(valid.external == IndexSet{0, 4});  // sorted
}

TEST_CASE("gaussian: precision/covariance round-trip") {
    Mat cov(3, 3);
    cov << 2.0, 0.4, 0.1, 0.4, 1.5, -0.2, 0.1, -0.2, 1.0;
    const GaussianDensity g = GaussianDensity::from_moments(Vec::Zero(3), cov);
    CHECK(g.max_roundtrip_error() < 1e-10);
}

TEST_CASE("gaussian: non-positive-definite covariance rejected") {
    Mat cov(2, 2);
    cov << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS((void)GaussianDensity::from_moments(Vec::Zero(2), cov), Error);
}

TEST_CASE("gaussian: log density matches direct formula in 1-D") {
    Mat cov(1, 1);
    cov << 4.0;
    const GaussianDensity g = GaussianDensity::from_moments(Vec::Zero(1), cov);
    Vec x(1);
    x << 1.0;
    const double expected = -0.5 * (1.0 / 4.0) - 0.5 * std::log(2.0 * std::numbers::pi * 4.0);
    CHECK(g.log_density(x) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("gaussian: textbook conditional, corr 0.6") {
    Mat cov(2, 2);
    cov << 1.0, 0.6, 0.6, 1.0;
    const GaussianDensity g = GaussianDensity::from_moments(Vec::Zero(2), cov);
    Vec b(1);
    b << 1.0;
    const GaussianDensity cond = g.conditional({0}, {1}, b);
    CHECK(cond.mean()(0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(cond.covariance()(0, 0) == doctest::Approx(0.64).epsilon(1e-12));
}

TEST_CASE("gaussian: KL is zero on identical densities and positive otherwise") {
    Mat cov(2, 2);
    cov << 1.0, 0.3, 0.3, 2.0;
    const GaussianDensity a = GaussianDensity::from_moments(Vec::Zero(2), cov);
    CHECK(gaussian_kl(a, a) == doctest::Approx(0.0).epsilon(1e-14));
    Vec shifted(2);
    shifted << 0.5, -0.2;
    const GaussianDensity b = GaussianDensity::from_moments(shifted, cov);
    CHECK(gaussian_kl(a, b) > 0.0);
    // Equal-covariance KL is the half quadratic form of the mean shift.
    const double quad = 0.5 * shifted.dot(a.precision() * shifted);
    CHECK(gaussian_kl(a, b) == doctest::Approx(quad).epsilon(1e-12));
}

TEST_CASE("grid: normalization restored to 1e-12 by renormalize") {
    GridAxis ax{-3.0, 3.0, 0.1};
    const Index n = ax.points();
    Vec values = Vec::Constant(n, 0.7);  // deliberately unnormalized
    GridDensity grid({ax}, values);
    CHECK(!grid.is_normalized());
    grid.renormalize();
    CHECK(std::abs(grid.mass() - 1.0) < 1e-12);
}

TEST_CASE("grid: dimension above 3 rejected") {
    GridAxis ax{-1.0, 1.0, 0.5};
    std::vector<GridAxis> axes(4, ax);
    const Index total = ax.points() * ax.points() * ax.points() * ax.points();
    try {
        GridDensity grid(axes, Vec::Ones(total));
        FAIL("expected DimensionTooHigh");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DimensionTooHigh);
    }
}

TEST_CASE("grid: tabulated gaussian is normalized and indexes consistently") {
    Mat cov(2, 2);
    cov << 1.0, 0.2, 0.2, 0.8;
    const GaussianDensity g = GaussianDensity::from_moments(Vec::Zero(2), cov);
    const GridDensity grid = GridDensity::tabulate_gaussian(g, 0.1);
    CHECK(grid.is_normalized(1e-6));
    const std::vector<Index> idx = {3, 5};
    CHECK(grid.unflatten(grid.flat_index(idx)) == idx);
}

TEST_CASE("linear system: hurwitz detection") {
    Mat stable(2, 2), unstable(2, 2);
    stable << -1.0, -1.0, 1.0, -1.0;
    unstable << 0.5, 0.0, 0.0, -1.0;
    CHECK(is_hurwitz(stable));
    CHECK(!is_hurwitz(unstable));
}

TEST_CASE("expected quadratic form matches trace identity") {
    Mat cov(2, 2);
    cov << 1.5, 0.2, 0.2, 0.9;
    Mat m(2, 2);
    m << 0.3, 1.0, -0.5, 2.0;
    Vec mean(2);
    mean << 0.4, -1.0;
    const double direct = (m * cov).trace() + mean.dot(m * mean);
    CHECK(expected_quadratic(m, mean, cov) == doctest::Approx(direct).epsilon(1e-14));
}

}  // TEST_SUITE
