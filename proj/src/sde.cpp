#include "feplab/sde.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "feplab/io.hpp"
#include "feplab/parallel.hpp"
#include "feplab/rng.hpp"

namespace feplab {

namespace {

constexpr double kBlowupNorm = 1e12;

// M with M M^T = 2 Gamma dt (symmetric square root; tolerates singular Gamma).
Mat noise_transform(const Mat& noise_amplitude, double dt) {
    Eigen::SelfAdjointEigenSolver<Mat> es(2.0 * dt * noise_amplitude);
    Vec lambda = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
}

void check_finite(const Vec& x0) {
    if (!x0.allFinite())
        throw Error(ErrorCode::NumericalBlowup, "initial state has non-finite entries");
}

Vec run_em_stream(const DriftFn& drift, const Mat& noise_tf, const Vec& x0,
                  const IntegratorConfig& cfg, std::uint64_t stream_seed, Mat* record) {
    CounterRng rng(stream_seed);
    const Index n = x0.size();
    Vec x = x0;
    Vec xi(n);
    if (record) record->row(0) = x.transpose();
    for (Index k = 0; k < cfg.n_steps; ++k) {
        for (Index d = 0; d < n; ++d) xi(d) = rng.next_normal();
        x += drift(x) * cfg.dt + noise_tf * xi;
        if (x.norm() > kBlowupNorm) {
            std::ostringstream msg;
            msg << "state norm exceeded 1e12 at step " << (k + 1) << " (seed " << stream_seed
                << ")";
            throw Error(ErrorCode::NumericalBlowup, msg.str());
        }
        if (record) record->row(k + 1) = x.transpose();
    }
    return x;
}

}  // namespace

std::string stability_warning(const LinearSystem& system, const IntegratorConfig& cfg) {
    const double rate = std::abs(max_eigen_real_part(system.drift));
    if (cfg.dt * rate >= 0.5) {
        std::ostringstream msg;
        msg << "dt * max|Re lambda(B)| = " << cfg.dt * rate
            << " >= 0.5; Euler-Maruyama may be unstable";
        return msg.str();
    }
    return {};
}

Trajectory integrate_em(const DriftFn& drift, const Mat& noise_amplitude, const Vec& x0,
                        const IntegratorConfig& cfg) {
    check_finite(x0);
    if (cfg.dt <= 0.0 || cfg.n_steps <= 0)
        throw Error(ErrorCode::InvalidDensity, "integrator config requires dt > 0 and n_steps > 0");
    const Mat noise_tf = noise_transform(noise_amplitude, cfg.dt);
    Trajectory traj;
    traj.seed = cfg.seed;
    traj.states.resize(cfg.n_steps + 1, x0.size());
    traj.times = Vec::LinSpaced(cfg.n_steps + 1, 0.0, cfg.dt * static_cast<double>(cfg.n_steps));
    run_em_stream(drift, noise_tf, x0, cfg, cfg.seed, &traj.states);
    return traj;
}

Trajectory integrate_em(const LinearSystem& system, const Vec& x0, const IntegratorConfig& cfg) {
    const Mat b = system.drift;
    return integrate_em([&b](const Vec& x) -> Vec { return b * x; }, system.noise_amplitude, x0,
                        cfg);
}

Mat ensemble_final_states(const LinearSystem& system, const Vec& x0, const IntegratorConfig& cfg,
                          Index n_traj) {
    check_finite(x0);
    const Mat noise_tf = noise_transform(system.noise_amplitude, cfg.dt);
    const Mat b = system.drift;
    auto drift = [&b](const Vec& x) -> Vec { return b * x; };
    Mat finals(n_traj, x0.size());
    std::vector<std::string> failures(static_cast<std::size_t>(n_traj));
    parallel_for_chunks(n_traj, [&](Index begin, Index end) {
        for (Index k = begin; k < end; ++k) {
            try {
                finals.row(k) =
                    run_em_stream(drift, noise_tf, x0, cfg, cfg.seed + static_cast<std::uint64_t>(k),
                                  nullptr)
                        .transpose();
            } catch (const Error& e) {
                failures[static_cast<std::size_t>(k)] = e.what();
            }
        }
    });
    for (Index k = 0; k < n_traj; ++k) {
        if (!failures[static_cast<std::size_t>(k)].empty()) {
            std::ostringstream msg;
            msg << "trajectory " << k << ": " << failures[static_cast<std::size_t>(k)];
            throw Error(ErrorCode::NumericalBlowup, msg.str());
        }
    }
    return finals;
}

std::vector<Mat> ensemble_checkpoint_states(const LinearSystem& system, const Mat& x0_rows,
                                            const IntegratorConfig& cfg,
                                            const std::vector<Index>& checkpoint_steps) {
    const Index n_traj = x0_rows.rows();
    const Index dim = x0_rows.cols();
    const Mat noise_tf = noise_transform(system.noise_amplitude, cfg.dt);
    const Mat b = system.drift;
    std::vector<Mat> checkpoints(checkpoint_steps.size(), Mat(n_traj, dim));
    std::vector<std::string> failures(static_cast<std::size_t>(n_traj));
    parallel_for_chunks(n_traj, [&](Index begin, Index end) {
        Vec x(dim), xi(dim);
        for (Index k = begin; k < end; ++k) {
            CounterRng rng(cfg.seed + static_cast<std::uint64_t>(k));
            x = x0_rows.row(k).transpose();
            std::size_t next_cp = 0;
            for (; next_cp < checkpoint_steps.size() && checkpoint_steps[next_cp] == 0; ++next_cp)
                checkpoints[next_cp].row(k) = x.transpose();
            for (Index step = 1; step <= cfg.n_steps && next_cp < checkpoint_steps.size(); ++step) {
                for (Index d = 0; d < dim; ++d) xi(d) = rng.next_normal();
                x += b * x * cfg.dt + noise_tf * xi;
                if (x.norm() > kBlowupNorm) {
                    failures[static_cast<std::size_t>(k)] = "state norm exceeded 1e12";
                    break;
                }
                while (next_cp < checkpoint_steps.size() && checkpoint_steps[next_cp] == step) {
                    checkpoints[next_cp].row(k) = x.transpose();
                    ++next_cp;
                }
            }
        }
    });
    for (Index k = 0; k < n_traj; ++k) {
        if (!failures[static_cast<std::size_t>(k)].empty()) {
            std::ostringstream msg;
            msg << "trajectory " << k << ": " << failures[static_cast<std::size_t>(k)];
            throw Error(ErrorCode::NumericalBlowup, msg.str());
        }
    }
    return checkpoints;
}

EnsembleStats moment_stats(const Mat& samples) {
    const Index n = samples.rows();
    if (n < 2)
        throw Error(ErrorCode::InsufficientSamples, "ensemble statistics require n_traj >= 2");
    EnsembleStats stats;
    stats.n_samples = n;
    stats.sample_mean = samples.colwise().mean();
    Mat centered = samples.rowwise() - stats.sample_mean.transpose();
    stats.sample_covariance = centered.transpose() * centered / static_cast<double>(n - 1);
    stats.standard_errors =
        (stats.sample_covariance.diagonal() / static_cast<double>(n)).cwiseSqrt();
    return stats;
}

EnsembleStats sample_ensemble(const LinearSystem& system, const Vec& x0,
                              const IntegratorConfig& cfg, Index n_traj) {
    if (n_traj < 2)
        throw Error(ErrorCode::InsufficientSamples, "sample_ensemble requires n_traj >= 2");
    return moment_stats(ensemble_final_states(system, x0, cfg, n_traj));
}

ErgodicityReport ergodicity_report(const LinearSystem& system, const Vec& x0,
                                   const IntegratorConfig& cfg, Index n_traj,
                                   Index ensemble_step_divisor) {
    ErgodicityReport report;
    const Trajectory traj = integrate_em(system, x0, cfg);
    const Index total = traj.states.rows();
    const Index burn = static_cast<Index>(std::llround(report.burn_in_fraction * total));
    const Index kept = total - burn;
    if (kept < 3)
        throw Error(ErrorCode::InsufficientSamples, "trajectory too short after burn-in");

    const Mat tail = traj.states.bottomRows(kept);
    // Second moments about zero: the NESS of a linear system is zero-mean.
    report.time_avg_cov = tail.transpose() * tail / static_cast<double>(kept);

    report.window_third_variances = Vec(3);
    const Index third = kept / 3;
    for (Index w = 0; w < 3; ++w) {
        const Mat win = tail.middleRows(w * third, third);
        report.window_third_variances(w) =
            (win.transpose() * win / static_cast<double>(third)).trace();
    }
    const Vec& thirds = report.window_third_variances;
    constexpr double kDriftMargin = 1.2;  // monotone rise beyond fluctuation scale
    report.non_stationary_flag =
        thirds(1) > thirds(0) * kDriftMargin && thirds(2) > thirds(1) * kDriftMargin;

    IntegratorConfig ens_cfg = cfg;
    // The ensemble only needs to outlive the transient: ten relaxation times
    // when the drift contracts, else the divisor fallback.
    const double rate = -max_eigen_real_part(system.drift);
    Index ens_steps;
    if (rate > 0.0)
        ens_steps = static_cast<Index>(std::ceil(10.0 / (rate * cfg.dt)));
    else
        ens_steps = cfg.n_steps / std::max<Index>(ensemble_step_divisor, 1);
    ens_cfg.n_steps = std::clamp<Index>(ens_steps, 10, cfg.n_steps);
    const Mat finals = ensemble_final_states(system, x0, ens_cfg, n_traj);
    report.ensemble_cov = finals.transpose() * finals / static_cast<double>(n_traj);

    // Elementwise relative gap with an absolute floor so fully contracted
    // (near-zero) moments read as zero discrepancy rather than 0/0 noise.
    constexpr double kAbsFloor = 1e-6;
    double max_rel = 0.0;
    for (Index r = 0; r < report.ensemble_cov.rows(); ++r)
        for (Index c = 0; c < report.ensemble_cov.cols(); ++c) {
            const double denom = std::max(std::abs(report.ensemble_cov(r, c)), kAbsFloor);
            max_rel = std::max(max_rel,
                               std::abs(report.time_avg_cov(r, c) - report.ensemble_cov(r, c)) /
                                   denom);
        }
    report.max_rel_discrepancy = max_rel;
    return report;
}

std::string trajectory_to_csv(const Trajectory& traj) {
    std::ostringstream out;
    out << "t";
    for (Index d = 0; d < traj.dim(); ++d) out << ",x" << d;
    out << "\n";
    for (Index r = 0; r < traj.times.size(); ++r) {
        out << format_double(traj.times(r));
        for (Index d = 0; d < traj.dim(); ++d) out << "," << format_double(traj.states(r, d));
        out << "\n";
    }
    return out.str();
}

}  // namespace feplab
