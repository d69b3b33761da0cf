#include "feplab/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "feplab/active.hpp"
#include "feplab/blanket.hpp"
#include "feplab/helmholtz.hpp"
#include "feplab/inference.hpp"
#include "feplab/io.hpp"
#include "feplab/rng.hpp"
#include "feplab/sde.hpp"
#include "feplab/stationary.hpp"

namespace feplab {

namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config parsing: strict flat key = value schema.
// ---------------------------------------------------------------------------

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_number(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || t.empty())
        throw Error(ErrorCode::ConfigParse, "malformed number for key " + key + ": '" + t + "'");
    return v;
}

Index parse_integer(const std::string& text, const std::string& key) {
    const double v = parse_number(text, key);
    if (v != std::floor(v) || std::abs(v) > 9e15)
        throw Error(ErrorCode::ConfigParse, "key " + key + " requires an integer");
    return static_cast<Index>(v);
}

// Splits "a, b, c" at top nesting level.
std::vector<std::string> split_top_level(const std::string& body, const std::string& key) {
    std::vector<std::string> parts;
    int depth = 0;
    std::string current;
    for (char ch : body) {
        if (ch == '[') ++depth;
        if (ch == ']') --depth;
        if (depth < 0) throw Error(ErrorCode::ConfigParse, "unbalanced brackets in " + key);
        if (ch == ',' && depth == 0) {
            parts.push_back(current);
            current.clear();
        } else {
            current += ch;
        }
    }
    if (depth != 0) throw Error(ErrorCode::ConfigParse, "unbalanced brackets in " + key);
    if (!trim(current).empty() || !parts.empty()) parts.push_back(current);
    return parts;
}

std::string strip_brackets(const std::string& text, const std::string& key) {
    const std::string t = trim(text);
    if (t.size() < 2 || t.front() != '[' || t.back() != ']')
        throw Error(ErrorCode::ConfigParse, "key " + key + " requires a bracketed list");
    return t.substr(1, t.size() - 2);
}

Vec parse_vector(const std::string& text, const std::string& key) {
    const auto parts = split_top_level(strip_brackets(text, key), key);
    Vec out(static_cast<Index>(parts.size()));
    for (std::size_t k = 0; k < parts.size(); ++k)
        out(static_cast<Index>(k)) = parse_number(parts[k], key);
    return out;
}

IndexSet parse_index_list(const std::string& text, const std::string& key) {
    const auto parts = split_top_level(strip_brackets(text, key), key);
    IndexSet out;
    for (const auto& p : parts) {
        if (trim(p).empty()) continue;  // allows []
        out.push_back(parse_integer(p, key));
    }
    return out;
}

Mat parse_matrix(const std::string& text, const std::string& key) {
    const auto row_texts = split_top_level(strip_brackets(text, key), key);
    std::vector<Vec> rows;
    for (const auto& r : row_texts) {
        if (trim(r).empty()) continue;
        rows.push_back(parse_vector(r, key));
    }
    if (rows.empty()) throw Error(ErrorCode::ConfigParse, "empty matrix for key " + key);
    Mat out(static_cast<Index>(rows.size()), rows.front().size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != out.cols())
            throw Error(ErrorCode::ConfigSchema, "ragged matrix rows for key " + key);
        out.row(static_cast<Index>(r)) = rows[r].transpose();
    }
    return out;
}

}  // namespace

SystemPreset lookup_preset(const std::string& name) {
    auto blanket4_sigma = []() {
        Mat pi(4, 4);
        pi << 2.0, 0.6, 0.3, 0.0,
              0.6, 2.0, 0.6, 0.3,
              0.3, 0.6, 2.0, 0.6,
              0.0, 0.3, 0.6, 2.0;
        return pi;
    };
    PartitionSpec four_roles;
    four_roles.external = {0};
    four_roles.sensory = {1};
    four_roles.active = {2};
    four_roles.internal = {3};

    if (name == "ou1d") {
        Mat b(1, 1), g(1, 1);
        b << -1.0;
        g << 1.0;
        return SystemPreset{make_linear_system(b, g), std::nullopt};
    }
    if (name == "rotation2d") {
        Mat b(2, 2);
        b << -1.0, -1.0, 1.0, -1.0;
        return SystemPreset{make_linear_system(b, Mat::Identity(2, 2)), std::nullopt};
    }
    if (name == "blanket4") {
        // Blanket-compatible precision (Pi_ei = 0), Gamma = I, Q = 0.
        const Mat pi = blanket4_sigma();
        return SystemPreset{make_linear_system(-pi, Mat::Identity(4, 4)), four_roles};
    }
    if (name == "blanket4-coupled") {
        // Same NESS density with an external-sensory solenoidal coupling.
        const Mat pi = blanket4_sigma();
        Mat q = Mat::Zero(4, 4);
        q(0, 1) = 0.5;
        q(1, 0) = -0.5;
        const Mat b = -(Mat::Identity(4, 4) - q) * pi;
        return SystemPreset{make_linear_system(b, Mat::Identity(4, 4)), four_roles};
    }
    throw Error(ErrorCode::ConfigSchema, "unknown system preset: " + name);
}

ExperimentConfig parse_experiment_config(const std::string& text) {
    ExperimentConfig config;
    std::optional<std::string> preset_name;
    std::optional<Mat> drift, noise;
    PartitionSpec partition;
    bool has_partition = false;

    std::istringstream stream(text);
    std::string line;
    Index line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            std::ostringstream msg;
            msg << "line " << line_no << ": expected key = value";
            throw Error(ErrorCode::ConfigParse, msg.str());
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (value.empty())
            throw Error(ErrorCode::ConfigParse, "empty value for key " + key);

        if (key == "experiment") config.experiment = value;
        else if (key == "seed") config.seed = static_cast<std::uint64_t>(parse_integer(value, key));
        else if (key == "output_dir") config.output_dir = value;
        else if (key == "system.preset") preset_name = value;
        else if (key == "system.drift") drift = parse_matrix(value, key);
        else if (key == "system.noise") noise = parse_matrix(value, key);
        else if (key == "partition.external") { partition.external = parse_index_list(value, key); has_partition = true; }
        else if (key == "partition.sensory") { partition.sensory = parse_index_list(value, key); has_partition = true; }
        else if (key == "partition.active") { partition.active = parse_index_list(value, key); has_partition = true; }
        else if (key == "partition.internal") { partition.internal = parse_index_list(value, key); has_partition = true; }
        else if (key == "x0") config.x0 = parse_vector(value, key);
        else if (key == "dt") config.dt = parse_number(value, key);
        else if (key == "horizon") config.horizon = parse_number(value, key);
        else if (key == "tolerance") config.tolerance = parse_number(value, key);
        else if (key == "grid_step") config.grid_step = parse_number(value, key);
        else if (key == "n_steps") config.n_steps = parse_integer(value, key);
        else if (key == "n_traj") config.n_traj = parse_integer(value, key);
        else if (key == "n_eval") config.n_eval = parse_integer(value, key);
        else if (key == "n_samples") config.n_samples = parse_integer(value, key);
        else throw Error(ErrorCode::ConfigSchema, "unknown config key: " + key);
    }

    if (preset_name && (drift || noise))
        throw Error(ErrorCode::ConfigSchema, "system.preset conflicts with inline system matrices");
    if (preset_name) {
        SystemPreset preset = lookup_preset(*preset_name);
        config.system = preset.system;
        if (!has_partition && preset.partition) {
            partition = *preset.partition;
            has_partition = true;
        }
    } else if (drift || noise) {
        if (!drift || !noise)
            throw Error(ErrorCode::ConfigSchema, "system.drift and system.noise must both be given");
        if (drift->rows() != drift->cols() || noise->rows() != drift->rows() ||
            noise->cols() != drift->cols())
            throw Error(ErrorCode::ConfigSchema, "system matrices must be square and same size");
        config.system = make_linear_system(*drift, *noise);
    }
    if (has_partition) {
        if (!config.system)
            throw Error(ErrorCode::ConfigSchema, "partition given without a system");
        config.partition = validate_partition(partition, config.system->dim());
    }
    if (config.x0 && config.system && config.x0->size() != config.system->dim())
        throw Error(ErrorCode::ConfigSchema, "x0 dimension does not match the system");
    return config;
}

const std::vector<std::string>& experiment_registry() {
    static const std::vector<std::string> names = {
        "simulate",        "stationary-check", "helmholtz-roundtrip", "blanket-report",
        "marginal-flow",   "fep-lemma",        "vfe-suite",           "efe-suite",
        "agent-relax",     "geometry-suite",
    };
    return names;
}

void validate_experiment_config(const ExperimentConfig& config) {
    const auto& registry = experiment_registry();
    if (std::find(registry.begin(), registry.end(), config.experiment) == registry.end())
        throw Error(ErrorCode::ExperimentUnknown, "unknown experiment: " + config.experiment);
}

namespace {

// ---------------------------------------------------------------------------
// Artifact staging: files land in a staging directory and are moved into the
// output directory one atomic rename at a time.
// ---------------------------------------------------------------------------

class ArtifactStage {
public:
    explicit ArtifactStage(const std::string& output_dir) : out_dir_(output_dir) {
        const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
        stage_dir_ = out_dir_.string() + ".staging-" + std::to_string(stamp);
        fs::create_directories(stage_dir_);
    }

    ~ArtifactStage() {
        std::error_code ec;
        fs::remove_all(stage_dir_, ec);
    }

    void add(const std::string& name, const std::string& content) {
        write_text_file((stage_dir_ / name).string(), content);
        names_.push_back(name);
    }

    void commit() {
        fs::create_directories(out_dir_);
        for (const auto& name : names_) fs::rename(stage_dir_ / name, out_dir_ / name);
    }

private:
    fs::path out_dir_;
    fs::path stage_dir_;
    std::vector<std::string> names_;
};

using Rows = std::vector<std::pair<std::string, double>>;

LinearSystem system_or(const ExperimentConfig& config, const std::string& preset) {
    if (config.system) return *config.system;
    return lookup_preset(preset).system;
}

PartitionSpec partition_or(const ExperimentConfig& config, const std::string& preset) {
    if (config.partition) return *config.partition;
    const auto p = lookup_preset(preset);
    if (!p.partition)
        throw Error(ErrorCode::ConfigSchema, "experiment requires a partition");
    return *p.partition;
}

void push_vector_rows(Rows& rows, const std::string& prefix, const Vec& v) {
    for (Index d = 0; d < v.size(); ++d)
        rows.emplace_back(prefix + std::to_string(d), v(d));
}

// --------------------------- experiment bodies ----------------------------

void exp_simulate(const ExperimentConfig& config, ArtifactStage& stage) {
    const LinearSystem system = system_or(config, "ou1d");
    IntegratorConfig cfg;
    cfg.dt = config.dt.value_or(1e-3);
    cfg.n_steps = config.n_steps.value_or(10000);
    cfg.seed = config.seed;
    const Vec x0 = config.x0.value_or(Vec::Ones(system.dim()));

    const std::string warning = stability_warning(system, cfg);
    if (!warning.empty()) std::cerr << "warning: " << warning << "\n";

    const Trajectory traj = integrate_em(system, x0, cfg);
    stage.add("trajectory.csv", trajectory_to_csv(traj));

    Rows rows;
    rows.emplace_back("dt", cfg.dt);
    rows.emplace_back("n_steps", static_cast<double>(cfg.n_steps));
    push_vector_rows(rows, "final_x", traj.states.row(traj.states.rows() - 1).transpose());
    const Index burn = traj.states.rows() / 10;
    const Mat tail = traj.states.bottomRows(traj.states.rows() - burn);
    push_vector_rows(rows, "path_second_moment_x",
                     (tail.array().square().colwise().mean()).matrix().transpose());
    stage.add("results.csv", rows_to_csv(rows));
}

void exp_stationary_check(const ExperimentConfig& config, ArtifactStage& stage) {
    const LinearSystem system = system_or(config, "rotation2d");
    const double h = config.grid_step.value_or(0.05);
    const GaussianDensity ness = solve_lyapunov(system);

    Rows rows;
    rows.emplace_back("lyapunov_residual", lyapunov_residual(system, ness.covariance()));

    const GridDensity coarse = GridDensity::tabulate_gaussian(ness, h);
    const FPResidualReport rep_h = fp_residual(system, coarse);
    const GridDensity fine = GridDensity::tabulate_gaussian(ness, h / 2.0);
    const FPResidualReport rep_h2 = fp_residual(system, fine);
    rows.emplace_back("grid_step", h);
    rows.emplace_back("fp_l2", rep_h.l2_norm);
    rows.emplace_back("fp_linf", rep_h.linf_norm);
    rows.emplace_back("fp_l2_half_step", rep_h2.l2_norm);
    rows.emplace_back("convergence_order", std::log2(rep_h.l2_norm / rep_h2.l2_norm));
    stage.add("results.csv", rows_to_csv(rows));
    stage.add("density.csv", grid_to_csv(coarse));

    if (system.dim() == 2) {
        const Index nx = coarse.axes()[0].points();
        const Index ny = coarse.axes()[1].points();
        const Index stride = std::max<Index>(1, nx / 80);
        Mat field(ny / stride, nx / stride);
        for (Index r = 0; r < field.rows(); ++r)
            for (Index c = 0; c < field.cols(); ++c)
                field(r, c) = rep_h.residual_field(coarse.flat_index({c * stride, r * stride}));
        stage.add("residual.svg", svg_heatmap("stationarity residual", field));
    }
}

void exp_helmholtz_roundtrip(const ExperimentConfig& config, ArtifactStage& stage) {
    const LinearSystem system = system_or(config, "rotation2d");
    const HelmholtzDecomposition decomp = decompose_linear(system);
    const LinearSystem rebuilt = reconstruct_drift(decomp);

    Rows rows;
    rows.emplace_back("max_abs_q_antisymmetry",
                      (decomp.q + decomp.q.transpose()).cwiseAbs().maxCoeff());
    rows.emplace_back("reconstruction_error",
                      (rebuilt.drift - system.drift).cwiseAbs().maxCoeff());
    rows.emplace_back("lyapunov_residual",
                      lyapunov_residual(system, decomp.density.covariance()));
    rows.emplace_back("flow_orthogonality", flow_orthogonality_expectation(decomp));
    const StationarityReport stat = stationarity_identity_check(decomp, 256, config.seed);
    rows.emplace_back("fp_norm", stat.fp_norm);
    rows.emplace_back("solenoidal_divergence_norm", stat.solenoidal_divergence_norm);
    stage.add("results.csv", rows_to_csv(rows));
    stage.add("decomposition.csv", decomposition_to_csv(decomp));
}

void exp_blanket_report(const ExperimentConfig& config, ArtifactStage& stage) {
    const LinearSystem system = system_or(config, "blanket4");
    const PartitionSpec partition = partition_or(config, "blanket4");
    const double tol = config.tolerance.value_or(kExactBlanketTolerance);
    const GaussianDensity ness = solve_lyapunov(system);

    const BlanketReport blanket = blanket_check_gaussian(ness, partition, tol);
    const double kl = kl_factorization(ness, partition);
    const ConnectivityReport conn = connectivity_report(system, partition, 1e-6, 1e-6);

    Rows rows;
    rows.emplace_back("max_cross_precision", blanket.max_cross_precision);
    rows.emplace_back("passes", blanket.passes ? 1.0 : 0.0);
    rows.emplace_back("tolerance", blanket.tolerance);
    rows.emplace_back("kl_factorization", kl);
    rows.emplace_back("connectivity_agreement_ratio", conn.agreement_ratio);
    stage.add("results.csv", rows_to_csv(rows));
}

void exp_marginal_flow(const ExperimentConfig& config, ArtifactStage& stage) {
    const LinearSystem system = system_or(config, "blanket4-coupled");
    const PartitionSpec partition = partition_or(config, "blanket4-coupled");
    const Index n_eval = config.n_eval.value_or(64);
    const HelmholtzDecomposition decomp = decompose_linear(system);

    const MarginalFlowReport ext =
        marginal_flow_check(system, partition, decomp, FlowSubset::External, n_eval, config.seed);
    const MarginalFlowReport aut =
        marginal_flow_check(system, partition, decomp, FlowSubset::Autonomous, n_eval, config.seed);

    Rows rows;
    rows.emplace_back("external_max_abs_gap", ext.max_abs_gap);
    rows.emplace_back("external_gap_own_marginal", ext.max_abs_gap_own_marginal);
    rows.emplace_back("autonomous_max_abs_gap", aut.max_abs_gap);
    rows.emplace_back("autonomous_gap_own_marginal", aut.max_abs_gap_own_marginal);
    rows.emplace_back("solenoidal_coupling_norm", ext.solenoidal_coupling_norm);
    stage.add("results.csv", rows_to_csv(rows));
}

void exp_fep_lemma(const ExperimentConfig& config, ArtifactStage& stage) {
    const LinearSystem system = system_or(config, "blanket4");
    const PartitionSpec partition = partition_or(config, "blanket4");
    FepLemmaConfig cfg;
    cfg.n_blanket_samples = config.n_samples.value_or(8);
    cfg.n_traj = config.n_traj.value_or(1250);
    cfg.horizon = config.horizon.value_or(0.2);
    cfg.dt = config.dt.value_or(0.005);
    cfg.seed = config.seed;

    const FepLemmaReport report = fep_lemma_check(system, partition, cfg);
    stage.add("results.csv", rows_to_csv(fep_lemma_rows(report)));

    std::vector<std::pair<double, double>> points;
    for (Index j = 0; j < report.chain_rule_flows.rows(); ++j)
        points.emplace_back(report.chain_rule_flows(j, 0), report.simulated_flows(j, 0));
    stage.add("flow_alignment.svg",
              svg_scatter("chain-rule vs simulated internal-mode flow", points, "chain-rule flow",
                          "simulated flow"));
}

void exp_vfe_suite(const ExperimentConfig& config, ArtifactStage& stage) {
    Rows rows;
    // Two-hypothesis worked model; expected values derive from direct
    // enumeration in the tests, not from any external source.
    Vec prior(2), lik(2);
    prior << 0.5, 0.5;
    lik << 0.8, 0.4;
    const double evidence = 0.6;
    Vec posterior(2);
    posterior << prior(0) * lik(0) / evidence, prior(1) * lik(1) / evidence;
    const FreeEnergyReport f_post = vfe_discrete(make_variational(posterior), prior, lik);
    Vec uniform(2);
    uniform << 0.5, 0.5;
    const FreeEnergyReport f_unif = vfe_discrete(make_variational(uniform), prior, lik);
    Vec point(2);
    point << 1.0, 0.0;
    const FreeEnergyReport f_point = vfe_discrete(make_variational(point), prior, lik);
    rows.emplace_back("f_exact_posterior", f_post.value);
    rows.emplace_back("slack_exact_posterior", f_post.evidence_bound_slack);
    rows.emplace_back("f_uniform", f_unif.value);
    rows.emplace_back("f_point_mass", f_point.value);

    const Index n_models = config.n_samples.value_or(1000);
    CounterRng rng(config.seed, 9001);
    double min_slack = 1e300, max_decomp_gap = 0.0, max_posterior_slack = 0.0;
    for (Index m = 0; m < n_models; ++m) {
        const Index dim = 2 + static_cast<Index>(rng.next_u64() % 5);
        Vec pr(dim), lk(dim), qv(dim);
        for (Index h = 0; h < dim; ++h) {
            pr(h) = rng.next_uniform() + 0.01;
            lk(h) = rng.next_uniform() * 0.95 + 0.05;
            qv(h) = rng.next_uniform() + 0.01;
        }
        pr /= pr.sum();
        qv /= qv.sum();
        const FreeEnergyReport rep = vfe_discrete(make_variational(qv), pr, lk);
        min_slack = std::min(min_slack, rep.evidence_bound_slack);
        max_decomp_gap =
            std::max({max_decomp_gap, std::abs(rep.value - (rep.energy - rep.entropy)),
                      std::abs(rep.value - (-rep.accuracy + rep.complexity))});
        Vec post = (pr.array() * lk.array()).matrix();
        post /= post.sum();
        const FreeEnergyReport rep_post = vfe_discrete(make_variational(post), pr, lk);
        max_posterior_slack = std::max(max_posterior_slack,
                                       std::abs(rep_post.evidence_bound_slack));
    }
    rows.emplace_back("random_models", static_cast<double>(n_models));
    rows.emplace_back("min_slack_random", min_slack);
    rows.emplace_back("max_decomposition_gap", max_decomp_gap);
    rows.emplace_back("max_posterior_slack", max_posterior_slack);
    stage.add("results.csv", rows_to_csv(rows));
}

void exp_efe_suite(const ExperimentConfig& config, ArtifactStage& stage) {
    Rows rows;
    Mat table(2, 2);
    table << 0.4, 0.1, 0.2, 0.3;
    const DiscreteJoint worked = make_discrete_joint(table);
    const EfeReport at_eq = efe_discrete(worked, worked);
    rows.emplace_back("g_equilibrium", at_eq.value);
    rows.emplace_back("slack_equilibrium", at_eq.bound_slack);

    Mat uniform_table = Mat::Constant(2, 2, 0.25);
    const DiscreteJoint uniform = make_discrete_joint(uniform_table);
    const EfeReport off_eq = efe_discrete(uniform, worked);
    double kl_direct = 0.0;
    for (Index r = 0; r < 2; ++r)
        for (Index c = 0; c < 2; ++c)
            kl_direct += uniform_table(r, c) * std::log(uniform_table(r, c) / table(r, c));
    rows.emplace_back("g_uniform_pred", off_eq.value);
    rows.emplace_back("slack_uniform_pred", off_eq.bound_slack);
    rows.emplace_back("slack_vs_kl_gap", std::abs(off_eq.bound_slack - kl_direct));

    const Index n_pairs = config.n_samples.value_or(1000);
    CounterRng rng(config.seed, 9002);
    double max_identity_gap = 0.0, min_slack = 1e300, max_slack_kl_gap = 0.0;
    for (Index m = 0; m < n_pairs; ++m) {
        const Index ne = 2 + static_cast<Index>(rng.next_u64() % 3);
        const Index npi = 2 + static_cast<Index>(rng.next_u64() % 3);
        Mat pt(ne, npi), tt(ne, npi);
        for (Index r = 0; r < ne; ++r)
            for (Index c = 0; c < npi; ++c) {
                pt(r, c) = rng.next_uniform() + 0.01;
                tt(r, c) = rng.next_uniform() + 0.01;
            }
        pt /= pt.sum();
        tt /= tt.sum();
        const EfeReport rep = efe_discrete(make_discrete_joint(pt), make_discrete_joint(tt));
        max_identity_gap =
            std::max(max_identity_gap, std::abs(rep.ambiguity + rep.risk - rep.value));
        min_slack = std::min(min_slack, rep.bound_slack);
        double kl = 0.0;
        for (Index r = 0; r < ne; ++r)
            for (Index c = 0; c < npi; ++c) kl += pt(r, c) * std::log(pt(r, c) / tt(r, c));
        max_slack_kl_gap = std::max(max_slack_kl_gap, std::abs(rep.bound_slack - kl));
    }
    rows.emplace_back("random_pairs", static_cast<double>(n_pairs));
    rows.emplace_back("max_identity_gap", max_identity_gap);
    rows.emplace_back("min_slack_random", min_slack);
    rows.emplace_back("max_slack_vs_kl_gap", max_slack_kl_gap);
    stage.add("results.csv", rows_to_csv(rows));
}

void exp_agent_relax(const ExperimentConfig& config, ArtifactStage& stage) {
    const GaussianDensity target =
        GaussianDensity::from_moments(Vec::Zero(2), Mat::Identity(2, 2));
    const Mat gamma = Mat::Identity(2, 2);
    Mat q(2, 2);
    q << 0.0, -1.0, 1.0, 0.0;

    IntegratorConfig cfg;
    cfg.dt = config.dt.value_or(5e-3);
    const double horizon = config.horizon.value_or(10.0);
    cfg.n_steps = static_cast<Index>(std::llround(horizon / cfg.dt));
    cfg.seed = config.seed;
    const Index n_traj = config.n_traj.value_or(10000);
    const Vec x0 = config.x0.value_or(Vec::Zero(2));

    const AgentRelaxReport report = agent_relax(target, gamma, q, x0, cfg, n_traj);
    stage.add("kl_curve.csv", curve_to_csv("t", "kl", report.kl_curve));
    stage.add("kl_curve.svg", svg_line_chart("KL to target density", report.kl_curve));

    // Solenoidal invariance: distinct antisymmetric Q, same recovered Sigma.
    double sigma_invariance_gap = 0.0;
    for (double scale : {0.0, 1.0, 2.0}) {
        const LinearSystem sys = synthesize_system(target, gamma, scale * q);
        const GaussianDensity recovered = solve_lyapunov(sys);
        sigma_invariance_gap =
            std::max(sigma_invariance_gap,
                     (recovered.covariance() - target.covariance()).cwiseAbs().maxCoeff());
    }

    Rows rows;
    rows.emplace_back("final_kl", report.final_kl);
    rows.emplace_back("n_traj", static_cast<double>(n_traj));
    rows.emplace_back("horizon", horizon);
    rows.emplace_back("sigma_invariance_gap", sigma_invariance_gap);
    stage.add("results.csv", rows_to_csv(rows));
}

void exp_geometry_suite(const ExperimentConfig& config, ArtifactStage& stage) {
    Rows rows;
    Mat cov(2, 2);
    cov << 2.0, 1.0, 1.0, 2.0;
    Vec mean = Vec::Zero(2);
    Vec probe(2);
    probe << 0.01, -0.005;
    const MetricReport metric = fisher_metric_gaussian(cov, mean, probe);
    rows.emplace_back("kl_quadratic_gap", metric.kl_quadratic_gap);

    // Central finite-difference Hessian of the KL in the probe direction.
    const GaussianDensity base = GaussianDensity::from_moments(mean, cov);
    double fd_err = 0.0;
    const double eps = 1e-4;
    for (Index r = 0; r < 2; ++r)
        for (Index c = 0; c < 2; ++c) {
            Vec dr = Vec::Zero(2), dc = Vec::Zero(2);
            dr(r) = eps;
            dc(c) = eps;
            auto kl_at = [&](const Vec& d) {
                return gaussian_kl(base, GaussianDensity::from_moments(mean + d, cov));
            };
            const double hess = (kl_at(dr + dc) - kl_at(dr - dc) - kl_at(-dr + dc) + kl_at(-dr - dc)) /
                                (4.0 * eps * eps);
            fd_err = std::max(fd_err, std::abs(hess - metric.fisher(r, c)));
        }
    rows.emplace_back("fisher_fd_hessian_max_err", fd_err);

    const LinearSystem system = system_or(config, "blanket4");
    const PartitionSpec partition = partition_or(config, "blanket4");
    const GaussianDensity ness = solve_lyapunov(system);
    const DualGeometryReport dual = dual_geometry_report(ness, partition);
    rows.emplace_back("intrinsic_fisher_00", dual.intrinsic_fisher(0, 0));
    rows.emplace_back("extrinsic_fisher_00", dual.extrinsic_fisher(0, 0));

    // Finite-difference oracle of the extrinsic pullback metric.
    const SyncMap sync = sigma_linear(ness, partition);
    const IndexSet b = partition.blanket();
    const ConditionalMoments cm = conditional_moments(ness, partition, subvector(ness.mean(), b));
    const GaussianDensity cond_e = GaussianDensity::from_moments(cm.e_mode, cm.cond_cov_e);
    double ext_fd_err = 0.0;
    const double eps2 = 1e-4;
    for (Index r = 0; r < dual.extrinsic_fisher.rows(); ++r)
        for (Index c = 0; c < dual.extrinsic_fisher.cols(); ++c) {
            Vec dr = Vec::Zero(dual.extrinsic_fisher.rows());
            Vec dc = Vec::Zero(dual.extrinsic_fisher.cols());
            dr(r) = eps2;
            dc(c) = eps2;
            auto kl_at = [&](const Vec& di) {
                const GaussianDensity moved = GaussianDensity::from_moments(
                    cm.e_mode + sync.sigma * di, cm.cond_cov_e);
                return gaussian_kl(cond_e, moved);
            };
            const double hess =
                (kl_at(dr + dc) - kl_at(dr - dc) - kl_at(-dr + dc) + kl_at(-dr - dc)) /
                (4.0 * eps2 * eps2);
            ext_fd_err = std::max(ext_fd_err, std::abs(hess - dual.extrinsic_fisher(r, c)));
        }
    rows.emplace_back("extrinsic_fd_hessian_max_err", ext_fd_err);
    stage.add("results.csv", rows_to_csv(rows));
}

}  // namespace

void run_experiment(const ExperimentConfig& config) {
    validate_experiment_config(config);
    ArtifactStage stage(config.output_dir);
    if (config.experiment == "simulate") exp_simulate(config, stage);
    else if (config.experiment == "stationary-check") exp_stationary_check(config, stage);
    else if (config.experiment == "helmholtz-roundtrip") exp_helmholtz_roundtrip(config, stage);
    else if (config.experiment == "blanket-report") exp_blanket_report(config, stage);
    else if (config.experiment == "marginal-flow") exp_marginal_flow(config, stage);
    else if (config.experiment == "fep-lemma") exp_fep_lemma(config, stage);
    else if (config.experiment == "vfe-suite") exp_vfe_suite(config, stage);
    else if (config.experiment == "efe-suite") exp_efe_suite(config, stage);
    else if (config.experiment == "agent-relax") exp_agent_relax(config, stage);
    else if (config.experiment == "geometry-suite") exp_geometry_suite(config, stage);
    else throw Error(ErrorCode::ExperimentUnknown, "unknown experiment: " + config.experiment);
    stage.commit();
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"feplab: numerical laboratory for nonequilibrium steady-state dynamics"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;

    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("config", config_path, "path to the experiment config")->required();
    auto* seed_opt = run->add_option("--seed", seed, "override the config seed");
    run->add_option("--out", out_dir, "override the output directory");

    auto* list = app.add_subcommand("list-experiments", "print the experiment registry");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "parse and validate a config file");
    validate->add_option("config", validate_path, "path to the experiment config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (list->parsed()) {
            for (const auto& name : experiment_registry()) std::cout << name << "\n";
            return 0;
        }
        if (validate->parsed()) {
            ExperimentConfig config = parse_experiment_config(read_text_file(validate_path));
            validate_experiment_config(config);
            std::cout << "ok\n";
            return 0;
        }
        seed_given = seed_opt->count() > 0;
        ExperimentConfig config = parse_experiment_config(read_text_file(config_path));
        if (seed_given) config.seed = seed;
        if (!out_dir.empty()) config.output_dir = out_dir;
        run_experiment(config);
        return 0;
    } catch (const Error& e) {
        std::cerr << "error," << error_code_name(e.code()) << "," << e.exit_status() << ","
                  << e.what() << "\n";
        return e.exit_status();
    } catch (const std::exception& e) {
        std::cerr << "error,Internal,1," << e.what() << "\n";
        return 1;
    }
}

}  // namespace feplab
