#pragma once

// Command-line front end: estimate, sensitivity, simulate, generate.
//
// Exit codes: 0 success, 2 validation/configuration, 3 estimation failure,
// 4 I/O. Errors go to the log stream as
//     error[<Category>]: <message>
// Every report starts with '#' comment lines recording the library version,
// the seed and the full effective configuration.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "pstrat/bootstrap.hpp"
#include "pstrat/core_types.hpp"
#include "pstrat/csv_io.hpp"
#include "pstrat/errors.hpp"
#include "pstrat/estimand.hpp"
#include "pstrat/model_fit.hpp"
#include "pstrat/sensitivity.hpp"
#include "pstrat/simulation.hpp"
#include "pstrat/version.hpp"

namespace pstrat::cli {

enum class ExitCode : int { Success = 0, Validation = 2, Estimation = 3, Io = 4 };

inline ExitCode exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::IoError:
        return ExitCode::Io;
    case ErrorKind::EmptyArmAtLevel:
    case ErrorKind::DegenerateDenominator:
    case ErrorKind::EmptyCell:
    case ErrorKind::ZeroResponderMass:
    case ErrorKind::NoRootInBracket:
    case ErrorKind::TooManyFailedReplicates:
        return ExitCode::Estimation;
    default:
        return ExitCode::Validation;
    }
}

enum class Command { Estimate, Sensitivity, Simulate, Generate };

struct RunConfig {
    Command command = Command::Estimate;
    std::string input_path;
    std::string output_path;
    std::string multistart_report_path;
    std::uint64_t seed = 1;
    double alpha = 0.05;
    std::size_t bootstrap = 500;
    std::optional<double> t0;
    std::vector<double> beta1_grid{-7, -6, -5, -4, -3};
    std::vector<std::string> presets{"setting1", "setting2", "setting3"};
    std::vector<std::size_t> sample_sizes{1000, 2000, 4000};
    std::size_t replicates = 1000;
    std::optional<int> grid_bound;
    int max_iterations = 500;
    double tolerance = 1e-8;
    bool model_consistent = false;
    bool stratified = false;
    bool point_estimates = false;
    unsigned threads = 0;
};

namespace detail {

inline std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(15) << v;
    return os.str();
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ';';
        if constexpr (std::is_floating_point_v<T>) os << fmt(v[i]);
        else os << v[i];
    }
    return os.str();
}

inline void write_header(std::ostream& os, const RunConfig& c, const char* command) {
    os << "# pstrat " << version_string << '\n';
    os << "# command=" << command << '\n';
    os << "# seed=" << c.seed << '\n';
    if (!c.input_path.empty()) os << "# input=" << c.input_path << '\n';
    os << "# alpha=" << fmt(c.alpha) << '\n';
    os << "# bootstrap_replicates=" << c.bootstrap << '\n';
    os << "# resampling=" << (c.stratified ? "stratified_by_arm" : "whole_sample") << '\n';
    os << "# t0=" << (c.t0 ? fmt(*c.t0) : std::string("none")) << '\n';
    os << "# denominator=" << (c.model_consistent ? "model_consistent" : "plug_in") << '\n';
    os << "# fit.init=0;0;0\n";
    os << "# fit.grid_bound=" << (c.grid_bound ? std::to_string(*c.grid_bound) : std::string("none")) << '\n';
    os << "# fit.max_iterations=" << c.max_iterations << '\n';
    os << "# fit.gradient_tolerance=" << fmt(c.tolerance) << '\n';
}

inline FitConfig fit_config(const RunConfig& c) {
    FitConfig f;
    f.grid_bound = c.grid_bound;
    f.max_iterations = c.max_iterations;
    f.gradient_tolerance = c.tolerance;
    return f;
}

inline BootstrapConfig boot_config(const RunConfig& c) {
    BootstrapConfig b;
    b.n_replicates = c.bootstrap;
    b.alpha = c.alpha;
    b.seed = c.seed;
    b.resampling = c.stratified ? Resampling::StratifiedByArm : Resampling::WholeSample;
    b.threads = c.threads;
    return b;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path + "'");
    return out;
}

// Loads and validates; design flags that break estimation are reported as a
// configuration-level failure before any fitting.
inline Dataset load_validated(const RunConfig& c, std::ostream& log, ValidationReport& report) {
    Dataset data = load_csv(c.input_path, c.t0);
    report = validate(data);
    log << "[pstrat] loaded " << data.size() << " records, " << data.k_levels() << " covariate level(s)\n";
    for (const auto& w : report.warnings) log << "[pstrat] warning: " << w << '\n';
    if (!report.ok()) {
        std::string msg = "dataset cannot be analysed:";
        for (const auto& f : report.flags) msg += " " + f + ";";
        throw Error(ErrorKind::SchemaError, msg);
    }
    return data;
}

} // namespace detail

inline int cmd_estimate(const RunConfig& c, std::ostream& log) {
    ValidationReport vr;
    const Dataset data = detail::load_validated(c, log, vr);
    const FitConfig fc = detail::fit_config(c);
    const EstimandOptions opts{c.model_consistent};
    const BootstrapConfig bc = detail::boot_config(c);

    const PointEstimate pe = point_estimate(data, fc, opts);
    const CausalEstimate est = bootstrap_estimate(data, fc, bc, opts);

    std::vector<std::string> warnings = vr.warnings;
    warnings.insert(warnings.end(), pe.fit.warnings.begin(), pe.fit.warnings.end());
    if (pe.theta.beyond_last_observation)
        warnings.push_back("t0 lies beyond the last (censored) observation in at least one subgroup");
    for (const auto& w : pe.fit.warnings) log << "[pstrat] warning: " << w << '\n';

    std::ofstream out = detail::open_output(c.output_path);
    detail::write_header(out, c, "estimate");
    out << "key,value\n";
    auto row = [&](const std::string& k, const std::string& v) { out << k << ',' << v << '\n'; };
    using detail::fmt;
    row("n", std::to_string(data.size()));
    row("k_levels", std::to_string(data.k_levels()));
    row("theta_hat", fmt(est.theta_hat));
    row("ci_lower", fmt(est.ci_lower));
    row("ci_upper", fmt(est.ci_upper));
    row("bootstrap_mean", fmt(est.boot_mean));
    row("term_treated", fmt(pe.theta.term_treated));
    row("term_control", fmt(pe.theta.term_control));
    row("beta0", fmt(est.beta_hat.beta0));
    row("beta1", fmt(est.beta_hat.beta1));
    row("beta2", fmt(est.beta_hat.beta2));
    row("objective", fmt(est.objective_value));
    row("converged", pe.fit.converged ? "1" : "0");
    row("jacobian_rank", std::to_string(pe.fit.jacobian_rank));
    row("bootstrap_successful", std::to_string(est.n_bootstrap));
    row("bootstrap_failed", std::to_string(est.n_failed));
    for (int x = 0; x < data.k_levels(); ++x) {
        const auto xi = static_cast<std::size_t>(x);
        const std::string p = "level" + std::to_string(x) + ".";
        const auto& lv = vr.levels[xi];
        const auto& sp = pe.tables.stratum.levels[xi];
        row(p + "n_control", std::to_string(lv.arm_counts[0]));
        row(p + "n_treatment", std::to_string(lv.arm_counts[1]));
        row(p + "p00", fmt(sp.p00));
        row(p + "p01", fmt(sp.p01));
        row(p + "p11", fmt(sp.p11));
        row(p + "g_l", fmt(pe.tables.g_l[xi]));
        row(p + "g_r1", fmt(pe.tables.g_r[xi][1]));
        row(p + "residual", fmt(pe.fit.per_level_residuals[xi]));
        row(p + "numerator", fmt(pe.theta.per_x_numerator[xi]));
        row(p + "denominator", fmt(pe.theta.per_x_denominator[xi]));
    }
    for (std::size_t i = 0; i < warnings.size(); ++i) row("warning" + std::to_string(i + 1), warnings[i]);

    if (!c.multistart_report_path.empty()) {
        std::ofstream ms = detail::open_output(c.multistart_report_path);
        detail::write_header(ms, c, "estimate.multistart");
        ms << "init0,init1,init2,beta0,beta1,beta2,objective,converged,theta_hat\n";
        for (const auto& s : pe.fit.starts) {
            double theta = std::nan("");
            try {
                theta = estimate_theta(pe.tables, s.beta, opts).theta_hat;
            } catch (const Error&) {
            }
            ms << fmt(s.init.beta0) << ',' << fmt(s.init.beta1) << ',' << fmt(s.init.beta2) << ','
               << fmt(s.beta.beta0) << ',' << fmt(s.beta.beta1) << ',' << fmt(s.beta.beta2) << ','
               << fmt(s.objective_value) << ',' << (s.converged ? 1 : 0) << ',' << fmt(theta) << '\n';
        }
    }
    log << "[pstrat] theta_hat=" << fmt(est.theta_hat) << " CI=(" << fmt(est.ci_lower) << ", "
        << fmt(est.ci_upper) << ")\n";
    return 0;
}

inline int cmd_sensitivity(const RunConfig& c, std::ostream& log) {
    ValidationReport vr;
    const Dataset data = detail::load_validated(c, log, vr);
    const EstimandOptions opts{c.model_consistent};
    std::optional<BootstrapConfig> bc;
    if (c.bootstrap > 0) bc = detail::boot_config(c);
    const auto results = sensitivity_sweep(data, c.beta1_grid, bc, opts);

    std::ofstream out = detail::open_output(c.output_path);
    detail::write_header(out, c, "sensitivity");
    out << "# beta1_grid=" << detail::join(c.beta1_grid) << '\n';
    out << "beta1,theta_hat,ci_lower,ci_upper";
    for (int x = 0; x < data.k_levels(); ++x) out << ",beta_x" << x;
    out << ",bootstrap_successful,bootstrap_failed\n";
    using detail::fmt;
    for (const auto& r : results) {
        out << fmt(r.beta1_fixed) << ',' << fmt(r.theta_hat) << ',' << (r.ci ? fmt(r.ci->lower) : "NA") << ','
            << (r.ci ? fmt(r.ci->upper) : "NA");
        for (double b : r.beta_x_hat) out << ',' << fmt(b);
        out << ',' << r.n_bootstrap << ',' << r.n_failed << '\n';
    }
    log << "[pstrat] sensitivity sweep over " << results.size() << " beta1 value(s) written\n";
    return 0;
}

inline int cmd_simulate(const RunConfig& c, std::ostream& log) {
    std::vector<McReport> reports;
    for (const auto& name : c.presets) preset(name); // fail fast on unknown names
    for (const auto& name : c.presets) {
        for (std::size_t n : c.sample_sizes) {
            McConfig mc;
            mc.replicates = c.replicates;
            mc.seed = c.seed;
            mc.threads = c.threads;
            if (c.bootstrap > 0) mc.bootstrap = detail::boot_config(c);
            if (c.point_estimates) mc.estimate = ReplicateEstimate::Point;
            log << "[pstrat] simulating " << name << " n=" << n << " R=" << c.replicates << '\n';
            reports.push_back(run_monte_carlo(preset(name, n), mc, detail::fit_config(c), EstimandOptions{c.model_consistent}));
        }
    }
    std::ofstream out = detail::open_output(c.output_path);
    detail::write_header(out, c, "simulate");
    out << "# presets=" << detail::join(c.presets) << '\n';
    out << "# sample_sizes=" << detail::join(c.sample_sizes) << '\n';
    out << "# replicates=" << c.replicates << '\n';
    out << "# replicate_estimate=" << (c.point_estimates || c.bootstrap == 0 ? "point" : "bootstrap_mean") << '\n';
    write_mc_table(out, reports);
    return 0;
}

inline int cmd_generate(const RunConfig& c, std::ostream& log) {
    if (c.presets.size() != 1 || c.sample_sizes.size() != 1)
        throw Error(ErrorKind::ConfigError, "generate takes exactly one --preset and one --n");
    Rng rng(c.seed);
    const SimulatedData sim = simulate_dataset(preset(c.presets.front(), c.sample_sizes.front()), rng);
    std::ofstream out = detail::open_output(c.output_path);
    write_csv(out, sim.observed);
    log << "[pstrat] wrote " << sim.observed.size() << " simulated records\n";
    return 0;
}

inline int dispatch(const RunConfig& c, std::ostream& log) {
    switch (c.command) {
    case Command::Estimate: return cmd_estimate(c, log);
    case Command::Sensitivity: return cmd_sensitivity(c, log);
    case Command::Simulate: return cmd_simulate(c, log);
    case Command::Generate: return cmd_generate(c, log);
    }
    return 0;
}

/// Parses arguments (argv[0] is the program name) and runs the command.
inline int run(std::vector<std::string> args, std::ostream& log) {
    RunConfig c;
    CLI::App app{"Principal-stratum causal effect estimation"};
    app.set_version_flag("--version", std::string(version_string));
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
        sub->add_option("--threads", c.threads, "Worker threads (0 = all cores)")->capture_default_str();
        sub->add_option("--alpha", c.alpha, "1 - confidence level")->capture_default_str()->check(CLI::Range(1e-12, 1.0 - 1e-12));
        sub->add_option("--output,-o", c.output_path, "Output report path")->required();
        sub->add_flag("--stratified", c.stratified, "Resample within arms");
        sub->add_flag("--model-consistent", c.model_consistent, "Model-based P{S(1)=1|x} in the denominator");
    };
    auto add_fit = [&](CLI::App* sub) {
        sub->add_option("--grid-bound", c.grid_bound, "Add integer multistart grid [-b,b]^3");
        sub->add_option("--max-iterations", c.max_iterations, "BFGS iteration cap")->capture_default_str()->check(CLI::PositiveNumber);
        sub->add_option("--tolerance", c.tolerance, "Gradient-norm tolerance")->capture_default_str()->check(CLI::PositiveNumber);
    };

    auto* est = app.add_subcommand("estimate", "Estimate theta with a bootstrap CI");
    add_common(est);
    add_fit(est);
    est->add_option("--input,-i", c.input_path, "Input CSV")->required();
    est->add_option("--t0", c.t0, "Horizon for survival outcomes");
    est->add_option("--bootstrap,-B", c.bootstrap, "Bootstrap replicates")->capture_default_str()->check(CLI::Range(std::size_t{2}, std::size_t{1000000}));
    est->add_option("--multistart-report", c.multistart_report_path, "Per-start fit results");

    auto* sens = app.add_subcommand("sensitivity", "Fixed-beta1 sensitivity sweep");
    add_common(sens);
    sens->add_option("--input,-i", c.input_path, "Input CSV")->required();
    sens->add_option("--t0", c.t0, "Horizon for survival outcomes");
    sens->add_option("--bootstrap,-B", c.bootstrap, "Bootstrap replicates (0 = no CI)")->capture_default_str();
    sens->add_option("--beta1-grid", c.beta1_grid, "beta1 values")->delimiter(',')->capture_default_str();

    auto* sim = app.add_subcommand("simulate", "Monte Carlo study over the built-in presets");
    add_common(sim);
    add_fit(sim);
    sim->add_option("--preset", c.presets, "setting1, setting2, setting3")->delimiter(',')->capture_default_str();
    sim->add_option("--n", c.sample_sizes, "Sample sizes")->delimiter(',')->capture_default_str();
    sim->add_option("--replicates,-R", c.replicates, "Monte Carlo replicates")->capture_default_str()->check(CLI::Range(std::size_t{2}, std::size_t{100000000}));
    sim->add_option("--bootstrap,-B", c.bootstrap, "Bootstrap replicates per dataset (0 = point estimates only)")->capture_default_str();
    sim->add_flag("--point-estimates", c.point_estimates, "Score bias/MSE on point estimates instead of bootstrap means");

    auto* gen = app.add_subcommand("generate", "Write one simulated dataset as CSV");
    gen->add_option("--seed", c.seed, "Random seed")->capture_default_str();
    gen->add_option("--preset", c.presets, "Preset name")->required();
    gen->add_option("--n", c.sample_sizes, "Sample size")->required();
    gen->add_option("--output,-o", c.output_path, "Output CSV path")->required();

    std::vector<std::string> rev(args.rbegin(), std::prev(args.rend()));
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        log << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        log << version_string << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        log << "error[ConfigError]: " << e.what() << '\n';
        return static_cast<int>(ExitCode::Validation);
    }

    if (est->parsed()) c.command = Command::Estimate;
    else if (sens->parsed()) c.command = Command::Sensitivity;
    else if (sim->parsed()) c.command = Command::Simulate;
    else c.command = Command::Generate;
    if (sens->parsed() && c.bootstrap == 1) {
        log << "error[ConfigError]: --bootstrap must be 0 or at least 2\n";
        return static_cast<int>(ExitCode::Validation);
    }

    try {
        return dispatch(c, log);
    } catch (const Error& e) {
        log << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
        return static_cast<int>(exit_code_for(e.kind()));
    }
}

} // namespace pstrat::cli
