#pragma once

// Data-generating process for simulation studies, exact enumeration of the
// true effect, and the Monte Carlo harness (bias, MSE, interval width and
// coverage over R replicates).

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pstrat/bootstrap.hpp"
#include "pstrat/core_types.hpp"
#include "pstrat/estimand.hpp"
#include "pstrat/model_fit.hpp"
#include "pstrat/parallel.hpp"
#include "pstrat/rng.hpp"

namespace pstrat {

struct DgpSpec {
    std::string name;
    std::vector<double> px;                       // P{X=x}
    std::vector<double> p_s0;                     // P{S(0)=1 | x}
    std::array<std::vector<double>, 2> p_y0;      // [s0][x]: P{Y(0)=1 | S(0)=s0, x}
    ModelParams beta;                             // S(1) for control non-responders
    // [s0][s1][y0]: P{Y(1)=1 | S(0)=s0, S(1)=s1, Y(0)=y0}; [1][0][*] is unused
    // (that stratum is empty under monotonicity).
    std::array<std::array<std::array<double, 2>, 2>, 2> p_y1{};
    double p_treat = 0.5;
    std::size_t n = 1000;

    int k_levels() const { return static_cast<int>(px.size()); }

    void check() const {
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        const std::size_t k = px.size();
        if (k == 0) throw Error(ErrorKind::InvalidArgument, "DGP needs at least one covariate level");
        if (p_s0.size() != k || p_y0[0].size() != k || p_y0[1].size() != k)
            throw Error(ErrorKind::InvalidArgument, "DGP per-level vectors must all have K+1 entries");
        double sum = 0.0;
        for (std::size_t x = 0; x < k; ++x) {
            if (!prob(px[x]) || !prob(p_s0[x]) || !prob(p_y0[0][x]) || !prob(p_y0[1][x]))
                throw Error(ErrorKind::InvalidArgument, "DGP probabilities must lie in [0, 1]");
            sum += px[x];
        }
        if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::InvalidArgument, "covariate distribution must sum to 1");
        for (const auto& a : p_y1)
            for (const auto& b : a)
                for (double p : b)
                    if (!prob(p)) throw Error(ErrorKind::InvalidArgument, "DGP probabilities must lie in [0, 1]");
        if (!prob(p_treat)) throw Error(ErrorKind::InvalidArgument, "treatment probability must lie in [0, 1]");
        if (!beta.finite()) throw Error(ErrorKind::InvalidArgument, "beta must be finite");
        if (n == 0) throw Error(ErrorKind::InvalidArgument, "sample size must be positive");
    }
};

/// The three published simulation settings; they share everything but beta.
inline DgpSpec preset(const std::string& name, std::size_t n = 1000) {
    DgpSpec spec;
    spec.px = {0.25, 0.25, 0.25, 0.25};
    spec.p_s0 = {0.3, 0.25, 0.25, 0.2};
    spec.p_y0[0] = {0.7, 0.65, 0.6, 0.55};
    spec.p_y0[1] = {0.84, 0.78, 0.72, 0.66};
    spec.p_y1[0][0] = {0.5, 0.6};
    spec.p_y1[0][1] = {0.85, 0.9};
    spec.p_y1[1][1] = {0.85, 0.9};
    spec.p_treat = 0.5;
    spec.n = n;
    if (name == "setting1") spec.beta = {-3.0, -5.0, 0.2};
    else if (name == "setting2") spec.beta = {-5.0, -1.0, -2.0};
    else if (name == "setting3") spec.beta = {-7.0, 3.0, 0.2};
    else throw Error(ErrorKind::ConfigError, "unknown preset '" + name + "' (expected setting1, setting2 or setting3)");
    spec.name = name;
    return spec;
}

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"setting1", "setting2", "setting3"};
    return names;
}

struct PotentialOutcomes {
    int z = 0, x = 0, s0 = 0, s1 = 0, y0 = 0, y1 = 0;
};

struct SimulatedData {
    Dataset observed;
    std::vector<PotentialOutcomes> potentials; // row i belongs to observed record i
};

inline SimulatedData simulate_dataset(const DgpSpec& spec, Rng& rng) {
    spec.check();
    std::vector<SubjectRecord> records;
    std::vector<PotentialOutcomes> full;
    records.reserve(spec.n);
    full.reserve(spec.n);
    for (std::size_t i = 0; i < spec.n; ++i) {
        PotentialOutcomes po;
        po.x = static_cast<int>(rng.categorical(spec.px));
        const auto xi = static_cast<std::size_t>(po.x);
        po.s0 = rng.bernoulli(spec.p_s0[xi]);
        po.y0 = rng.bernoulli(spec.p_y0[static_cast<std::size_t>(po.s0)][xi]);
        po.s1 = po.s0 == 1 ? 1 : int(rng.bernoulli(g_m(spec.beta, po.x, po.y0)));
        po.y1 = rng.bernoulli(spec.p_y1[static_cast<std::size_t>(po.s0)][static_cast<std::size_t>(po.s1)]
                                       [static_cast<std::size_t>(po.y0)]);
        po.z = rng.bernoulli(spec.p_treat);

        SubjectRecord r;
        r.id = std::to_string(i + 1);
        r.z = po.z;
        r.x = po.x;
        r.s = po.z ? po.s1 : po.s0;
        r.outcome = BinaryOutcome{po.z ? po.y1 : po.y0};
        records.push_back(std::move(r));
        full.push_back(po);
    }
    return {Dataset(std::move(records), spec.k_levels()), std::move(full)};
}

/// Exact theta by summing over (x, S(0), Y(0)).
inline double true_theta(const DgpSpec& spec) {
    spec.check();
    double p_s1 = 0.0, p_y0_s1 = 0.0, p_y1_s1 = 0.0;
    for (int x = 0; x < spec.k_levels(); ++x) {
        const auto xi = static_cast<std::size_t>(x);
        const double px = spec.px[xi];
        const double resp = spec.p_s0[xi];
        p_s1 += px * resp;
        p_y0_s1 += px * resp * spec.p_y0[1][xi];
        for (int y = 0; y < 2; ++y) {
            const auto yi = static_cast<std::size_t>(y);
            const double py_resp = y ? spec.p_y0[1][xi] : 1.0 - spec.p_y0[1][xi];
            const double py_non = y ? spec.p_y0[0][xi] : 1.0 - spec.p_y0[0][xi];
            const double gm = g_m(spec.beta, x, y);
            const double mass_non = px * (1.0 - resp) * py_non * gm;
            p_s1 += mass_non;
            if (y == 1) p_y0_s1 += mass_non;
            p_y1_s1 += px * resp * py_resp * spec.p_y1[1][1][yi] + mass_non * spec.p_y1[0][1][yi];
        }
    }
    return (p_y1_s1 - p_y0_s1) / p_s1;
}

// ---------------------------------------------------------------------------
// Monte Carlo harness
// ---------------------------------------------------------------------------

// Which per-replicate estimate enters bias and MSE when a bootstrap runs:
// the mean of the bootstrap estimates, or the full-sample point estimate.
// The interval is always centred on the point estimate.
enum class ReplicateEstimate { BootstrapMean, Point };

struct McConfig {
    std::size_t replicates = 1000;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    // Without a bootstrap configuration only bias and MSE are computed.
    std::optional<BootstrapConfig> bootstrap;
    ReplicateEstimate estimate = ReplicateEstimate::BootstrapMean;
    double max_failed_fraction = 0.10;
};

struct McReport {
    std::string setting;
    std::size_t n = 0;
    double true_theta = 0.0;
    std::size_t n_replicates = 0;
    std::size_t n_failed = 0;
    double empirical_bias = 0.0;
    double mse = 0.0;
    std::optional<double> mean_ci_width;
    std::optional<double> ci_coverage;
    std::vector<double> estimates; // successful replicates, in replicate order
};

inline McReport run_monte_carlo(const DgpSpec& spec, const McConfig& mc, const FitConfig& fit_config = {},
                                const EstimandOptions& opts = {}) {
    spec.check();
    if (mc.replicates < 2) throw Error(ErrorKind::InvalidArgument, "Monte Carlo needs at least 2 replicates");
    if (mc.bootstrap) mc.bootstrap->check();

    struct Slot {
        bool ok = false;
        double theta = 0.0;
        Interval ci;
    };
    std::vector<Slot> slots(mc.replicates);
    parallel_for(mc.replicates, mc.threads, [&](std::size_t r) {
        Rng rng = Rng::substream(mc.seed, 2 * r);
        const SimulatedData sim = simulate_dataset(spec, rng);
        try {
            Slot s;
            if (mc.bootstrap) {
                BootstrapConfig bc = *mc.bootstrap;
                bc.threads = 1;
                bc.seed = Rng::substream(mc.seed, 2 * r + 1).next();
                const CausalEstimate est = bootstrap_estimate(sim.observed, fit_config, bc, opts);
                s.theta = mc.estimate == ReplicateEstimate::BootstrapMean ? est.boot_mean : est.theta_hat;
                s.ci = {est.ci_lower, est.ci_upper};
            } else {
                s.theta = point_estimate(sim.observed, fit_config, opts).theta.theta_hat;
            }
            s.ok = true;
            slots[r] = s;
        } catch (const Error& e) {
            if (!is_estimation_failure(e.kind()) && e.kind() != ErrorKind::TooManyFailedReplicates) throw;
        }
    });

    McReport rep;
    rep.setting = spec.name;
    rep.n = spec.n;
    rep.true_theta = true_theta(spec);
    rep.n_replicates = mc.replicates;
    double sum = 0.0, sq = 0.0, width = 0.0, covered = 0.0;
    for (const auto& s : slots) {
        if (!s.ok) {
            ++rep.n_failed;
            continue;
        }
        rep.estimates.push_back(s.theta);
        const double err = s.theta - rep.true_theta;
        sum += err;
        sq += err * err;
        width += std::abs(s.ci.upper - s.ci.lower);
        covered += (s.ci.lower <= rep.true_theta && rep.true_theta <= s.ci.upper) ? 1.0 : 0.0;
    }
    if (static_cast<double>(rep.n_failed) > mc.max_failed_fraction * static_cast<double>(mc.replicates))
        throw Error(ErrorKind::TooManyFailedReplicates,
                    std::to_string(rep.n_failed) + " of " + std::to_string(mc.replicates) +
                        " Monte Carlo replicates failed");
    const double m = static_cast<double>(rep.estimates.size());
    rep.empirical_bias = sum / m;
    rep.mse = sq / m;
    if (mc.bootstrap) {
        rep.mean_ci_width = width / m;
        rep.ci_coverage = covered / m;
    }
    return rep;
}

/// Delimited table with one row per report, columns as in a simulation
/// results table plus bookkeeping.
inline void write_mc_table(std::ostream& os, const std::vector<McReport>& reports) {
    os << "setting,n,bias,mse,ci_width,coverage,true_theta,replicates,failed\n";
    const auto old_flags = os.flags();
    const auto old_prec = os.precision();
    os << std::setprecision(10);
    for (const auto& r : reports) {
        os << r.setting << ',' << r.n << ',' << r.empirical_bias << ',' << r.mse << ',';
        if (r.mean_ci_width) os << *r.mean_ci_width;
        else os << "NA";
        os << ',';
        if (r.ci_coverage) os << *r.ci_coverage;
        else os << "NA";
        os << ',' << r.true_theta << ',' << r.n_replicates << ',' << r.n_failed << '\n';
    }
    os.flags(old_flags);
    os.precision(old_prec);
}

} // namespace pstrat
