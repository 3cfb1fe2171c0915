#pragma once

// Nonparametric bootstrap and the pivotal (basic) confidence interval
//     (2 theta_hat - q_{1-alpha/2}, 2 theta_hat - q_{alpha/2}),
// where q_p are quantiles of the replicate estimates. The whole estimation
// pipeline, including the model fit, is rerun inside every replicate.
//
// Quantiles use the inclusive linear-interpolation rule: for m sorted values
// v_0..v_{m-1}, q_p = v_j + (h - j)(v_{j+1} - v_j) with h = (m - 1) p, j = floor(h).
//
// Replicate b draws from substream b of the configured seed, so results are
// identical for any thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pstrat/core_types.hpp"
#include "pstrat/empirical.hpp"
#include "pstrat/estimand.hpp"
#include "pstrat/model_fit.hpp"
#include "pstrat/parallel.hpp"
#include "pstrat/rng.hpp"

namespace pstrat {

enum class Resampling { WholeSample, StratifiedByArm };

struct BootstrapConfig {
    std::size_t n_replicates = 500;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    Resampling resampling = Resampling::WholeSample;
    unsigned threads = 0; // 0: hardware concurrency
    // Dropped replicates tolerated, as a fraction of n_replicates.
    double max_failed_fraction = 0.10;

    void check() const {
        if (n_replicates < 2) throw Error(ErrorKind::InvalidArgument, "bootstrap needs at least 2 replicates");
        if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
    }
};

/// Same-size draw with replacement. Stratified mode resamples each arm
/// separately and so keeps both arm sizes fixed.
inline Dataset resample(const Dataset& data, Rng& rng, Resampling mode = Resampling::WholeSample) {
    const auto& src = data.records();
    std::vector<SubjectRecord> out;
    out.reserve(src.size());
    if (mode == Resampling::WholeSample) {
        for (std::size_t i = 0; i < src.size(); ++i) out.push_back(src[rng.below(src.size())]);
    } else {
        for (int arm = 0; arm < 2; ++arm) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < src.size(); ++i)
                if (src[i].z == arm) members.push_back(i);
            for (std::size_t i = 0; i < members.size(); ++i) out.push_back(src[members[rng.below(members.size())]]);
        }
    }
    return data.with_records(std::move(out));
}

inline double quantile_inclusive(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw Error(ErrorKind::InvalidArgument, "quantile of an empty sample");
    const double h = static_cast<double>(sorted.size() - 1) * p;
    const auto j = static_cast<std::size_t>(std::floor(h));
    if (j + 1 >= sorted.size()) return sorted.back();
    return sorted[j] + (h - static_cast<double>(j)) * (sorted[j + 1] - sorted[j]);
}

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

inline Interval pivotal_ci(double theta_hat, std::span<const double> boot_thetas, double alpha) {
    if (boot_thetas.empty()) throw Error(ErrorKind::InvalidArgument, "no bootstrap estimates");
    std::vector<double> sorted(boot_thetas.begin(), boot_thetas.end());
    std::sort(sorted.begin(), sorted.end());
    const double q_hi = quantile_inclusive(sorted, 1.0 - alpha / 2.0);
    const double q_lo = quantile_inclusive(sorted, alpha / 2.0);
    return {2.0 * theta_hat - q_hi, 2.0 * theta_hat - q_lo};
}

struct BootstrapDraws {
    std::vector<double> thetas; // successful replicates, in replicate order
    std::size_t n_failed = 0;
};

/// Runs `estimator(resampled_dataset) -> double` on every replicate.
/// Replicates failing with an estimation error are dropped; more than
/// max_failed_fraction of them raises TooManyFailedReplicates.
template <typename Estimator>
BootstrapDraws bootstrap_thetas(const Dataset& data, const BootstrapConfig& cfg, Estimator&& estimator) {
    cfg.check();
    std::vector<std::optional<double>> slots(cfg.n_replicates);
    parallel_for(cfg.n_replicates, cfg.threads, [&](std::size_t b) {
        Rng rng = Rng::substream(cfg.seed, b);
        try {
            slots[b] = estimator(resample(data, rng, cfg.resampling));
        } catch (const Error& e) {
            if (!is_estimation_failure(e.kind())) throw;
        }
    });
    BootstrapDraws out;
    for (const auto& s : slots) {
        if (s) out.thetas.push_back(*s);
        else ++out.n_failed;
    }
    if (static_cast<double>(out.n_failed) > cfg.max_failed_fraction * static_cast<double>(cfg.n_replicates))
        throw Error(ErrorKind::TooManyFailedReplicates,
                    std::to_string(out.n_failed) + " of " + std::to_string(cfg.n_replicates) +
                        " bootstrap replicates failed");
    return out;
}

/// Point estimate: empirical tables, fitted beta, theta.
struct PointEstimate {
    EmpiricalTables tables;
    FitResult fit;
    ThetaBreakdown theta;
};

inline PointEstimate point_estimate(const Dataset& data, const FitConfig& fit_config = {},
                                    const EstimandOptions& opts = {}) {
    PointEstimate pe;
    pe.tables = build_empirical_tables(data);
    pe.fit = fit_beta(pe.tables, fit_config);
    pe.theta = estimate_theta(pe.tables, pe.fit.beta_hat, opts);
    return pe;
}

inline CausalEstimate bootstrap_estimate(const Dataset& data, const FitConfig& fit_config,
                                         const BootstrapConfig& boot_config, const EstimandOptions& opts = {}) {
    boot_config.check();
    const PointEstimate pe = point_estimate(data, fit_config, opts);
    const BootstrapDraws draws = bootstrap_thetas(data, boot_config, [&](const Dataset& d) {
        return point_estimate(d, fit_config, opts).theta.theta_hat;
    });
    const Interval ci = pivotal_ci(pe.theta.theta_hat, draws.thetas, boot_config.alpha);

    CausalEstimate est;
    est.theta_hat = pe.theta.theta_hat;
    est.ci_lower = ci.lower;
    est.ci_upper = ci.upper;
    est.boot_mean = std::accumulate(draws.thetas.begin(), draws.thetas.end(), 0.0) /
                    static_cast<double>(draws.thetas.size());
    est.alpha = boot_config.alpha;
    est.beta_hat = pe.fit.beta_hat;
    est.objective_value = pe.fit.objective_value;
    est.n_bootstrap = draws.thetas.size();
    est.n_failed = draws.n_failed;
    return est;
}

} // namespace pstrat
