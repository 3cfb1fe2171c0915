#pragma once

// Sensitivity analysis with beta1 held fixed. Writing beta_x = beta0 + beta2 x
// leaves one unknown per covariate level, so each level's equation
//     g_r0 * logistic(b) + g_r1 * logistic(b + beta1) = g_l
// is solved on its own. The left side is strictly increasing in b, so the
// root is unique; bisection on [-50, 50] finds it.
//
// Boundary targets g_l = 0 and g_l = 1 have no finite root and map to the
// -inf / +inf sentinels, for which the response probability is 0 / 1.
//
// Bootstrap intervals re-solve every beta_x inside each replicate.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "pstrat/bootstrap.hpp"
#include "pstrat/core_types.hpp"
#include "pstrat/empirical.hpp"
#include "pstrat/estimand.hpp"
#include "pstrat/model_fit.hpp"

namespace pstrat {

inline constexpr double kSensitivityBracket = 50.0;

inline double solve_beta_x(double g_l, double g_r0, double g_r1, double beta1) {
    if (std::abs(g_r0 + g_r1 - 1.0) > 1e-9)
        throw Error(ErrorKind::InvalidArgument, "outcome probabilities must sum to 1");
    if (g_l == 0.0) return -std::numeric_limits<double>::infinity();
    if (g_l == 1.0) return std::numeric_limits<double>::infinity();

    auto f = [&](double b) { return g_r0 * logistic(b) + g_r1 * logistic(b + beta1) - g_l; };
    double lo = -kSensitivityBracket, hi = kSensitivityBracket;
    const double f_lo = f(lo), f_hi = f(hi);
    if (f_lo > 0.0 || f_hi < 0.0) {
        std::ostringstream msg;
        msg << "target " << g_l << " outside attainable range [" << f_lo + g_l << ", " << f_hi + g_l
            << "] for beta1 = " << beta1;
        throw Error(ErrorKind::NoRootInBracket, msg.str());
    }
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;

    // Halve until the bracket collapses to adjacent doubles.
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        (fm < 0.0 ? lo : hi) = mid;
    }
    return std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi;
}

/// P{S(1)=1 | S(0)=0, Y(0)=y} at a level with intercept beta_x (sentinels allowed).
inline double level_response(double beta_x, double beta1, int y) {
    if (std::isinf(beta_x)) return beta_x < 0.0 ? 0.0 : 1.0;
    return logistic(beta_x + beta1 * y);
}

struct SensitivityPoint {
    std::vector<double> beta_x;
    ThetaBreakdown theta;
};

inline SensitivityPoint sensitivity_at(const EmpiricalTables& t, double beta1, const EstimandOptions& opts = {}) {
    SensitivityPoint out;
    out.beta_x.reserve(static_cast<std::size_t>(t.k_levels));
    for (int x = 0; x < t.k_levels; ++x) {
        const auto xi = static_cast<std::size_t>(x);
        out.beta_x.push_back(solve_beta_x(t.g_l[xi], t.g_r[xi][0], t.g_r[xi][1], beta1));
    }
    out.theta = estimate_theta(
        t, [&](int x, int y) { return level_response(out.beta_x[static_cast<std::size_t>(x)], beta1, y); }, opts);
    return out;
}

struct SensitivityResult {
    double beta1_fixed = 0.0;
    std::vector<double> beta_x_hat;
    double theta_hat = 0.0;
    std::optional<Interval> ci;
    std::size_t n_bootstrap = 0;
    std::size_t n_failed = 0;
};

inline std::vector<SensitivityResult> sensitivity_sweep(const Dataset& data, std::span<const double> beta1_values,
                                                        const std::optional<BootstrapConfig>& boot = std::nullopt,
                                                        const EstimandOptions& opts = {}) {
    const EmpiricalTables tables = build_empirical_tables(data);
    std::vector<SensitivityResult> out;
    for (double beta1 : beta1_values) {
        const SensitivityPoint sp = sensitivity_at(tables, beta1, opts);
        SensitivityResult r;
        r.beta1_fixed = beta1;
        r.beta_x_hat = sp.beta_x;
        r.theta_hat = sp.theta.theta_hat;
        if (boot) {
            const BootstrapDraws draws = bootstrap_thetas(data, *boot, [&](const Dataset& d) {
                return sensitivity_at(build_empirical_tables(d), beta1, opts).theta.theta_hat;
            });
            r.ci = pivotal_ci(r.theta_hat, draws.thetas, boot->alpha);
            r.n_bootstrap = draws.thetas.size();
            r.n_failed = draws.n_failed;
        }
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace pstrat
