#pragma once

// Treatment effect on the long-term outcome among subjects who would respond
// under treatment:
//     theta = P{Y(1)=1 | S(1)=1} - P{Y(0)=1 | S(1)=1}.
// The first term is observed directly in the treatment arm. The second is
// assembled per covariate level from the stratum probabilities, the
// control-arm outcome probabilities and the counterfactual response model.

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <string>
#include <vector>

#include "pstrat/core_types.hpp"
#include "pstrat/empirical.hpp"
#include "pstrat/model_fit.hpp"

namespace pstrat {

struct ThetaBreakdown {
    double term_treated = 0.0;  // P{Y(1)=1 | S(1)=1}
    double term_control = 0.0;  // P{Y(0)=1 | S(1)=1}
    double theta_hat = 0.0;
    std::vector<double> per_x_numerator;   // P(x) P{S(1)=1, Y(0)=1 | x}
    std::vector<double> per_x_denominator; // P(x) P{S(1)=1 | x}
    bool beyond_last_observation = false;
};

struct EstimandOptions {
    // false: P{S(1)=1|x} = p01 + p11 straight from the stratum estimates.
    // true:  P{S(1)=1|x} = p11 + (1 - p11) * sum_y G_M(x,y) G_R(x,y), i.e. the
    //        share of control non-responders who respond is taken from the
    //        fitted model instead of from p01.
    bool model_consistent_denominator = false;
};

/// Core assembly. `response(x, y)` is P{S(1)=1 | S(0)=0, Y(0)=y, X=x}.
template <typename Response>
    requires std::invocable<Response&, int, int>
ThetaBreakdown estimate_theta(const EmpiricalTables& t, Response&& response, const EstimandOptions& opts = {}) {
    ThetaBreakdown out;
    out.term_treated = t.pr_y1_given_s1;
    out.beyond_last_observation = t.beyond_last_observation;
    out.per_x_numerator.resize(static_cast<std::size_t>(t.k_levels));
    out.per_x_denominator.resize(static_cast<std::size_t>(t.k_levels));

    double num = 0.0, den = 0.0;
    for (int x = 0; x < t.k_levels; ++x) {
        const auto xi = static_cast<std::size_t>(x);
        const StratumProbs& p = t.stratum.levels[xi];
        const double px = t.px_hat[xi];
        const double p_s0_0 = 1.0 - p.p11;
        const double gm1 = response(x, 1);

        // S(0)=0 path needs the model; S(0)=1 subjects respond under
        // treatment with certainty.
        double joint = gm1 * *t.pr_y0_given_s0[0][xi] * p_s0_0;
        if (p.p11 > 0.0) {
            const auto& y0_resp = t.pr_y0_given_s0[1][xi];
            if (!y0_resp)
                throw Error(ErrorKind::EmptyCell, "no control responders at x=" + std::to_string(x));
            joint += *y0_resp * p.p11;
        }

        double respond;
        if (opts.model_consistent_denominator) {
            const double mix = response(x, 0) * t.g_r[xi][0] + gm1 * t.g_r[xi][1];
            respond = p.p11 + p_s0_0 * mix;
        } else {
            respond = p.p01 + p.p11;
        }
        out.per_x_numerator[xi] = px * joint;
        out.per_x_denominator[xi] = px * respond;
        num += out.per_x_numerator[xi];
        den += out.per_x_denominator[xi];
    }
    if (!(den > 0.0))
        throw Error(ErrorKind::ZeroResponderMass, "no probability mass on responders under treatment");

    // With the plug-in denominator an imperfect fit can push the ratio past 1.
    out.term_control = std::min(num / den, 1.0);
    out.theta_hat = out.term_treated - out.term_control;
    return out;
}

inline ThetaBreakdown estimate_theta(const EmpiricalTables& t, const ModelParams& beta,
                                     const EstimandOptions& opts = {}) {
    return estimate_theta(t, [&](int x, int y) { return g_m(beta, x, y); }, opts);
}

inline ThetaBreakdown estimate_theta(const Dataset& data, const ModelParams& beta, const EstimandOptions& opts = {}) {
    return estimate_theta(build_empirical_tables(data), beta, opts);
}

/// Survival outcomes thresholded at horizon t0: every outcome probability is
/// the Kaplan-Meier estimate at t0.
inline ThetaBreakdown estimate_theta_at(const Dataset& data, const ModelParams& beta, double t0,
                                        const EstimandOptions& opts = {}) {
    if (data.outcome_kind() != OutcomeKind::Survival)
        throw Error(ErrorKind::ConfigError, "estimate_theta_at requires survival outcomes");
    return estimate_theta(data.with_horizon(t0), beta, opts);
}

} // namespace pstrat
