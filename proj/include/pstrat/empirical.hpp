#pragma once

// Plug-in estimators computed directly from observed data: principal-stratum
// probabilities (maximum likelihood under monotonicity), the left- and
// right-hand quantities of the per-level equation system, the arm-conditional
// outcome probabilities and the Kaplan-Meier estimator used for censored
// outcomes.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pstrat/core_types.hpp"
#include "pstrat/errors.hpp"

namespace pstrat {

// ---------------------------------------------------------------------------
// Kaplan-Meier
// ---------------------------------------------------------------------------

struct TimeEvent {
    double time = 0.0;
    int event = 0;
};

struct KmPoint {
    double time = 0.0;
    long at_risk = 0;
    long events = 0;
    long censored = 0;
    double survival = 1.0; // value just after `time`
};

struct KmValue {
    double value = 1.0;
    // t0 lies past the last observation, which was censored while the curve
    // was still positive: the returned value is the last defined one.
    bool beyond_last_observation = false;
};

/// Product-limit curve. Events at a tied time are processed before
/// censorings at that time.
class KmCurve {
public:
    explicit KmCurve(std::span<const TimeEvent> data) {
        if (data.empty()) throw Error(ErrorKind::InvalidArgument, "Kaplan-Meier needs at least one observation");
        std::vector<TimeEvent> sorted(data.begin(), data.end());
        std::sort(sorted.begin(), sorted.end(),
                  [](const TimeEvent& a, const TimeEvent& b) { return a.time < b.time; });

        // Between censorings the product telescopes to (still at risk) /
        // (at risk when the segment opened); evaluating it that way keeps the
        // uncensored case exactly equal to the empirical proportion.
        long remaining = static_cast<long>(sorted.size());
        long segment_start = remaining;
        double closed = 1.0;

        for (std::size_t i = 0; i < sorted.size();) {
            KmPoint p;
            p.time = sorted[i].time;
            p.at_risk = remaining;
            std::size_t j = i;
            for (; j < sorted.size() && sorted[j].time == p.time; ++j) {
                if (sorted[j].event) ++p.events;
                else ++p.censored;
            }
            remaining -= p.events;
            p.survival = closed * static_cast<double>(remaining) / static_cast<double>(segment_start);
            if (p.censored > 0) {
                closed = p.survival;
                remaining -= p.censored;
                segment_start = remaining;
            }
            points_.push_back(p);
            i = j;
        }
        last_time_ = points_.back().time;
        last_censored_ = points_.back().censored > 0;
    }

    const std::vector<KmPoint>& points() const noexcept { return points_; }

    KmValue survival_at(double t0) const {
        KmValue out;
        for (const auto& p : points_) {
            if (p.time > t0) break;
            out.value = p.survival;
        }
        out.beyond_last_observation = t0 > last_time_ && last_censored_ && out.value > 0.0;
        return out;
    }

private:
    std::vector<KmPoint> points_;
    double last_time_ = 0.0;
    bool last_censored_ = false;
};

inline KmValue km_survival(std::span<const TimeEvent> data, double t0) {
    if (!(t0 >= 0.0)) throw Error(ErrorKind::InvalidArgument, "t0 must be nonnegative");
    return KmCurve(data).survival_at(t0);
}

// ---------------------------------------------------------------------------
// Principal-stratum probabilities
// ---------------------------------------------------------------------------

/// Maximum likelihood estimate of (p00, p01, p11) at level x.
///
/// If the treatment response rate is at least the control rate, p11 is the
/// control response rate and p00 the treatment non-response rate. Otherwise
/// the constrained maximum sets p01 = 0 and p11 to the pooled response rate.
inline StratumProbs estimate_stratum_probs(const CountTable& counts, int x) {
    const long n00 = counts.count(0, 0, x), n01 = counts.count(0, 1, x);
    const long n10 = counts.count(1, 0, x), n11 = counts.count(1, 1, x);
    const long n0 = n00 + n01, n1 = n10 + n11;
    if (n0 == 0 || n1 == 0)
        throw Error(ErrorKind::EmptyArmAtLevel,
                    "arm z=" + std::to_string(n0 == 0 ? 0 : 1) + " has no subjects at x=" + std::to_string(x));

    StratumProbs p;
    // q1 >= q0  <=>  n11 * n0 >= n01 * n1, compared in integers so ties are exact.
    const long lhs = n11 * n0, rhs = n01 * n1;
    if (lhs >= rhs) {
        p.p11 = double(n01) / double(n0);
        p.p00 = double(n10) / double(n1);
        p.p01 = double(lhs - rhs) / (double(n0) * double(n1));
    } else {
        p.p11 = double(n01 + n11) / double(n0 + n1);
        p.p00 = double(n00 + n10) / double(n0 + n1);
        p.p01 = 0.0;
    }
    return p;
}

/// P{S(1)=1 | S(0)=0, x} = p01 / (p00 + p01), with p00 + p01 = 1 - p11.
inline double g_l_hat(const StratumProbs& p, int x = -1) {
    const double denom = 1.0 - p.p11;
    if (!(denom > 0.0))
        throw Error(ErrorKind::DegenerateDenominator,
                    "every control subject responds" + (x >= 0 ? " at x=" + std::to_string(x) : std::string()));
    return std::clamp(p.p01 / denom, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Outcome probabilities
// ---------------------------------------------------------------------------

struct ProbEstimate {
    double value = 0.0;
    long n = 0;
    bool beyond_last_observation = false;
};

namespace detail {

// Success probability among the records accepted by `keep`: a proportion for
// binary outcomes, Kaplan-Meier survival at the horizon for censored ones.
template <typename Pred>
ProbEstimate subgroup_success(const Dataset& data, Pred keep, const std::string& what) {
    ProbEstimate out;
    if (data.outcome_kind() == OutcomeKind::Binary) {
        long hits = 0;
        for (const auto& r : data.records()) {
            if (!keep(r)) continue;
            ++out.n;
            hits += std::get<BinaryOutcome>(r.outcome).y;
        }
        if (out.n == 0) throw Error(ErrorKind::EmptyCell, "no subjects in " + what);
        out.value = double(hits) / double(out.n);
        return out;
    }
    std::vector<TimeEvent> te;
    for (const auto& r : data.records()) {
        if (!keep(r)) continue;
        const auto& sv = std::get<SurvivalOutcome>(r.outcome);
        te.push_back({sv.time, sv.event});
    }
    out.n = static_cast<long>(te.size());
    if (out.n == 0) throw Error(ErrorKind::EmptyCell, "no subjects in " + what);
    const KmValue km = km_survival(te, *data.horizon_t0());
    out.value = km.value;
    out.beyond_last_observation = km.beyond_last_observation;
    return out;
}

inline std::string cell_name(int z, int s, int x) {
    return "cell (z=" + std::to_string(z) + ", s=" + std::to_string(s) + ", x=" + std::to_string(x) + ")";
}

} // namespace detail

/// P{Y(0)=1 | S(0)=s0, X=x}, estimated in the control arm.
inline ProbEstimate outcome_prob_control(const Dataset& data, int s0, int x) {
    return detail::subgroup_success(
        data, [&](const SubjectRecord& r) { return r.z == 0 && r.s == s0 && r.x == x; },
        detail::cell_name(0, s0, x));
}

/// P{Y(0)=y | S(0)=0, X=x}.
inline double g_r_hat(const Dataset& data, int x, int y) {
    const double p1 = outcome_prob_control(data, 0, x).value;
    return y == 1 ? p1 : 1.0 - p1;
}

/// P{Y(1)=1 | S(1)=1}, pooled over all covariate levels of the treatment arm.
inline ProbEstimate outcome_prob_treated_responders(const Dataset& data) {
    return detail::subgroup_success(
        data, [](const SubjectRecord& r) { return r.z == 1 && r.s == 1; }, "treatment-arm responders");
}

// ---------------------------------------------------------------------------
// All plug-in quantities at once
// ---------------------------------------------------------------------------

struct EmpiricalTables {
    int k_levels = 0;
    std::vector<double> px_hat;                    // [x]
    StratumProbabilities stratum;                  // [x]
    std::vector<double> g_l;                       // [x]
    std::vector<std::array<double, 2>> g_r;        // [x][y]
    // Control-arm success probability given S(0)=j at x. Empty for j=1 when
    // the level has no control responders (then p11 = 0 and it is not needed).
    std::array<std::vector<std::optional<double>>, 2> pr_y0_given_s0;
    double pr_y1_given_s1 = 0.0;
    bool beyond_last_observation = false;
};

/// Builds every plug-in estimate in one pass over the records.
///
/// Throws EmptyArmAtLevel, DegenerateDenominator or EmptyCell when a level
/// lacks the subjects an estimator needs.
inline EmpiricalTables build_empirical_tables(const Dataset& data) {
    const int k = data.k_levels();
    const bool binary = data.outcome_kind() == OutcomeKind::Binary;
    const CountTable counts = tabulate(data);

    EmpiricalTables t;
    t.k_levels = k;
    t.px_hat.resize(static_cast<std::size_t>(k));
    t.stratum.levels.resize(static_cast<std::size_t>(k));
    t.g_l.resize(static_cast<std::size_t>(k));
    t.g_r.resize(static_cast<std::size_t>(k));
    t.pr_y0_given_s0[0].assign(static_cast<std::size_t>(k), std::nullopt);
    t.pr_y0_given_s0[1].assign(static_cast<std::size_t>(k), std::nullopt);

    // Survival data grouped by control cell (s, x) and treated responders.
    std::vector<std::vector<TimeEvent>> control_groups;
    std::vector<TimeEvent> treated_responders;
    if (!binary) {
        control_groups.resize(static_cast<std::size_t>(2 * k));
        for (const auto& r : data.records()) {
            const auto& sv = std::get<SurvivalOutcome>(r.outcome);
            if (r.z == 0) control_groups[static_cast<std::size_t>(2 * r.x + r.s)].push_back({sv.time, sv.event});
            else if (r.s == 1) treated_responders.push_back({sv.time, sv.event});
        }
    }
    auto control_success = [&](int s, int x) -> std::optional<double> {
        const long n = counts.count(0, s, x);
        if (n == 0) return std::nullopt;
        if (binary) return double(counts.successes(0, s, x)) / double(n);
        const KmValue km = km_survival(control_groups[static_cast<std::size_t>(2 * x + s)], *data.horizon_t0());
        t.beyond_last_observation = t.beyond_last_observation || km.beyond_last_observation;
        return km.value;
    };

    const double n = static_cast<double>(data.size());
    for (int x = 0; x < k; ++x) {
        const auto xi = static_cast<std::size_t>(x);
        t.px_hat[xi] = double(counts.level_total(x)) / n;
        t.stratum.levels[xi] = estimate_stratum_probs(counts, x);
        t.g_l[xi] = g_l_hat(t.stratum.levels[xi], x);

        const auto nonresp = control_success(0, x);
        if (!nonresp) throw Error(ErrorKind::EmptyCell, "no subjects in " + detail::cell_name(0, 0, x));
        t.g_r[xi] = {1.0 - *nonresp, *nonresp};
        t.pr_y0_given_s0[0][xi] = *nonresp;
        t.pr_y0_given_s0[1][xi] = control_success(1, x);
    }

    long treated_resp = 0, treated_resp_success = 0;
    for (int x = 0; x < k; ++x) {
        treated_resp += counts.count(1, 1, x);
        treated_resp_success += counts.successes(1, 1, x);
    }
    if (treated_resp == 0) throw Error(ErrorKind::EmptyCell, "no subjects in treatment-arm responders");
    if (binary) {
        t.pr_y1_given_s1 = double(treated_resp_success) / double(treated_resp);
    } else {
        const KmValue km = km_survival(treated_responders, *data.horizon_t0());
        t.pr_y1_given_s1 = km.value;
        t.beyond_last_observation = t.beyond_last_observation || km.beyond_last_observation;
    }
    return t;
}

} // namespace pstrat
