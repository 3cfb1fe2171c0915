#pragma once

// Observed-data model for a two-arm randomized trial with a binary
// intermediate response and a binary (or right-censored) long-term outcome.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pstrat/errors.hpp"

namespace pstrat {

struct BinaryOutcome {
    int y = 0; // 1 = success (e.g. event-free at the horizon)
};

struct SurvivalOutcome {
    double time = 0.0;
    int event = 0; // 0 = censored, 1 = event
};

using Outcome = std::variant<BinaryOutcome, SurvivalOutcome>;

enum class OutcomeKind { Binary, Survival };

struct SubjectRecord {
    std::string id;
    int z = 0; // 0 = control, 1 = treatment
    int x = 0; // covariate level in 0..K
    int s = 0; // intermediate response
    Outcome outcome = BinaryOutcome{};

    OutcomeKind kind() const {
        return std::holds_alternative<BinaryOutcome>(outcome) ? OutcomeKind::Binary
                                                              : OutcomeKind::Survival;
    }
};

/// Immutable collection of subject records sharing one outcome kind.
///
/// Construction checks every record field (MalformedRecord otherwise). Empty
/// design cells are *not* rejected here: they are reported by validate() and
/// turn into estimation errors only where an estimator needs the cell.
class Dataset {
public:
    Dataset(std::vector<SubjectRecord> records, int k_levels,
            std::optional<double> horizon_t0 = std::nullopt)
        : records_(std::move(records)), k_levels_(k_levels), horizon_t0_(horizon_t0) {
        if (records_.empty())
            throw Error(ErrorKind::InvalidArgument, "dataset must contain at least one record");
        if (k_levels_ < 1)
            throw Error(ErrorKind::InvalidArgument, "k_levels must be at least 1");
        kind_ = records_.front().kind();
        for (std::size_t i = 0; i < records_.size(); ++i) check_record(i);
        if (kind_ == OutcomeKind::Survival) {
            if (!horizon_t0_)
                throw Error(ErrorKind::ConfigError, "survival outcomes require a horizon t0");
            if (!(std::isfinite(*horizon_t0_) && *horizon_t0_ >= 0.0))
                throw Error(ErrorKind::InvalidArgument, "horizon t0 must be finite and nonnegative");
        } else if (horizon_t0_) {
            throw Error(ErrorKind::ConfigError, "horizon t0 given for binary outcomes");
        }
    }

    const std::vector<SubjectRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    int k_levels() const noexcept { return k_levels_; }
    OutcomeKind outcome_kind() const noexcept { return kind_; }
    std::optional<double> horizon_t0() const noexcept { return horizon_t0_; }

    /// Same records evaluated at a different horizon (survival only).
    Dataset with_horizon(double t0) const {
        if (kind_ != OutcomeKind::Survival)
            throw Error(ErrorKind::ConfigError, "a horizon only applies to survival outcomes");
        return Dataset(records_, k_levels_, t0);
    }

    /// New dataset over the same design with different records.
    Dataset with_records(std::vector<SubjectRecord> records) const {
        return Dataset(std::move(records), k_levels_, horizon_t0_);
    }

private:
    void check_record(std::size_t i) const {
        const auto& r = records_[i];
        auto fail = [&](const std::string& what) {
            throw Error(ErrorKind::MalformedRecord,
                        "record " + std::to_string(i) + " (id '" + r.id + "'): " + what);
        };
        if (r.z != 0 && r.z != 1) fail("z must be 0 or 1");
        if (r.s != 0 && r.s != 1) fail("s must be 0 or 1");
        if (r.x < 0 || r.x >= k_levels_)
            fail("x must lie in 0.." + std::to_string(k_levels_ - 1));
        if (r.kind() != kind_) fail("outcome kind differs from the rest of the dataset");
        if (const auto* b = std::get_if<BinaryOutcome>(&r.outcome)) {
            if (b->y != 0 && b->y != 1) fail("y must be 0 or 1");
        } else {
            const auto& sv = std::get<SurvivalOutcome>(r.outcome);
            if (!(std::isfinite(sv.time) && sv.time >= 0.0)) fail("time must be finite and nonnegative");
            if (sv.event != 0 && sv.event != 1) fail("event must be 0 or 1");
        }
    }

    std::vector<SubjectRecord> records_;
    int k_levels_;
    OutcomeKind kind_ = OutcomeKind::Binary;
    std::optional<double> horizon_t0_;
};

/// Principal-stratum membership probabilities at one covariate level.
/// p00 = never responder, p01 = responds only under treatment,
/// p11 = always responder. The (1,0) stratum is empty under monotonicity.
struct StratumProbs {
    double p00 = 0.0;
    double p01 = 0.0;
    double p11 = 0.0;
};

struct StratumProbabilities {
    std::vector<StratumProbs> levels;

    const StratumProbs& operator[](int x) const { return levels.at(static_cast<std::size_t>(x)); }
};

struct ModelParams {
    double beta0 = 0.0;
    double beta1 = 0.0;
    double beta2 = 0.0;

    std::array<double, 3> as_array() const { return {beta0, beta1, beta2}; }
    static ModelParams from_array(const std::array<double, 3>& b) { return {b[0], b[1], b[2]}; }
    bool finite() const { return std::isfinite(beta0) && std::isfinite(beta1) && std::isfinite(beta2); }

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
    friend auto operator<=>(const ModelParams&, const ModelParams&) = default;
};

struct CausalEstimate {
    double theta_hat = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    double boot_mean = 0.0;         // mean of the successful replicate estimates
    double alpha = 0.05;
    ModelParams beta_hat;
    double objective_value = 0.0;
    std::size_t n_bootstrap = 0;    // replicates that produced an estimate
    std::size_t n_failed = 0;       // replicates dropped for estimation failures

    friend bool operator==(const CausalEstimate&, const CausalEstimate&) = default;
};

/// Cell counts N_zsx, plus outcome-success counts per cell for binary data.
class CountTable {
public:
    explicit CountTable(int k_levels) : cells_(static_cast<std::size_t>(k_levels)) {}

    int k_levels() const noexcept { return static_cast<int>(cells_.size()); }

    long count(int z, int s, int x) const { return at(x).n[idx(z, s)]; }
    long successes(int z, int s, int x) const { return at(x).y1[idx(z, s)]; }
    long arm_total(int z, int x) const { return count(z, 0, x) + count(z, 1, x); }
    long level_total(int x) const { return arm_total(0, x) + arm_total(1, x); }

    long total() const {
        long n = 0;
        for (int x = 0; x < k_levels(); ++x) n += level_total(x);
        return n;
    }

    void add(int z, int s, int x, std::optional<int> y) {
        auto& c = cells_.at(static_cast<std::size_t>(x));
        ++c.n[idx(z, s)];
        if (y && *y == 1) ++c.y1[idx(z, s)];
    }

private:
    struct Cell {
        std::array<long, 4> n{};
        std::array<long, 4> y1{};
    };
    static std::size_t idx(int z, int s) { return static_cast<std::size_t>(2 * z + s); }
    const Cell& at(int x) const { return cells_.at(static_cast<std::size_t>(x)); }

    std::vector<Cell> cells_;
};

inline CountTable tabulate(const Dataset& data) {
    CountTable table(data.k_levels());
    for (const auto& r : data.records()) {
        std::optional<int> y;
        if (const auto* b = std::get_if<BinaryOutcome>(&r.outcome)) y = b->y;
        table.add(r.z, r.s, r.x, y);
    }
    return table;
}

struct LevelReport {
    int x = 0;
    std::array<long, 2> arm_counts{};            // [z]
    std::array<std::array<long, 2>, 2> cells{};  // [z][s]
    double q0 = 0.0;                             // control response rate (NaN if arm empty)
    double q1 = 0.0;                             // treatment response rate (NaN if arm empty)
};

struct ValidationReport {
    std::vector<LevelReport> levels;
    std::vector<std::string> flags;    // conditions that break estimation
    std::vector<std::string> warnings; // conditions the estimators handle

    bool ok() const noexcept { return flags.empty(); }
};

/// Per-level design summary. Flags empty (z, x) cells and empty control
/// non-responder cells; warns when the observed treatment response rate falls
/// below the control rate (the stratum estimator's pooled branch covers it).
inline ValidationReport validate(const Dataset& data) {
    const CountTable counts = tabulate(data);
    ValidationReport report;
    for (int x = 0; x < data.k_levels(); ++x) {
        LevelReport lv;
        lv.x = x;
        for (int z = 0; z < 2; ++z) {
            lv.arm_counts[z] = counts.arm_total(z, x);
            for (int s = 0; s < 2; ++s) lv.cells[z][s] = counts.count(z, s, x);
        }
        const double nan = std::nan("");
        lv.q0 = lv.arm_counts[0] > 0 ? double(lv.cells[0][1]) / double(lv.arm_counts[0]) : nan;
        lv.q1 = lv.arm_counts[1] > 0 ? double(lv.cells[1][1]) / double(lv.arm_counts[1]) : nan;

        const std::string at = "x=" + std::to_string(x);
        for (int z = 0; z < 2; ++z)
            if (lv.arm_counts[z] == 0)
                report.flags.push_back("empty cell (z=" + std::to_string(z) + ", " + at + ")");
        if (lv.arm_counts[0] > 0 && lv.cells[0][0] == 0)
            report.flags.push_back("empty cell (z=0, s=0, " + at + ")");
        if (lv.arm_counts[0] > 0 && lv.arm_counts[1] > 0 &&
            lv.cells[1][1] * lv.arm_counts[0] < lv.cells[0][1] * lv.arm_counts[1])
            report.warnings.push_back("monotonicity violation at " + at +
                                      ": treatment response rate below control");
        report.levels.push_back(lv);
    }
    return report;
}

} // namespace pstrat
