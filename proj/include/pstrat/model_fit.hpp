#pragma once

// Counterfactual response model and its least-squares fit.
//
// For a control non-responder at level x whose control outcome is y, the
// model gives the probability of responding under treatment as
//     G_M(x, y; beta) = logistic(beta0 + beta1 * y + beta2 * x).
// Mixing over the control outcome must reproduce the empirical
// P{S(1)=1 | S(0)=0, x} at every level; beta minimizes the summed squared
// discrepancy across levels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pstrat/core_types.hpp"
#include "pstrat/empirical.hpp"

namespace pstrat {

inline double logistic(double eta) {
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double g_m(const ModelParams& beta, int x, int y) {
    return logistic(beta.beta0 + beta.beta1 * y + beta.beta2 * x);
}

/// Signed per-level residuals  G_L(x) - sum_y G_M(x,y) G_R(x,y).
inline std::vector<double> residuals(const ModelParams& beta, const EmpiricalTables& t) {
    std::vector<double> r(static_cast<std::size_t>(t.k_levels));
    for (int x = 0; x < t.k_levels; ++x) {
        const auto xi = static_cast<std::size_t>(x);
        r[xi] = t.g_l[xi] - (g_m(beta, x, 0) * t.g_r[xi][0] + g_m(beta, x, 1) * t.g_r[xi][1]);
    }
    return r;
}

inline double objective(const ModelParams& beta, const EmpiricalTables& t) {
    double q = 0.0;
    for (double r : residuals(beta, t)) q += r * r;
    return q;
}

/// Rows: levels; columns: d residual_x / d(beta0, beta1, beta2).
inline Eigen::MatrixXd residual_jacobian(const ModelParams& beta, const EmpiricalTables& t) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(t.k_levels, 3);
    for (int x = 0; x < t.k_levels; ++x) {
        for (int y = 0; y < 2; ++y) {
            const double g = g_m(beta, x, y);
            const double w = g * (1.0 - g) * t.g_r[static_cast<std::size_t>(x)][static_cast<std::size_t>(y)];
            jac(x, 0) -= w;
            jac(x, 1) -= w * y;
            jac(x, 2) -= w * x;
        }
    }
    return jac;
}

inline std::array<double, 3> analytic_gradient(const ModelParams& beta, const EmpiricalTables& t) {
    const auto r = residuals(beta, t);
    const Eigen::MatrixXd jac = residual_jacobian(beta, t);
    std::array<double, 3> g{};
    for (int x = 0; x < t.k_levels; ++x)
        for (int c = 0; c < 3; ++c) g[static_cast<std::size_t>(c)] += 2.0 * r[static_cast<std::size_t>(x)] * jac(x, c);
    return g;
}

/// Numerical rank: singular values above 1e-8 times the largest.
inline int numerical_rank(const Eigen::MatrixXd& m, double rel_tol = 1e-8) {
    if (m.size() == 0) return 0;
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
    if (sv.size() == 0 || !(sv(0) > 0.0)) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > rel_tol * sv(0)) ++rank;
    return rank;
}

inline int jacobian_rank(const ModelParams& beta, const EmpiricalTables& t) {
    return numerical_rank(residual_jacobian(beta, t));
}

// ---------------------------------------------------------------------------
// BFGS
// ---------------------------------------------------------------------------

struct BfgsResult {
    std::array<double, 3> x{};
    double f = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

namespace detail {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 axpy(const Vec3& x, double a, const Vec3& p) { return {x[0] + a * p[0], x[1] + a * p[1], x[2] + a * p[2]}; }

// Line search for the strong Wolfe conditions (bracketing then bisection
// zoom). Returns the accepted step, or 0 when no decrease could be found.
template <typename FG>
double wolfe_search(FG&& fg, const Vec3& x, double f0, const Vec3& g0, const Vec3& p,
                    double& f_out, Vec3& g_out) {
    constexpr double c1 = 1e-4, c2 = 0.9;
    const double d0 = dot(g0, p);
    double a_prev = 0.0, f_prev = f0, a = 1.0;
    double lo = 0.0, hi = 0.0, f_lo = f0;
    bool bracketed = false;

    for (int i = 0; i < 40 && !bracketed; ++i) {
        Vec3 g;
        const double f = fg(axpy(x, a, p), g);
        if (!std::isfinite(f) || f > f0 + c1 * a * d0 || (i > 0 && f >= f_prev)) {
            lo = a_prev; f_lo = f_prev; hi = a;
            bracketed = true;
            break;
        }
        const double d = dot(g, p);
        if (std::abs(d) <= -c2 * d0) { f_out = f; g_out = g; return a; }
        if (d >= 0.0) {
            lo = a; f_lo = f; hi = a_prev;
            bracketed = true;
            break;
        }
        a_prev = a; f_prev = f;
        a *= 2.0;
    }
    if (!bracketed) return 0.0;

    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        Vec3 g;
        const double f = fg(axpy(x, mid, p), g);
        if (!std::isfinite(f) || f > f0 + c1 * mid * d0 || f >= f_lo) {
            hi = mid;
        } else {
            const double d = dot(g, p);
            if (std::abs(d) <= -c2 * d0) { f_out = f; g_out = g; return mid; }
            if (d * (hi - lo) >= 0.0) hi = lo;
            lo = mid; f_lo = f;
        }
        if (std::abs(hi - lo) < 1e-16 * std::max(1.0, std::abs(lo))) break;
    }
    // Accept the best sufficient-decrease point found, if any.
    if (lo > 0.0) {
        f_out = fg(axpy(x, lo, p), g_out);
        return lo;
    }
    return 0.0;
}

} // namespace detail

/// Quasi-Newton minimization of a smooth function of three variables.
/// `fg(x, grad)` returns f(x) and writes the gradient.
template <typename FG>
BfgsResult minimize_bfgs(FG&& fg, std::array<double, 3> x0, double grad_tol, int max_iter) {
    using detail::Vec3;
    BfgsResult res;
    Vec3 x = x0, g;
    double f = fg(x, g);
    double h[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    bool scaled = false;

    // The gradient tolerance decides convergence, but iterations continue
    // past it until the objective stops decreasing: in the flat logistic
    // tails a gradient norm below 1e-8 can still sit far from the minimizer.
    int it = 0;
    double f_prev = std::numeric_limits<double>::infinity();
    for (; it < max_iter; ++it) {
        const double gn = detail::norm(g);
        if (gn == 0.0) break;
        if (gn < grad_tol && !(f < f_prev)) break;
        Vec3 p{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) p[i] -= h[i][j] * g[j];
        if (detail::dot(p, g) >= 0.0) {
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) h[i][j] = (i == j);
            p = {-g[0], -g[1], -g[2]};
        }

        double f_new = f;
        Vec3 g_new{};
        const double step = detail::wolfe_search(fg, x, f, g, p, f_new, g_new);
        if (step == 0.0) break;

        const Vec3 x_new = detail::axpy(x, step, p);
        const Vec3 s{x_new[0] - x[0], x_new[1] - x[1], x_new[2] - x[2]};
        const Vec3 yv{g_new[0] - g[0], g_new[1] - g[1], g_new[2] - g[2]};
        const double sy = detail::dot(s, yv);
        if (sy > 1e-300 && sy > 1e-12 * detail::norm(s) * detail::norm(yv)) {
            if (!scaled) {
                const double gamma = sy / detail::dot(yv, yv);
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j) h[i][j] = (i == j) ? gamma : 0.0;
                scaled = true;
            }
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            const double rho = 1.0 / sy;
            Vec3 hy{};
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) hy[i] += h[i][j] * yv[j];
            const double yhy = detail::dot(yv, hy);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
        x = x_new;
        f_prev = f;
        f = f_new;
        g = g_new;
    }
    res.x = x;
    res.f = f;
    res.grad_norm = detail::norm(g);
    res.iterations = it;
    res.converged = res.grad_norm < grad_tol;
    return res;
}

// ---------------------------------------------------------------------------
// Fitting
// ---------------------------------------------------------------------------

struct FitConfig {
    std::vector<ModelParams> init_points{ModelParams{}};
    // Adds every integer point of [-bound, bound]^3 as a start.
    std::optional<int> grid_bound;
    double gradient_tolerance = 1e-8;
    int max_iterations = 500;
    double finite_difference_step = 1e-6;

    void check() const {
        if (!(gradient_tolerance > 0.0)) throw Error(ErrorKind::InvalidArgument, "gradient tolerance must be positive");
        if (max_iterations < 1) throw Error(ErrorKind::InvalidArgument, "max_iterations must be at least 1");
        if (grid_bound && *grid_bound < 0) throw Error(ErrorKind::InvalidArgument, "grid bound must be nonnegative");
        if (init_points.empty() && !grid_bound) throw Error(ErrorKind::InvalidArgument, "no starting points");
    }

    std::vector<ModelParams> starts() const {
        std::vector<ModelParams> out = init_points;
        if (grid_bound) {
            const int b = *grid_bound;
            for (int i = -b; i <= b; ++i)
                for (int j = -b; j <= b; ++j)
                    for (int k = -b; k <= b; ++k) out.push_back({double(i), double(j), double(k)});
        }
        return out;
    }
};

struct StartOutcome {
    ModelParams init;
    ModelParams beta;
    double objective_value = 0.0;
    bool converged = false;
    int iterations = 0;
};

struct FitResult {
    ModelParams beta_hat;
    double objective_value = 0.0;
    bool converged = false;
    int jacobian_rank = 0;
    std::vector<double> per_level_residuals;
    bool under_identified = false;
    std::vector<std::string> warnings;
    std::vector<StartOutcome> starts;
};

/// Least-squares fit of beta from every configured start; the smallest
/// objective wins, ties going to the lexicographically smallest beta.
///
/// Fewer than three levels cannot identify beta; the fit still runs and the
/// result carries a warning. A start that exhausts max_iterations returns its
/// best iterate with converged = false.
inline FitResult fit_beta(const EmpiricalTables& tables, const FitConfig& config = {}) {
    config.check();
    auto fg = [&](const std::array<double, 3>& b, std::array<double, 3>& grad) {
        const auto beta = ModelParams::from_array(b);
        grad = analytic_gradient(beta, tables);
        return objective(beta, tables);
    };

    FitResult out;
    const StartOutcome* best = nullptr;
    for (const auto& init : config.starts()) {
        const BfgsResult r = minimize_bfgs(fg, init.as_array(), config.gradient_tolerance, config.max_iterations);
        out.starts.push_back({init, ModelParams::from_array(r.x), r.f, r.converged, r.iterations});
    }
    for (const auto& s : out.starts) {
        if (!best || s.objective_value < best->objective_value ||
            (s.objective_value == best->objective_value && s.beta < best->beta))
            best = &s;
    }

    out.beta_hat = best->beta;
    out.per_level_residuals = residuals(out.beta_hat, tables);
    out.objective_value = 0.0;
    for (double r : out.per_level_residuals) out.objective_value += r * r;
    out.converged = best->converged;
    out.jacobian_rank = jacobian_rank(out.beta_hat, tables);
    out.under_identified = tables.k_levels < 3;
    if (out.under_identified)
        out.warnings.push_back("under-identified: " + std::to_string(tables.k_levels) +
                               " covariate level(s) for 3 model parameters");
    if (!out.converged)
        out.warnings.push_back("non-convergence: gradient norm above tolerance at the best start");
    if (out.jacobian_rank < 3)
        out.warnings.push_back("rank-deficient Jacobian at the estimate (rank " +
                               std::to_string(out.jacobian_rank) + ")");
    return out;
}

} // namespace pstrat
