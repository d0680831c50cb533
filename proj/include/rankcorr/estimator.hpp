#pragma once

// Point and variance estimation by maximum rank correlation with
// self-induced smoothing.
//
// fit() runs the fixed-point scheme
//   theta_step        = argmax of the step objective
//   Sigma^(0)         = I
//   Sigma^(k)         = D_n(theta_eval, Sigma^(k-1))
//   theta^(k)         = argmax of the objective smoothed with Sigma^(k)
// until theta^(k) and Sigma^(k) both stop moving. D_n lives on the
// sqrt(n)-scale, so the reported covariance of theta_hat is Sigma* / n.

#include "rankcorr/core_model.hpp"
#include "rankcorr/detail/parallel.hpp"
#include "rankcorr/linalg.hpp"
#include "rankcorr/objectives.hpp"
#include "rankcorr/optimize.hpp"
#include "rankcorr/sandwich.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace rankcorr {

/// Where D_n is evaluated inside the fixed-point loop.
enum class VarianceAnchor {
    step_estimate,     // the step-objective maximizer, every iteration
    current_estimate,  // the previous smoothed estimate theta^(k-1)
};

struct FitOptions {
    double sigma_tol = 1e-6;
    double theta_tol = 1e-7;
    int max_outer_iters = 100;
    int optimizer_restarts = 20;
    int optimizer_max_evals = 5000;
    std::uint64_t seed = 1;
    double parameter_bound = 1e3;
    VarianceAnchor variance_at = VarianceAnchor::step_estimate;
    /// Sigma^(0); identity when empty.
    std::optional<Eigen::MatrixXd> initial_sigma;

    void validate() const {
        if (!(sigma_tol > 0.0) || !(theta_tol > 0.0)) throw InputError("tolerances must be positive");
        if (max_outer_iters < 1 || optimizer_restarts < 1 || optimizer_max_evals < 1)
            throw InputError("iteration caps must be at least 1");
        if (!(parameter_bound > 0.0)) throw InputError("parameter bound must be positive");
    }
};

struct StepMaximum {
    ParamVector theta;
    double objective = 0.0;
};

struct SmoothedMaximum {
    ParamVector theta;
    double objective = 0.0;
    double score_sup_norm = 0.0;
    bool converged = false;
};

struct EstimateResult {
    ParamVector theta_hat;
    ParamVector theta_mrce;
    Eigen::MatrixXd cov_hat;     // covariance of theta_hat: Sigma* / n
    Eigen::MatrixXd sigma_star;  // fixed point of the smoothing iteration
    Eigen::MatrixXd sigma_first; // Sigma^(1)
    Eigen::VectorXd std_errors;
    int outer_iterations = 0;
    std::vector<double> sigma_trace;  // max-abs change of Sigma per iteration
    std::vector<double> theta_trace;  // max-abs change of theta per iteration
    bool converged = false;
    double objective_at_optimum = 0.0;
    double step_objective_at_mrce = 0.0;
    std::vector<std::string> warnings;
};

/// Score sup-norm below which a smoothed maximizer counts as converged.
inline constexpr double kScoreTolerance = 1e-6;

namespace detail {

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

// Exact maximizer of the step objective for d = 1. Each pair switches its
// indicator at theta = -b/a where a, b are the free and anchor covariate
// differences; sweeping the sorted switch points visits every plateau. The
// midpoint of the leftmost best plateau inside the box is returned.
inline StepMaximum sweep_step_objective_1d(const Dataset& data, double bound) {
    const auto n = static_cast<std::size_t>(data.n());
    const auto& x = data.covariates();
    const double* y = data.response().data();
    const bool use_events = data.censored();
    auto weight = [&](std::size_t i, std::size_t j) -> std::int64_t {
        return ((!use_events || data.event(static_cast<Eigen::Index>(j))) && y[i] > y[j]) ? 1 : 0;
    };

    std::int64_t base = 0;
    std::vector<std::pair<double, std::int64_t>> events;
    events.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const std::int64_t w_ij = weight(i, j);
            const std::int64_t w_ji = weight(j, i);
            if (w_ij == 0 && w_ji == 0) continue;
            const double a = x(static_cast<Eigen::Index>(i), 0) - x(static_cast<Eigen::Index>(j), 0);
            const double b = x(static_cast<Eigen::Index>(i), 1) - x(static_cast<Eigen::Index>(j), 1);
            if (a == 0.0) {
                base += b > 0.0 ? w_ij : (b < 0.0 ? w_ji : 0);
                continue;
            }
            // a > 0: index positive to the right of the switch point.
            const std::int64_t left = a > 0.0 ? w_ji : w_ij;
            const std::int64_t right = a > 0.0 ? w_ij : w_ji;
            base += left;
            if (right != left) events.emplace_back(-b / a, right - left);
        }
    }
    std::sort(events.begin(), events.end());

    // Plateaus: (-inf, t_0), (t_0, t_1), ..., (t_m, +inf).
    std::int64_t value = base;
    std::int64_t best_value = base;
    double best_lo = -std::numeric_limits<double>::infinity();
    double best_hi = events.empty() ? std::numeric_limits<double>::infinity() : events.front().first;
    for (std::size_t k = 0; k < events.size();) {
        const double t = events[k].first;
        while (k < events.size() && events[k].first == t) value += events[k++].second;
        const double hi = k < events.size() ? events[k].first : std::numeric_limits<double>::infinity();
        if (value > best_value && hi > -bound && t < bound) {
            best_value = value;
            best_lo = t;
            best_hi = hi;
        }
    }
    double theta;
    if (std::isfinite(best_lo) && std::isfinite(best_hi)) theta = 0.5 * (best_lo + best_hi);
    else if (std::isfinite(best_lo)) theta = best_lo + 1.0;
    else if (std::isfinite(best_hi)) theta = best_hi - 1.0;
    else theta = 0.0;
    theta = std::clamp(theta, -bound, bound);

    StepMaximum out{ParamVector{theta}, 0.0};
    out.objective = step_objective(data, out.theta);
    return out;
}

// Per-coordinate scale that makes a unit change in theta_k move the index by
// about one anchor standard deviation.
inline Eigen::VectorXd spread_scale(const Dataset& data) {
    const auto& x = data.covariates();
    const Eigen::Index d = data.d();
    auto sd = [&](Eigen::Index k) {
        const double mean = x.col(k).mean();
        return std::sqrt((x.col(k).array() - mean).square().sum() / static_cast<double>(x.rows()));
    };
    const double anchor_sd = sd(d);
    Eigen::VectorXd scale(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        const double s = sd(k);
        scale(k) = (s > 0.0 && anchor_sd > 0.0) ? anchor_sd / s : 1.0;
    }
    return scale;
}

}  // namespace detail

inline SmoothedMaximum maximize_smoothed(const Dataset& data, const SmoothingMatrix& sigma, const ParamVector& init,
                                         const FitOptions& options = {});

/// Maximizer of the step objective (Q*_n under censoring, Q_n otherwise).
/// d = 1 uses an exact plateau sweep; d > 1 uses Nelder-Mead multistart from
/// the origin and from the identity-smoothed maximizer, with seeded Gaussian
/// perturbations (one RNG stream per restart, seed + restart index).
inline StepMaximum maximize_step_objective(const Dataset& data, const FitOptions& options = {}) {
    options.validate();
    if (data.d() == 1) return detail::sweep_step_objective_1d(data, options.parameter_bound);

    const Eigen::Index d = data.d();
    const optimize::Box box{options.parameter_bound};
    const Eigen::VectorXd origin = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd smooth_start = origin;
    try {
        smooth_start = maximize_smoothed(data, SmoothingMatrix::identity(d), ParamVector(origin), options)
                           .theta.values();
    } catch (const DiagnosticsError&) {
    }
    const Eigen::VectorXd spread = detail::spread_scale(data);

    auto negated = [&](const Eigen::VectorXd& t) { return -step_objective(data, ParamVector(t)); };
    const auto restarts = static_cast<std::size_t>(options.optimizer_restarts);
    std::vector<optimize::NelderMeadResult> results(restarts);
    parallel_for(restarts, [&](std::size_t r) {
        std::mt19937_64 rng(options.seed + r);
        std::normal_distribution<double> gauss(0.0, 1.0);
        const Eigen::VectorXd& center = (r % 2 == 0) ? smooth_start : origin;
        const bool spread_scaled = (r / 2) % 2 == 1;
        Eigen::VectorXd start = center;
        if (r >= 2) {
            for (Eigen::Index k = 0; k < d; ++k) start(k) += gauss(rng) * (spread_scaled ? spread(k) : 1.0);
        }
        optimize::NelderMeadOptions nm;
        nm.max_evals = options.optimizer_max_evals;
        nm.box = box;
        const double step = spread_scaled ? spread.maxCoeff() * 0.25 : 0.25;
        results[r] = optimize::nelder_mead(negated, start, step, nm);
    });

    std::size_t best = 0;
    for (std::size_t r = 1; r < restarts; ++r)
        if (results[r].value < results[best].value) best = r;
    // Polish with a small simplex around the winner.
    optimize::NelderMeadOptions polish;
    polish.max_evals = options.optimizer_max_evals;
    polish.box = box;
    auto refined = optimize::nelder_mead(negated, results[best].x, 0.01, polish);
    Eigen::VectorXd theta = refined.value < results[best].value ? refined.x : results[best].x;
    return StepMaximum{ParamVector(theta), step_objective(data, ParamVector(theta))};
}

/// Quasi-Newton ascent of the smoothed objective from `init`, with the
/// analytic score as gradient and the analytic Hessian as initial curvature.
/// Falls back to Nelder-Mead when the line search stalls away from a
/// stationary point.
inline SmoothedMaximum maximize_smoothed(const Dataset& data, const SmoothingMatrix& sigma, const ParamVector& init,
                                         const FitOptions& options) {
    const Eigen::Index d = data.d();
    if (init.size() != d) throw InputError("initial parameter length does not match d");
    auto fg = [&](const Eigen::VectorXd& t) {
        auto e = smoothed_value_and_score(data, ParamVector(t), sigma);
        return std::pair<double, Eigen::VectorXd>{-e.value, -e.score};
    };

    Eigen::MatrixXd inverse_hessian;
    {
        const Eigen::MatrixXd a = hessian_estimate(data, init, sigma);
        Eigen::LLT<Eigen::MatrixXd> llt(-a);
        if (llt.info() == Eigen::Success && condition_estimate(-a) < kMaxCondition)
            inverse_hessian = llt.solve(Eigen::MatrixXd::Identity(d, d));
    }

    optimize::BfgsOptions bo;
    bo.max_evals = options.optimizer_max_evals;
    bo.box = optimize::Box{options.parameter_bound};
    auto run = optimize::bfgs(fg, init.values(), inverse_hessian, bo);

    double sup = run.gradient.cwiseAbs().maxCoeff();
    if (sup > kScoreTolerance && run.status != optimize::BfgsStatus::gradient_small) {
        auto negated = [&](const Eigen::VectorXd& t) { return -smoothed_objective(data, ParamVector(t), sigma); };
        optimize::NelderMeadOptions nm;
        nm.max_evals = options.optimizer_max_evals;
        nm.x_tol = 1e-10;
        nm.box = bo.box;
        const auto simplex = optimize::nelder_mead(negated, run.x, 0.1 * (1.0 + run.x.cwiseAbs().maxCoeff()), nm);
        auto second = optimize::bfgs(fg, simplex.x, Eigen::MatrixXd{}, bo);
        if (second.value <= run.value) run = std::move(second);
        sup = run.gradient.cwiseAbs().maxCoeff();
    }
    return SmoothedMaximum{ParamVector(run.x), -run.value, sup, sup <= kScoreTolerance};
}

/// Simultaneous point and variance estimation by the smoothing fixed point.
inline EstimateResult fit(const Dataset& data, const FitOptions& options = {}) {
    options.validate();
    const Eigen::Index d = data.d();
    const double n = static_cast<double>(data.n());

    EstimateResult out;
    const StepMaximum step = maximize_step_objective(data, options);
    out.theta_mrce = step.theta;
    out.step_objective_at_mrce = step.objective;

    Eigen::MatrixXd sigma_prev = options.initial_sigma.value_or(Eigen::MatrixXd::Identity(d, d));
    if (sigma_prev.rows() != d || sigma_prev.cols() != d) throw InputError("initial smoothing matrix has wrong size");
    SmoothingMatrix sigma = SmoothingMatrix(sigma_prev);
    ParamVector theta = step.theta;
    SmoothedMaximum current{theta, 0.0, 0.0, false};

    for (int k = 1; k <= options.max_outer_iters; ++k) {
        const ParamVector& eval_at = options.variance_at == VarianceAnchor::step_estimate ? step.theta : theta;
        Eigen::MatrixXd next = sandwich_covariance(data, eval_at, sigma);
        const double trace = next.trace();
        if (!(trace > 0.0)) throw DiagnosticsError("sandwich covariance has non-positive trace", condition_estimate(next));
        if (floor_eigenvalues(next, 1e-10 * trace / static_cast<double>(d)))
            out.warnings.push_back("iteration " + std::to_string(k) +
                                   ": sandwich covariance was not positive definite; eigenvalues floored");
        sigma = SmoothingMatrix(next);
        if (k == 1) out.sigma_first = next;

        current = maximize_smoothed(data, sigma, theta, options);
        const double sigma_change = detail::max_abs(next - sigma_prev);
        const double theta_change = detail::max_abs(current.theta.values() - theta.values());
        out.sigma_trace.push_back(sigma_change);
        out.theta_trace.push_back(theta_change);
        out.outer_iterations = k;
        sigma_prev = std::move(next);
        theta = current.theta;

        if (theta_change <= options.theta_tol &&
            sigma_change <= options.sigma_tol * std::max(1.0, detail::max_abs(sigma_prev))) {
            out.converged = true;
            break;
        }
    }
    if (!current.converged)
        out.warnings.push_back("final smoothed maximization did not reach score tolerance");

    out.theta_hat = theta;
    out.sigma_star = sigma_prev;
    out.cov_hat = sigma_prev / n;
    out.std_errors = out.cov_hat.diagonal().cwiseMax(0.0).cwiseSqrt();
    out.objective_at_optimum = current.objective;
    return out;
}

}  // namespace rankcorr
