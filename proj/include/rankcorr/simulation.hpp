#pragma once

// Monte Carlo designs for transformation-model rank regression and the
// replication engine that summarizes bias, RMSE, mean standard error and
// Wald coverage.
//
// Design I   X ~ N((-10, 20)', diag(9, 4)), beta = (1.6, 1),
//            Y = exp((X'beta + eps) / 2) with eps = g / 2 and g having density
//            exp(g - exp(g)). If U is uniform then log(-log U) has that
//            density, so eps = log(-log U) / 2 has density 2 exp(2w - exp(2w)).
//            The positive branch of log(y^2) = X'beta + eps gives Y.
// Design II  Design I censored by C ~ N(9.2, 0.5^2): Y~ = min(Y, C),
//            Delta = I[Y <= C].
// Design III (X1, X3) ~ N((-2, 2)', I), X2 in {0, 2} with equal probability,
//            beta = (1.6, 0.5, 1), Y = X'beta + eps, eps ~ N(0, 0.5^2). The
//            continuous X3 is the anchor.

#include "rankcorr/core_model.hpp"
#include "rankcorr/detail/parallel.hpp"
#include "rankcorr/estimator.hpp"

#include <Eigen/Core>
#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rankcorr {

enum class Design { I, II, III };

inline std::string to_string(Design d) {
    switch (d) {
        case Design::I: return "I";
        case Design::II: return "II";
        case Design::III: return "III";
    }
    return "?";
}

inline std::optional<Design> parse_design(const std::string& s) {
    if (s == "I" || s == "1") return Design::I;
    if (s == "II" || s == "2") return Design::II;
    if (s == "III" || s == "3") return Design::III;
    return std::nullopt;
}

struct DesignSpec {
    Design design = Design::I;
    int n = 500;
    ParamVector true_theta{1.6};

    static DesignSpec make(Design design, int n) {
        DesignSpec s{design, n, design == Design::III ? ParamVector{1.6, 0.5} : ParamVector{1.6}};
        s.validate();
        return s;
    }

    void validate() const {
        if (n < 10) throw InputError("design sample size must be at least 10, got " + std::to_string(n));
        const Eigen::Index expected = design == Design::III ? 2 : 1;
        if (true_theta.size() != expected)
            throw InputError("design " + to_string(design) + " has " + std::to_string(expected) + " free parameters");
    }
};

inline constexpr double kWaldCritical = 1.96;

inline Dataset generate_design(const DesignSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    auto open_uniform = [&] {
        double u = 0.0;
        while (u == 0.0) u = uniform(rng);
        return u;
    };

    const auto n = static_cast<Eigen::Index>(spec.n);
    const Eigen::VectorXd beta = build_full_coefficients(spec.true_theta);
    Eigen::VectorXd y(n);
    Eigen::MatrixXd x(n, beta.size());
    std::vector<bool> events;

    switch (spec.design) {
        case Design::I:
        case Design::II: {
            const bool censor = spec.design == Design::II;
            if (censor) events.resize(static_cast<std::size_t>(n));
            for (Eigen::Index i = 0; i < n; ++i) {
                x(i, 0) = -10.0 + 3.0 * gauss(rng);
                x(i, 1) = 20.0 + 2.0 * gauss(rng);
                const double eps = 0.5 * std::log(-std::log(open_uniform()));
                const double t = std::exp(0.5 * (x.row(i).dot(beta) + eps));
                if (censor) {
                    const double c = 9.2 + 0.5 * gauss(rng);
                    events[static_cast<std::size_t>(i)] = t <= c;
                    y(i) = std::min(t, c);
                } else {
                    y(i) = t;
                }
            }
            break;
        }
        case Design::III: {
            for (Eigen::Index i = 0; i < n; ++i) {
                x(i, 0) = -2.0 + gauss(rng);
                x(i, 2) = 2.0 + gauss(rng);
                x(i, 1) = uniform(rng) < 0.5 ? 0.0 : 2.0;
                y(i) = x.row(i).dot(beta) + 0.5 * gauss(rng);
            }
            break;
        }
    }
    return Dataset(std::move(y), std::move(x), std::move(events));
}

/// Least squares with intercept on all d+1 covariates, reported as the first
/// d slopes divided by the anchor slope.
inline ParamVector ols_fit(const Dataset& data) {
    const Eigen::Index n = data.n();
    const Eigen::Index p = data.d() + 2;
    if (n < p) throw InputError("least squares needs at least " + std::to_string(p) + " rows");
    Eigen::MatrixXd design(n, p);
    design.col(0).setOnes();
    design.rightCols(p - 1) = data.covariates();
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < p) throw DiagnosticsError("least squares normal equations are singular", std::numeric_limits<double>::infinity());
    const Eigen::VectorXd coef = qr.solve(data.response());
    const double anchor = coef(p - 1);
    if (std::abs(anchor) <= 1e-10) throw DiagnosticsError("anchor coefficient is numerically zero", std::abs(anchor));
    return ParamVector(Eigen::VectorXd(coef.segment(1, data.d()) / anchor));
}

/// Outcome of one replication.
struct Replication {
    ParamVector theta_hat;
    Eigen::VectorXd std_errors;
    ParamVector theta_step;
    std::optional<ParamVector> theta_ls;
    bool converged = false;
    int outer_iterations = 0;
    double censoring_rate = 0.0;
};

struct ParameterSummary {
    double mean = 0.0;
    double bias = 0.0;
    double rmse = 0.0;
    double mean_se = std::numeric_limits<double>::quiet_NaN();
    double coverage = std::numeric_limits<double>::quiet_NaN();
};

struct SimulationSummary {
    std::vector<ParameterSummary> smoothed;  // SMRCE / SPRCE, one entry per parameter
    std::vector<ParameterSummary> step;      // MRCE / PRCE
    std::vector<ParameterSummary> least_squares;  // Design III only
    Eigen::VectorXd true_theta;
    int reps = 0;
    int failures = 0;
    double mean_outer_iterations = 0.0;
    double mean_censoring_rate = 0.0;
};

namespace detail {

inline std::vector<ParameterSummary> summarize_estimates(const std::vector<Eigen::VectorXd>& estimates,
                                                         const std::vector<Eigen::VectorXd>* std_errors,
                                                         const Eigen::VectorXd& truth) {
    const auto d = truth.size();
    std::vector<ParameterSummary> out(static_cast<std::size_t>(d));
    const double count = static_cast<double>(estimates.size());
    for (Eigen::Index k = 0; k < d; ++k) {
        ParameterSummary& s = out[static_cast<std::size_t>(k)];
        long double sum = 0.0L, sq = 0.0L;
        for (const auto& e : estimates) {
            sum += e(k);
            sq += static_cast<long double>(e(k) - truth(k)) * (e(k) - truth(k));
        }
        s.mean = static_cast<double>(sum / count);
        s.bias = s.mean - truth(k);
        s.rmse = std::sqrt(static_cast<double>(sq / count));
        if (std_errors != nullptr) {
            long double se_sum = 0.0L;
            std::size_t hits = 0;
            for (std::size_t r = 0; r < estimates.size(); ++r) {
                const double se = (*std_errors)[r](k);
                se_sum += se;
                if (std::abs(estimates[r](k) - truth(k)) <= kWaldCritical * se) ++hits;
            }
            s.mean_se = static_cast<double>(se_sum / count);
            s.coverage = static_cast<double>(hits) / count;
        }
    }
    return out;
}

}  // namespace detail

/// Aggregates replications; non-converged ones are counted in `failures` and
/// left out of every statistic.
inline SimulationSummary summarize(const std::vector<Replication>& reps, const ParamVector& truth) {
    SimulationSummary out;
    out.true_theta = truth.values();
    out.reps = static_cast<int>(reps.size());
    std::vector<Eigen::VectorXd> smoothed, step, se, ls;
    long double iterations = 0.0L, censoring = 0.0L;
    for (const auto& r : reps) {
        if (!r.converged) {
            ++out.failures;
            continue;
        }
        smoothed.push_back(r.theta_hat.values());
        se.push_back(r.std_errors);
        step.push_back(r.theta_step.values());
        if (r.theta_ls) ls.push_back(r.theta_ls->values());
        iterations += r.outer_iterations;
        censoring += r.censoring_rate;
    }
    if (smoothed.empty()) throw DiagnosticsError("every replication failed", std::numeric_limits<double>::infinity());
    out.smoothed = detail::summarize_estimates(smoothed, &se, truth.values());
    out.step = detail::summarize_estimates(step, nullptr, truth.values());
    if (ls.size() == smoothed.size()) out.least_squares = detail::summarize_estimates(ls, nullptr, truth.values());
    out.mean_outer_iterations = static_cast<double>(iterations / static_cast<long double>(smoothed.size()));
    out.mean_censoring_rate = static_cast<double>(censoring / static_cast<long double>(smoothed.size()));
    return out;
}

/// Fits one replication. Diagnostics errors mark the replication failed.
inline Replication fit_replication(const DesignSpec& spec, const Dataset& data, const FitOptions& options) {
    Replication rep;
    rep.censoring_rate = data.censoring_rate();
    try {
        const EstimateResult fitted = fit(data, options);
        rep.theta_hat = fitted.theta_hat;
        rep.std_errors = fitted.std_errors;
        rep.theta_step = fitted.theta_mrce;
        rep.converged = fitted.converged;
        rep.outer_iterations = fitted.outer_iterations;
    } catch (const DiagnosticsError&) {
        rep.converged = false;
    }
    if (spec.design == Design::III) {
        try {
            rep.theta_ls = ols_fit(data);
        } catch (const DiagnosticsError&) {
            rep.converged = false;
        }
    }
    return rep;
}

/// Replication r uses data seed `seed + r` (r = 1..reps) and is independent
/// of every other replication, so results do not depend on the worker count.
template <class Fitter>
std::vector<Replication> run_replications(const DesignSpec& spec, int reps, std::uint64_t seed, Fitter&& fitter) {
    if (reps < 1) throw InputError("reps must be at least 1");
    spec.validate();
    std::vector<Replication> out(static_cast<std::size_t>(reps));
    parallel_for(out.size(), [&](std::size_t r) {
        const Dataset data = generate_design(spec, seed + r + 1);
        out[r] = fitter(data);
    });
    return out;
}

inline SimulationSummary run_study(const DesignSpec& spec, int reps, std::uint64_t seed, const FitOptions& options = {}) {
    options.validate();
    const auto results = run_replications(spec, reps, seed, [&](const Dataset& data) {
        return fit_replication(spec, data, options);
    });
    return summarize(results, spec.true_theta);
}

}  // namespace rankcorr
