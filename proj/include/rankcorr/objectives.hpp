#pragma once

// Rank correlation objectives and their self-induced smoothing.
//
// Every pairwise sum runs over unordered pairs i < j; the two ordered terms of
// a pair share the same covariate difference, so they are evaluated together.
// With censoring the ordered pair (i, j) carries weight Delta_j * I[Y_i > Y_j];
// without it Delta is identically 1. Both cases share one code path.

#include "rankcorr/core_model.hpp"
#include "rankcorr/detail/parallel.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace rankcorr {

namespace normal {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

/// Standard normal CDF. Beyond +8.5 the value rounds to exactly 1; below -10
/// it is < 1e-23 and treated as 0.
inline double cdf(double z) {
    if (z > 8.5) return 1.0;
    if (z < -10.0) return 0.0;
    return 0.5 * std::erfc(-z * kInvSqrt2);
}

/// Standard normal density, cut to zero for |z| > 12 (density < 1e-31).
inline double pdf(double z) {
    if (std::abs(z) > 12.0) return 0.0;
    return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

}  // namespace normal

namespace detail {

// Row-major copy of the covariates plus the per-call constants every pair
// kernel needs.
class PairContext {
public:
    PairContext(const Dataset& data, const ParamVector& theta, const SmoothingMatrix* sigma)
        : n_(static_cast<std::size_t>(data.n())),
          width_(static_cast<std::size_t>(data.d() + 1)),
          d_(static_cast<std::size_t>(data.d())),
          y_(data.response().data()),
          events_(data.events().data()),
          rows_(n_ * width_),
          beta_(build_full_coefficients(theta)),
          sqrt_n_(std::sqrt(static_cast<double>(n_))) {
        if (theta.size() != data.d())
            throw InputError("parameter length " + std::to_string(theta.size()) + " does not match d = " +
                             std::to_string(data.d()));
        if (sigma != nullptr) {
            if (sigma->dim() != data.d())
                throw InputError("smoothing matrix dimension does not match d = " + std::to_string(data.d()));
            lower_ = sigma->cholesky_lower();
        }
        const auto& x = data.covariates();
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = 0; k < width_; ++k)
                rows_[i * width_ + k] = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }

    std::size_t n() const noexcept { return n_; }
    std::size_t d() const noexcept { return d_; }
    double sqrt_n() const noexcept { return sqrt_n_; }
    double pair_normalizer() const noexcept {
        return 1.0 / (static_cast<double>(n_) * static_cast<double>(n_ - 1));
    }

    // Weight of the ordered pair (i, j): Delta_j * I[Y_i > Y_j].
    double weight(std::size_t i, std::size_t j) const noexcept {
        return (events_[j] != 0 && y_[i] > y_[j]) ? 1.0 : 0.0;
    }

    // Writes the covariate difference x_i - x_j into diff and returns the
    // index difference X_ij' beta.
    double difference(std::size_t i, std::size_t j, double* diff) const noexcept {
        const double* xi = &rows_[i * width_];
        const double* xj = &rows_[j * width_];
        double index = 0.0;
        for (std::size_t k = 0; k < width_; ++k) {
            diff[k] = xi[k] - xj[k];
            index += diff[k] * beta_(static_cast<Eigen::Index>(k));
        }
        return index;
    }

    double scale(const double* diff) const noexcept {
        return quadratic_scale(Eigen::Map<const Eigen::VectorXd>(diff, static_cast<Eigen::Index>(d_)), lower_);
    }

private:
    std::size_t n_;
    std::size_t width_;
    std::size_t d_;
    const double* y_;
    const unsigned char* events_;
    std::vector<double> rows_;
    Eigen::VectorXd beta_;
    Eigen::MatrixXd lower_;
    double sqrt_n_;
};

// Index X_i' beta accumulated left to right over the d+1 covariates.
inline std::vector<double> linear_index(const Dataset& data, const ParamVector& theta) {
    if (theta.size() != data.d())
        throw InputError("parameter length " + std::to_string(theta.size()) + " does not match d = " +
                         std::to_string(data.d()));
    const Eigen::VectorXd beta = build_full_coefficients(theta);
    const auto& x = data.covariates();
    std::vector<double> s(static_cast<std::size_t>(data.n()));
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        double acc = 0.0;
        for (Eigen::Index k = 0; k < x.cols(); ++k) acc += x(i, k) * beta(k);
        s[static_cast<std::size_t>(i)] = acc;
    }
    return s;
}

// Number of ordered pairs (i, j) with Y_i > Y_j, s_i > s_j and event_j, by a
// sweep over s with a Fenwick tree on response ranks. O(n log n).
inline std::uint64_t concordant_pairs(const Dataset& data, const std::vector<double>& s, bool use_events) {
    const std::size_t n = s.size();
    const double* y = data.response().data();

    std::vector<double> levels(y, y + n);
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i)
        rank[i] = static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), y[i]) - levels.begin()) + 1;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] < s[b]; });

    std::vector<std::uint64_t> tree(levels.size() + 1, 0);
    auto add = [&](std::size_t pos) {
        for (; pos < tree.size(); pos += pos & (~pos + 1)) ++tree[pos];
    };
    auto below = [&](std::size_t pos) {  // count of inserted ranks <= pos
        std::uint64_t c = 0;
        for (; pos > 0; pos -= pos & (~pos + 1)) c += tree[pos];
        return c;
    };

    std::uint64_t count = 0;
    for (std::size_t start = 0; start < n;) {
        std::size_t stop = start;
        while (stop < n && s[order[stop]] == s[order[start]]) ++stop;
        // Strictly smaller index values only: query the whole tie group first.
        for (std::size_t k = start; k < stop; ++k) count += below(rank[order[k]] - 1);
        for (std::size_t k = start; k < stop; ++k)
            if (!use_events || data.event(static_cast<Eigen::Index>(order[k]))) add(rank[order[k]]);
        start = stop;
    }
    return count;
}

}  // namespace detail

/// Q_n: fraction of ordered pairs concordant in response and index. Censoring
/// indicators are ignored.
inline double rank_objective(const Dataset& data, const ParamVector& theta) {
    const auto s = detail::linear_index(data, theta);
    const double n = static_cast<double>(data.n());
    return static_cast<double>(detail::concordant_pairs(data, s, false)) / (n * (n - 1.0));
}

/// Q*_n: the partial rank correlation; the lower response of a counted pair
/// must be an observed event.
inline double partial_rank_objective(const Dataset& data, const ParamVector& theta) {
    const auto s = detail::linear_index(data, theta);
    const double n = static_cast<double>(data.n());
    return static_cast<double>(detail::concordant_pairs(data, s, true)) / (n * (n - 1.0));
}

/// Step objective matching the data: Q*_n when censored, Q_n otherwise.
inline double step_objective(const Dataset& data, const ParamVector& theta) {
    return data.censored() ? partial_rank_objective(data, theta) : rank_objective(data, theta);
}

/// Q~_n (or Q~*_n under censoring): each pair indicator replaced by
/// Phi(sqrt(n) X_ij' beta / sigma_ij). Pairs with sigma_ij = 0 keep the strict
/// indicator I[X_ij' beta > 0].
inline double smoothed_objective(const Dataset& data, const ParamVector& theta, const SmoothingMatrix& sigma) {
    const detail::PairContext ctx(data, theta, &sigma);
    const auto partials = detail::map_chunks<long double>(ctx.n(), true, [&](detail::RowRange r) {
        std::vector<double> diff(ctx.d() + 1);
        long double acc = 0.0L;
        for (std::size_t i = r.begin; i < r.end; ++i) {
            for (std::size_t j = i + 1; j < ctx.n(); ++j) {
                const double w_ij = ctx.weight(i, j);
                const double w_ji = ctx.weight(j, i);
                if (w_ij == 0.0 && w_ji == 0.0) continue;
                const double index = ctx.difference(i, j, diff.data());
                const double scale = ctx.scale(diff.data());
                double term;
                if (scale > 0.0) {
                    const double z = ctx.sqrt_n() * index / scale;
                    term = w_ij * normal::cdf(z) + w_ji * normal::cdf(-z);
                } else {
                    term = w_ij * (index > 0.0 ? 1.0 : 0.0) + w_ji * (index < 0.0 ? 1.0 : 0.0);
                }
                acc += term;
            }
        }
        return acc;
    });
    long double total = 0.0L;
    for (auto p : partials) total += p;
    return static_cast<double>(total) * ctx.pair_normalizer();
}

/// Smoothed objective and its exact gradient from one pass over the pairs.
struct SmoothedEvaluation {
    double value = 0.0;
    Eigen::VectorXd score;
};

inline SmoothedEvaluation smoothed_value_and_score(const Dataset& data, const ParamVector& theta,
                                                   const SmoothingMatrix& sigma) {
    const detail::PairContext ctx(data, theta, &sigma);
    const std::size_t d = ctx.d();
    struct Partial {
        long double value = 0.0L;
        std::vector<long double> score;
    };
    const auto partials = detail::map_chunks<Partial>(ctx.n(), true, [&](detail::RowRange r) {
        Partial p;
        p.score.assign(d, 0.0L);
        std::vector<double> diff(d + 1);
        for (std::size_t i = r.begin; i < r.end; ++i) {
            for (std::size_t j = i + 1; j < ctx.n(); ++j) {
                const double w_ij = ctx.weight(i, j);
                const double w_ji = ctx.weight(j, i);
                if (w_ij == 0.0 && w_ji == 0.0) continue;
                const double index = ctx.difference(i, j, diff.data());
                const double scale = ctx.scale(diff.data());
                if (!(scale > 0.0)) {
                    p.value += w_ij * (index > 0.0 ? 1.0 : 0.0) + w_ji * (index < 0.0 ? 1.0 : 0.0);
                    continue;
                }
                const double z = ctx.sqrt_n() * index / scale;
                p.value += w_ij * normal::cdf(z) + w_ji * normal::cdf(-z);
                const double density = normal::pdf(z);
                if (density == 0.0) continue;
                const double factor = (w_ij - w_ji) * density * ctx.sqrt_n() / scale;
                for (std::size_t k = 0; k < d; ++k) p.score[k] += factor * diff[k];
            }
        }
        return p;
    });
    long double value = 0.0L;
    std::vector<long double> score(d, 0.0L);
    for (const auto& p : partials) {
        value += p.value;
        for (std::size_t k = 0; k < d; ++k) score[k] += p.score[k];
    }
    SmoothedEvaluation out;
    const double norm = ctx.pair_normalizer();
    out.value = static_cast<double>(value) * norm;
    out.score.resize(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) out.score(static_cast<Eigen::Index>(k)) = static_cast<double>(score[k]) * norm;
    return out;
}

/// Gradient of smoothed_objective with respect to theta:
/// (1/(n(n-1))) sum_{i<j} H_ij phi(z_ij) sqrt(n) X_ij^(1) / sigma_ij.
/// Degenerate pairs contribute nothing.
inline Eigen::VectorXd smoothed_score(const Dataset& data, const ParamVector& theta, const SmoothingMatrix& sigma) {
    return smoothed_value_and_score(data, theta, sigma).score;
}

}  // namespace rankcorr
