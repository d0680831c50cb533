#pragma once

// Sandwich variance pieces for the smoothed rank correlation.
//
// With z_ij = sqrt(n) X_ij' beta / sigma_ij and u_ij = sqrt(n) X_ij^(1) / sigma_ij:
//
//   A = 1/(2n(n-1)) sum_{i != j} H_ij phidot(z_ij) u_ij u_ij'
//   V = 1/n^3 sum_i ( sum_{j != i} H_ij phi(z_ij) u_ij )^{(x)2}
//   D = A^{-1} V A^{-1}
//
// A is exactly the Hessian of smoothed_objective. V estimates the variance of
// sqrt(n) times the score, so D is on the scale of sqrt(n)(theta_hat - theta):
// the covariance of theta_hat itself is D / n.

#include "rankcorr/core_model.hpp"
#include "rankcorr/detail/parallel.hpp"
#include "rankcorr/linalg.hpp"
#include "rankcorr/objectives.hpp"

#include <Eigen/Core>

#include <vector>

namespace rankcorr {

struct SandwichParts {
    Eigen::MatrixXd a_hat;
    Eigen::MatrixXd v_hat;
    Eigen::MatrixXd d_hat;
};

/// Hessian-type matrix A_n. Summands are outer squares, so the result is
/// symmetric by construction.
inline Eigen::MatrixXd hessian_estimate(const Dataset& data, const ParamVector& theta, const SmoothingMatrix& sigma) {
    const detail::PairContext ctx(data, theta, &sigma);
    const std::size_t d = ctx.d();
    const auto partials = detail::map_chunks<std::vector<long double>>(ctx.n(), true, [&](detail::RowRange r) {
        std::vector<long double> acc(d * d, 0.0L);
        std::vector<double> diff(d + 1);
        std::vector<double> u(d);
        for (std::size_t i = r.begin; i < r.end; ++i) {
            for (std::size_t j = i + 1; j < ctx.n(); ++j) {
                const double h = ctx.weight(i, j) - ctx.weight(j, i);
                if (h == 0.0) continue;
                const double index = ctx.difference(i, j, diff.data());
                const double scale = ctx.scale(diff.data());
                if (!(scale > 0.0)) continue;
                const double z = ctx.sqrt_n() * index / scale;
                const double density = normal::pdf(z);
                if (density == 0.0) continue;
                const double factor = h * (-z * density);
                for (std::size_t k = 0; k < d; ++k) u[k] = ctx.sqrt_n() * diff[k] / scale;
                for (std::size_t a = 0; a < d; ++a)
                    for (std::size_t b = a; b < d; ++b) acc[a * d + b] += factor * u[a] * u[b];
            }
        }
        return acc;
    });
    std::vector<long double> total(d * d, 0.0L);
    for (const auto& p : partials)
        for (std::size_t k = 0; k < total.size(); ++k) total[k] += p[k];
    // Each unordered pair stands for both ordered terms of the i != j sum.
    const double norm = ctx.pair_normalizer();
    Eigen::MatrixXd a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = r; c < d; ++c) {
            const double v = static_cast<double>(total[r * d + c]) * norm;
            a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
            a(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = v;
        }
    return a;
}

/// Score variance V_n. The inner sum skips j = i.
inline Eigen::MatrixXd score_variance_estimate(const Dataset& data, const ParamVector& theta,
                                               const SmoothingMatrix& sigma) {
    const detail::PairContext ctx(data, theta, &sigma);
    const std::size_t d = ctx.d();
    const auto partials = detail::map_chunks<std::vector<long double>>(ctx.n(), false, [&](detail::RowRange r) {
        std::vector<long double> acc(d * d, 0.0L);
        std::vector<double> diff(d + 1);
        std::vector<long double> psi(d);
        for (std::size_t i = r.begin; i < r.end; ++i) {
            std::fill(psi.begin(), psi.end(), 0.0L);
            for (std::size_t j = 0; j < ctx.n(); ++j) {
                if (j == i) continue;
                const double h = ctx.weight(i, j) - ctx.weight(j, i);
                if (h == 0.0) continue;
                const double index = ctx.difference(i, j, diff.data());
                const double scale = ctx.scale(diff.data());
                if (!(scale > 0.0)) continue;
                const double density = normal::pdf(ctx.sqrt_n() * index / scale);
                if (density == 0.0) continue;
                const double factor = h * density * ctx.sqrt_n() / scale;
                for (std::size_t k = 0; k < d; ++k) psi[k] += factor * diff[k];
            }
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = a; b < d; ++b) acc[a * d + b] += psi[a] * psi[b];
        }
        return acc;
    });
    std::vector<long double> total(d * d, 0.0L);
    for (const auto& p : partials)
        for (std::size_t k = 0; k < total.size(); ++k) total[k] += p[k];
    const long double n = static_cast<long double>(ctx.n());
    Eigen::MatrixXd v(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = r; c < d; ++c) {
            const double x = static_cast<double>(total[r * d + c] / (n * n * n));
            v(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = x;
            v(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = x;
        }
    return v;
}

/// A^{-1} V A^{-1} from precomputed pieces. A is expected negative definite;
/// -A goes through the Cholesky path of invert_spd.
inline Eigen::MatrixXd sandwich_from_parts(const Eigen::MatrixXd& a_hat, const Eigen::MatrixXd& v_hat) {
    const Eigen::MatrixXd a_inv = -invert_spd(-a_hat);
    Eigen::MatrixXd d = a_inv * v_hat * a_inv;
    return 0.5 * (d + d.transpose());
}

inline SandwichParts sandwich_parts(const Dataset& data, const ParamVector& theta, const SmoothingMatrix& sigma) {
    SandwichParts parts;
    parts.a_hat = hessian_estimate(data, theta, sigma);
    parts.v_hat = score_variance_estimate(data, theta, sigma);
    parts.d_hat = sandwich_from_parts(parts.a_hat, parts.v_hat);
    return parts;
}

/// D_n(theta, Sigma). Throws DiagnosticsError when A_n is singular or its
/// condition estimate exceeds 1e12.
inline Eigen::MatrixXd sandwich_covariance(const Dataset& data, const ParamVector& theta,
                                           const SmoothingMatrix& sigma) {
    return sandwich_parts(data, theta, sigma).d_hat;
}

}  // namespace rankcorr
