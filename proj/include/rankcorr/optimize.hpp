#pragma once

// Generic minimizers used by the estimators: Nelder-Mead for the piecewise
// constant rank objectives and BFGS with an analytic gradient for the smoothed
// ones. Both work on Eigen vectors and clamp iterates to a box.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

namespace rankcorr::optimize {

struct Box {
    double bound = 1e3;

    Eigen::VectorXd clamp(Eigen::VectorXd x) const { return x.cwiseMax(-bound).cwiseMin(bound); }
};

struct NelderMeadOptions {
    int max_evals = 5000;
    double x_tol = 1e-8;
    double f_tol = 0.0;
    Box box{};
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = std::numeric_limits<double>::infinity();
    int evals = 0;
    bool converged = false;
};

/// Minimizes f from an axis-aligned simplex of edge `step` around x0. The best
/// point is replaced only on strict improvement, so ties keep the earliest.
template <class F>
NelderMeadResult nelder_mead(F&& f, const Eigen::VectorXd& x0, double step, const NelderMeadOptions& opts = {}) {
    const Eigen::Index d = x0.size();
    const auto m = static_cast<std::size_t>(d + 1);
    std::vector<Eigen::VectorXd> pts(m);
    std::vector<double> vals(m);
    NelderMeadResult best;
    int evals = 0;
    auto eval = [&](const Eigen::VectorXd& x) {
        const double v = f(x);
        ++evals;
        if (v < best.value) {
            best.value = v;
            best.x = x;
        }
        return v;
    };

    pts[0] = opts.box.clamp(x0);
    vals[0] = eval(pts[0]);
    for (Eigen::Index k = 0; k < d; ++k) {
        Eigen::VectorXd p = pts[0];
        p(k) += step;
        pts[static_cast<std::size_t>(k) + 1] = opts.box.clamp(p);
        vals[static_cast<std::size_t>(k) + 1] = eval(pts[static_cast<std::size_t>(k) + 1]);
    }

    std::vector<std::size_t> order(m);
    while (evals < opts.max_evals) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t lo = order.front();
        const std::size_t hi = order.back();
        const std::size_t second = order[m - 2];

        double diameter = 0.0;
        for (std::size_t k = 0; k < m; ++k) diameter = std::max(diameter, (pts[k] - pts[lo]).cwiseAbs().maxCoeff());
        if (diameter <= opts.x_tol * (1.0 + pts[lo].cwiseAbs().maxCoeff()) ||
            (opts.f_tol > 0.0 && vals[hi] - vals[lo] <= opts.f_tol)) {
            best.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
        for (std::size_t k = 0; k < m; ++k)
            if (k != hi) centroid += pts[k];
        centroid /= static_cast<double>(d);

        const Eigen::VectorXd reflected = opts.box.clamp(centroid + (centroid - pts[hi]));
        const double f_reflected = eval(reflected);
        if (f_reflected < vals[lo]) {
            const Eigen::VectorXd expanded = opts.box.clamp(centroid + 2.0 * (centroid - pts[hi]));
            const double f_expanded = eval(expanded);
            if (f_expanded < f_reflected) {
                pts[hi] = expanded;
                vals[hi] = f_expanded;
            } else {
                pts[hi] = reflected;
                vals[hi] = f_reflected;
            }
            continue;
        }
        if (f_reflected < vals[second]) {
            pts[hi] = reflected;
            vals[hi] = f_reflected;
            continue;
        }
        const bool outside = f_reflected < vals[hi];
        const Eigen::VectorXd contracted =
            outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                    : Eigen::VectorXd(centroid + 0.5 * (pts[hi] - centroid));
        const double f_contracted = eval(contracted);
        if (f_contracted < (outside ? f_reflected : vals[hi])) {
            pts[hi] = contracted;
            vals[hi] = f_contracted;
            continue;
        }
        for (std::size_t k = 0; k < m; ++k) {
            if (k == lo) continue;
            pts[k] = pts[lo] + 0.5 * (pts[k] - pts[lo]);
            vals[k] = eval(pts[k]);
        }
    }
    best.evals = evals;
    return best;
}

struct BfgsOptions {
    int max_iters = 200;
    int max_evals = 5000;
    double grad_tol = 1e-10;
    double step_tol = 1e-14;
    Box box{};
};

enum class BfgsStatus { gradient_small, step_small, line_search_failed, budget_exhausted };

struct BfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    Eigen::VectorXd gradient;
    int evals = 0;
    int iterations = 0;
    BfgsStatus status = BfgsStatus::budget_exhausted;
};

/// Minimizes f given fg(x) -> pair{value, gradient}. `inverse_hessian` seeds
/// the curvature model; pass an empty matrix for the identity.
template <class FG>
BfgsResult bfgs(FG&& fg, const Eigen::VectorXd& x0, Eigen::MatrixXd inverse_hessian, const BfgsOptions& opts = {}) {
    const Eigen::Index d = x0.size();
    if (inverse_hessian.size() == 0) inverse_hessian = Eigen::MatrixXd::Identity(d, d);

    BfgsResult r;
    r.x = opts.box.clamp(x0);
    auto [value, grad] = fg(r.x);
    r.evals = 1;
    r.value = value;
    r.gradient = grad;

    for (r.iterations = 0; r.iterations < opts.max_iters; ++r.iterations) {
        if (r.gradient.cwiseAbs().maxCoeff() <= opts.grad_tol) {
            r.status = BfgsStatus::gradient_small;
            return r;
        }
        Eigen::VectorXd direction = -inverse_hessian * r.gradient;
        double slope = r.gradient.dot(direction);
        if (!(slope < 0.0)) {
            inverse_hessian = Eigen::MatrixXd::Identity(d, d) /
                              std::max(1.0, r.gradient.cwiseAbs().maxCoeff());
            direction = -inverse_hessian * r.gradient;
            slope = r.gradient.dot(direction);
        }

        // Backtracking with the Armijo condition.
        double alpha = 1.0;
        bool accepted = false;
        Eigen::VectorXd x_new;
        double f_new = 0.0;
        Eigen::VectorXd g_new;
        while (r.evals < opts.max_evals) {
            x_new = opts.box.clamp(r.x + alpha * direction);
            auto [fv, gv] = fg(x_new);
            ++r.evals;
            f_new = fv;
            g_new = std::move(gv);
            if (std::isfinite(f_new) && f_new <= r.value + 1e-4 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
            if ((alpha * direction).cwiseAbs().maxCoeff() <= opts.step_tol * (1.0 + r.x.cwiseAbs().maxCoeff())) break;
        }
        if (!accepted) {
            r.status = r.evals >= opts.max_evals ? BfgsStatus::budget_exhausted : BfgsStatus::line_search_failed;
            return r;
        }

        const Eigen::VectorXd s = x_new - r.x;
        const Eigen::VectorXd y = g_new - r.gradient;
        r.x = x_new;
        r.value = f_new;
        r.gradient = g_new;
        if (s.cwiseAbs().maxCoeff() <= opts.step_tol * (1.0 + r.x.cwiseAbs().maxCoeff())) {
            r.status = r.gradient.cwiseAbs().maxCoeff() <= opts.grad_tol ? BfgsStatus::gradient_small
                                                                          : BfgsStatus::step_small;
            return r;
        }
        const double sy = s.dot(y);
        if (sy > 1e-300) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
            inverse_hessian = (eye - rho * s * y.transpose()) * inverse_hessian * (eye - rho * y * s.transpose()) +
                              rho * s * s.transpose();
        }
        if (r.evals >= opts.max_evals) break;
    }
    r.status = r.gradient.cwiseAbs().maxCoeff() <= opts.grad_tol ? BfgsStatus::gradient_small
                                                                  : BfgsStatus::budget_exhausted;
    return r;
}

}  // namespace rankcorr::optimize
