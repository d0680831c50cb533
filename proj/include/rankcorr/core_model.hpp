#pragma once

// Domain types for transformation-model rank regression: observations,
// datasets, the free parameter vector and the smoothing matrix.

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

namespace rankcorr {

/// Malformed input: bad dimensions, non-finite values, unparsable cells.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Numerical failure during estimation (e.g. a singular Hessian estimate).
class DiagnosticsError : public std::runtime_error {
public:
    DiagnosticsError(const std::string& what, double condition)
        : std::runtime_error(what), condition_(condition) {}

    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// One sample. `covariates` holds d+1 entries; the last is the anchor whose
/// coefficient is fixed to 1.
struct Observation {
    double response = 0.0;
    Eigen::VectorXd covariates;
    bool event = true;
};

/// The d free regression coefficients.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(Eigen::VectorXd theta) : theta_(std::move(theta)) {
        if (theta_.size() < 1) throw InputError("parameter vector must have at least one entry");
        if (!theta_.allFinite()) throw InputError("parameter vector has non-finite entries");
    }
    ParamVector(std::initializer_list<double> values)
        : ParamVector(Eigen::VectorXd::Map(values.begin(), static_cast<Eigen::Index>(values.size()))) {}

    Eigen::Index size() const noexcept { return theta_.size(); }
    double operator[](Eigen::Index k) const { return theta_(k); }
    const Eigen::VectorXd& values() const noexcept { return theta_; }

    friend bool operator==(const ParamVector& a, const ParamVector& b) {
        return a.theta_.size() == b.theta_.size() && a.theta_ == b.theta_;
    }

private:
    Eigen::VectorXd theta_;
};

/// beta(theta) = (theta_1, ..., theta_d, 1).
inline Eigen::VectorXd build_full_coefficients(const ParamVector& theta) {
    Eigen::VectorXd beta(theta.size() + 1);
    beta.head(theta.size()) = theta.values();
    beta(theta.size()) = 1.0;
    return beta;
}

/// Symmetric positive definite d x d matrix. The lower Cholesky factor is
/// kept so that pair scales reduce to a triangular product.
class SmoothingMatrix {
public:
    static constexpr double kSymmetryTolerance = 1e-12;

    explicit SmoothingMatrix(Eigen::MatrixXd sigma) : sigma_(std::move(sigma)) {
        if (sigma_.rows() < 1 || sigma_.rows() != sigma_.cols())
            throw InputError("smoothing matrix must be square and non-empty");
        if (!sigma_.allFinite()) throw InputError("smoothing matrix has non-finite entries");
        const double scale = sigma_.cwiseAbs().maxCoeff();
        for (Eigen::Index r = 0; r < sigma_.rows(); ++r)
            for (Eigen::Index c = 0; c < r; ++c)
                if (std::abs(sigma_(r, c) - sigma_(c, r)) > kSymmetryTolerance * scale)
                    throw InputError("smoothing matrix is not symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(sigma_);
        if (llt.info() != Eigen::Success) throw InputError("smoothing matrix is not positive definite");
        lower_ = llt.matrixL();
        for (Eigen::Index k = 0; k < lower_.rows(); ++k)
            if (!(lower_(k, k) > 0.0)) throw InputError("smoothing matrix is not positive definite");
    }

    static SmoothingMatrix identity(Eigen::Index d) {
        return SmoothingMatrix(Eigen::MatrixXd::Identity(d, d));
    }

    Eigen::Index dim() const noexcept { return sigma_.rows(); }
    const Eigen::MatrixXd& matrix() const noexcept { return sigma_; }
    const Eigen::MatrixXd& cholesky_lower() const noexcept { return lower_; }

private:
    Eigen::MatrixXd sigma_;
    Eigen::MatrixXd lower_;
};

namespace detail {

// sqrt(v' Sigma v) with Sigma = L L', evaluated as |L' v|. Negating v negates
// every partial product, so the result is exactly symmetric in the pair order.
template <class Vec>
double quadratic_scale(const Vec& v, const Eigen::MatrixXd& lower) {
    const Eigen::Index d = lower.rows();
    if (d == 1) return std::abs(lower(0, 0) * v(0));
    double total = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) {
        double s = 0.0;
        for (Eigen::Index r = c; r < d; ++r) s += lower(r, c) * v(r);
        total += s * s;
    }
    return std::sqrt(total);
}

}  // namespace detail

/// sigma_ij: the smoothing scale of a pair, from the first d components of
/// x_i - x_j.
inline double pair_scale(const Eigen::VectorXd& x_i, const Eigen::VectorXd& x_j,
                         const SmoothingMatrix& sigma) {
    const Eigen::Index d = sigma.dim();
    if (x_i.size() != d + 1 || x_j.size() != d + 1)
        throw InputError("pair_scale: covariate vectors must have length d+1 = " + std::to_string(d + 1));
    const Eigen::VectorXd diff = x_i.head(d) - x_j.head(d);
    return detail::quadratic_scale(diff, sigma.cholesky_lower());
}

/// n observations stored column-wise. Immutable once built.
class Dataset {
public:
    Dataset(Eigen::VectorXd response, Eigen::MatrixXd covariates, std::vector<bool> events = {})
        : response_(std::move(response)), covariates_(std::move(covariates)) {
        const auto n = response_.size();
        if (n < 2) throw InputError("dataset needs at least 2 observations, got " + std::to_string(n));
        if (covariates_.rows() != n)
            throw InputError("covariate rows (" + std::to_string(covariates_.rows()) +
                             ") do not match responses (" + std::to_string(n) + ")");
        if (covariates_.cols() < 2)
            throw InputError("need at least one free covariate plus the anchor covariate");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!std::isfinite(response_(i)))
                throw InputError("row " + std::to_string(i + 1) + ": response is not finite");
            if (!covariates_.row(i).allFinite())
                throw InputError("row " + std::to_string(i + 1) + ": covariates are not finite");
        }
        events_.assign(static_cast<std::size_t>(n), 1);
        if (!events.empty()) {
            if (events.size() != static_cast<std::size_t>(n))
                throw InputError("event indicator length does not match the number of rows");
            for (std::size_t i = 0; i < events.size(); ++i) {
                events_[i] = events[i] ? 1 : 0;
                if (!events[i]) censored_ = true;
            }
        }
    }

    explicit Dataset(const std::vector<Observation>& observations)
        : Dataset(collect_response(observations), collect_covariates(observations),
                  collect_events(observations)) {}

    Eigen::Index n() const noexcept { return response_.size(); }
    Eigen::Index d() const noexcept { return covariates_.cols() - 1; }
    bool censored() const noexcept { return censored_; }

    const Eigen::VectorXd& response() const noexcept { return response_; }
    const Eigen::MatrixXd& covariates() const noexcept { return covariates_; }
    bool event(Eigen::Index i) const { return events_[static_cast<std::size_t>(i)] != 0; }
    const std::vector<unsigned char>& events() const noexcept { return events_; }

    Observation observation(Eigen::Index i) const {
        return Observation{response_(i), covariates_.row(i).transpose(), event(i)};
    }

    double censoring_rate() const {
        std::size_t censored_rows = 0;
        for (auto e : events_) censored_rows += e ? 0 : 1;
        return static_cast<double>(censored_rows) / static_cast<double>(n());
    }

    /// Same data with every response replaced by g(response).
    template <class F>
    Dataset with_transformed_response(F&& g) const {
        Eigen::VectorXd y = response_.unaryExpr(std::forward<F>(g));
        return Dataset(std::move(y), covariates_, event_vector());
    }

    Dataset with_scaled_covariates(double c) const {
        return Dataset(response_, covariates_ * c, event_vector());
    }

    Dataset with_events(std::vector<bool> events) const {
        return Dataset(response_, covariates_, std::move(events));
    }

    std::vector<bool> event_vector() const { return {events_.begin(), events_.end()}; }

private:
    static Eigen::VectorXd collect_response(const std::vector<Observation>& obs) {
        Eigen::VectorXd y(static_cast<Eigen::Index>(obs.size()));
        for (std::size_t i = 0; i < obs.size(); ++i) y(static_cast<Eigen::Index>(i)) = obs[i].response;
        return y;
    }
    static Eigen::MatrixXd collect_covariates(const std::vector<Observation>& obs) {
        if (obs.empty()) return {};
        const auto width = obs.front().covariates.size();
        Eigen::MatrixXd x(static_cast<Eigen::Index>(obs.size()), width);
        for (std::size_t i = 0; i < obs.size(); ++i) {
            if (obs[i].covariates.size() != width)
                throw InputError("row " + std::to_string(i + 1) + ": expected " + std::to_string(width) +
                                 " covariates, got " + std::to_string(obs[i].covariates.size()));
            x.row(static_cast<Eigen::Index>(i)) = obs[i].covariates.transpose();
        }
        return x;
    }
    static std::vector<bool> collect_events(const std::vector<Observation>& obs) {
        std::vector<bool> ev(obs.size());
        for (std::size_t i = 0; i < obs.size(); ++i) ev[i] = obs[i].event;
        return ev;
    }

    Eigen::VectorXd response_;
    Eigen::MatrixXd covariates_;
    std::vector<unsigned char> events_;
    bool censored_ = false;
};

/// Unparsed row as read from a text source. `label` names the row in errors.
struct RawRow {
    std::string label;
    std::string response;
    std::vector<std::string> covariates;
    std::optional<std::string> event;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_real(std::string_view text) {
    text = trim(text);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return std::nullopt;
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

inline std::optional<bool> parse_indicator(std::string_view text) {
    text = trim(text);
    if (text == "1" || text == "true" || text == "TRUE" || text == "True") return true;
    if (text == "0" || text == "false" || text == "FALSE" || text == "False") return false;
    if (auto v = parse_real(text)) {
        if (*v == 1.0) return true;
        if (*v == 0.0) return false;
    }
    return std::nullopt;
}

}  // namespace detail

/// Parses and checks raw rows. Every error names the offending row.
inline Dataset validate_dataset(const std::vector<RawRow>& rows) {
    if (rows.empty()) throw InputError("no data rows");
    if (rows.size() < 2) throw InputError("need at least 2 rows, got " + std::to_string(rows.size()));
    const std::size_t width = rows.front().covariates.size();
    if (width < 2)
        throw InputError(rows.front().label + ": need at least one free covariate plus the anchor");
    const bool has_event = rows.front().event.has_value();

    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::VectorXd y(n);
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(width));
    std::vector<bool> events;
    if (has_event) events.resize(rows.size());

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const RawRow& row = rows[i];
        const auto at = static_cast<Eigen::Index>(i);
        if (row.covariates.size() != width)
            throw InputError(row.label + ": expected " + std::to_string(width) + " covariates, got " +
                             std::to_string(row.covariates.size()));
        const auto response = detail::parse_real(row.response);
        if (!response) throw InputError(row.label + ": response '" + row.response + "' is not a number");
        if (!std::isfinite(*response)) throw InputError(row.label + ": response is not finite");
        y(at) = *response;
        for (std::size_t k = 0; k < width; ++k) {
            const auto v = detail::parse_real(row.covariates[k]);
            if (!v)
                throw InputError(row.label + ": covariate " + std::to_string(k + 1) + " value '" +
                                 row.covariates[k] + "' is not a number");
            if (!std::isfinite(*v))
                throw InputError(row.label + ": covariate " + std::to_string(k + 1) + " is not finite");
            x(at, static_cast<Eigen::Index>(k)) = *v;
        }
        if (row.event.has_value() != has_event)
            throw InputError(row.label + ": censoring indicator present on some rows only");
        if (has_event) {
            const auto e = detail::parse_indicator(*row.event);
            if (!e) throw InputError(row.label + ": censoring indicator '" + *row.event + "' is not 0/1");
            events[i] = *e;
        }
    }
    return Dataset(std::move(y), std::move(x), std::move(events));
}

}  // namespace rankcorr
