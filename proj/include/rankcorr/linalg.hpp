#pragma once

// Small dense symmetric inverses for d x d sandwich pieces.

#include "rankcorr/core_model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace rankcorr {

inline constexpr double kMaxCondition = 1e12;

/// 1-norm condition estimate of a square matrix, infinity when singular.
inline double condition_estimate(const Eigen::MatrixXd& m) {
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    const double rcond = lu.rcond();
    return rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
}

/// Inverse of a symmetric matrix. Cholesky when m is positive definite,
/// partial-pivot LU otherwise. Throws DiagnosticsError when the condition
/// estimate exceeds kMaxCondition.
inline Eigen::MatrixXd invert_spd(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() == 0) throw InputError("invert_spd: matrix must be square and non-empty");
    if (!m.allFinite()) throw DiagnosticsError("invert_spd: matrix has non-finite entries",
                                               std::numeric_limits<double>::infinity());
    const double condition = condition_estimate(m);
    if (!(condition <= kMaxCondition)) {
        std::ostringstream msg;
        msg << "matrix is numerically singular (condition estimate " << condition << ")";
        throw DiagnosticsError(msg.str(), condition);
    }
    const Eigen::Index d = m.rows();
    Eigen::MatrixXd inverse;
    const Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() == Eigen::Success) {
        inverse = llt.solve(Eigen::MatrixXd::Identity(d, d));
    } else {
        inverse = Eigen::PartialPivLU<Eigen::MatrixXd>(m).inverse();
    }
    return 0.5 * (inverse + inverse.transpose());
}

/// Raises eigenvalues of a symmetric matrix to at least `floor`. Returns true
/// if anything changed.
inline bool floor_eigenvalues(Eigen::MatrixXd& m, double floor) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
    Eigen::VectorXd values = eig.eigenvalues();
    if (values.minCoeff() >= floor) return false;
    values = values.cwiseMax(floor);
    m = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
    m = 0.5 * (m + m.transpose());
    return true;
}

}  // namespace rankcorr
