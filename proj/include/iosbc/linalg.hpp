#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <string>

#include "iosbc/errors.hpp"

namespace iosbc {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using CRow = Eigen::RowVectorXcd;
using RVec = Eigen::VectorXd;

namespace linalg {

inline CMat hermitian_part(const CMat& m) { return 0.5 * (m + m.adjoint()); }

/// Largest absolute deviation of `m` from its Hermitian part.
inline double hermitian_error(const CMat& m) {
    if (m.size() == 0) return 0.0;
    return (m - m.adjoint()).cwiseAbs().maxCoeff() * 0.5;
}

inline double min_eigenvalue(const CMat& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Hermitian to `tol` and min eigenvalue >= -tol (both scaled by max(1, |m|_max)).
inline bool is_psd(const CMat& m, double tol = 1e-10) {
    if (m.rows() != m.cols()) return false;
    if (m.size() == 0) return true;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return hermitian_error(m) <= tol * scale && min_eigenvalue(m) >= -tol * scale;
}

/// log2 det of a Hermitian positive definite matrix through its Cholesky factor.
inline double log2det_hpd(const CMat& m) {
    if (m.size() == 0) return 0.0;
    Eigen::LLT<CMat> llt(hermitian_part(m));
    if (llt.info() != Eigen::Success) {
        std::ostringstream os;
        os << "Cholesky factorization failed (min eigenvalue " << min_eigenvalue(m) << ", size "
           << m.rows() << ")";
        throw NumericalError(os.str());
    }
    const auto diag = llt.matrixLLT().diagonal().real();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < diag.size(); ++i) acc += std::log(diag(i));
    return 2.0 * acc / std::numbers::ln2;
}

/// Principal square root of a Hermitian PSD matrix; negative eigenvalues clamp to 0.
inline CMat hermitian_sqrt(const CMat& m) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m));
    RVec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

/// Inverse square root of a Hermitian PD matrix; eigenvalues below `floor` are raised to it.
inline CMat hermitian_inv_sqrt(const CMat& m, double floor = 1e-12) {
    Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m));
    RVec ev = es.eigenvalues().cwiseMax(floor).cwiseSqrt().cwiseInverse();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

/// Relative Frobenius distance |a - b| / max(|b|, tiny).
inline double rel_frobenius(const CMat& a, const CMat& b) {
    const double nb = b.norm();
    return (a - b).norm() / (nb > 0.0 ? nb : 1.0);
}

}  // namespace linalg
}  // namespace iosbc
