#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "morphctl/errors.hpp"

namespace morphctl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kHurwitzMargin = -1e-12;

inline MatrixXd sym(const MatrixXd& m) { return m + m.transpose(); }

inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

inline double max_real_eigenvalue(const MatrixXd& a) {
    Eigen::EigenSolver<MatrixXd> es(a, /*computeEigenvectors=*/false);
    return es.eigenvalues().real().maxCoeff();
}

// Strict stability test: every eigenvalue real part below the fixed margin.
inline bool is_hurwitz(const MatrixXd& a) {
    if (!a.allFinite()) return false;
    return max_real_eigenvalue(a) < kHurwitzMargin;
}

inline void require_square(const MatrixXd& a, const char* who) {
    if (a.rows() != a.cols() || a.rows() < 1)
        throw Error(std::string(who) + ": matrix must be square, got " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()));
    if (!a.allFinite()) throw Error(std::string(who) + ": matrix has non-finite entries");
}

inline void require_symmetric(const MatrixXd& m, const char* who, double rel_tol = 1e-10) {
    require_square(m, who);
    const double scale = m.cwiseAbs().maxCoeff();
    const double skew = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (skew > rel_tol * std::max(scale, 1.0))
        throw Error(std::string(who) + ": matrix is not symmetric (skew " + std::to_string(skew) + ")");
}

inline double min_eigenvalue_sym(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline bool is_psd(const MatrixXd& m, double tol_scale = 1e-8) {
    const double norm = m.norm();
    return min_eigenvalue_sym(m) >= -tol_scale * std::max(norm, 1.0);
}

inline double spectral_norm(const MatrixXd& w) {
    if (w.size() == 0) return 0.0;
    Eigen::JacobiSVD<MatrixXd> svd(w);
    return svd.singularValues()(0);
}

// Rescale W so its largest singular value does not exceed `bound`.
inline MatrixXd spectral_normalize(const MatrixXd& w, double bound) {
    if (bound <= 0.0) throw Error("spectral_normalize: bound must be positive");
    const double sigma = spectral_norm(w);
    if (sigma <= bound) return w;
    return w * (bound / sigma);
}

inline MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline VectorXd vec(const MatrixXd& m) { return Eigen::Map<const VectorXd>(m.data(), m.size()); }

inline MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

}  // namespace morphctl
