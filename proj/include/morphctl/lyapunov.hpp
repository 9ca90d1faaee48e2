#pragma once

#include <Eigen/Dense>

#include "morphctl/linalg.hpp"

namespace morphctl {

/// Solves the continuous Lyapunov equation AᵀP + PA = -Q for symmetric Q and
/// Hurwitz A. Dense Kronecker vectorization: (I⊗Aᵀ + Aᵀ⊗I) vec(P) = -vec(Q),
/// one step of iterative refinement, then symmetrization.
inline MatrixXd solve_lyapunov(const MatrixXd& a, const MatrixXd& q) {
    require_square(a, "solve_lyapunov");
    require_symmetric(q, "solve_lyapunov(Q)");
    if (a.rows() != q.rows()) throw Error("solve_lyapunov: dimension mismatch");
    if (!is_hurwitz(a))
        throw NotHurwitz("solve_lyapunov: A is not Hurwitz (max Re eig " + std::to_string(max_real_eigenvalue(a)) + ")");

    const Eigen::Index n = a.rows();
    const MatrixXd eye = MatrixXd::Identity(n, n);
    const MatrixXd at = a.transpose();
    const MatrixXd sys = kron(eye, at) + kron(at, eye);

    Eigen::FullPivLU<MatrixXd> lu(sys);
    if (!lu.isInvertible()) throw SingularSystem("solve_lyapunov: Kronecker system is numerically singular");

    const VectorXd rhs = -vec(q);
    VectorXd x = lu.solve(rhs);
    x += lu.solve(rhs - sys * x);  // one refinement pass

    return symmetrize(unvec(x, n, n));
}

inline double lyapunov_residual(const MatrixXd& a, const MatrixXd& q, const MatrixXd& p) {
    return (a.transpose() * p + p * a + q).norm();
}

}  // namespace morphctl
