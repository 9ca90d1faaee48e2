#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <complex>
#include <vector>

#include "morphctl/lyapunov.hpp"

namespace morphctl {

inline double are_residual(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q, const MatrixXd& r,
                           const MatrixXd& p) {
    const MatrixXd s = b * r.llt().solve(b.transpose());
    return (a.transpose() * p + p * a - p * s * p + q).norm();
}

namespace detail {

// Stable-subspace (Hamiltonian eigenstructure) solve, used when the cheap
// gain scan fails to stabilize. Returns an empty matrix when no n-dimensional
// stable subspace exists.
inline MatrixXd are_hamiltonian(const MatrixXd& a, const MatrixXd& s, const MatrixXd& q) {
    using CMat = Eigen::MatrixXcd;
    const Eigen::Index n = a.rows();
    MatrixXd ham(2 * n, 2 * n);
    ham << a, -s, -q, -a.transpose();

    Eigen::EigenSolver<MatrixXd> es(ham);
    if (es.info() != Eigen::Success) return {};

    CMat u1(n, n), u2(n, n);
    Eigen::Index found = 0;
    for (Eigen::Index i = 0; i < 2 * n && found < n; ++i) {
        if (es.eigenvalues()(i).real() < 0.0) {
            u1.col(found) = es.eigenvectors().col(i).head(n);
            u2.col(found) = es.eigenvectors().col(i).tail(n);
            ++found;
        }
    }
    if (found < n) return {};

    Eigen::FullPivLU<CMat> lu(u1);
    if (!lu.isInvertible()) return {};
    return symmetrize((u2 * lu.inverse()).real());
}

}  // namespace detail

/// Solves AᵀP + PA - P B R⁻¹ Bᵀ P + Q = 0 for the stabilizing P ⪰ 0.
///
/// Newton-Kleinman iteration (each step one Lyapunov solve). The initial
/// stabilizing gain is K₀ = c·Bᵀ with c scanned over {0, 1, 10, ..., 1e6};
/// if no c works, a Hamiltonian eigenstructure solve seeds the gain instead.
inline MatrixXd solve_are(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q, const MatrixXd& r,
                          int max_iter = 100) {
    require_square(a, "solve_are");
    require_symmetric(q, "solve_are(Q)");
    require_symmetric(r, "solve_are(R)");
    if (b.rows() != a.rows() || r.rows() != b.cols() || q.rows() != a.rows())
        throw Error("solve_are: dimension mismatch");
    Eigen::LLT<MatrixXd> rchol(r);
    if (rchol.info() != Eigen::Success) throw Error("solve_are: R must be positive definite");

    const MatrixXd s = b * rchol.solve(b.transpose());

    MatrixXd gain;
    bool have_gain = false;
    double c = 0.0;
    while (c <= 1e6) {
        const MatrixXd k = c * b.transpose();
        if (is_hurwitz(a - b * k)) {
            gain = k;
            have_gain = true;
            break;
        }
        c = (c == 0.0) ? 1.0 : 10.0 * c;
    }
    if (!have_gain) {
        const MatrixXd p0 = detail::are_hamiltonian(a, s, q);
        if (p0.size() == 0) throw NotStabilizable("solve_are: no stabilizing initial gain found");
        gain = rchol.solve(b.transpose() * p0);
        if (!is_hurwitz(a - b * gain)) throw NotStabilizable("solve_are: Hamiltonian seed gain not stabilizing");
    }

    MatrixXd p = MatrixXd::Zero(a.rows(), a.cols());
    bool have_p = false;
    for (int it = 0; it < max_iter; ++it) {
        const MatrixXd acl = a - b * gain;
        const MatrixXd rhs = symmetrize(q + gain.transpose() * r * gain);
        MatrixXd p_next;
        try {
            p_next = solve_lyapunov(acl, rhs);
        } catch (const NotHurwitz&) {
            throw NotStabilizable("solve_are: iteration lost a stabilizing gain");
        }
        gain = rchol.solve(b.transpose() * p_next);
        const double step = (have_p ? (p_next - p).norm() : std::numeric_limits<double>::infinity());
        p = p_next;
        have_p = true;
        if (step <= 1e-12 * std::max(1.0, p.norm()) && are_residual(a, b, q, r, p) <= 1e-8 * (1.0 + q.norm()))
            return p;
    }
    throw NoConvergence("solve_are: Newton iteration exceeded iteration cap");
}

}  // namespace morphctl
