#include <catch2/catch_amalgamated.hpp>

#include "morphctl/lyapunov.hpp"
#include "test_helpers.hpp"

using namespace morphctl;

namespace {

// Independent oracle: assemble (I (x) A^T + A^T (x) I) entry by entry with
// index arithmetic and solve with a QR factorization.
MatrixXd lyapunov_oracle(const MatrixXd& a, const MatrixXd& q) {
    const Eigen::Index n = a.rows();
    MatrixXd sys = MatrixXd::Zero(n * n, n * n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index k = 0; k < n; ++k) {
                // row (i + n j) of vec(A^T P): sum_k A(k,i) P(k,j)
                sys(i + n * j, k + n * j) += a(k, i);
                // row of vec(P A): sum_k P(i,k) A(k,j)
                sys(i + n * j, i + n * k) += a(k, j);
            }
    VectorXd rhs(n * n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) rhs(i + n * j) = -q(i, j);
    const VectorXd x = Eigen::HouseholderQR<MatrixXd>(sys).solve(rhs);
    MatrixXd p(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) p(i, j) = x(i + n * j);
    return p;
}

}  // namespace

TEST_CASE("solve_lyapunov scalar and diagonal cases", "[solvers]") {
    MatrixXd a(1, 1), q(1, 1);
    a << -1.0;
    q << 2.0;
    CHECK(solve_lyapunov(a, q)(0, 0) == Catch::Approx(1.0).margin(1e-12));

    MatrixXd a2 = Eigen::Vector2d(-1.0, -2.0).asDiagonal();
    const MatrixXd p2 = solve_lyapunov(a2, MatrixXd::Identity(2, 2));
    CHECK(p2(0, 0) == Catch::Approx(0.5).margin(1e-12));
    CHECK(p2(1, 1) == Catch::Approx(0.25).margin(1e-12));
    CHECK(std::abs(p2(0, 1)) < 1e-14);
}

TEST_CASE("solve_lyapunov matches the vectorized oracle on random instances", "[solvers]") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(100 + seed);
        const MatrixXd a = test::random_hurwitz(rng, 5);
        const MatrixXd q = test::random_psd(rng, 5);
        const MatrixXd p = solve_lyapunov(a, q);
        const MatrixXd oracle = lyapunov_oracle(a, q);
        CHECK((p - oracle).norm() <= 1e-9 * (1.0 + oracle.norm()));
        CHECK(lyapunov_residual(a, q, p) <= 1e-9 * (1.0 + q.norm()));
        CHECK((p - p.transpose()).norm() < 1e-12 * (1.0 + p.norm()));
        CHECK(min_eigenvalue_sym(p) >= -1e-8 * std::max(1.0, p.norm()));
    }
}

TEST_CASE("solve_lyapunov uniqueness and linearity", "[solvers]") {
    Rng rng(42);
    const MatrixXd a = test::random_hurwitz(rng, 4);
    const MatrixXd q1 = test::random_psd(rng, 4);
    const MatrixXd q2 = test::random_psd(rng, 4);

    const MatrixXd p1 = solve_lyapunov(a, q1);
    const MatrixXd p1_again = solve_lyapunov(a, q1);
    CHECK((p1 - p1_again).cwiseAbs().maxCoeff() <= 1e-10);

    const MatrixXd p2 = solve_lyapunov(a, q2);
    const MatrixXd p12 = solve_lyapunov(a, q1 + q2);
    CHECK((p12 - p1 - p2).norm() <= 1e-9 * (1.0 + p12.norm()));
}

TEST_CASE("solve_lyapunov rejects bad inputs", "[solvers]") {
    MatrixXd unstable(2, 2);
    unstable << 0, 1, -1, 0;
    CHECK_THROWS_AS(solve_lyapunov(unstable, MatrixXd::Identity(2, 2)), NotHurwitz);

    MatrixXd pos(1, 1);
    pos << 0.5;
    CHECK_THROWS_AS(solve_lyapunov(pos, MatrixXd::Identity(1, 1)), NotHurwitz);

    Rng rng(1);
    const MatrixXd a = test::random_hurwitz(rng, 3);
    MatrixXd skew = test::random_matrix(rng, 3, 3);
    skew = skew - skew.transpose() + MatrixXd::Identity(3, 3);
    CHECK_THROWS_AS(solve_lyapunov(a, skew), Error);
}
