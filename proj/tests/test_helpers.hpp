#pragma once

#include <Eigen/Dense>

#include "morphctl/rng.hpp"

namespace morphctl::test {

inline MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
    return m;
}

inline MatrixXd random_psd(Rng& rng, Eigen::Index n, double scale = 1.0) {
    const MatrixXd c = random_matrix(rng, n, n, scale);
    return c.transpose() * c;
}

inline MatrixXd random_pd(Rng& rng, Eigen::Index n, double scale = 1.0) {
    return random_psd(rng, n, scale) + 0.1 * MatrixXd::Identity(n, n);
}

inline MatrixXd random_hurwitz(Rng& rng, Eigen::Index n, double margin = 0.5) {
    MatrixXd a = random_matrix(rng, n, n, 1.0 / std::sqrt(static_cast<double>(n)));
    Eigen::EigenSolver<MatrixXd> es(a, false);
    const double shift = es.eigenvalues().real().maxCoeff() + margin;
    return a - shift * MatrixXd::Identity(n, n);
}

}  // namespace morphctl::test
