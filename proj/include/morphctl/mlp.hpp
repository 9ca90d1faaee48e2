#pragma once

#include <Eigen/Dense>
#include <vector>

#include "morphctl/linalg.hpp"
#include "morphctl/rng.hpp"

namespace morphctl {

/// Small dense feedforward network with tanh hidden activations. The output
/// layer is tanh or linear depending on `tanh_output`. Inputs pass through a
/// fixed per-feature standardization (identity by default) that is stored and
/// serialized with the weights.
///
/// Batch convention: one sample per row.
struct Mlp {
    std::vector<MatrixXd> W;  // layer l maps dims[l] -> dims[l+1], shape out x in
    std::vector<VectorXd> b;
    bool tanh_output = true;
    VectorXd in_mean;   // size = input dim
    VectorXd in_scale;  // size = input dim, strictly positive

    struct Cache {
        std::vector<MatrixXd> acts;  // acts[0] = standardized input, acts[l+1] = layer l output
    };

    struct Grads {
        std::vector<MatrixXd> W;
        std::vector<VectorXd> b;
    };

    static Mlp init(const std::vector<int>& dims, Rng& rng, bool tanh_output = true) {
        Mlp net;
        net.tanh_output = tanh_output;
        net.in_mean = VectorXd::Zero(dims.front());
        net.in_scale = VectorXd::Ones(dims.front());
        for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
            MatrixXd w(dims[l + 1], dims[l]);
            const double sd = 1.0 / std::sqrt(static_cast<double>(dims[l]));
            for (Eigen::Index i = 0; i < w.rows(); ++i)
                for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.normal(0.0, sd);
            net.W.push_back(std::move(w));
            net.b.push_back(VectorXd::Zero(dims[l + 1]));
        }
        return net;
    }

    int in_dim() const { return static_cast<int>(W.front().cols()); }
    int out_dim() const { return static_cast<int>(W.back().rows()); }
    std::size_t layer_count() const { return W.size(); }

    std::vector<int> dims() const {
        std::vector<int> d{in_dim()};
        for (const auto& w : W) d.push_back(static_cast<int>(w.rows()));
        return d;
    }

    void set_standardization(const VectorXd& mean, const VectorXd& scale) {
        in_mean = mean;
        in_scale = scale.cwiseMax(1e-12);
    }

    MatrixXd standardize(const MatrixXd& xb) const {
        return (xb.rowwise() - in_mean.transpose()).array().rowwise() / in_scale.transpose().array();
    }

    MatrixXd forward_batch(const MatrixXd& xb, Cache* cache = nullptr) const {
        MatrixXd a = standardize(xb);
        if (cache) {
            cache->acts.clear();
            cache->acts.push_back(a);
        }
        for (std::size_t l = 0; l < W.size(); ++l) {
            MatrixXd pre = (a * W[l].transpose()).rowwise() + b[l].transpose();
            if (l + 1 < W.size() || tanh_output)
                a = pre.array().tanh();
            else
                a = std::move(pre);
            if (cache) cache->acts.push_back(a);
        }
        return a;
    }

    VectorXd forward(const VectorXd& x) const {
        return forward_batch(x.transpose()).row(0).transpose();
    }

    /// Backpropagates `d_out` (gradient of a scalar loss w.r.t. the batch
    /// outputs, one row per sample). Returns parameter gradients; optionally
    /// the gradient w.r.t. the raw (unstandardized) inputs.
    Grads backward(const Cache& cache, const MatrixXd& d_out, MatrixXd* d_input = nullptr) const {
        Grads g;
        g.W.resize(W.size());
        g.b.resize(W.size());
        MatrixXd delta = d_out;
        for (int l = static_cast<int>(W.size()) - 1; l >= 0; --l) {
            if (l + 1 < static_cast<int>(W.size()) || tanh_output)
                delta = delta.array() * (1.0 - cache.acts[l + 1].array().square());
            g.W[l] = delta.transpose() * cache.acts[l];
            g.b[l] = delta.colwise().sum().transpose();
            if (l > 0 || d_input) delta = delta * W[l];
        }
        if (d_input) *d_input = delta.array().rowwise() / in_scale.transpose().array();
        return g;
    }

    void sgd_step(const Grads& g, double lr) {
        for (std::size_t l = 0; l < W.size(); ++l) {
            W[l] -= lr * g.W[l];
            b[l] -= lr * g.b[l];
        }
    }

    /// Applies spectral normalization to every weight matrix (biases untouched).
    void clip_spectral(double bound) {
        for (auto& w : W) w = spectral_normalize(w, bound);
    }

    double max_spectral_norm() const {
        double m = 0.0;
        for (const auto& w : W) m = std::max(m, spectral_norm(w));
        return m;
    }
};

inline VectorXd softmax(const VectorXd& logits) {
    const VectorXd z = (logits.array() - logits.maxCoeff()).exp();
    return z / z.sum();
}

inline MatrixXd softmax_rows(const MatrixXd& logits) {
    MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) out.row(i) = softmax(logits.row(i).transpose()).transpose();
    return out;
}

inline double cross_entropy(const VectorXd& probs, int label) {
    return -std::log(std::max(probs(label), 1e-300));
}

}  // namespace morphctl
