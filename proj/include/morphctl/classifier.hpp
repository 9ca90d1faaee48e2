#pragma once

#include <Eigen/Dense>

#include "morphctl/meta.hpp"
#include "morphctl/mlp.hpp"

namespace morphctl {

/// Builds the classifier input chi = [f; x].
inline Eigen::Matrix<double, 10, 1> make_chi(const Vec5& f, const Vec5& x) {
    Eigen::Matrix<double, 10, 1> chi;
    chi << f, x;
    return chi;
}

/// Probability distribution over the six morphing conditions. Standardization
/// is stored inside the network parameters.
inline VectorXd classify(const Mlp& net, const VectorXd& chi) {
    return softmax(net.forward(chi));
}

/// xi-hat = sum_k xi_k rho_k over the condition grid.
inline double estimate_xi(const VectorXd& rho) {
    if (rho.size() != kNumConditions) throw NotSimplex("estimate_xi: expected a 6-vector");
    double sum = 0.0;
    for (int k = 0; k < kNumConditions; ++k) {
        if (rho(k) < -1e-9) throw NotSimplex("estimate_xi: negative probability component");
        sum += rho(k);
    }
    if (std::abs(sum - 1.0) > 1e-6) throw NotSimplex("estimate_xi: probabilities sum to " + std::to_string(sum));
    double xi = 0.0;
    for (int k = 0; k < kNumConditions; ++k) xi += condition_grid()[k] * rho(k);
    return std::clamp(xi, 0.0, 1.0);
}

struct ClassifierConfig {
    double lr = 1e-2;
    int batch = 256;
    int steps = 8000;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;

    void validate() const {
        if (lr <= 0 || batch < 1 || steps < 1 || val_fraction <= 0 || val_fraction >= 1)
            throw BadConfig("ClassifierConfig: bad hyper-parameters");
    }
};

struct ClassifierResult {
    Mlp net;
    double holdout_accuracy = 0;
    double holdout_xi_mae = 0;
};

/// Cross-entropy training of the condition classifier on chi = [y; x].
inline ClassifierResult train_classifier(const Dataset& data, const ClassifierConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t n = data.records.size();
    {
        const auto by_k = data.by_condition();
        for (int k = 0; k < kNumConditions; ++k)
            if (by_k[k].empty())
                throw InsufficientData("train_classifier: condition " + std::to_string(k + 1) + " missing");
    }

    MatrixXd chi(n, 10);
    std::vector<int> label(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = data.records[i];
        chi.row(i) << r.y.transpose(), r.x.transpose();
        label[i] = r.condition;
    }

    std::vector<std::size_t> order;
    rng.sample_without_replacement(n, n, order);
    const std::size_t n_val = static_cast<std::size_t>(cfg.val_fraction * n);
    const std::vector<std::size_t> val(order.begin(), order.begin() + n_val);
    const std::vector<std::size_t> train(order.begin() + n_val, order.end());
    if (train.size() < static_cast<std::size_t>(cfg.batch)) throw InsufficientData("train_classifier: dataset too small");

    ClassifierResult out;
    out.net = Mlp::init({10, 200, 200, 128, kNumConditions}, rng, /*tanh_output=*/false);
    {
        VectorXd mean = VectorXd::Zero(10), sq = VectorXd::Zero(10);
        for (const std::size_t i : train) mean += chi.row(i).transpose();
        mean /= static_cast<double>(train.size());
        for (const std::size_t i : train) sq += (chi.row(i).transpose() - mean).cwiseAbs2().eval();
        out.net.set_standardization(mean, (sq / static_cast<double>(train.size())).cwiseSqrt());
    }

    const double inv_b = 1.0 / cfg.batch;
    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<std::size_t> sel;
        rng.sample_without_replacement(train.size(), cfg.batch, sel);
        MatrixXd xb(cfg.batch, 10);
        for (int i = 0; i < cfg.batch; ++i) xb.row(i) = chi.row(train[sel[i]]);
        Mlp::Cache cache;
        const MatrixXd logits = out.net.forward_batch(xb, &cache);
        MatrixXd delta = softmax_rows(logits);
        for (int i = 0; i < cfg.batch; ++i) delta(i, label[train[sel[i]]]) -= 1.0;
        out.net.sgd_step(out.net.backward(cache, delta), cfg.lr * inv_b);
    }

    std::size_t correct = 0;
    double mae = 0.0;
    for (const std::size_t i : val) {
        const VectorXd rho = classify(out.net, chi.row(i).transpose());
        Eigen::Index arg;
        rho.maxCoeff(&arg);
        correct += (static_cast<int>(arg) == label[i]);
        mae += std::abs(estimate_xi(rho) - condition_grid()[label[i]]);
    }
    out.holdout_accuracy = val.empty() ? 0.0 : static_cast<double>(correct) / val.size();
    out.holdout_xi_mae = val.empty() ? 0.0 : mae / val.size();
    return out;
}

}  // namespace morphctl
