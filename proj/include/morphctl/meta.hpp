#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <vector>

#include "morphctl/mlp.hpp"
#include "morphctl/simcore.hpp"
#include "morphctl/vehicle.hpp"

namespace morphctl {

inline constexpr int kNumConditions = 6;

/// Fixed wingspan-ratio grid used for data collection and classification.
inline const std::array<double, kNumConditions>& condition_grid() {
    static const std::array<double, kNumConditions> grid{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    return grid;
}

struct DatasetRecord {
    double t = 0;        // seconds within the condition run
    Vec5 x;              // error-coordinate state
    Vec2 u;              // error-coordinate input (post saturation)
    Vec5 y;              // noisy drift label
    double xi_true = 0;  // absolute morph ratio of the condition
    int condition = 0;   // 0-based index into condition_grid()
};

struct Dataset {
    std::vector<DatasetRecord> records;

    std::array<std::vector<std::size_t>, kNumConditions> by_condition() const {
        std::array<std::vector<std::size_t>, kNumConditions> idx;
        for (std::size_t i = 0; i < records.size(); ++i) idx[records[i].condition].push_back(i);
        return idx;
    }
};

/// phi features and the block representation Phi = I5 (x) phi^T.
struct FeatureMap {
    VectorXd phi;   // m features
    MatrixXd Phi;   // 5 x 5m, row block i carries phi^T in columns [i*m, (i+1)*m)
};

inline MatrixXd feature_block_matrix(const VectorXd& phi) {
    const Eigen::Index m = phi.size();
    MatrixXd big = MatrixXd::Zero(5, 5 * m);
    for (int i = 0; i < 5; ++i) big.block(i, i * m, 1, m) = phi.transpose();
    return big;
}

inline FeatureMap mlp_forward(const Mlp& phi_net, const Vec5& x) {
    FeatureMap fm;
    fm.phi = phi_net.forward(x);
    fm.Phi = feature_block_matrix(fm.phi);
    return fm;
}

/// Ridge least squares for the head coefficients with the norm cap of the
/// training loop: a* = (Phi^T Phi + lambda I)^-1 Phi^T y, rescaled onto the
/// gamma ball when it lands outside. lambda < 0 selects the automatic value
/// 1e-6 tr(Phi^T Phi)/h; lambda = 0 is the plain LS solution.
inline VectorXd ls_adapt(const MatrixXd& phi_stack, const VectorXd& y_stack, double lambda, double gamma) {
    if (phi_stack.rows() != y_stack.size() || phi_stack.rows() < 1) throw Error("ls_adapt: dimension mismatch");
    const Eigen::Index h = phi_stack.cols();
    const MatrixXd gram = phi_stack.transpose() * phi_stack;
    double lam = lambda;
    if (lam < 0.0) lam = 1e-6 * gram.trace() / static_cast<double>(h);

    VectorXd a;
    if (lam == 0.0) {
        Eigen::ColPivHouseholderQR<MatrixXd> qr(phi_stack);
        if (qr.rank() < h) throw SingularGram("ls_adapt: rank-deficient stack with lambda = 0");
        a = qr.solve(y_stack);
    } else {
        a = (gram + lam * MatrixXd::Identity(h, h)).ldlt().solve(phi_stack.transpose() * y_stack);
    }
    const double norm = a.norm();
    if (norm > gamma) a *= gamma / norm;
    return a;
}

inline VectorXd discriminator_forward(const Mlp& h_net, const VectorXd& phi_features) {
    return softmax(h_net.forward(phi_features));
}

struct DaimlConfig {
    double alpha = 0.1;           // adversarial regularization weight
    double eta = 0.5;             // discriminator update frequency
    double gamma = 10.0;          // coefficient norm cap
    int adapt_batch = 32;         // K
    int train_batch = 224;        // B
    double lr_phi = 1e-2;
    double lr_h = 1e-2;
    double ridge_lambda = -1.0;   // < 0 = automatic
    int epochs = 40;
    int steps_per_epoch = 500;
    std::uint64_t seed = 0;
    double spectral_bound = 2.0;
    int feature_dim = 5;          // m; the head width h = 5m
    bool select_best = true;      // return the best-validation-epoch snapshot
    double val_fraction = 0.1;    // per-condition validation split for history

    void validate() const {
        if (alpha < 0 || eta <= 0 || eta > 1 || gamma <= 0) throw BadConfig("DaimlConfig: alpha/eta/gamma out of range");
        if (adapt_batch < 1 || train_batch < 1) throw BadConfig("DaimlConfig: batch sizes must be positive");
        if (lr_phi <= 0 || lr_h <= 0 || epochs < 1 || steps_per_epoch < 1 || feature_dim < 1 || spectral_bound <= 0)
            throw BadConfig("DaimlConfig: bad training hyper-parameters");
        if (val_fraction < 0 || val_fraction >= 1) throw BadConfig("DaimlConfig: val_fraction out of [0,1)");
    }
};

struct DaimlStepResult {
    double regression_loss = 0;    // mean squared prediction error over the train batch
    double adversarial_loss = 0;   // mean cross-entropy of the discriminator on the train batch
    bool discriminator_updated = false;
    double coeff_norm = 0;         // ||a*|| after the cap
    int condition = 0;
};

namespace detail {

inline MatrixXd batch_rows(const Dataset& data, const std::vector<std::size_t>& idx,
                           const std::vector<std::size_t>& subset) {
    MatrixXd xb(subset.size(), 5);
    for (std::size_t r = 0; r < subset.size(); ++r) xb.row(r) = data.records[idx[subset[r]]].x.transpose();
    return xb;
}

inline MatrixXd batch_labels(const Dataset& data, const std::vector<std::size_t>& idx,
                             const std::vector<std::size_t>& subset) {
    MatrixXd yb(subset.size(), 5);
    for (std::size_t r = 0; r < subset.size(); ++r) yb.row(r) = data.records[idx[subset[r]]].y.transpose();
    return yb;
}

// Stacks per-sample block matrices Phi(x_i) into the 5K x h LS system.
inline MatrixXd stack_features(const MatrixXd& feats) {
    const Eigen::Index k = feats.rows(), m = feats.cols();
    MatrixXd stack = MatrixXd::Zero(5 * k, 5 * m);
    for (Eigen::Index i = 0; i < k; ++i)
        for (int c = 0; c < 5; ++c) stack.block(5 * i + c, c * m, 1, m) = feats.row(i);
    return stack;
}

inline VectorXd stack_targets(const MatrixXd& yb) {
    const Eigen::Index k = yb.rows();
    VectorXd v(5 * k);
    for (Eigen::Index i = 0; i < k; ++i) v.segment(5 * i, 5) = yb.row(i).transpose();
    return v;
}

// Head coefficients as a 5 x m matrix acting on features: pred = feats * M^T.
inline MatrixXd coeff_matrix(const VectorXd& a, int m) {
    MatrixXd mmat(5, m);
    for (int c = 0; c < 5; ++c) mmat.row(c) = a.segment(c * m, m).transpose();
    return mmat;
}

}  // namespace detail

/// One DAIML update: LS-adapt the head on the adaptation batch, one SGD step
/// on the phi network against the regression-minus-alpha-cross-entropy loss
/// (head frozen), spectral normalization, then with probability eta one SGD
/// step on the discriminator against the cross-entropy loss.
inline DaimlStepResult daiml_step(Mlp& phi_net, Mlp& h_net, const Dataset& data,
                                  const std::vector<std::size_t>& condition_idx,
                                  const std::vector<std::size_t>& batch_a,
                                  const std::vector<std::size_t>& batch_xi, int condition, const DaimlConfig& cfg,
                                  Rng& rng) {
    DaimlStepResult res;
    res.condition = condition;
    const int m = phi_net.out_dim();

    // (i) adaptation
    const MatrixXd xa = detail::batch_rows(data, condition_idx, batch_a);
    const MatrixXd ya = detail::batch_labels(data, condition_idx, batch_a);
    const MatrixXd feats_a = phi_net.forward_batch(xa);
    const VectorXd a_star = ls_adapt(detail::stack_features(feats_a), detail::stack_targets(ya), cfg.ridge_lambda,
                                     cfg.gamma);
    res.coeff_norm = a_star.norm();
    const MatrixXd head = detail::coeff_matrix(a_star, m);

    // (ii) phi step on the training batch
    const MatrixXd xb = detail::batch_rows(data, condition_idx, batch_xi);
    const MatrixXd yb = detail::batch_labels(data, condition_idx, batch_xi);
    const double inv_n = 1.0 / static_cast<double>(batch_xi.size());

    Mlp::Cache cache;
    const MatrixXd feats = phi_net.forward_batch(xb, &cache);
    const MatrixXd err = feats * head.transpose() - yb;
    res.regression_loss = err.squaredNorm() * inv_n;
    MatrixXd d_feats = 2.0 * err * head;

    {
        Mlp::Cache hcache;
        const MatrixXd logits = h_net.forward_batch(feats, &hcache);
        MatrixXd probs = softmax_rows(logits);
        double ce = 0.0;
        for (Eigen::Index i = 0; i < probs.rows(); ++i) ce -= std::log(std::max(probs(i, condition), 1e-300));
        res.adversarial_loss = ce * inv_n;
        if (cfg.alpha > 0.0) {
            probs.col(condition).array() -= 1.0;
            MatrixXd d_in;
            h_net.backward(hcache, probs, &d_in);
            d_feats -= cfg.alpha * d_in;
        }
    }

    const Mlp::Grads g = phi_net.backward(cache, d_feats);
    phi_net.sgd_step(g, cfg.lr_phi * inv_n);
    phi_net.clip_spectral(cfg.spectral_bound);

    // (iv) discriminator step on the refreshed features
    if (rng.uniform() < cfg.eta) {
        Mlp::Cache hcache;
        const MatrixXd feats2 = phi_net.forward_batch(xb);
        const MatrixXd logits = h_net.forward_batch(feats2, &hcache);
        MatrixXd delta = softmax_rows(logits);
        delta.col(condition).array() -= 1.0;
        const Mlp::Grads hg = h_net.backward(hcache, delta);
        h_net.sgd_step(hg, cfg.lr_h * inv_n);
        res.discriminator_updated = true;
    }
    return res;
}

struct DaimlEpochStats {
    double regression_loss = 0;
    double adversarial_loss = 0;
    double discriminator_accuracy = 0;
    double validation_mse = 0;
    double validation_zero_mse = 0;  // zero-predictor reference on the same split
};

struct DaimlResult {
    Mlp phi;
    Mlp discriminator;
    std::vector<DaimlEpochStats> history;
    int best_epoch = -1;
};

namespace detail {

struct ValSplit {
    std::array<std::vector<std::size_t>, kNumConditions> train;
    std::array<std::vector<std::size_t>, kNumConditions> val;
};

inline ValSplit split_dataset(const Dataset& data, double val_fraction, Rng& rng) {
    ValSplit split;
    const auto by_k = data.by_condition();
    for (int k = 0; k < kNumConditions; ++k) {
        std::vector<std::size_t> order;
        rng.sample_without_replacement(by_k[k].size(), by_k[k].size(), order);
        const std::size_t n_val = static_cast<std::size_t>(val_fraction * by_k[k].size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            const std::size_t rec = by_k[k][order[i]];
            (i < n_val ? split.val[k] : split.train[k]).push_back(rec);
        }
    }
    return split;
}

// Validation MSE of the K-shot adapted head on held-out data, per condition.
inline void validation_metrics(const Mlp& phi_net, const Dataset& data, const ValSplit& split,
                               const DaimlConfig& cfg, Rng& rng, DaimlEpochStats& stats) {
    double se = 0, se0 = 0;
    std::size_t n = 0;
    for (int k = 0; k < kNumConditions; ++k) {
        const auto& pool = split.val[k];
        if (pool.size() < static_cast<std::size_t>(cfg.adapt_batch) + 8) continue;
        std::vector<std::size_t> order;
        rng.sample_without_replacement(pool.size(), pool.size(), order);
        std::vector<std::size_t> adapt(order.begin(), order.begin() + cfg.adapt_batch);
        std::vector<std::size_t> rest(order.begin() + cfg.adapt_batch, order.end());

        const MatrixXd xa = batch_rows(data, pool, adapt);
        const MatrixXd ya = batch_labels(data, pool, adapt);
        const MatrixXd fa = phi_net.forward_batch(xa);
        const VectorXd a = ls_adapt(stack_features(fa), stack_targets(ya), cfg.ridge_lambda, cfg.gamma);
        const MatrixXd head = coeff_matrix(a, phi_net.out_dim());

        const MatrixXd xr = batch_rows(data, pool, rest);
        const MatrixXd yr = batch_labels(data, pool, rest);
        const MatrixXd pred = phi_net.forward_batch(xr) * head.transpose();
        se += (pred - yr).squaredNorm();
        se0 += yr.squaredNorm();
        n += rest.size();
    }
    stats.validation_mse = (n > 0) ? se / static_cast<double>(n) : 0.0;
    stats.validation_zero_mse = (n > 0) ? se0 / static_cast<double>(n) : 0.0;
}

}  // namespace detail

/// Runs the adversarial meta-learning loop over the six-condition dataset.
/// Deterministic for a fixed config; history carries one entry per epoch.
/// When select_best is set, the returned networks are the snapshot from the
/// epoch with the lowest validation MSE.
inline DaimlResult train_daiml(const Dataset& data, const DaimlConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const auto by_k = data.by_condition();
    const std::size_t need = static_cast<std::size_t>(cfg.adapt_batch + cfg.train_batch);
    const auto split = detail::split_dataset(data, cfg.select_best ? cfg.val_fraction : 0.0, rng);
    for (int k = 0; k < kNumConditions; ++k)
        if (split.train[k].size() < need)
            throw InsufficientData("train_daiml: condition " + std::to_string(k + 1) + " has " +
                                   std::to_string(split.train[k].size()) + " records, needs K+B = " +
                                   std::to_string(need));

    DaimlResult out;
    out.phi = Mlp::init({5, 64, 64, 32, cfg.feature_dim}, rng, /*tanh_output=*/true);
    out.discriminator = Mlp::init({cfg.feature_dim, 128, kNumConditions}, rng, /*tanh_output=*/false);

    // Standardize phi inputs from the training set; keeps the spectral cap
    // meaningful for states whose units differ by orders of magnitude.
    {
        std::size_t n = 0;
        Vec5 mean = Vec5::Zero(), sq = Vec5::Zero();
        for (int k = 0; k < kNumConditions; ++k)
            for (const std::size_t r : split.train[k]) {
                mean += data.records[r].x;
                ++n;
            }
        mean /= static_cast<double>(n);
        for (int k = 0; k < kNumConditions; ++k)
            for (const std::size_t r : split.train[k]) sq += (data.records[r].x - mean).cwiseAbs2();
        const Vec5 stddev = (sq / static_cast<double>(n)).cwiseSqrt();
        out.phi.set_standardization(mean, stddev);
    }

    Mlp best_phi = out.phi, best_h = out.discriminator;
    double best_val = std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        DaimlEpochStats stats;
        std::size_t disc_correct = 0, disc_total = 0;
        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            const int k = static_cast<int>(rng.below(kNumConditions));
            std::vector<std::size_t> sel;
            rng.sample_without_replacement(split.train[k].size(), need, sel);
            const std::vector<std::size_t> batch_a(sel.begin(), sel.begin() + cfg.adapt_batch);
            const std::vector<std::size_t> batch_xi(sel.begin() + cfg.adapt_batch, sel.end());

            const auto res = daiml_step(out.phi, out.discriminator, data, split.train[k], batch_a, batch_xi, k, cfg, rng);
            stats.regression_loss += res.regression_loss;
            stats.adversarial_loss += res.adversarial_loss;

            // epoch-level discriminator accuracy on this train batch
            const MatrixXd xb = detail::batch_rows(data, split.train[k], batch_xi);
            const MatrixXd logits = out.discriminator.forward_batch(out.phi.forward_batch(xb));
            for (Eigen::Index i = 0; i < logits.rows(); ++i) {
                Eigen::Index arg;
                logits.row(i).maxCoeff(&arg);
                disc_correct += (static_cast<int>(arg) == k);
                ++disc_total;
            }
        }
        stats.regression_loss /= cfg.steps_per_epoch;
        stats.adversarial_loss /= cfg.steps_per_epoch;
        stats.discriminator_accuracy = disc_total ? static_cast<double>(disc_correct) / disc_total : 0.0;
        if (cfg.select_best) {
            detail::validation_metrics(out.phi, data, split, cfg, rng, stats);
            if (stats.validation_mse < best_val) {
                best_val = stats.validation_mse;
                best_phi = out.phi;
                best_h = out.discriminator;
                out.best_epoch = epoch;
            }
        }
        out.history.push_back(stats);
    }
    if (cfg.select_best && out.best_epoch >= 0) {
        out.phi = best_phi;
        out.discriminator = best_h;
    }
    return out;
}

struct CollectConfig {
    double seconds_per_condition = 50.0;
    double sample_hz = 100.0;
    Vec2 actuator_noise_std;          // exploration noise; defaults to 0.3 |u_e|
    Vec5 label_noise_std;             // additive label noise d
    bool has_actuator_default = true; // set false when explicitly configured
    bool has_label_default = true;
    Vec5 start_state_abs;             // initial absolute state of every condition run
    bool has_start_default = true;
    std::uint64_t seed = 0;
};

/// Default label-noise derivation: the actuator noise model propagated
/// through the input matrix at the trim, scaled down by 10x.
inline Vec5 default_label_noise(const Vehicle& vehicle, const TrimPoint& trim) {
    const Mat52 g = vehicle.g_n(trim.x_e);
    const Vec2 act = 0.3 * trim.u_e.cwiseAbs();
    Vec5 out;
    for (int i = 0; i < 5; ++i)
        out(i) = 0.1 * std::sqrt(g(i, 0) * g(i, 0) * act(0) * act(0) + g(i, 1) * g(i, 1) * act(1) * act(1));
    return out;
}

/// Simulates each fixed-condition run under the supplied stabilizing gain
/// with exploration noise, sampling at the configured rate. Labels are the
/// centered finite-difference state derivative minus g(x) times the average
/// of the two inputs active inside the difference window, plus Gaussian
/// noise. Exactly seconds * hz records per condition.
inline Dataset collect_data(const Vehicle& vehicle, const TrimPoint& trim, const Eigen::Matrix<double, 2, 5>& lqr_gain,
                            CollectConfig cfg) {
    if (cfg.has_actuator_default) cfg.actuator_noise_std = 0.3 * trim.u_e.cwiseAbs();
    if (cfg.has_label_default) cfg.label_noise_std = default_label_noise(vehicle, trim);
    if (cfg.has_start_default) cfg.start_state_abs = (Vec5() << 35.0, 0.1968, 0.1729, 0.0, 4990.0).finished();

    const double dt = 1.0 / cfg.sample_hz;
    const int n = static_cast<int>(std::llround(cfg.seconds_per_condition * cfg.sample_hz));
    if (n < 1) throw BadConfig("collect_data: empty collection window");

    Rng rng(cfg.seed);
    ActuatorNoise noise{cfg.actuator_noise_std};
    Dataset data;
    data.records.reserve(static_cast<std::size_t>(n) * kNumConditions);

    for (int k = 0; k < kNumConditions; ++k) {
        const double xi = condition_grid()[k];
        std::vector<Vec5> xs;
        std::vector<Vec2> us;
        xs.reserve(n + 3);
        us.reserve(n + 2);
        Vec5 x = cfg.start_state_abs;
        for (int i = 0; i < n + 2; ++i) {
            const Vec2 u_cmd = trim.u_e - lqr_gain * (x - trim.x_e);
            const Vec2 u_n = noise.apply(u_cmd, rng);
            xs.push_back(x);
            us.push_back(u_n);
            x = rk4_step([&](const Vec5& s) { return vehicle.dynamics(s, u_n, xi); }, x, dt);
            if (x(4) < kMinAltitude || x(4) > kMaxAltitude || x(0) <= 1.0 || std::abs(x(1)) >= M_PI / 2)
                throw DivergedTrajectory("collect_data: trajectory left the envelope in condition " +
                                         std::to_string(k + 1));
        }
        xs.push_back(x);

        for (int i = 1; i <= n; ++i) {
            const Vec5 xdot_fd = (xs[i + 1] - xs[i - 1]) / (2.0 * dt);
            const Vec2 u_window = 0.5 * (us[i - 1] + us[i]) - trim.u_e;
            Vec5 y = xdot_fd - vehicle.g_n(xs[i]) * u_window;
            for (int c = 0; c < 5; ++c)
                if (cfg.label_noise_std(c) > 0) y(c) += rng.normal(0.0, cfg.label_noise_std(c));
            DatasetRecord rec;
            rec.t = i * dt;
            rec.x = xs[i] - trim.x_e;
            rec.u = us[i] - trim.u_e;
            rec.y = y;
            rec.xi_true = xi;
            rec.condition = k;
            data.records.push_back(rec);
        }
    }
    return data;
}

}  // namespace morphctl
