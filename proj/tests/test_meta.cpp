#include <catch2/catch_amalgamated.hpp>

#include "morphctl/classifier.hpp"
#include "morphctl/harness.hpp"
#include "morphctl/meta.hpp"
#include "test_helpers.hpp"

using namespace morphctl;

TEST_CASE("ls_adapt identity stack returns the target", "[learning]") {
    const MatrixXd stack = MatrixXd::Identity(25, 25);
    Rng rng(3);
    VectorXd y = test::random_matrix(rng, 25, 1);
    y *= 8.0 / y.norm();
    const VectorXd a = ls_adapt(stack, y, 0.0, 10.0);
    CHECK((a - y).norm() < 1e-10);
}

TEST_CASE("ls_adapt caps the norm and preserves direction", "[learning]") {
    const MatrixXd stack = MatrixXd::Identity(10, 10);
    Rng rng(4);
    VectorXd y = test::random_matrix(rng, 10, 1);
    y *= 20.0 / y.norm();
    const VectorXd a = ls_adapt(stack, y, 0.0, 10.0);
    CHECK(a.norm() == Catch::Approx(10.0).margin(1e-12));
    CHECK((a / a.norm() - y / y.norm()).norm() < 1e-12);
}

TEST_CASE("ls_adapt agrees with an SVD pseudo-inverse oracle", "[learning]") {
    Rng rng(5);
    const MatrixXd stack = test::random_matrix(rng, 60, 12);
    const VectorXd y = test::random_matrix(rng, 60, 1);
    const VectorXd a = ls_adapt(stack, y, 0.0, 1e9);
    Eigen::JacobiSVD<MatrixXd> svd(stack, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VectorXd oracle = svd.solve(y);
    CHECK((a - oracle).norm() <= 1e-8 * (1.0 + oracle.norm()));
}

TEST_CASE("ls_adapt flags a rank-deficient stack at lambda zero", "[learning]") {
    Rng rng(6);
    MatrixXd stack = test::random_matrix(rng, 30, 6);
    stack.col(5) = stack.col(4);  // exact collinearity
    const VectorXd y = test::random_matrix(rng, 30, 1);
    CHECK_THROWS_AS(ls_adapt(stack, y, 0.0, 10.0), SingularGram);
    // the automatic ridge handles the same stack
    CHECK_NOTHROW(ls_adapt(stack, y, -1.0, 10.0));
}

namespace {

// Synthetic six-condition dataset with an exactly linear-in-features ground
// truth y = Phi0(x) a0(xi) built from a frozen random network.
Dataset synthetic_dataset(std::uint64_t seed, int per_condition, double noise = 0.01) {
    Rng rng(seed);
    Mlp truth = Mlp::init({5, 16, 16, 8, 5}, rng);
    std::array<VectorXd, kNumConditions> coeffs;
    for (int k = 0; k < kNumConditions; ++k) {
        coeffs[k] = test::random_matrix(rng, 25, 1);
        coeffs[k] *= 6.0 / coeffs[k].norm();
    }
    Dataset data;
    for (int k = 0; k < kNumConditions; ++k)
        for (int i = 0; i < per_condition; ++i) {
            DatasetRecord r;
            for (int j = 0; j < 5; ++j) r.x(j) = rng.normal();
            const FeatureMap fm = mlp_forward(truth, r.x);
            VectorXd y = fm.Phi * coeffs[k];
            for (int j = 0; j < 5; ++j) y(j) += noise * rng.normal();
            r.y = y;
            r.t = 0.01 * i;
            r.xi_true = condition_grid()[k];
            r.condition = k;
            data.records.push_back(r);
        }
    return data;
}

}  // namespace

TEST_CASE("daiml_step with alpha zero ignores the discriminator", "[learning]") {
    const Dataset data = synthetic_dataset(7, 400);
    const auto by_k = data.by_condition();
    DaimlConfig cfg;
    cfg.alpha = 0.0;
    cfg.adapt_batch = 16;
    cfg.train_batch = 32;

    Rng init_rng(11);
    Mlp phi_a = Mlp::init({5, 8, 8, 4, 5}, init_rng);
    Mlp phi_b = phi_a;
    Mlp h_a = Mlp::init({5, 16, 6}, init_rng, false);
    Mlp h_b = h_a;
    for (auto& w : h_b.W) w *= -3.0;  // a very different discriminator

    std::vector<std::size_t> batch_a, batch_x;
    for (std::size_t i = 0; i < 16; ++i) batch_a.push_back(i);
    for (std::size_t i = 16; i < 48; ++i) batch_x.push_back(i);

    Rng rng_a(1), rng_b(1);
    daiml_step(phi_a, h_a, data, by_k[2], batch_a, batch_x, 2, cfg, rng_a);
    daiml_step(phi_b, h_b, data, by_k[2], batch_a, batch_x, 2, cfg, rng_b);
    for (std::size_t l = 0; l < phi_a.W.size(); ++l) {
        CHECK((phi_a.W[l] - phi_b.W[l]).cwiseAbs().maxCoeff() == 0.0);
        CHECK((phi_a.b[l] - phi_b.b[l]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("discriminator update frequency follows eta", "[learning]") {
    const Dataset data = synthetic_dataset(8, 80);
    const auto by_k = data.by_condition();
    DaimlConfig cfg;
    cfg.adapt_batch = 8;
    cfg.train_batch = 8;
    cfg.eta = 0.5;

    Rng init_rng(12);
    Mlp phi = Mlp::init({5, 6, 6, 4, 5}, init_rng);
    Mlp h = Mlp::init({5, 8, 6}, init_rng, false);

    std::vector<std::size_t> batch_a, batch_x;
    for (std::size_t i = 0; i < 8; ++i) batch_a.push_back(i);
    for (std::size_t i = 8; i < 16; ++i) batch_x.push_back(i);

    Rng rng(99);
    int updates = 0;
    const int steps = 10000;
    for (int s = 0; s < steps; ++s) {
        const auto res = daiml_step(phi, h, data, by_k[s % 6], batch_a, batch_x, s % 6, cfg, rng);
        updates += res.discriminator_updated ? 1 : 0;
        CHECK(res.coeff_norm <= cfg.gamma + 1e-12);
    }
    const double freq = static_cast<double>(updates) / steps;
    CHECK(freq == Catch::Approx(0.5).margin(0.02));
    CHECK(phi.max_spectral_norm() <= cfg.spectral_bound * (1.0 + 1e-9));
}

TEST_CASE("train_daiml fits the synthetic linear ground truth", "[learning]") {
    const Dataset data = synthetic_dataset(21, 800, 0.02);
    DaimlConfig cfg;
    cfg.epochs = 12;
    cfg.steps_per_epoch = 250;
    cfg.seed = 3;

    const DaimlResult result = train_daiml(data, cfg);
    REQUIRE(result.history.size() == 12);

    // label variance for the 10% bound
    double var = 0.0;
    for (const auto& r : data.records) var += r.y.squaredNorm();
    var /= static_cast<double>(data.records.size());

    double best_val = std::numeric_limits<double>::infinity();
    for (const auto& e : result.history) {
        CHECK(std::isfinite(e.regression_loss));
        CHECK(std::isfinite(e.adversarial_loss));
        best_val = std::min(best_val, e.validation_mse);
    }
    CHECK(best_val < 0.1 * var);

    // smoothed (window-10 over epochs' regression losses... epochs too few) ->
    // monotone trend check instead: the last smoothed value is below the first.
    CHECK(result.history.back().regression_loss < result.history.front().regression_loss);
}

TEST_CASE("train_daiml is deterministic under a fixed seed", "[learning]") {
    const Dataset data = synthetic_dataset(22, 300);
    DaimlConfig cfg;
    cfg.epochs = 3;
    cfg.steps_per_epoch = 40;
    cfg.seed = 5;
    const DaimlResult r1 = train_daiml(data, cfg);
    const DaimlResult r2 = train_daiml(data, cfg);
    REQUIRE(r1.history.size() == r2.history.size());
    for (std::size_t i = 0; i < r1.history.size(); ++i) {
        CHECK(r1.history[i].regression_loss == r2.history[i].regression_loss);
        CHECK(r1.history[i].adversarial_loss == r2.history[i].adversarial_loss);
        CHECK(r1.history[i].discriminator_accuracy == r2.history[i].discriminator_accuracy);
    }
    for (std::size_t l = 0; l < r1.phi.W.size(); ++l) CHECK((r1.phi.W[l] - r2.phi.W[l]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("train_daiml rejects a short condition", "[learning]") {
    Dataset data = synthetic_dataset(23, 300);
    std::erase_if(data.records, [](const DatasetRecord& r) { return r.condition == 3; });
    DaimlConfig cfg;
    cfg.epochs = 1;
    cfg.steps_per_epoch = 1;
    CHECK_THROWS_AS(train_daiml(data, cfg), InsufficientData);
}

TEST_CASE("collect_data produces the documented record count and clean labels", "[learning]") {
    const Vehicle vehicle;
    const TrimPoint trim;
    const auto lqr = default_lqr_baseline(vehicle, trim);

    CollectConfig cfg;
    cfg.seconds_per_condition = 2.0;
    cfg.seed = 9;
    cfg.actuator_noise_std = Vec2::Zero();
    cfg.has_actuator_default = false;
    cfg.label_noise_std = Vec5::Zero();
    cfg.has_label_default = false;

    const Dataset data = collect_data(vehicle, trim, lqr.K, cfg);
    CHECK(data.records.size() == 6 * 200);

    const ShiftedDynamics shifted(vehicle, trim);
    double err_sum = 0.0;
    for (const auto& r : data.records) {
        err_sum += (r.y - shifted.f(r.x, r.xi_true - trim.xi_e)).norm();
        CHECK(r.condition >= 0);
        CHECK(r.condition < 6);
        CHECK(r.xi_true == condition_grid()[r.condition]);
    }
    CHECK(err_sum / static_cast<double>(data.records.size()) < 1e-3);
}

TEST_CASE("collect_data aborts on divergence", "[learning]") {
    const Vehicle vehicle;
    const TrimPoint trim;
    const auto lqr = default_lqr_baseline(vehicle, trim);
    CollectConfig cfg;
    cfg.seconds_per_condition = 30.0;
    CHECK_THROWS_AS(collect_data(vehicle, trim, -lqr.K, cfg), DivergedTrajectory);  // positive feedback
}
