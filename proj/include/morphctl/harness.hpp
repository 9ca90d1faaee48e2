#pragma once

#include <Eigen/Dense>
#include <optional>
#include <variant>
#include <vector>

#include "morphctl/game.hpp"
#include "morphctl/simcore.hpp"

namespace morphctl {

/// How the decoded morphing-ratio command reaches the simulated plant.
///  - Model: the drift itself follows the identified representation driven by
///    the played coefficient (the closed loop the online game is defined on);
///    the decoded xi-hat is logged as the morphing command.
///  - Lagged: true vehicle; the plant ratio tracks xi-hat under a rate cap.
///  - Instantaneous: true vehicle; the plant ratio equals xi-hat each period.
enum class MorphMode { Model, Lagged, Instantaneous };

struct Scenario {
    Vec5 x0_abs = (Vec5() << 35.0, 0.1968, 0.1729, 0.0, 4990.0).finished();
    double duration = 60.0;        // seconds
    double control_period = 0.01;  // seconds between control updates
    int substeps = 1;              // integrator substeps per control period
    Vec2 noise_std = Vec2::Zero(); // actuator noise; see has_noise_default
    bool has_noise_default = true; // true = derive 0.3 |u_e| at run time
    std::uint64_t seed = 0;
    MorphMode morph_mode = MorphMode::Model;
    double morph_rate_limit = 0.2;     // 1/s, Lagged mode
    std::optional<double> xi0;         // initial plant ratio; defaults to xi_e

    void validate() const {
        if (!(control_period > 0) || !(duration >= control_period) || substeps < 1)
            throw BadConfig("Scenario: need control_period > 0, duration >= control_period, substeps >= 1");
        if (noise_std.minCoeff() < 0) throw BadConfig("Scenario: negative noise std");
        if (morph_rate_limit < 0) throw BadConfig("Scenario: negative morph rate limit");
    }
};

struct SimSample {
    double t = 0;
    Vec5 x_abs = Vec5::Zero();   // absolute state at t (pre-update)
    Vec2 u_abs = Vec2::Zero();   // applied input (post noise and saturation)
    VectorXd a;                  // morphing coefficient played at t
    double xi_cmd = 0;           // decoded morphing command xi-hat
    double xi_plant = 0;         // realized plant ratio
    double j_u = 0, j_a = 0;     // stage costs at t
    int iterations = 0;
    double res_u = 0, res_a = 0;
    double wall_seconds = 0;
    bool solver_ok = true;
};

struct SimLog {
    double control_period = 0.01;
    std::vector<SimSample> samples;  // includes a terminal sample at t = duration
};

struct LqrBaseline {
    Mat5 A;
    Mat52 B;
    Mat5 Q = Vec5(200.0, 8000.0, 8000.0, 30000.0, 200.0).asDiagonal();
    Eigen::Matrix2d R = Vec2(3000.0, 0.5).asDiagonal();
    Eigen::Matrix<double, 2, 5> K;
};

/// K = R^-1 B^T P from the stabilizing Riccati solution; A - BK is Hurwitz.
inline Eigen::Matrix<double, 2, 5> lqr_gain(const Mat5& a, const Mat52& b, const Mat5& q, const Eigen::Matrix2d& r) {
    const MatrixXd p = solve_are(a, b, q, r);
    Eigen::Matrix<double, 2, 5> k = r.llt().solve(b.transpose() * p);
    if (!is_hurwitz(a - b * k)) throw NotStabilizable("lqr_gain: closed loop not Hurwitz");
    return k;
}

inline LqrBaseline default_lqr_baseline(const Vehicle& vehicle, const TrimPoint& trim) {
    LqrBaseline lqr;
    const LinearModel lin = linearize(vehicle, trim);
    lqr.A = lin.A;
    lqr.B = lin.B;
    lqr.K = lqr_gain(lqr.A, lqr.B, lqr.Q, lqr.R);
    return lqr;
}

struct GameControllerSetup {
    const Mlp* phi = nullptr;
    const Mlp* classifier = nullptr;
    GameWeights weights;
    double epsilon = 1e-6;
    int max_iter = 50;
    bool enforce_budget = true;
    int max_consecutive_failures = 5;
};

struct LqrControllerSetup {
    Eigen::Matrix<double, 2, 5> K;
};

using ControllerSetup = std::variant<GameControllerSetup, LqrControllerSetup>;

namespace detail {

inline void check_flight_envelope(const Vec5& x_abs) {
    if (!x_abs.allFinite() || x_abs(0) <= 1.0 || std::abs(x_abs(1)) >= M_PI / 2 || x_abs(4) < kMinAltitude ||
        x_abs(4) > kMaxAltitude)
        throw DivergedTrajectory("run_closed_loop: state left the flight envelope");
}

}  // namespace detail

/// Closed-loop scenario execution. Control is updated every control_period;
/// the plant is integrated with RK4 substeps in between. Deterministic for a
/// fixed scenario and seed (wall-clock telemetry aside).
inline SimLog run_closed_loop(const Vehicle& vehicle, const TrimPoint& trim, const Scenario& scenario,
                              const ControllerSetup& controller) {
    scenario.validate();
    const ShiftedDynamics shifted(vehicle, trim);
    Rng rng(scenario.seed);
    Vec2 noise_std = scenario.noise_std;
    if (scenario.has_noise_default) noise_std = 0.3 * trim.u_e.cwiseAbs();
    const ActuatorNoise noise{noise_std};

    const double period = scenario.control_period;
    const double dt = period / scenario.substeps;
    const int n_steps = static_cast<int>(std::llround(scenario.duration / period));

    const bool is_game = std::holds_alternative<GameControllerSetup>(controller);
    const GameControllerSetup* game = is_game ? &std::get<GameControllerSetup>(controller) : nullptr;
    const LqrControllerSetup* lqr = is_game ? nullptr : &std::get<LqrControllerSetup>(controller);
    if (game) game->weights.validate();

    OnlineCache cache;
    if (game) {
        cache.epsilon = game->epsilon;
        cache.period = period;
        cache.max_iter = game->max_iter;
        cache.enforce_budget = game->enforce_budget;
        cache.last_xi_hat = trim.xi_e;
    }
    const GameWeights metric_weights = game ? game->weights : default_game_weights();

    SimLog log;
    log.control_period = period;
    log.samples.reserve(n_steps + 1);

    Vec5 x_err = scenario.x0_abs - trim.x_e;
    double xi_plant = scenario.xi0.value_or(trim.xi_e);

    for (int i = 0; i < n_steps; ++i) {
        const double t = i * period;
        SimSample s;
        s.t = t;
        s.x_abs = x_err + trim.x_e;

        Vec2 u_err;
        VectorXd a;
        if (game) {
            const OnlineStepResult step = online_step(cache, x_err, t, shifted, *game->phi, *game->classifier,
                                                      game->weights);
            if (!step.solver_ok && cache.consecutive_failures > game->max_consecutive_failures)
                throw NotStabilizable("run_closed_loop: solver failed for more than " +
                                      std::to_string(game->max_consecutive_failures) +
                                      " consecutive periods at t = " + std::to_string(t));
            u_err = step.u;
            a = step.a;
            s.xi_cmd = step.xi_hat;
            s.iterations = step.iterations;
            s.res_u = step.res_u;
            s.res_a = step.res_a;
            s.wall_seconds = step.wall_seconds;
            s.solver_ok = step.solver_ok;
        } else {
            u_err = -lqr->K * x_err;
            a = VectorXd::Zero(metric_weights.R_a.rows());
            s.xi_cmd = trim.xi_e;
        }

        const Vec2 u_abs = noise.apply(trim.u_e + u_err, rng);
        const Vec2 u_err_applied = u_abs - trim.u_e;
        s.u_abs = u_abs;
        s.a = a;
        std::tie(s.j_u, s.j_a) = stage_costs(x_err, u_err_applied, a, metric_weights);

        // The LQR baseline is the conventional fixed-wing aircraft: always the
        // physical plant at a frozen morph ratio.
        const MorphMode mode = game ? scenario.morph_mode : MorphMode::Lagged;
        switch (mode) {
            case MorphMode::Model: {
                xi_plant = s.xi_cmd;
                for (int sub = 0; sub < scenario.substeps; ++sub)
                    x_err = rk4_step(
                        [&](const Vec5& z) -> Vec5 {
                            return feature_block_matrix(game->phi->forward(z)) * a + shifted.g(z) * u_err_applied;
                        },
                        x_err, dt);
                if (!x_err.allFinite() || x_err.norm() > 1e6)
                    throw DivergedTrajectory("run_closed_loop: error state diverged");
                break;
            }
            case MorphMode::Lagged:
            case MorphMode::Instantaneous: {
                if (mode == MorphMode::Instantaneous) {
                    xi_plant = std::clamp(s.xi_cmd, 0.0, 1.0);
                } else {
                    const double max_move = scenario.morph_rate_limit * period;
                    xi_plant = std::clamp(xi_plant + std::clamp(s.xi_cmd - xi_plant, -max_move, max_move), 0.0, 1.0);
                }
                Vec5 x_abs = x_err + trim.x_e;
                for (int sub = 0; sub < scenario.substeps; ++sub)
                    x_abs = rk4_step([&](const Vec5& z) { return vehicle.dynamics(z, u_abs, xi_plant); }, x_abs, dt);
                detail::check_flight_envelope(x_abs);
                x_err = x_abs - trim.x_e;
                break;
            }
        }
        s.xi_plant = xi_plant;
        log.samples.push_back(std::move(s));
    }

    // Terminal sample: final state with the last applied input, so trapezoidal
    // costs cover the full horizon.
    SimSample tail = log.samples.back();
    tail.t = n_steps * period;
    tail.x_abs = x_err + trim.x_e;
    const Vec2 u_err_tail = tail.u_abs - trim.u_e;
    std::tie(tail.j_u, tail.j_a) = stage_costs(x_err, u_err_tail, tail.a, metric_weights);
    log.samples.push_back(std::move(tail));
    return log;
}

struct MetricsReport {
    double cumulative_j_u = 0;
    double cumulative_j_a = 0;
    double settling_time = -1;  // negative = never settled
    double settling_threshold = 0;
    double initial_weighted_error = 0;
    double final_weighted_error = 0;
    Vec5 peak_abs_error = Vec5::Zero();
    Vec5 final_error = Vec5::Zero();
};

/// Trapezoidal cumulative costs, Q_u-weighted settling time (first instant
/// after which the weighted error stays under 1% of its initial value), peak
/// per-channel deviations, and final errors.
inline MetricsReport metrics(const SimLog& log, const GameWeights& w, const TrimPoint& trim,
                             double settle_fraction = 0.01) {
    if (log.samples.empty()) throw Error("metrics: empty log");
    MetricsReport rep;
    const auto weighted = [&](const Vec5& e) { return std::sqrt(e.dot(w.Q_u * e)); };

    std::vector<double> werr(log.samples.size());
    for (std::size_t i = 0; i < log.samples.size(); ++i) {
        const Vec5 e = log.samples[i].x_abs - trim.x_e;
        werr[i] = weighted(e);
        rep.peak_abs_error = rep.peak_abs_error.cwiseMax(e.cwiseAbs());
        if (i + 1 < log.samples.size()) {
            const double dt = log.samples[i + 1].t - log.samples[i].t;
            rep.cumulative_j_u += 0.5 * dt * (log.samples[i].j_u + log.samples[i + 1].j_u);
            rep.cumulative_j_a += 0.5 * dt * (log.samples[i].j_a + log.samples[i + 1].j_a);
        }
    }
    rep.initial_weighted_error = werr.front();
    rep.final_weighted_error = werr.back();
    rep.final_error = log.samples.back().x_abs - trim.x_e;
    rep.settling_threshold = settle_fraction * werr.front();

    double settle = -1;
    for (std::size_t i = 0; i < werr.size(); ++i) {
        if (werr[i] < rep.settling_threshold) {
            if (settle < 0) settle = log.samples[i].t;
        } else {
            settle = -1;
        }
    }
    rep.settling_time = settle;
    return rep;
}

struct CompareReport {
    MetricsReport a;
    MetricsReport b;
    double relative_cost_difference = 0;  // (J_b - J_a) / J_b; positive = A cheaper
};

inline CompareReport compare(const SimLog& log_a, const SimLog& log_b, const GameWeights& w, const TrimPoint& trim) {
    if (log_a.samples.size() != log_b.samples.size())
        throw MismatchedGrids("compare: logs have different sample counts");
    for (std::size_t i = 0; i < log_a.samples.size(); ++i)
        if (log_a.samples[i].t != log_b.samples[i].t) throw MismatchedGrids("compare: logs have different time grids");
    CompareReport rep;
    rep.a = metrics(log_a, w, trim);
    rep.b = metrics(log_b, w, trim);
    rep.relative_cost_difference =
        (rep.b.cumulative_j_u == rep.a.cumulative_j_u)
            ? 0.0
            : (rep.b.cumulative_j_u - rep.a.cumulative_j_u) / rep.b.cumulative_j_u;
    return rep;
}

}  // namespace morphctl
