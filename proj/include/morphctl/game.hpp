#pragma once

#include <Eigen/Dense>
#include <chrono>
#include <optional>
#include <vector>

#include "morphctl/classifier.hpp"
#include "morphctl/meta.hpp"
#include "morphctl/riccati.hpp"

namespace morphctl {

/// Frozen-state linear-like model: A = 0 by the SDC choice, B_u = g(x),
/// B_a = Phi(x).
struct SdModel {
    MatrixXd A;    // 5x5, identically zero
    MatrixXd B_u;  // 5x2
    MatrixXd B_a;  // 5xh

    Eigen::Index head_dim() const { return B_a.cols(); }
};

struct GameWeights {
    MatrixXd Q_u, Q_a;  // 5x5 PSD
    MatrixXd R_u;       // 2x2 PD
    MatrixXd R_a;       // hxh PD

    void validate() const {
        require_symmetric(Q_u, "GameWeights(Q_u)");
        require_symmetric(Q_a, "GameWeights(Q_a)");
        require_symmetric(R_u, "GameWeights(R_u)");
        require_symmetric(R_a, "GameWeights(R_a)");
        if (Eigen::LLT<MatrixXd>(R_u).info() != Eigen::Success || Eigen::LLT<MatrixXd>(R_a).info() != Eigen::Success)
            throw BadConfig("GameWeights: R_u and R_a must be positive definite");
        if (!is_psd(Q_u) || !is_psd(Q_a)) throw BadConfig("GameWeights: Q_u and Q_a must be PSD");
    }
};

/// Published weighting set. The printed R_a diagonal has 20 entries; for
/// h > 20 the filler value 100 is inserted ahead of the distinctive tail
/// (..., 200, 200, 100, 1, 3) so the tail keeps its printed position at the
/// end of the list.
inline GameWeights default_game_weights(int head_dim = 25) {
    if (head_dim < 5) throw BadConfig("default_game_weights: head dimension must be at least 5");
    GameWeights w;
    w.Q_u = Vec5(20.0, 2000.0, 700.0, 200.0, 2.0).asDiagonal();
    w.Q_a = w.Q_u;
    w.R_u = Vec2(1500.0, 0.25).asDiagonal();
    VectorXd ra = VectorXd::Constant(head_dim, 100.0);
    ra(head_dim - 5) = 200.0;
    ra(head_dim - 4) = 200.0;
    ra(head_dim - 3) = 100.0;
    ra(head_dim - 2) = 1.0;
    ra(head_dim - 1) = 3.0;
    w.R_a = ra.asDiagonal();
    return w;
}

struct RiccatiPair {
    MatrixXd P_u;  // 5x5
    MatrixXd P_a;  // 5x5
};

inline SdModel assemble_sd_model(const ShiftedDynamics& shifted, const Mlp& phi_net, const Vec5& x_err) {
    SdModel m;
    m.A = MatrixXd::Zero(5, 5);
    m.B_u = shifted.g(x_err);
    m.B_a = mlp_forward(phi_net, x_err).Phi;
    return m;
}

namespace detail {

struct GameKernels {
    MatrixXd S_u;  // B_u R_u^-1 B_u^T
    MatrixXd S_a;  // B_a R_a^-1 B_a^T
};

inline GameKernels kernels(const SdModel& model, const GameWeights& w) {
    GameKernels k;
    k.S_u = model.B_u * w.R_u.llt().solve(model.B_u.transpose());
    k.S_a = model.B_a * w.R_a.llt().solve(model.B_a.transpose());
    return k;
}

}  // namespace detail

inline MatrixXd closed_loop_matrix(const RiccatiPair& pair, const SdModel& model, const GameWeights& w) {
    const auto k = detail::kernels(model, w);
    return model.A - k.S_u * pair.P_u - k.S_a * pair.P_a;
}

/// Closed-loop Nash strategies u = -R_u^-1 B_u^T P_u x, a = -R_a^-1 B_a^T P_a x.
struct NashFeedback {
    VectorXd u;
    VectorXd a;
};

inline NashFeedback nash_feedback(const RiccatiPair& pair, const SdModel& model, const GameWeights& w,
                                  const VectorXd& x_err) {
    NashFeedback out;
    out.u = -w.R_u.llt().solve(model.B_u.transpose() * (pair.P_u * x_err));
    out.a = -w.R_a.llt().solve(model.B_a.transpose() * (pair.P_a * x_err));
    return out;
}

/// Frobenius norms of the two coupled-Riccati left-hand sides.
inline std::pair<double, double> csdre_residuals(const RiccatiPair& pair, const SdModel& model, const GameWeights& w) {
    const auto k = detail::kernels(model, w);
    const MatrixXd a_of_a = model.A - k.S_a * pair.P_a;
    const MatrixXd a_of_u = model.A - k.S_u * pair.P_u;
    const MatrixXd res_u = sym(pair.P_u * a_of_a) - pair.P_u * k.S_u * pair.P_u + w.Q_u;
    const MatrixXd res_a = sym(pair.P_a * a_of_u) - pair.P_a * k.S_a * pair.P_a + w.Q_a;
    return {res_u.norm(), res_a.norm()};
}

/// Auxiliary-ARE initialization. The published order solves the u-player's
/// equation against the bare drift first; with A = 0 that equation is
/// unsolvable (rank of B_u is below the state dimension), so on failure the
/// roles flip: the a-player (full-row-rank B_a) initializes first and the
/// u-player solves against the stabilized drift.
inline RiccatiPair init_riccati(const SdModel& model, const GameWeights& w) {
    RiccatiPair pair;
    const auto k = detail::kernels(model, w);
    try {
        pair.P_u = solve_are(model.A, model.B_u, w.Q_u, w.R_u);
        const MatrixXd a_u = model.A - k.S_u * pair.P_u;
        pair.P_a = solve_are(a_u, model.B_a, w.Q_a, w.R_a);
    } catch (const SolverError&) {
        pair.P_a = solve_are(model.A, model.B_a, w.Q_a, w.R_a);
        const MatrixXd a_a = model.A - k.S_a * pair.P_a;
        pair.P_u = solve_are(a_a, model.B_u, w.Q_u, w.R_u);
    }
    if (!is_hurwitz(closed_loop_matrix(pair, model, w)))
        throw NotStabilizable("init_riccati: initial pair does not stabilize the closed loop");
    return pair;
}

struct LyapIterOptions {
    double epsilon = 1e-6;
    int max_iter = 50;
    // Cooperative wall-clock budget; checked between iterations. Zero disables.
    double budget_seconds = 0.0;
};

struct LyapIterStep {
    double delta_u = 0, delta_a = 0;        // Frobenius norms of the update
    double monotone_u = 0, monotone_a = 0;  // min eigenvalue of P^(i) - P^(i+1)
};

struct LyapIterResult {
    RiccatiPair pair;
    int iterations = 0;
    bool converged = false;
    bool hit_budget = false;
    double res_u = 0, res_a = 0;
    std::vector<LyapIterStep> steps;
};

/// Fixed-point Lyapunov iterations for the coupled Riccati pair: both
/// players' next matrices solve a Lyapunov equation against the current
/// closed-loop matrix. Stops when max(|dP_u|, |dP_a|) <= epsilon and the
/// coupled residuals are within 10 epsilon.
inline LyapIterResult lyapunov_iterations(const RiccatiPair& init, const SdModel& model, const GameWeights& w,
                                          const LyapIterOptions& opt = {}) {
    const auto kg = detail::kernels(model, w);
    const auto t0 = std::chrono::steady_clock::now();
    LyapIterResult out;
    out.pair = init;
    MatrixXd p_u = init.P_u, p_a = init.P_a;
    for (int it = 0; it < opt.max_iter; ++it) {
        const MatrixXd a_c = model.A - kg.S_u * p_u - kg.S_a * p_a;
        if (!is_hurwitz(a_c))
            throw LostStability("lyapunov_iterations: closed-loop matrix lost the Hurwitz property at iteration " +
                                std::to_string(it));
        const MatrixXd y_u = symmetrize(p_u * kg.S_u * p_u + w.Q_u);
        const MatrixXd y_a = symmetrize(p_a * kg.S_a * p_a + w.Q_a);
        const MatrixXd p_u_next = solve_lyapunov(a_c, y_u);
        const MatrixXd p_a_next = solve_lyapunov(a_c, y_a);

        LyapIterStep step;
        step.delta_u = (p_u_next - p_u).norm();
        step.delta_a = (p_a_next - p_a).norm();
        step.monotone_u = min_eigenvalue_sym(p_u - p_u_next);
        step.monotone_a = min_eigenvalue_sym(p_a - p_a_next);
        out.steps.push_back(step);

        p_u = p_u_next;
        p_a = p_a_next;
        out.iterations = it + 1;
        out.pair = {p_u, p_a};

        if (std::max(step.delta_u, step.delta_a) <= opt.epsilon) {
            std::tie(out.res_u, out.res_a) = csdre_residuals(out.pair, model, w);
            if (std::max(out.res_u, out.res_a) <= 10.0 * opt.epsilon) {
                out.converged = true;
                return out;
            }
        }
        if (opt.budget_seconds > 0.0) {
            const std::chrono::duration<double> used = std::chrono::steady_clock::now() - t0;
            if (used.count() > opt.budget_seconds) {
                out.hit_budget = true;
                std::tie(out.res_u, out.res_a) = csdre_residuals(out.pair, model, w);
                return out;
            }
        }
    }
    if (opt.budget_seconds > 0.0) {
        // Online mode treats the iteration cap like an expired budget.
        out.hit_budget = true;
        std::tie(out.res_u, out.res_a) = csdre_residuals(out.pair, model, w);
        return out;
    }
    throw MaxIterations("lyapunov_iterations: no convergence within " + std::to_string(opt.max_iter) + " iterations");
}

inline std::pair<double, double> stage_costs(const VectorXd& x, const VectorXd& u, const VectorXd& a, const GameWeights& w) {
    const double j_u = 0.5 * (x.dot(w.Q_u * x) + u.dot(w.R_u * u));
    const double j_a = 0.5 * (x.dot(w.Q_a * x) + a.dot(w.R_a * a));
    return {j_u, j_a};
}

struct OnlineCache {
    double epsilon = 1e-6;
    double period = 0.01;  // seconds; doubles as the per-step time budget
    int max_iter = 50;
    bool enforce_budget = true;

    std::optional<RiccatiPair> pair;
    double last_time = 0;
    int consecutive_failures = 0;
    Vec2 last_u = Vec2::Zero();
    VectorXd last_a;
    double last_xi_hat = 0.2;
};

struct OnlineStepResult {
    bool solver_ok = true;
    Vec2 u = Vec2::Zero();
    VectorXd a;
    Vec5 f_pred = Vec5::Zero();
    double xi_hat = 0;
    // telemetry
    bool reinitialized = false;
    int iterations = 0;
    bool converged = false;
    double res_u = 0, res_a = 0;
    double wall_seconds = 0;
};

/// One sampling period of the online loop: warm start from the cached pair
/// when it still stabilizes the current frozen-state model, otherwise
/// re-initialize; run the Lyapunov iterations under the epsilon and time
/// budgets; emit the Nash strategies, the predicted drift, and the decoded
/// morphing-ratio estimate. On solver failure the previous commands are held.
inline OnlineStepResult online_step(OnlineCache& cache, const Vec5& x_err, double t, const ShiftedDynamics& shifted,
                                    const Mlp& phi_net, const Mlp& classifier_net, const GameWeights& weights) {
    const auto t0 = std::chrono::steady_clock::now();
    OnlineStepResult out;
    const SdModel model = assemble_sd_model(shifted, phi_net, x_err);
    if (cache.last_a.size() == 0) cache.last_a = VectorXd::Zero(model.head_dim());

    RiccatiPair start;
    bool have_start = false;
    if (cache.pair && t > 0.0) {
        if (is_hurwitz(closed_loop_matrix(*cache.pair, model, weights))) {
            start = *cache.pair;
            have_start = true;
        }
    }
    if (!have_start) {
        out.reinitialized = true;
        try {
            start = init_riccati(model, weights);
        } catch (const SolverError&) {
            out.solver_ok = false;
            out.u = cache.last_u;
            out.a = cache.last_a;
            out.xi_hat = cache.last_xi_hat;
            ++cache.consecutive_failures;
            out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            return out;
        }
    }

    LyapIterOptions opt;
    opt.epsilon = cache.epsilon;
    opt.max_iter = cache.max_iter;
    opt.budget_seconds = cache.enforce_budget ? cache.period : 0.0;
    LyapIterResult iter;
    try {
        iter = lyapunov_iterations(start, model, weights, opt);
    } catch (const SolverError&) {
        out.solver_ok = false;
        out.u = cache.last_u;
        out.a = cache.last_a;
        out.xi_hat = cache.last_xi_hat;
        ++cache.consecutive_failures;
        out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }

    const NashFeedback fb = nash_feedback(iter.pair, model, weights, x_err);
    out.u = fb.u;
    out.a = fb.a;
    out.f_pred = model.B_a * fb.a;
    out.xi_hat = estimate_xi(classify(classifier_net, make_chi(out.f_pred, x_err)));
    out.iterations = iter.iterations;
    out.converged = iter.converged;
    out.res_u = iter.res_u;
    out.res_a = iter.res_a;

    cache.pair = iter.pair;
    cache.last_time = t;
    cache.consecutive_failures = 0;
    cache.last_u = out.u;
    cache.last_a = out.a;
    cache.last_xi_hat = out.xi_hat;
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

}  // namespace morphctl
