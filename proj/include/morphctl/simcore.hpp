#pragma once

#include <Eigen/Dense>
#include <functional>

#include "morphctl/errors.hpp"
#include "morphctl/rng.hpp"
#include "morphctl/vehicle.hpp"

namespace morphctl {

/// Classical fixed-step RK4 update for xdot = f(x).
template <typename F>
Vec5 rk4_step(const F& deriv, const Vec5& x, double dt) {
    if (!(dt > 0.0)) throw Error("rk4_step: dt must be positive");
    const Vec5 k1 = deriv(x);
    const Vec5 k2 = deriv(x + 0.5 * dt * k1);
    const Vec5 k3 = deriv(x + 0.5 * dt * k2);
    const Vec5 k4 = deriv(x + dt * k3);
    const Vec5 next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) throw DivergedTrajectory("rk4_step: non-finite state");
    return next;
}

inline Vec2 saturate(const Vec2& u) {
    Vec2 out;
    out(0) = std::clamp(u(0), kElevatorMin, kElevatorMax);
    out(1) = std::clamp(u(1), kThrottleMin, kThrottleMax);
    return out;
}

struct ActuatorNoise {
    Vec2 stddev = Vec2::Zero();

    static ActuatorNoise from_trim(const Vec2& u_e, double fraction = 0.3) {
        ActuatorNoise n;
        n.stddev = fraction * u_e.cwiseAbs();
        return n;
    }

    /// Adds the per-channel Gaussian noise and re-saturates.
    Vec2 apply(const Vec2& u, Rng& rng) const {
        if (stddev(0) < 0 || stddev(1) < 0) throw Error("ActuatorNoise: negative stddev");
        Vec2 noisy = u;
        noisy(0) += (stddev(0) > 0 ? rng.normal(0.0, stddev(0)) : 0.0);
        noisy(1) += (stddev(1) > 0 ? rng.normal(0.0, stddev(1)) : 0.0);
        return saturate(noisy);
    }
};

}  // namespace morphctl
