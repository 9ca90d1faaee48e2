#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "morphctl/errors.hpp"

namespace morphctl {

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Vec2 = Eigen::Matrix<double, 2, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;
using Mat52 = Eigen::Matrix<double, 5, 2>;

// State layout throughout: [V m/s, alpha rad, theta rad, q rad/s, h m].
struct FlightState {
    double V = 0, alpha = 0, theta = 0, q = 0, h = 0;

    static FlightState from_vec(const Vec5& x) { return {x(0), x(1), x(2), x(3), x(4)}; }
    Vec5 to_vec() const { return Vec5(V, alpha, theta, q, h); }
};

struct ControlInput {
    double delta_e = 0;  // rad
    double delta_t = 0;  // percent

    static ControlInput from_vec(const Vec2& u) { return {u(0), u(1)}; }
    Vec2 to_vec() const { return Vec2(delta_e, delta_t); }
};

struct VehicleParams {
    double mass = 1247.0;       // kg
    double gravity = 9.8;       // m/s^2
    double b_min = 10.18;       // m
    double b_max = 20.36;       // m
    double wing_area = 17.09;   // m^2
    double chord = 1.74;        // m
    double inertia_y = 4067.5;  // kg m^2
    double thrust_coeff = 21.3; // N per percent throttle
    // Stored but unused by the longitudinal model.
    double inertia_x = 1420.9;
    double inertia_z = 4786.0;
    double inertia_xy = 0.0, inertia_yz = 0.0, inertia_zx = 0.0;

    void validate() const {
        if (mass <= 0 || gravity <= 0 || b_min <= 0 || b_max <= b_min || wing_area <= 0 || chord <= 0 ||
            inertia_y <= 0 || thrust_coeff <= 0)
            throw BadConfig("VehicleParams: all physical parameters must be positive (and b_max > b_min)");
    }
};

inline constexpr double kMinAltitude = 0.0;
inline constexpr double kMaxAltitude = 10000.0;  // fitted formulas valid below ~10 km

inline constexpr double kElevatorMin = -0.7, kElevatorMax = 0.7;  // rad
inline constexpr double kThrottleMin = 0.0, kThrottleMax = 100.0; // percent

inline void check_envelope(double h_m) {
    if (!(h_m >= kMinAltitude && h_m <= kMaxAltitude))
        throw OutOfEnvelope("altitude " + std::to_string(h_m) + " m outside [0, 10000] m fit envelope");
}

/// Troposphere density fit, altitude in meters.
inline double air_density(double h_m) {
    check_envelope(h_m);
    const double h_km = h_m / 1000.0;
    return 1.2250 * std::pow(1.0 - h_km / 44.3308, 4.2559);
}

inline double speed_of_sound(double h_m) {
    check_envelope(h_m);
    const double h_km = h_m / 1000.0;
    return 20.0468 * std::sqrt(288.15 - 6.5 * h_km);
}

inline double mach(double v, double h_m) { return v / speed_of_sound(h_m); }

// Linear fits of the longitudinal aerodynamic parameters. Altitude enters in
// kilometers; this is what reproduces the published input-matrix entries.
struct AeroTable {
    static double cl_alpha0(double ma, double xi) { return 0.0098 * ma + 0.4890 * xi + 0.3340; }
    static double cl_alpha(double h_km, double ma, double xi) { return -0.0001 * h_km - 1.0597 * ma + 6.0872 * xi + 5.9792; }
    static double cl_delta_e(double h_km, double ma) { return -0.0013 * h_km + 0.0316 * ma + 0.4099; }
    static double cl_q(double ma, double xi) { return 0.8710 * ma + 5.1386 * xi + 9.6995; }
    static double cd_alpha0(double h_km, double ma, double xi) { return 0.0005 * h_km - 0.0277 * ma + 0.0142 * xi + 0.0288; }
    static double cd_alpha(double h_km, double ma, double xi) { return 0.0001 * h_km + 0.0325 * ma + 0.0906 * xi + 0.1883; }
    static double cd_alpha2(double h_km, double ma, double xi) { return -0.0011 * h_km - 1.2434 * ma + 0.1408 * xi + 2.1775; }
    static double cm_alpha0(double h_km, double ma, double xi) { return -0.0001 * h_km + 0.0031 * ma - 0.2436 * xi + 0.0121; }
    static double cm_alpha(double h_km, double ma, double xi) { return -0.0001 * h_km - 0.0922 * ma - 1.4954 * xi - 1.6444; }
    static double cm_delta_e(double h_km, double ma) { return 0.0030 * h_km - 0.1256 * ma - 0.9766; }
    static double cm_q(double ma, double xi) { return -0.6857 * ma - 1.0762 * xi - 18.1012; }
};

struct AeroCoeffs {
    double C_L = 0, C_D = 0, C_M = 0;
};

class Vehicle {
public:
    explicit Vehicle(VehicleParams params = {}) : p_(params) { p_.validate(); }

    const VehicleParams& params() const { return p_; }

    double morph_ratio_from_span(double b) const {
        if (b < p_.b_min - 1e-12 || b > p_.b_max + 1e-12)
            throw OutOfRange("wingspan " + std::to_string(b) + " outside [" + std::to_string(p_.b_min) + ", " +
                             std::to_string(p_.b_max) + "]");
        return (b - p_.b_min) / (p_.b_max - p_.b_min);
    }

    double span_from_morph_ratio(double xi) const {
        if (xi < -1e-12 || xi > 1.0 + 1e-12) throw OutOfRange("morph ratio " + std::to_string(xi) + " outside [0, 1]");
        return p_.b_min + xi * (p_.b_max - p_.b_min);
    }

    /// Full coefficient composition including elevator and pitch-rate terms.
    AeroCoeffs aero_coefficients(const Vec5& x, double xi, double delta_e) const {
        check_envelope(x(4));
        const double h_km = x(4) / 1000.0;
        const double ma = mach(x(0), x(4));
        const double alpha = x(1);
        const double rate = (x(0) != 0.0) ? p_.chord / (2.0 * x(0)) * x(3) : 0.0;
        AeroCoeffs c;
        c.C_L = AeroTable::cl_alpha0(ma, xi) + AeroTable::cl_alpha(h_km, ma, xi) * alpha +
                AeroTable::cl_delta_e(h_km, ma) * delta_e + AeroTable::cl_q(ma, xi) * rate;
        c.C_D = AeroTable::cd_alpha0(h_km, ma, xi) + AeroTable::cd_alpha(h_km, ma, xi) * alpha +
                AeroTable::cd_alpha2(h_km, ma, xi) * alpha * alpha;
        c.C_M = AeroTable::cm_alpha0(h_km, ma, xi) + AeroTable::cm_alpha(h_km, ma, xi) * alpha +
                AeroTable::cm_delta_e(h_km, ma) * delta_e + AeroTable::cm_q(ma, xi) * rate;
        return c;
    }

    /// Drift vector of the affine model (no thrust, no elevator contribution).
    Vec5 f_n(const Vec5& x, double xi) const {
        check_envelope(x(4));
        if (x(0) <= 0.0) throw DegenerateState("f_n: airspeed must be positive");
        const double V = x(0), alpha = x(1), theta = x(2), q = x(3), h = x(4);
        const double h_km = h / 1000.0;
        const double rho = air_density(h);
        const double ma = mach(V, h);
        const double qbar_area = 0.5 * rho * V * V * p_.wing_area;
        const double rate = p_.chord / (2.0 * V) * q;

        const double cd = AeroTable::cd_alpha0(h_km, ma, xi) + AeroTable::cd_alpha(h_km, ma, xi) * alpha +
                          AeroTable::cd_alpha2(h_km, ma, xi) * alpha * alpha;
        const double cl = AeroTable::cl_alpha0(ma, xi) + AeroTable::cl_alpha(h_km, ma, xi) * alpha +
                          AeroTable::cl_q(ma, xi) * rate;
        const double cm = AeroTable::cm_alpha0(h_km, ma, xi) + AeroTable::cm_alpha(h_km, ma, xi) * alpha +
                          AeroTable::cm_q(ma, xi) * rate;

        Vec5 f;
        f(0) = -qbar_area * cd / p_.mass - p_.gravity * std::sin(theta - alpha);
        f(1) = -0.5 * rho * V * p_.wing_area * cl / p_.mass + q + p_.gravity * std::cos(theta - alpha) / V;
        f(2) = q;
        f(3) = 0.5 * rho * V * V * p_.wing_area * p_.chord * cm / p_.inertia_y;
        f(4) = V * std::sin(theta - alpha);
        return f;
    }

    /// Input matrix; rows 3 and 5 are structurally zero.
    Mat52 g_n(const Vec5& x) const {
        if (x(0) <= 0.0) throw DegenerateState("g_n: airspeed must be positive");
        check_envelope(x(4));
        const double V = x(0), alpha = x(1), h = x(4);
        const double h_km = h / 1000.0;
        const double rho = air_density(h);
        const double ma = mach(V, h);
        Mat52 g = Mat52::Zero();
        g(0, 1) = p_.thrust_coeff * std::cos(alpha) / p_.mass;
        g(1, 0) = -0.5 * rho * V * p_.wing_area * AeroTable::cl_delta_e(h_km, ma) / p_.mass;
        g(1, 1) = -p_.thrust_coeff * std::sin(alpha) / (p_.mass * V);
        g(3, 0) = 0.5 * rho * V * V * p_.wing_area * p_.chord * AeroTable::cm_delta_e(h_km, ma) / p_.inertia_y;
        return g;
    }

    Vec5 dynamics(const Vec5& x, const Vec2& u, double xi) const { return f_n(x, xi) + g_n(x) * u; }

private:
    VehicleParams p_;
};

struct TrimPoint {
    Vec5 x_e = (Vec5() << 40.0, 0.1268, 0.1259, 0.0, 5000.0).finished();
    Vec2 u_e = Vec2(-0.2890, 42.8188);
    double xi_e = 0.2;
    // The published trim is rounded to four decimals and leaves a residual of
    // about 3.8e-2 (mostly hdot = V sin(theta-alpha)), hence this default.
    double tol = 5e-2;

    double residual(const Vehicle& vehicle) const { return vehicle.dynamics(x_e, u_e, xi_e).norm(); }

    void validate(const Vehicle& vehicle) const {
        const double r = residual(vehicle);
        if (!(r <= tol))
            throw BadConfig("TrimPoint: dynamics residual " + std::to_string(r) + " exceeds trim tolerance " +
                            std::to_string(tol));
    }
};

/// Error-coordinate system around a trim: state x = x_n - x_e, input
/// u = u_n - u_e, morph xi = xi_n - xi_e. The shifted origin is an
/// equilibrium up to the trim residual.
class ShiftedDynamics {
public:
    ShiftedDynamics(const Vehicle& vehicle, const TrimPoint& trim) : vehicle_(vehicle), trim_(trim) {}

    Vec5 f(const Vec5& x_err, double xi_err) const {
        const Vec5 xn = x_err + trim_.x_e;
        return vehicle_.f_n(xn, xi_err + trim_.xi_e) + vehicle_.g_n(xn) * trim_.u_e;
    }

    Mat52 g(const Vec5& x_err) const { return vehicle_.g_n(x_err + trim_.x_e); }

    Vec5 derivative(const Vec5& x_err, const Vec2& u_err, double xi_err) const {
        return f(x_err, xi_err) + g(x_err) * u_err;
    }

    const TrimPoint& trim() const { return trim_; }
    const Vehicle& vehicle() const { return vehicle_; }

private:
    Vehicle vehicle_;
    TrimPoint trim_;
};

struct LinearModel {
    Mat5 A;
    Mat52 B;
};

/// Jacobian linearization at the trim with fixed xi = xi_e. A is the central
/// finite-difference Jacobian of the drift f_n alone (the convention behind
/// the published A*); B = g_n(x_e) exactly.
inline LinearModel linearize(const Vehicle& vehicle, const TrimPoint& trim) {
    LinearModel lin;
    for (int j = 0; j < 5; ++j) {
        const double step = 1e-3 * std::max(1.0, std::abs(trim.x_e(j)));
        Vec5 xp = trim.x_e, xm = trim.x_e;
        xp(j) += step;
        xm(j) -= step;
        lin.A.col(j) = (vehicle.f_n(xp, trim.xi_e) - vehicle.f_n(xm, trim.xi_e)) / (2.0 * step);
    }
    lin.B = vehicle.g_n(trim.x_e);
    return lin;
}

}  // namespace morphctl
