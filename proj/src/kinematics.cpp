#include "minicar/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace minicar {

double normalize_angle(double rad) {
    if (!std::isfinite(rad)) {
        throw std::invalid_argument("normalize_angle: non-finite angle");
    }
    if (rad > -kPi && rad <= kPi) {
        return rad;
    }
    double wrapped = std::remainder(rad, 2.0 * kPi);  // [-pi, pi]
    if (wrapped <= -kPi) {
        wrapped += 2.0 * kPi;
    }
    return wrapped;
}

double angle_diff(double to, double from) { return normalize_angle(to - from); }

void VehicleParams::validate() const {
    if (!(wheelbase_m > 0.0)) {
        throw std::invalid_argument("VehicleParams: wheelbase_m must be > 0");
    }
    if (!(max_speed_mps > 0.0)) {
        throw std::invalid_argument("VehicleParams: max_speed_mps must be > 0");
    }
    if (!(max_steer_rad > 0.0 && max_steer_rad < 0.5 * kPi)) {
        throw std::invalid_argument("VehicleParams: max_steer_rad must be in (0, pi/2)");
    }
    if (!(wheelbase_m < overall_length_m)) {
        throw std::invalid_argument("VehicleParams: wheelbase_m must be < overall_length_m");
    }
    if (!(overall_width_m > 0.0)) {
        throw std::invalid_argument("VehicleParams: overall_width_m must be > 0");
    }
}

ControlInput clamp_input(const ControlInput& raw, const VehicleParams& params) {
    return {std::clamp(raw.speed_mps, -params.max_speed_mps, params.max_speed_mps),
            std::clamp(raw.steer_rad, -params.max_steer_rad, params.max_steer_rad)};
}

double kinematic_yaw_rate(const ControlInput& input, const VehicleParams& params) {
    return input.speed_mps * std::tan(input.steer_rad) / params.wheelbase_m;
}

VehicleState step(const VehicleState& state, const ControlInput& input,
                  const VehicleParams& params, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("step: dt must be finite and > 0");
    }
    if (!std::isfinite(state.x_m) || !std::isfinite(state.y_m) ||
        !std::isfinite(state.theta_rad) || !std::isfinite(input.speed_mps) ||
        !std::isfinite(input.steer_rad)) {
        throw std::invalid_argument("step: non-finite state or input");
    }
    const double v = input.speed_mps;
    VehicleState next;
    next.x_m = state.x_m + v * std::cos(state.theta_rad) * dt;
    next.y_m = state.y_m + v * std::sin(state.theta_rad) * dt;
    next.theta_rad = normalize_angle(state.theta_rad + kinematic_yaw_rate(input, params) * dt);
    return next;
}

std::optional<double> turning_radius(double steer_rad, const VehicleParams& params) {
    if (steer_rad == 0.0) {
        return std::nullopt;
    }
    return params.wheelbase_m / std::tan(std::abs(steer_rad));
}

VehicleState localize(const VehicleState& prev_estimate, const ControlInput& input,
                      const GyroSample& gyro, const VehicleParams& params, double dt,
                      double fusion_weight) {
    if (!(fusion_weight >= 0.0 && fusion_weight <= 1.0)) {
        throw std::invalid_argument("localize: fusion_weight must be in [0, 1]");
    }
    // Position uses the heading estimate from the start of the step.
    VehicleState next = step(prev_estimate, input, params, dt);
    const double kinematic_heading = next.theta_rad;

    const bool rate_ok = std::isfinite(gyro.yaw_rate_rps);
    const bool abs_ok = gyro.heading_rad.has_value() && std::isfinite(*gyro.heading_rad);
    if (gyro.heading_rad.has_value() && !abs_ok) {
        return next;
    }
    double gyro_heading = 0.0;
    if (abs_ok) {
        gyro_heading = normalize_angle(*gyro.heading_rad);
    } else if (rate_ok) {
        gyro_heading = normalize_angle(prev_estimate.theta_rad + gyro.yaw_rate_rps * dt);
    } else {
        return next;
    }
    next.theta_rad = normalize_angle(
        kinematic_heading + fusion_weight * angle_diff(gyro_heading, kinematic_heading));
    return next;
}

}  // namespace minicar
