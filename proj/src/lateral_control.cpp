#include "minicar/lateral_control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace minicar {

void StanleyGains::validate() const {
    if (k_he < 0.0 || k_ce < 0.0 || k_s < 0.0) {
        throw std::invalid_argument("StanleyGains: gains must be >= 0");
    }
    if (k_he == 0.0 && k_ce == 0.0 && k_s == 0.0) {
        throw std::invalid_argument("StanleyGains: gains must not all be zero");
    }
}

void PidGains::validate() const {
    if (k_p < 0.0 || k_i < 0.0 || k_d < 0.0) {
        throw std::invalid_argument("PidGains: gains must be >= 0");
    }
    if (!(integral_limit > 0.0)) {
        throw std::invalid_argument("PidGains: integral_limit must be > 0");
    }
}

void PurePursuitGains::validate() const {
    if (!(k_pp > 0.0)) {
        throw std::invalid_argument("PurePursuitGains: k_pp must be > 0");
    }
}

void SpeedPolicy::validate() const {
    if (!(cruise_mps > 0.0)) {
        throw std::invalid_argument("SpeedPolicy: cruise_mps must be > 0");
    }
    if (curvature_gain < 0.0 || obstacle_gain < 0.0 || obstacle_stop_m < 0.0) {
        throw std::invalid_argument("SpeedPolicy: gains and stop distance must be >= 0");
    }
}

std::string_view controller_name(ControllerKind kind) {
    switch (kind) {
        case ControllerKind::Stanley:
            return "stanley";
        case ControllerKind::Pid:
            return "pid";
        case ControllerKind::PurePursuit:
            return "pure-pursuit";
    }
    return "unknown";
}

std::optional<ControllerKind> parse_controller(std::string_view name) {
    if (name == "stanley") return ControllerKind::Stanley;
    if (name == "pid") return ControllerKind::Pid;
    if (name == "pure-pursuit") return ControllerKind::PurePursuit;
    return std::nullopt;
}

double stanley_steer(const PathError& err, double v_mps, const StanleyGains& gains) {
    if (v_mps < 0.0) {
        throw std::invalid_argument("stanley_steer: speed must be >= 0");
    }
    const double denom = v_mps + gains.k_s;
    if (denom == 0.0) {
        throw std::invalid_argument("stanley_steer: v + k_s must be > 0");
    }
    return gains.k_he * err.heading_err_rad + std::atan(gains.k_ce * err.cross_track_m / denom);
}

double pid_steer(const PathError& err, double integral_ce, const PidGains& gains) {
    return gains.k_p * err.cross_track_m + gains.k_d * err.heading_err_rad +
           gains.k_i * integral_ce;
}

double update_integral(double integral_ce, double ce, double dt, const PidGains& gains) {
    if (!(dt > 0.0)) {
        throw std::invalid_argument("update_integral: dt must be > 0");
    }
    return std::clamp(integral_ce + ce * dt, -gains.integral_limit, gains.integral_limit);
}

double pure_pursuit_steer(double cross_track_m, double wheelbase_m, double v_mps,
                          const PurePursuitGains& gains) {
    if (!(v_mps > 0.0)) {
        throw std::invalid_argument("pure_pursuit_steer: speed must be > 0");
    }
    return std::atan(2.0 * cross_track_m * wheelbase_m / (gains.k_pp * v_mps));
}

double speed_command(const SpeedPolicy& policy, double path_curvature_per_m,
                     std::optional<double> nearest_obstacle_m) {
    double command =
        std::max(0.0, policy.cruise_mps - policy.curvature_gain * path_curvature_per_m);
    if (nearest_obstacle_m) {
        const double obstacle_speed =
            std::clamp(policy.obstacle_gain * (*nearest_obstacle_m - policy.obstacle_stop_m), 0.0,
                       policy.cruise_mps);
        command = std::min(command, obstacle_speed);
    }
    return command;
}

SteeringController::SteeringController(ControllerKind kind, StanleyGains stanley, PidGains pid,
                                       PurePursuitGains pure_pursuit, double wheelbase_m)
    : kind_(kind),
      stanley_(stanley),
      pid_(pid),
      pure_pursuit_(pure_pursuit),
      wheelbase_m_(wheelbase_m) {
    stanley_.validate();
    pid_.validate();
    pure_pursuit_.validate();
}

double SteeringController::update(const PathError& err, double v_mps, double dt) {
    const double speed = std::abs(v_mps);
    switch (kind_) {
        case ControllerKind::Stanley:
            last_steer_ = stanley_steer(err, speed, stanley_);
            break;
        case ControllerKind::Pid:
            integral_ce_ = update_integral(integral_ce_, err.cross_track_m, dt, pid_);
            last_steer_ = pid_steer(err, integral_ce_, pid_);
            break;
        case ControllerKind::PurePursuit:
            if (speed >= kPurePursuitMinSpeed) {
                last_steer_ = pure_pursuit_steer(err.cross_track_m, wheelbase_m_, speed,
                                                 pure_pursuit_);
            }
            break;
    }
    return last_steer_;
}

void SteeringController::reset() {
    integral_ce_ = 0.0;
    last_steer_ = 0.0;
}

}  // namespace minicar
