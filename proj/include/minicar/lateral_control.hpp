#ifndef MINICAR_LATERAL_CONTROL_HPP
#define MINICAR_LATERAL_CONTROL_HPP

#include <optional>
#include <string>
#include <string_view>

namespace minicar {

/// Tracking error with respect to the lane middle line.
/// cross_track_m > 0: vehicle is to the right of the line.
/// heading_err_rad > 0: the line tangent points to the left of the vehicle heading.
/// With these signs a positive steering command (left turn) is corrective for both.
struct PathError {
    double cross_track_m = 0.0;
    double heading_err_rad = 0.0;
};

struct StanleyGains {
    double k_he = 1.0;
    double k_ce = 2.5;
    double k_s = 0.1;

    void validate() const;
};

struct PidGains {
    double k_p = 2.0;
    double k_i = 0.05;
    double k_d = 1.5;
    double integral_limit = 1.0;

    void validate() const;
};

struct PurePursuitGains {
    double k_pp = 1.0;

    void validate() const;
};

/// Longitudinal policy: curvature-scaled cruise with an obstacle P-controller
/// that wins whenever it asks for less speed.
struct SpeedPolicy {
    double cruise_mps = 0.5;
    double curvature_gain = 1.0;
    double obstacle_gain = 1.0;
    double obstacle_stop_m = 0.25;

    void validate() const;
};

enum class ControllerKind { Stanley, Pid, PurePursuit };

std::string_view controller_name(ControllerKind kind);
/// Accepts "stanley", "pid" and "pure-pursuit".
std::optional<ControllerKind> parse_controller(std::string_view name);

/// steer = k_he * HE + atan(k_ce * CE / (v + k_s)).
/// Throws std::invalid_argument if v < 0 or v + k_s == 0.
double stanley_steer(const PathError& err, double v_mps, const StanleyGains& gains);

/// steer = k_p * CE + k_d * HE + k_i * integral(CE). The derivative channel is fed
/// with the heading error directly rather than a differentiated cross-track error.
double pid_steer(const PathError& err, double integral_ce, const PidGains& gains);

/// Rectangle-rule update of the cross-track integral, saturated to
/// +/- integral_limit.
double update_integral(double integral_ce, double ce, double dt, const PidGains& gains);

/// steer = atan(2 * CE * wheelbase / (k_pp * v)). Throws for v <= 0; callers hold
/// the previous command at standstill.
double pure_pursuit_steer(double cross_track_m, double wheelbase_m, double v_mps,
                          const PurePursuitGains& gains);

/// Below this speed the pure-pursuit law is bypassed and the last command held.
inline constexpr double kPurePursuitMinSpeed = 0.05;

double speed_command(const SpeedPolicy& policy, double path_curvature_per_m,
                     std::optional<double> nearest_obstacle_m);

/// Caller-owned state for running one of the three laws in a loop.
class SteeringController {
public:
    SteeringController(ControllerKind kind, StanleyGains stanley, PidGains pid,
                       PurePursuitGains pure_pursuit, double wheelbase_m);

    double update(const PathError& err, double v_mps, double dt);
    void reset();

    ControllerKind kind() const { return kind_; }
    double integral() const { return integral_ce_; }

private:
    ControllerKind kind_;
    StanleyGains stanley_;
    PidGains pid_;
    PurePursuitGains pure_pursuit_;
    double wheelbase_m_;
    double integral_ce_ = 0.0;
    double last_steer_ = 0.0;
};

}  // namespace minicar

#endif  // MINICAR_LATERAL_CONTROL_HPP
