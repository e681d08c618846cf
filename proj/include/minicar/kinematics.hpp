#ifndef MINICAR_KINEMATICS_HPP
#define MINICAR_KINEMATICS_HPP

#include <optional>

namespace minicar {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi].
double normalize_angle(double rad);

/// Shortest signed rotation taking `from` onto `to`, in (-pi, pi].
double angle_diff(double to, double from);

/// Physical constants of the 1:10 car. Defaults follow the chassis datasheet
/// (39.7 x 24.1 cm body, 90 cm/s top speed).
struct VehicleParams {
    double wheelbase_m = 0.26;
    double max_speed_mps = 0.9;
    double max_steer_rad = 0.52;
    double overall_length_m = 0.397;
    double overall_width_m = 0.241;

    /// Throws std::invalid_argument when an invariant is broken.
    void validate() const;

    /// Body overhang behind the rear axle; the two overhangs are equal.
    double rear_overhang_m() const { return 0.5 * (overall_length_m - wheelbase_m); }
    double front_overhang_m() const { return rear_overhang_m(); }
};

/// Rear-axle pose in the world frame.
struct VehicleState {
    double x_m = 0.0;
    double y_m = 0.0;
    double theta_rad = 0.0;

    friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

struct ControlInput {
    double speed_mps = 0.0;
    double steer_rad = 0.0;

    friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

struct GyroSample {
    double yaw_rate_rps = 0.0;
    std::optional<double> heading_rad;
};

/// Saturates speed and steering to the vehicle limits. Idempotent.
ControlInput clamp_input(const ControlInput& raw, const VehicleParams& params);

/// One forward-Euler step of the kinematic bicycle model about the rear axle:
///   x' = v cos(theta), y' = v sin(theta), theta' = v tan(delta) / wheelbase.
/// Throws std::invalid_argument on non-finite input or dt <= 0.
VehicleState step(const VehicleState& state, const ControlInput& input,
                  const VehicleParams& params, double dt);

/// Yaw rate the kinematic model produces for `input`.
double kinematic_yaw_rate(const ControlInput& input, const VehicleParams& params);

/// Steady-state turning radius of the rear axle. Returns nullopt for a zero
/// steering angle (driving straight).
std::optional<double> turning_radius(double steer_rad, const VehicleParams& params);

/// Dead-reckoning estimate. Position is integrated with the estimated heading;
/// the heading is a complementary blend of the gyro-integrated heading and the
/// kinematic heading, taken on the circle. A gyro sample carrying an absolute
/// heading uses it in place of the integrated one. A non-finite gyro sample
/// falls back to the kinematic heading for the step.
VehicleState localize(const VehicleState& prev_estimate, const ControlInput& input,
                      const GyroSample& gyro, const VehicleParams& params, double dt,
                      double fusion_weight);

}  // namespace minicar

#endif  // MINICAR_KINEMATICS_HPP
