#ifndef MINICAR_SIM_SCENARIO_HPP
#define MINICAR_SIM_SCENARIO_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "minicar/grid_map.hpp"
#include "minicar/kinematics.hpp"
#include "minicar/lateral_control.hpp"
#include "minicar/maneuver_fsm.hpp"
#include "minicar/mono_range.hpp"
#include "minicar/sim/road.hpp"

namespace minicar::sim {

inline constexpr const char* kScenarioSchema = "minicar.scenario/1";

/// Oriented rectangle; size is (length along yaw, width across).
struct Box {
    Point2 center;
    double length_m = 0.0;
    double width_m = 0.0;
    double yaw_rad = 0.0;
    std::string label;
};

struct SignSpec {
    SignClass sign_class = SignClass::Park;
    Point2 position;
    double height_mm = 100.0;
};

struct LightPhase {
    LightState state = LightState::Red;
    std::optional<double> until_s;  ///< phase ends at this time; empty for the last phase
};

struct TrafficLightSpec {
    Point2 position;
    double height_mm = 120.0;
    std::vector<LightPhase> schedule;

    /// State shown at time t (None if the schedule is empty).
    LightState state_at(double t) const;
};

struct Gains {
    StanleyGains stanley;
    PidGains pid;
    PurePursuitGains pure_pursuit;
    SpeedPolicy speed;
};

struct SensorNoise {
    double lane_sigma_px = 0.0;
    double lane_dropout_left = 0.0;   ///< per-frame probability the left line is missed
    double lane_dropout_right = 0.0;
    double lane_outlier_prob = 0.0;   ///< per-point probability of a gross outlier
    double range_sigma_m = 0.0;
    double gyro_bias_rps = 0.0;
    double gyro_sigma_rps = 0.0;
    double detection_sigma_px = 0.0;

    void validate() const;
};

/// Where the simulated sensors sit and what they see.
struct SensorRig {
    double lane_camera_ahead_m = 0.45;  ///< BEV origin ahead of the rear axle
    double sign_camera_ahead_m = 0.30;
    double sign_image_width_px = 1920.0;
    double sign_max_range_m = 2.5;
    double range_max_m = 2.0;
    double lane_sample_step_m = 0.05;
};

struct Scenario {
    std::string name;
    std::string description;
    Road road;
    VehicleParams vehicle;
    VehicleState initial;
    double dt_s = 0.01;
    double duration_s = 20.0;
    std::uint64_t seed = 1;
    double fusion_weight = 0.98;

    std::vector<Box> obstacles;
    std::vector<SignSpec> signs;
    std::vector<TrafficLightSpec> lights;
    std::vector<Box> parking_bays;

    Gains gains;
    SensorNoise noise;
    SensorRig rig;
    CameraIntrinsics camera;
    RangeCorrection range_correction;
    GridConfig grid;
    ParkingConfig parking = ParkingConfig::for_vehicle(VehicleParams{});
    IntersectionConfig intersection;
    SignReactionConfig sign_reactions;
    std::array<double, kAllSignClasses.size()> catalog_mm{};  ///< detector's known heights

    double known_height_mm(SignClass c) const { return catalog_mm[static_cast<std::size_t>(c)]; }
    void validate() const;
};

/// Parses a scenario document. Throws std::runtime_error with a readable message
/// on schema or value errors.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::filesystem::path& path);

/// Applies a gains document ({"stanley": {...}, "pid": {...}, ...}) on top of `base`.
Gains parse_gains(const std::string& json_text, Gains base);
SensorNoise parse_noise(const std::string& json_text);

/// Default physical height (mm) of each sign class.
double default_sign_height_mm(SignClass c);

/// Directory holding the bundled scenario files.
std::filesystem::path bundled_scenario_dir();
std::vector<std::string> bundled_scenarios();
/// Resolves a bundled name or a file path.
std::filesystem::path resolve_scenario(const std::string& name_or_path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace minicar::sim

#endif  // MINICAR_SIM_SCENARIO_HPP
