#ifndef MINICAR_SIM_SENSORS_HPP
#define MINICAR_SIM_SENSORS_HPP

#include <array>
#include <optional>
#include <vector>

#include "minicar/grid_map.hpp"
#include "minicar/lane_postprocess.hpp"
#include "minicar/maneuver_fsm.hpp"
#include "minicar/mono_range.hpp"
#include "minicar/sim/rng.hpp"
#include "minicar/sim/scenario.hpp"

namespace minicar::sim {

// Sensor simulators are the only code (besides the logger) that sees the true pose.

enum class RangeSide { Front, Rear, Left, Right };
inline constexpr std::array kRangeSides{RangeSide::Front, RangeSide::Rear, RangeSide::Left,
                                        RangeSide::Right};

/// Distance sensors on the four body faces, facing outwards.
SensorMount range_mount(RangeSide side, const VehicleParams& params);

/// Lane-line points the camera would report: boundary points inside the BEV ROI,
/// mapped to pixels with the inverse of to_bev, then perturbed by noise.
LanePoints sample_lane_points(const Scenario& sc, const VehicleState& truth,
                              const LanePipelineConfig& lane_cfg, Rng& rng);

/// Nearest hit of the ray origin + t * (cos yaw, sin yaw), 0 <= t <= max_range,
/// against the scenario obstacles; nullopt when nothing is hit.
std::optional<double> cast_ray(const std::vector<Box>& boxes, const Point2& origin, double yaw_rad,
                               double max_range_m);

RangeReading simulate_range(const Scenario& sc, const VehicleState& truth,
                            const SensorMount& mount, Rng& rng);

/// Detector output for one visible sign or light.
struct SimDetection {
    SignClass sign_class = SignClass::Park;
    Detection detection;
    double true_distance_m = 0.0;  ///< camera-to-object range
    double true_bearing_rad = 0.0;
};

/// Signs and lights inside the camera's field of view and range, sorted by
/// distance ascending. Box heights invert the pinhole range relation.
std::vector<SimDetection> simulate_detections(const Scenario& sc, const VehicleState& truth,
                                              double t_s, Rng& rng);

/// Range and bearing recovered from a detection with the monocular model.
SignEvent perceive(const SimDetection& det, const Scenario& sc);

/// Body rectangle of the vehicle at a rear-axle pose.
Box vehicle_footprint(const VehicleState& pose, const VehicleParams& params);
/// Separating-axis overlap test for two oriented rectangles. Touching counts.
bool boxes_overlap(const Box& a, const Box& b);

}  // namespace minicar::sim

#endif  // MINICAR_SIM_SENSORS_HPP
