#ifndef MINICAR_SIM_SIMULATOR_HPP
#define MINICAR_SIM_SIMULATOR_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "minicar/grid_map.hpp"
#include "minicar/lane_postprocess.hpp"
#include "minicar/lateral_control.hpp"
#include "minicar/maneuver_fsm.hpp"
#include "minicar/sim/scenario.hpp"

namespace minicar::sim {

struct StepRecord {
    int step = 0;
    double t_s = 0.0;
    VehicleState truth;
    VehicleState estimate;
    std::optional<double> ce_m;  ///< controller frame; empty while the lane is lost
    std::optional<double> he_rad;
    double steer_cmd_rad = 0.0;
    double speed_cmd_mps = 0.0;
    ControllerKind controller = ControllerKind::Stanley;
    ParkingNode parking = ParkingNode::LaneFollow;
    IntersectionNode intersection = IntersectionNode::LaneFollow;
    ActuatorFlags flags;
    std::optional<double> nearest_obstacle_m;

    // Diagnostics kept in memory only.
    LightState light = LightState::None;
    MiddleProvenance provenance = MiddleProvenance::Lost;
    double lane_speed_mps = 0.0;  ///< controller layer before overlays
    double fsm_speed_cap_mps = 0.0;
    double obstacle_speed_cap_mps = 0.0;
};

struct TransitionRecord {
    int step = 0;
    std::string machine;
    Transition transition;
};

enum class Outcome { Completed, Collision, RoadExit };
std::string_view outcome_name(Outcome o);

struct RunOptions {
    ControllerKind controller = ControllerKind::Stanley;
    std::optional<Gains> gains;
    std::optional<SensorNoise> noise;
    std::optional<double> dt_s;
    std::optional<double> duration_s;
    std::optional<std::uint64_t> seed;
    std::optional<VehicleState> initial;
};

struct RunResult {
    std::string scenario;
    ControllerKind controller = ControllerKind::Stanley;
    std::uint64_t seed = 0;
    double dt_s = 0.0;
    std::vector<StepRecord> steps;
    std::vector<TransitionRecord> transitions;
    GridMap grid;
    Outcome outcome = Outcome::Completed;
    std::string failure;
    VehicleState final_truth;
    VehicleState final_estimate;
    ParkingFsm parking;
    IntersectionFsm intersection;
    std::vector<double> turn_deltas_rad;  ///< heading change of every completed turn
};

/// Closed-loop run: sensors, lane pipeline, controller, decision layer,
/// arbitration, plant and localization, once per dt until the duration elapses
/// or the car collides or leaves the road.
/// Throws std::invalid_argument when the scenario with the options applied is invalid.
RunResult simulate(const Scenario& scenario, const RunOptions& options);

LanePipelineConfig lane_pipeline_config();

}  // namespace minicar::sim

#endif  // MINICAR_SIM_SIMULATOR_HPP
