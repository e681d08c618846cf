#ifndef MINICAR_MANEUVER_FSM_HPP
#define MINICAR_MANEUVER_FSM_HPP

#include <array>
#include <cstddef>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "minicar/kinematics.hpp"
#include "minicar/lateral_control.hpp"

namespace minicar {

// ---------------------------------------------------------------------------
// Perception events

enum class SignClass {
    Park,
    TurnLeft,
    TurnRight,
    Straight,
    Tunnel,
    PedestrianCrossing,
    NoOvertaking,
    NoOvertakingEnd,
    TrafficLightRed,
    TrafficLightGreen,
};

inline constexpr std::array kAllSignClasses{
    SignClass::Park,         SignClass::TurnLeft,           SignClass::TurnRight,
    SignClass::Straight,     SignClass::Tunnel,             SignClass::PedestrianCrossing,
    SignClass::NoOvertaking, SignClass::NoOvertakingEnd,    SignClass::TrafficLightRed,
    SignClass::TrafficLightGreen,
};

std::string_view sign_class_name(SignClass c);
std::optional<SignClass> parse_sign_class(std::string_view name);

struct SignEvent {
    SignClass sign_class = SignClass::Park;
    double distance_m = 0.0;   ///< camera-to-sign range
    double bearing_rad = 0.0;  ///< positive to the left of the camera axis
    double confidence = 1.0;

    /// Range projected on the camera axis.
    double along_track_m() const;
    void validate() const;
};

/// Sliding-window std-dev gate. Once the window holds at least four samples, a
/// sample farther than k_sigma sample standard deviations from the window mean
/// is rejected. Accepted samples enter the window (oldest evicted first).
class StatFilter {
public:
    explicit StatFilter(std::size_t window = 8, double k_sigma = 2.0);

    struct Result {
        bool accepted = false;
        double value = 0.0;  ///< window mean after the update
    };

    Result filter_sample(double sample);
    void clear() { window_.clear(); }

    std::size_t size() const { return window_.size(); }
    std::size_t capacity() const { return capacity_; }
    double mean() const;
    double stddev() const;

private:
    std::size_t capacity_;
    double k_sigma_;
    std::deque<double> window_;
};

// ---------------------------------------------------------------------------
// Commands and flags

struct ActuatorFlags {
    bool hazard_lights = false;
    bool headlights = false;
    bool overtaking_allowed = true;

    friend bool operator==(const ActuatorFlags&, const ActuatorFlags&) = default;
};

/// Optional override from a decision machine. A non-negative speed caps forward
/// travel; a negative speed requests reversing at that speed. A steering value
/// replaces the lane controller output.
struct ControlOverlay {
    std::optional<double> speed_mps;
    std::optional<double> steer_rad;

    bool empty() const { return !speed_mps && !steer_rad; }
};

/// Min-speed / override-steer composition. Overlays are listed by priority; the
/// first steering override wins. Forward speed is the minimum of the base speed
/// and every non-negative cap. A reverse request wins over the base speed but its
/// magnitude is still limited by every non-negative cap.
ControlInput arbitrate(const ControlInput& base, std::span<const ControlOverlay> overlays);

struct Transition {
    std::string from;
    std::string to;
    std::string cause;
};

// ---------------------------------------------------------------------------
// Parallel parking

enum class ParkingNode {
    LaneFollow,
    HazardOn,
    ScanForGap,
    AlignPreGap,
    ReverseIn,
    Straighten,
    Parked,
    PullOut,
    Resume,
};

enum class ParkingEvent {
    Tick,
    ParkSign,
    HazardSettled,
    GapFound,
    ScanExhausted,
    AlignReached,
    ReverseDone,
    StraightenDone,
    DwellElapsed,
    PullOutDone,
};

inline constexpr std::array kAllParkingNodes{
    ParkingNode::LaneFollow, ParkingNode::HazardOn,   ParkingNode::ScanForGap,
    ParkingNode::AlignPreGap, ParkingNode::ReverseIn, ParkingNode::Straighten,
    ParkingNode::Parked,     ParkingNode::PullOut,    ParkingNode::Resume,
};
inline constexpr std::array kAllParkingEvents{
    ParkingEvent::Tick,          ParkingEvent::ParkSign,     ParkingEvent::HazardSettled,
    ParkingEvent::GapFound,      ParkingEvent::ScanExhausted, ParkingEvent::AlignReached,
    ParkingEvent::ReverseDone,   ParkingEvent::StraightenDone, ParkingEvent::DwellElapsed,
    ParkingEvent::PullOutDone,
};

struct ParkingEdge {
    ParkingNode from;
    ParkingEvent event;
    ParkingNode to;
};

std::string_view parking_node_name(ParkingNode n);
std::string_view parking_event_name(ParkingEvent e);

/// The declared edge list. Any (node, event) pair not listed is a self-loop.
std::span<const ParkingEdge> parking_edges();
ParkingNode parking_transition(ParkingNode node, ParkingEvent event);
/// Nodes during which the hazard lights must be on (HazardOn through PullOut).
bool parking_hazard_active(ParkingNode node);

struct ParkingConfig {
    double trigger_distance_m = 1.0;
    double gap_length_m = 1.2 * 0.397;
    double gap_depth_m = 1.2 * 0.241;
    double collision_stop_m = 0.10;
    double scan_length_m = 4.0;
    double max_bay_length_m = 4.0 * 0.397;
    double scan_speed_mps = 0.2;
    double maneuver_speed_mps = 0.15;
    double hazard_dwell_s = 0.2;
    double park_dwell_s = 2.0;
    double bay_lateral_offset_m = 0.48;  ///< lane center to bay center
    int bay_side = -1;                   ///< -1 right of the lane, +1 left
    double heading_tol_rad = 5.0 * kPi / 180.0;
    double align_tol_m = 0.005;
    double side_sensor_ahead_m = 0.13;   ///< side sensor position ahead of the rear axle
    double body_center_ahead_m = 0.13;   ///< body center ahead of the rear axle
    double wheelbase_m = 0.26;
    double max_steer_rad = 0.52;

    /// Gap and clearance defaults scaled from the vehicle footprint.
    static ParkingConfig for_vehicle(const VehicleParams& params);
    void validate() const;

    double turn_radius_m() const;
    /// Heading swing of each of the two reverse arcs needed to shift the car
    /// sideways by bay_lateral_offset_m.
    double swing_angle_rad() const;
};

struct RangeSet {
    double front_m = 0.0;
    double rear_m = 0.0;
    double left_m = 0.0;
    double right_m = 0.0;

    double min() const;
};

struct ParkingFsm {
    ParkingNode node = ParkingNode::LaneFollow;
    VehicleState origin;        ///< pose when the maneuver started
    double lane_heading_rad = 0.0;
    double timer_s = 0.0;
    double scan_start_s = 0.0;
    bool gap_open = false;
    double gap_start_s = 0.0;   ///< along-lane position of the gap's near edge
    std::optional<double> gap_end_s;
    double measured_gap_m = 0.0;
    int pullout_phase = 0;
    bool holding = false;       ///< collision hold active this step
};

struct ParkingInputs {
    std::optional<SignEvent> park_sign;  ///< nearest filtered Park event, if any
    RangeSet ranges;
    VehicleState pose;                   ///< estimated pose
    double dt = 0.01;
};

struct ParkingStep {
    ParkingFsm fsm;
    ControlOverlay overlay;
    ActuatorFlags flags;  ///< only hazard_lights is driven by parking
    std::optional<Transition> transition;
    std::vector<std::string> notes;
};

ParkingStep parking_step(const ParkingFsm& fsm, const ParkingInputs& in, const ParkingConfig& cfg);

/// Along-lane coordinate of `pose` relative to the maneuver origin.
double parking_progress(const ParkingFsm& fsm, const VehicleState& pose);

// ---------------------------------------------------------------------------
// Intersections

enum class IntersectionNode { LaneFollow, SignSeen, Align, WaitTrafficLight, ExecuteTurn, Exit };
enum class TurnKind { Left, Right, Straight };
enum class LightState { None, Red, Green };

enum class IntersectionEvent {
    Tick,
    DirectionSign,
    ApproachReached,
    StopReached,
    LightRed,
    LightClear,
    TurnComplete,
    LaneReacquired,
};

inline constexpr std::array kAllIntersectionNodes{
    IntersectionNode::LaneFollow,       IntersectionNode::SignSeen,
    IntersectionNode::Align,            IntersectionNode::WaitTrafficLight,
    IntersectionNode::ExecuteTurn,      IntersectionNode::Exit,
};
inline constexpr std::array kAllIntersectionEvents{
    IntersectionEvent::Tick,          IntersectionEvent::DirectionSign,
    IntersectionEvent::ApproachReached, IntersectionEvent::StopReached,
    IntersectionEvent::LightRed,      IntersectionEvent::LightClear,
    IntersectionEvent::TurnComplete,  IntersectionEvent::LaneReacquired,
};

struct IntersectionEdge {
    IntersectionNode from;
    IntersectionEvent event;
    IntersectionNode to;
};

std::string_view intersection_node_name(IntersectionNode n);
std::string_view intersection_event_name(IntersectionEvent e);
std::string_view turn_kind_name(TurnKind t);
std::string_view light_state_name(LightState s);

std::span<const IntersectionEdge> intersection_edges();
IntersectionNode intersection_transition(IntersectionNode node, IntersectionEvent event);

struct IntersectionConfig {
    double trigger_distance_m = 1.0;
    double approach_window_m = 0.6;  ///< distance before the stop point where Align starts
    double stop_offset_m = 0.0;      ///< stop point relative to the sign position
    double camera_ahead_m = 0.30;
    double approach_speed_mps = 0.3;
    double turn_speed_mps = 0.3;
    double turn_radius_m = 0.8;
    double heading_tol_rad = 5.0 * kPi / 180.0;
    double straight_cross_m = 1.6;
    double min_wait_s = 0.5;
    double heading_hold_gain = 1.0;
    double wheelbase_m = 0.26;

    void validate() const;
    double turn_steer_rad() const;
};

struct IntersectionFsm {
    IntersectionNode node = IntersectionNode::LaneFollow;
    TurnKind planned = TurnKind::Straight;
    LightState light = LightState::None;
    double stop_s = 0.0;
    double entry_heading_rad = 0.0;
    double wait_timer_s = 0.0;
    double turn_start_s = 0.0;
    std::optional<double> last_turn_delta_rad;  ///< heading change of the last completed turn
};

struct IntersectionInputs {
    std::span<const SignEvent> events;  ///< filtered events of this step
    double heading_rad = 0.0;           ///< gyro-blended heading estimate
    double odometry_s = 0.0;            ///< travelled path length
    bool lane_detected = false;         ///< fresh (not held) middle line this step
    double dt = 0.01;
};

struct IntersectionStep {
    IntersectionFsm fsm;
    ControlOverlay overlay;
    std::optional<Transition> transition;
    std::vector<std::string> notes;
};

IntersectionStep intersection_step(const IntersectionFsm& fsm, const IntersectionInputs& in,
                                   const IntersectionConfig& cfg);

/// Target heading change for a turn kind.
double turn_target_rad(TurnKind t);

// ---------------------------------------------------------------------------
// Other signs

struct SignReactionConfig {
    double trigger_distance_m = 1.0;
    double crossing_zone_m = 1.0;
    double crossing_speed_mps = 0.3;
    double crossing_exit_m = 0.5;  ///< zone extends this far past the sign
    double camera_ahead_m = 0.30;
    double rearm_s = 1.0;          ///< a class re-arms after being unseen this long
};

/// Flag reaction to one triggering event: Tunnel toggles the headlights,
/// NoOvertaking / NoOvertakingEnd clear / set overtaking_allowed, and a
/// PedestrianCrossing within the crossing zone turns the hazard lights on.
ActuatorFlags sign_reactions(const SignEvent& event, ActuatorFlags flags,
                             const SignReactionConfig& cfg = {});

/// Speed limit a sign imposes, if any.
std::optional<double> sign_speed_cap(const SignEvent& event, const SignReactionConfig& cfg = {});

/// Stateful wrapper feeding each physical sign through sign_reactions once and
/// keeping the pedestrian-crossing zone active until it has been passed.
class SignReactor {
public:
    explicit SignReactor(SignReactionConfig cfg = {});

    struct Output {
        ActuatorFlags flags;
        ControlOverlay overlay;
        std::vector<SignEvent> triggered;
    };

    Output step(std::span<const SignEvent> events, double odometry_s, double dt);
    const ActuatorFlags& flags() const { return flags_; }

private:
    SignReactionConfig cfg_;
    ActuatorFlags flags_;
    std::array<bool, kAllSignClasses.size()> armed_{};
    std::array<double, kAllSignClasses.size()> unseen_s_{};
    std::optional<double> crossing_end_s_;
};

}  // namespace minicar

#endif  // MINICAR_MANEUVER_FSM_HPP
