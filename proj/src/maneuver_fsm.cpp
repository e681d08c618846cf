#include "minicar/maneuver_fsm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

namespace minicar {

namespace {

std::size_t class_index(SignClass c) { return static_cast<std::size_t>(c); }

bool is_direction_sign(SignClass c) {
    return c == SignClass::TurnLeft || c == SignClass::TurnRight || c == SignClass::Straight;
}

TurnKind turn_for(SignClass c) {
    switch (c) {
        case SignClass::TurnLeft:
            return TurnKind::Left;
        case SignClass::TurnRight:
            return TurnKind::Right;
        default:
            return TurnKind::Straight;
    }
}

SignClass sign_for(TurnKind t) {
    switch (t) {
        case TurnKind::Left:
            return SignClass::TurnLeft;
        case TurnKind::Right:
            return SignClass::TurnRight;
        case TurnKind::Straight:
            break;
    }
    return SignClass::Straight;
}

}  // namespace

// ---------------------------------------------------------------------------
// Perception events

std::string_view sign_class_name(SignClass c) {
    switch (c) {
        case SignClass::Park:
            return "Park";
        case SignClass::TurnLeft:
            return "TurnLeft";
        case SignClass::TurnRight:
            return "TurnRight";
        case SignClass::Straight:
            return "Straight";
        case SignClass::Tunnel:
            return "Tunnel";
        case SignClass::PedestrianCrossing:
            return "PedestrianCrossing";
        case SignClass::NoOvertaking:
            return "NoOvertaking";
        case SignClass::NoOvertakingEnd:
            return "NoOvertakingEnd";
        case SignClass::TrafficLightRed:
            return "TrafficLightRed";
        case SignClass::TrafficLightGreen:
            return "TrafficLightGreen";
    }
    return "Unknown";
}

std::optional<SignClass> parse_sign_class(std::string_view name) {
    for (auto c : kAllSignClasses) {
        if (sign_class_name(c) == name) return c;
    }
    return std::nullopt;
}

double SignEvent::along_track_m() const { return distance_m * std::cos(bearing_rad); }

void SignEvent::validate() const {
    if (!(distance_m >= 0.0)) {
        throw std::invalid_argument("SignEvent: distance must be >= 0");
    }
    if (!(confidence >= 0.0 && confidence <= 1.0)) {
        throw std::invalid_argument("SignEvent: confidence must be in [0, 1]");
    }
}

StatFilter::StatFilter(std::size_t window, double k_sigma) : capacity_(window), k_sigma_(k_sigma) {
    if (window == 0) {
        throw std::invalid_argument("StatFilter: window must be > 0");
    }
    if (!(k_sigma > 0.0)) {
        throw std::invalid_argument("StatFilter: k_sigma must be > 0");
    }
}

double StatFilter::mean() const {
    if (window_.empty()) return 0.0;
    return std::accumulate(window_.begin(), window_.end(), 0.0) /
           static_cast<double>(window_.size());
}

double StatFilter::stddev() const {
    if (window_.size() < 2) return 0.0;
    const double m = mean();
    double ss = 0.0;
    for (double x : window_) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(window_.size() - 1));
}

StatFilter::Result StatFilter::filter_sample(double sample) {
    if (!std::isfinite(sample)) {
        throw std::invalid_argument("StatFilter: sample must be finite");
    }
    if (window_.size() >= 4 && std::abs(sample - mean()) > k_sigma_ * stddev()) {
        return {false, mean()};
    }
    window_.push_back(sample);
    if (window_.size() > capacity_) {
        window_.pop_front();
    }
    return {true, mean()};
}

// ---------------------------------------------------------------------------
// Arbitration

ControlInput arbitrate(const ControlInput& base, std::span<const ControlOverlay> overlays) {
    ControlInput out = base;
    std::optional<double> reverse;
    bool steer_set = false;
    double cap = std::numeric_limits<double>::infinity();
    for (const auto& o : overlays) {
        if (o.steer_rad && !steer_set) {
            out.steer_rad = *o.steer_rad;
            steer_set = true;
        }
        if (o.speed_mps) {
            if (*o.speed_mps < 0.0) {
                if (!reverse) reverse = *o.speed_mps;
            } else {
                cap = std::min(cap, *o.speed_mps);
            }
        }
    }
    if (reverse) {
        out.speed_mps = -std::min(-*reverse, cap);
    } else {
        out.speed_mps = std::min(base.speed_mps, cap);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parking

namespace {

constexpr std::array kParkingEdges{
    ParkingEdge{ParkingNode::LaneFollow, ParkingEvent::ParkSign, ParkingNode::HazardOn},
    ParkingEdge{ParkingNode::HazardOn, ParkingEvent::HazardSettled, ParkingNode::ScanForGap},
    ParkingEdge{ParkingNode::ScanForGap, ParkingEvent::GapFound, ParkingNode::AlignPreGap},
    ParkingEdge{ParkingNode::ScanForGap, ParkingEvent::ScanExhausted, ParkingNode::LaneFollow},
    ParkingEdge{ParkingNode::AlignPreGap, ParkingEvent::AlignReached, ParkingNode::ReverseIn},
    ParkingEdge{ParkingNode::ReverseIn, ParkingEvent::ReverseDone, ParkingNode::Straighten},
    ParkingEdge{ParkingNode::Straighten, ParkingEvent::StraightenDone, ParkingNode::Parked},
    ParkingEdge{ParkingNode::Parked, ParkingEvent::DwellElapsed, ParkingNode::PullOut},
    ParkingEdge{ParkingNode::PullOut, ParkingEvent::PullOutDone, ParkingNode::Resume},
    ParkingEdge{ParkingNode::Resume, ParkingEvent::ParkSign, ParkingNode::HazardOn},
};

}  // namespace

std::string_view parking_node_name(ParkingNode n) {
    switch (n) {
        case ParkingNode::LaneFollow:
            return "LaneFollow";
        case ParkingNode::HazardOn:
            return "HazardOn";
        case ParkingNode::ScanForGap:
            return "ScanForGap";
        case ParkingNode::AlignPreGap:
            return "AlignPreGap";
        case ParkingNode::ReverseIn:
            return "ReverseIn";
        case ParkingNode::Straighten:
            return "Straighten";
        case ParkingNode::Parked:
            return "Parked";
        case ParkingNode::PullOut:
            return "PullOut";
        case ParkingNode::Resume:
            return "Resume";
    }
    return "Unknown";
}

std::string_view parking_event_name(ParkingEvent e) {
    switch (e) {
        case ParkingEvent::Tick:
            return "tick";
        case ParkingEvent::ParkSign:
            return "park-sign";
        case ParkingEvent::HazardSettled:
            return "hazard-settled";
        case ParkingEvent::GapFound:
            return "gap-found";
        case ParkingEvent::ScanExhausted:
            return "no-gap";
        case ParkingEvent::AlignReached:
            return "aligned";
        case ParkingEvent::ReverseDone:
            return "reverse-done";
        case ParkingEvent::StraightenDone:
            return "straightened";
        case ParkingEvent::DwellElapsed:
            return "dwell-elapsed";
        case ParkingEvent::PullOutDone:
            return "pulled-out";
    }
    return "unknown";
}

std::span<const ParkingEdge> parking_edges() { return kParkingEdges; }

ParkingNode parking_transition(ParkingNode node, ParkingEvent event) {
    for (const auto& e : kParkingEdges) {
        if (e.from == node && e.event == event) return e.to;
    }
    return node;
}

bool parking_hazard_active(ParkingNode node) {
    switch (node) {
        case ParkingNode::HazardOn:
        case ParkingNode::ScanForGap:
        case ParkingNode::AlignPreGap:
        case ParkingNode::ReverseIn:
        case ParkingNode::Straighten:
        case ParkingNode::Parked:
        case ParkingNode::PullOut:
            return true;
        default:
            return false;
    }
}

ParkingConfig ParkingConfig::for_vehicle(const VehicleParams& params) {
    ParkingConfig cfg;
    cfg.gap_length_m = 1.2 * params.overall_length_m;
    cfg.gap_depth_m = 1.2 * params.overall_width_m;
    cfg.max_bay_length_m = 4.0 * params.overall_length_m;
    cfg.side_sensor_ahead_m = 0.5 * params.wheelbase_m;
    cfg.body_center_ahead_m = 0.5 * params.overall_length_m - params.rear_overhang_m();
    cfg.wheelbase_m = params.wheelbase_m;
    cfg.max_steer_rad = params.max_steer_rad;
    return cfg;
}

void ParkingConfig::validate() const {
    if (!(gap_length_m > 0.0) || !(gap_depth_m > 0.0) || !(collision_stop_m >= 0.0) ||
        !(scan_length_m > 0.0) || !(max_bay_length_m >= gap_length_m)) {
        throw std::invalid_argument("ParkingConfig: invalid gap or scan geometry");
    }
    if (!(scan_speed_mps > 0.0) || !(maneuver_speed_mps > 0.0)) {
        throw std::invalid_argument("ParkingConfig: speeds must be > 0");
    }
    if (bay_side != -1 && bay_side != 1) {
        throw std::invalid_argument("ParkingConfig: bay_side must be -1 or +1");
    }
    if (!(bay_lateral_offset_m > 0.0) || !(wheelbase_m > 0.0) || !(max_steer_rad > 0.0)) {
        throw std::invalid_argument("ParkingConfig: invalid maneuver geometry");
    }
}

double ParkingConfig::turn_radius_m() const { return wheelbase_m / std::tan(max_steer_rad); }

double ParkingConfig::swing_angle_rad() const {
    // Two opposite arcs of radius R and swing psi shift the car by 2 R (1 - cos psi).
    const double c = 1.0 - bay_lateral_offset_m / (2.0 * turn_radius_m());
    return std::acos(std::clamp(c, 0.0, 1.0));
}

double RangeSet::min() const { return std::min({front_m, rear_m, left_m, right_m}); }

double parking_progress(const ParkingFsm& fsm, const VehicleState& pose) {
    return (pose.x_m - fsm.origin.x_m) * std::cos(fsm.lane_heading_rad) +
           (pose.y_m - fsm.origin.y_m) * std::sin(fsm.lane_heading_rad);
}

ParkingStep parking_step(const ParkingFsm& fsm, const ParkingInputs& in, const ParkingConfig& cfg) {
    ParkingStep out;
    out.fsm = fsm;
    ParkingFsm& next = out.fsm;
    ParkingEvent event = ParkingEvent::Tick;

    const double s = parking_progress(fsm, in.pose);
    const double heading_err = angle_diff(in.pose.theta_rad, fsm.lane_heading_rad);
    // Heading swing measured in the direction reversing into the bay turns the car.
    const double swing = -cfg.bay_side * heading_err;
    const double psi = cfg.swing_angle_rad();
    const double side_range = cfg.bay_side < 0 ? in.ranges.right_m : in.ranges.left_m;
    const double sensor_s = s + cfg.side_sensor_ahead_m;

    switch (fsm.node) {
        case ParkingNode::LaneFollow:
        case ParkingNode::Resume:
            if (in.park_sign && in.park_sign->along_track_m() <= cfg.trigger_distance_m) {
                event = ParkingEvent::ParkSign;
                next.origin = in.pose;
                next.lane_heading_rad = in.pose.theta_rad;
                next.timer_s = 0.0;
                next.gap_open = false;
                next.gap_end_s.reset();
                next.measured_gap_m = 0.0;
                next.pullout_phase = 0;
            }
            break;
        case ParkingNode::HazardOn:
            out.overlay.speed_mps = cfg.scan_speed_mps;
            next.timer_s += in.dt;
            if (next.timer_s >= cfg.hazard_dwell_s) {
                event = ParkingEvent::HazardSettled;
                next.scan_start_s = s;
                next.gap_open = false;
            }
            break;
        case ParkingNode::ScanForGap:
            out.overlay.speed_mps = cfg.scan_speed_mps;
            if (side_range >= cfg.gap_depth_m) {
                if (!next.gap_open) {
                    next.gap_open = true;
                    next.gap_start_s = sensor_s;
                }
                next.measured_gap_m = sensor_s - next.gap_start_s;
                if (next.measured_gap_m >= cfg.gap_length_m) {
                    event = ParkingEvent::GapFound;
                    next.gap_end_s.reset();
                }
            } else {
                next.gap_open = false;
                next.measured_gap_m = 0.0;
            }
            if (event == ParkingEvent::Tick && s - next.scan_start_s >= cfg.scan_length_m) {
                event = ParkingEvent::ScanExhausted;
                out.notes.push_back("no-gap");
            }
            break;
        case ParkingNode::AlignPreGap: {
            if (!next.gap_end_s) {
                if (side_range < cfg.gap_depth_m) {
                    next.gap_end_s = sensor_s;
                } else if (sensor_s - next.gap_start_s >= cfg.max_bay_length_m) {
                    next.gap_end_s = next.gap_start_s + cfg.max_bay_length_m;
                }
                if (next.gap_end_s) {
                    next.measured_gap_m = *next.gap_end_s - next.gap_start_s;
                }
            }
            if (!next.gap_end_s) {
                out.overlay.speed_mps = cfg.scan_speed_mps;
                break;
            }
            const double bay_center = 0.5 * (next.gap_start_s + *next.gap_end_s);
            const double target =
                bay_center - cfg.body_center_ahead_m + 2.0 * cfg.turn_radius_m() * std::sin(psi);
            const double remaining = target - s;
            if (std::abs(remaining) <= cfg.align_tol_m ||
                (remaining < 0.0 && fsm.timer_s > 0.0) || (remaining > 0.0 && fsm.timer_s < 0.0)) {
                event = ParkingEvent::AlignReached;
                out.overlay.speed_mps = 0.0;
            } else {
                // timer_s stores the travel direction so a crossing of the target is caught.
                next.timer_s = remaining > 0.0 ? 1.0 : -1.0;
                out.overlay.speed_mps = remaining > 0.0 ? cfg.scan_speed_mps : -cfg.scan_speed_mps;
                if (remaining < 0.0) out.overlay.steer_rad = 0.0;
            }
            break;
        }
        case ParkingNode::ReverseIn:
            out.overlay.speed_mps = -cfg.maneuver_speed_mps;
            out.overlay.steer_rad = cfg.bay_side * cfg.max_steer_rad;
            if (swing >= psi) {
                event = ParkingEvent::ReverseDone;
            }
            break;
        case ParkingNode::Straighten:
            out.overlay.speed_mps = -cfg.maneuver_speed_mps;
            out.overlay.steer_rad = -cfg.bay_side * cfg.max_steer_rad;
            if (swing <= 0.0) {
                const bool heading_ok = std::abs(heading_err) < cfg.heading_tol_rad;
                const bool clearance_ok = in.ranges.left_m >= cfg.collision_stop_m &&
                                          in.ranges.right_m >= cfg.collision_stop_m;
                out.overlay.speed_mps = 0.0;
                out.overlay.steer_rad = 0.0;
                if (heading_ok && clearance_ok) {
                    event = ParkingEvent::StraightenDone;
                    next.timer_s = 0.0;
                } else {
                    out.notes.push_back("park-check-failed");
                }
            }
            break;
        case ParkingNode::Parked:
            out.overlay.speed_mps = 0.0;
            out.overlay.steer_rad = 0.0;
            next.timer_s += in.dt;
            if (next.timer_s >= cfg.park_dwell_s) {
                event = ParkingEvent::DwellElapsed;
                next.pullout_phase = 0;
            }
            break;
        case ParkingNode::PullOut:
            out.overlay.speed_mps = cfg.maneuver_speed_mps;
            if (next.pullout_phase == 0) {
                out.overlay.steer_rad = -cfg.bay_side * cfg.max_steer_rad;
                if (swing >= psi) next.pullout_phase = 1;
            }
            if (next.pullout_phase == 1) {
                out.overlay.steer_rad = cfg.bay_side * cfg.max_steer_rad;
                if (swing <= 0.0) {
                    event = ParkingEvent::PullOutDone;
                    out.overlay.steer_rad = 0.0;
                }
            }
            break;
    }

    next.node = parking_transition(fsm.node, event);
    if (next.node != fsm.node) {
        out.transition = Transition{std::string(parking_node_name(fsm.node)),
                                    std::string(parking_node_name(next.node)),
                                    std::string(parking_event_name(event))};
        if (next.node == ParkingNode::ReverseIn || next.node == ParkingNode::AlignPreGap) {
            next.timer_s = 0.0;
        }
    }

    // Safety hold applies to every maneuvering node.
    next.holding = false;
    if (parking_hazard_active(fsm.node) && in.ranges.min() < cfg.collision_stop_m) {
        out.overlay.speed_mps = 0.0;
        next.holding = true;
    }
    out.flags.hazard_lights = parking_hazard_active(next.node);
    return out;
}

// ---------------------------------------------------------------------------
// Intersections

namespace {

constexpr std::array kIntersectionEdges{
    IntersectionEdge{IntersectionNode::LaneFollow, IntersectionEvent::DirectionSign,
                     IntersectionNode::SignSeen},
    IntersectionEdge{IntersectionNode::SignSeen, IntersectionEvent::ApproachReached,
                     IntersectionNode::Align},
    IntersectionEdge{IntersectionNode::Align, IntersectionEvent::StopReached,
                     IntersectionNode::WaitTrafficLight},
    IntersectionEdge{IntersectionNode::WaitTrafficLight, IntersectionEvent::LightClear,
                     IntersectionNode::ExecuteTurn},
    IntersectionEdge{IntersectionNode::ExecuteTurn, IntersectionEvent::LightRed,
                     IntersectionNode::WaitTrafficLight},
    IntersectionEdge{IntersectionNode::ExecuteTurn, IntersectionEvent::TurnComplete,
                     IntersectionNode::Exit},
    IntersectionEdge{IntersectionNode::Exit, IntersectionEvent::LaneReacquired,
                     IntersectionNode::LaneFollow},
};

}  // namespace

std::string_view intersection_node_name(IntersectionNode n) {
    switch (n) {
        case IntersectionNode::LaneFollow:
            return "LaneFollow";
        case IntersectionNode::SignSeen:
            return "SignSeen";
        case IntersectionNode::Align:
            return "Align";
        case IntersectionNode::WaitTrafficLight:
            return "WaitTrafficLight";
        case IntersectionNode::ExecuteTurn:
            return "ExecuteTurn";
        case IntersectionNode::Exit:
            return "Exit";
    }
    return "Unknown";
}

std::string_view intersection_event_name(IntersectionEvent e) {
    switch (e) {
        case IntersectionEvent::Tick:
            return "tick";
        case IntersectionEvent::DirectionSign:
            return "direction-sign";
        case IntersectionEvent::ApproachReached:
            return "approach";
        case IntersectionEvent::StopReached:
            return "stop-line";
        case IntersectionEvent::LightRed:
            return "light-red";
        case IntersectionEvent::LightClear:
            return "light-clear";
        case IntersectionEvent::TurnComplete:
            return "turn-complete";
        case IntersectionEvent::LaneReacquired:
            return "lane-reacquired";
    }
    return "unknown";
}

std::string_view turn_kind_name(TurnKind t) {
    switch (t) {
        case TurnKind::Left:
            return "left";
        case TurnKind::Right:
            return "right";
        case TurnKind::Straight:
            return "straight";
    }
    return "unknown";
}

std::string_view light_state_name(LightState s) {
    switch (s) {
        case LightState::None:
            return "none";
        case LightState::Red:
            return "red";
        case LightState::Green:
            return "green";
    }
    return "unknown";
}

std::span<const IntersectionEdge> intersection_edges() { return kIntersectionEdges; }

IntersectionNode intersection_transition(IntersectionNode node, IntersectionEvent event) {
    for (const auto& e : kIntersectionEdges) {
        if (e.from == node && e.event == event) return e.to;
    }
    return node;
}

void IntersectionConfig::validate() const {
    if (!(trigger_distance_m > 0.0) || !(turn_radius_m > 0.0) || !(heading_tol_rad > 0.0) ||
        !(approach_speed_mps > 0.0) || !(turn_speed_mps > 0.0) || !(wheelbase_m > 0.0)) {
        throw std::invalid_argument("IntersectionConfig: invalid parameters");
    }
}

double IntersectionConfig::turn_steer_rad() const { return std::atan(wheelbase_m / turn_radius_m); }

double turn_target_rad(TurnKind t) {
    switch (t) {
        case TurnKind::Left:
            return 0.5 * kPi;
        case TurnKind::Right:
            return -0.5 * kPi;
        case TurnKind::Straight:
            break;
    }
    return 0.0;
}

IntersectionStep intersection_step(const IntersectionFsm& fsm, const IntersectionInputs& in,
                                   const IntersectionConfig& cfg) {
    IntersectionStep out;
    out.fsm = fsm;
    IntersectionFsm& next = out.fsm;
    IntersectionEvent event = IntersectionEvent::Tick;

    // Latest filtered light observation; the nearest light wins within a step.
    const SignEvent* light = nullptr;
    for (const auto& e : in.events) {
        if (e.sign_class != SignClass::TrafficLightRed &&
            e.sign_class != SignClass::TrafficLightGreen) {
            continue;
        }
        if (!light || e.distance_m < light->distance_m) light = &e;
    }
    if (light) {
        next.light = light->sign_class == SignClass::TrafficLightRed ? LightState::Red
                                                                       : LightState::Green;
    }

    auto refresh_stop = [&] {
        for (const auto& e : in.events) {
            if (e.sign_class == sign_for(next.planned)) {
                next.stop_s = in.odometry_s + cfg.camera_ahead_m + e.along_track_m() +
                              cfg.stop_offset_m;
                return;
            }
        }
    };

    switch (fsm.node) {
        case IntersectionNode::LaneFollow: {
            const SignEvent* best = nullptr;
            bool tie = false;
            for (const auto& e : in.events) {
                if (!is_direction_sign(e.sign_class) ||
                    e.along_track_m() > cfg.trigger_distance_m) {
                    continue;
                }
                if (!best || e.confidence > best->confidence) {
                    best = &e;
                    tie = false;
                } else if (e.confidence == best->confidence &&
                           e.sign_class != best->sign_class) {
                    tie = true;
                }
            }
            if (best) {
                event = IntersectionEvent::DirectionSign;
                next.planned = turn_for(best->sign_class);
                next.stop_s = in.odometry_s + cfg.camera_ahead_m + best->along_track_m() +
                              cfg.stop_offset_m;
                next.entry_heading_rad = in.heading_rad;
                next.last_turn_delta_rad.reset();
                if (tie) {
                    out.notes.push_back(fmt::format("sign-tie:{}", sign_class_name(best->sign_class)));
                }
            }
            break;
        }
        case IntersectionNode::SignSeen:
            refresh_stop();
            if (next.stop_s - in.odometry_s <= cfg.approach_window_m) {
                event = IntersectionEvent::ApproachReached;
                next.entry_heading_rad = in.heading_rad;
            }
            break;
        case IntersectionNode::Align:
            refresh_stop();
            out.overlay.speed_mps = cfg.approach_speed_mps;
            if (in.lane_detected) {
                next.entry_heading_rad = in.heading_rad;
            } else {
                out.overlay.steer_rad =
                    cfg.heading_hold_gain * angle_diff(next.entry_heading_rad, in.heading_rad);
            }
            if (in.odometry_s >= next.stop_s) {
                event = IntersectionEvent::StopReached;
                out.overlay.speed_mps = 0.0;
                next.wait_timer_s = 0.0;
                next.turn_start_s = in.odometry_s;
            }
            break;
        case IntersectionNode::WaitTrafficLight:
            out.overlay.speed_mps = 0.0;
            out.overlay.steer_rad = 0.0;
            next.wait_timer_s += in.dt;
            if (next.light == LightState::Red) {
                event = IntersectionEvent::LightRed;
            } else if (next.light == LightState::Green || next.wait_timer_s >= cfg.min_wait_s) {
                event = IntersectionEvent::LightClear;
            }
            break;
        case IntersectionNode::ExecuteTurn: {
            if (next.light == LightState::Red) {
                event = IntersectionEvent::LightRed;
                out.overlay.speed_mps = 0.0;
                out.overlay.steer_rad = 0.0;
                next.wait_timer_s = 0.0;
                break;
            }
            const double delta = angle_diff(in.heading_rad, next.entry_heading_rad);
            const double target = turn_target_rad(next.planned);
            out.overlay.speed_mps = cfg.turn_speed_mps;
            bool done = false;
            switch (next.planned) {
                case TurnKind::Left:
                    out.overlay.steer_rad = cfg.turn_steer_rad();
                    done = delta >= target;
                    break;
                case TurnKind::Right:
                    out.overlay.steer_rad = -cfg.turn_steer_rad();
                    done = delta <= target;
                    break;
                case TurnKind::Straight:
                    out.overlay.steer_rad = cfg.heading_hold_gain * -delta;
                    done = in.odometry_s - next.turn_start_s >= cfg.straight_cross_m;
                    break;
            }
            if (done && std::abs(delta - target) <= cfg.heading_tol_rad) {
                event = IntersectionEvent::TurnComplete;
                next.last_turn_delta_rad = delta;
                next.entry_heading_rad = normalize_angle(next.entry_heading_rad + target);
            }
            break;
        }
        case IntersectionNode::Exit:
            if (in.lane_detected) {
                event = IntersectionEvent::LaneReacquired;
                next.light = LightState::None;
            } else {
                out.overlay.speed_mps = cfg.approach_speed_mps;
                out.overlay.steer_rad =
                    cfg.heading_hold_gain * angle_diff(next.entry_heading_rad, in.heading_rad);
            }
            break;
    }

    next.node = intersection_transition(fsm.node, event);
    if (next.node != fsm.node) {
        std::string cause(intersection_event_name(event));
        if (event == IntersectionEvent::DirectionSign) {
            cause += fmt::format(":{}", turn_kind_name(next.planned));
        }
        out.transition = Transition{std::string(intersection_node_name(fsm.node)),
                                    std::string(intersection_node_name(next.node)), cause};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Other signs

ActuatorFlags sign_reactions(const SignEvent& event, ActuatorFlags flags,
                             const SignReactionConfig& cfg) {
    switch (event.sign_class) {
        case SignClass::Tunnel:
            flags.headlights = !flags.headlights;
            break;
        case SignClass::NoOvertaking:
            flags.overtaking_allowed = false;
            break;
        case SignClass::NoOvertakingEnd:
            flags.overtaking_allowed = true;
            break;
        case SignClass::PedestrianCrossing:
            if (event.along_track_m() <= cfg.crossing_zone_m) {
                flags.hazard_lights = true;
            }
            break;
        default:
            break;
    }
    return flags;
}

std::optional<double> sign_speed_cap(const SignEvent& event, const SignReactionConfig& cfg) {
    if (event.sign_class == SignClass::PedestrianCrossing &&
        event.along_track_m() <= cfg.crossing_zone_m) {
        return cfg.crossing_speed_mps;
    }
    return std::nullopt;
}

SignReactor::SignReactor(SignReactionConfig cfg) : cfg_(cfg) {
    armed_.fill(true);
    unseen_s_.fill(0.0);
}

SignReactor::Output SignReactor::step(std::span<const SignEvent> events, double odometry_s,
                                      double dt) {
    Output out;
    std::array<bool, kAllSignClasses.size()> seen{};
    for (const auto& e : events) seen[class_index(e.sign_class)] = true;
    for (std::size_t i = 0; i < seen.size(); ++i) {
        unseen_s_[i] = seen[i] ? 0.0 : unseen_s_[i] + dt;
        if (unseen_s_[i] >= cfg_.rearm_s) armed_[i] = true;
    }

    for (const auto& e : events) {
        const auto idx = class_index(e.sign_class);
        double reach = cfg_.trigger_distance_m;
        switch (e.sign_class) {
            case SignClass::Tunnel:
            case SignClass::NoOvertaking:
            case SignClass::NoOvertakingEnd:
                break;
            case SignClass::PedestrianCrossing:
                reach = cfg_.crossing_zone_m;
                break;
            default:
                continue;
        }
        if (!armed_[idx] || e.along_track_m() > reach) continue;
        armed_[idx] = false;
        flags_ = sign_reactions(e, flags_, cfg_);
        out.triggered.push_back(e);
        if (e.sign_class == SignClass::PedestrianCrossing) {
            crossing_end_s_ =
                odometry_s + cfg_.camera_ahead_m + e.along_track_m() + cfg_.crossing_exit_m;
        }
    }

    if (crossing_end_s_) {
        if (odometry_s >= *crossing_end_s_) {
            crossing_end_s_.reset();
            flags_.hazard_lights = false;
        } else {
            out.overlay.speed_mps = cfg_.crossing_speed_mps;
        }
    }
    out.flags = flags_;
    return out;
}

}  // namespace minicar
