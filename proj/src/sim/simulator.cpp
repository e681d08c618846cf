#include "minicar/sim/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "minicar/sim/rng.hpp"
#include "minicar/sim/sensors.hpp"

namespace minicar::sim {

namespace {

constexpr double kObstacleSectorRad = kPi / 3.0;
constexpr std::size_t kSignWindow = 8;
constexpr double kSignKSigma = 2.0;
constexpr double kSignForgetS = 1.0;

// Per-class StatFilter on the sign's along-track position in odometry
// coordinates. That quantity is constant while the car drives toward a fixed
// sign, so the filter gates detector jitter without lagging the approach.
class SignFilterBank {
public:
    std::vector<SignEvent> step(const std::vector<SignEvent>& raw, double odometry_s,
                                double camera_ahead_m, double dt) {
        std::array<const SignEvent*, kAllSignClasses.size()> nearest{};
        for (const auto& e : raw) {
            auto& slot = nearest[static_cast<std::size_t>(e.sign_class)];
            if (!slot || e.distance_m < slot->distance_m) slot = &e;
        }
        std::vector<SignEvent> out;
        for (std::size_t i = 0; i < nearest.size(); ++i) {
            Slot& slot = slots_[i];
            if (!nearest[i]) {
                slot.unseen_s += dt;
                if (slot.unseen_s >= kSignForgetS) {
                    slot.filter.clear();
                    slot.rejects = 0;
                }
                continue;
            }
            slot.unseen_s = 0.0;
            const SignEvent& e = *nearest[i];
            const double anchor = odometry_s + camera_ahead_m + e.along_track_m();
            const auto r = slot.filter.filter_sample(anchor);
            if (!r.accepted) {
                // A sustained run of rejections means the window went stale.
                if (++slot.rejects >= static_cast<int>(kSignWindow)) {
                    slot.filter.clear();
                    slot.rejects = 0;
                }
                continue;
            }
            slot.rejects = 0;
            SignEvent filtered = e;
            const double along = std::max(0.0, r.value - odometry_s - camera_ahead_m);
            filtered.distance_m = along / std::cos(e.bearing_rad);
            out.push_back(filtered);
        }
        std::stable_sort(out.begin(), out.end(), [](const SignEvent& a, const SignEvent& b) {
            return a.distance_m < b.distance_m;
        });
        return out;
    }

private:
    struct Slot {
        StatFilter filter{kSignWindow, kSignKSigma};
        int rejects = 0;
        double unseen_s = 0.0;
    };
    std::array<Slot, kAllSignClasses.size()> slots_{};
};

std::string flags_text(const ActuatorFlags& f) {
    return fmt::format("hazard={} headlights={} overtaking={}", f.hazard_lights ? 1 : 0,
                       f.headlights ? 1 : 0, f.overtaking_allowed ? 1 : 0);
}

bool lane_detected(MiddleProvenance p) {
    return p == MiddleProvenance::BothAveraged || p == MiddleProvenance::LeftShifted ||
           p == MiddleProvenance::RightShifted;
}

}  // namespace

std::string_view outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Completed:
            return "completed";
        case Outcome::Collision:
            return "collision";
        case Outcome::RoadExit:
            return "road-exit";
    }
    return "unknown";
}

LanePipelineConfig lane_pipeline_config() { return LanePipelineConfig{}; }

RunResult simulate(const Scenario& scenario, const RunOptions& options) {
    Scenario sc = scenario;
    if (options.gains) sc.gains = *options.gains;
    if (options.noise) sc.noise = *options.noise;
    if (options.dt_s) sc.dt_s = *options.dt_s;
    if (options.duration_s) sc.duration_s = *options.duration_s;
    if (options.seed) sc.seed = *options.seed;
    if (options.initial) sc.initial = *options.initial;
    try {
        sc.validate();
    } catch (const std::runtime_error& e) {
        throw std::invalid_argument(e.what());
    }

    const double dt = sc.dt_s;
    const auto n_steps = static_cast<long>(std::llround(sc.duration_s / dt));
    const VehicleParams& vp = sc.vehicle;
    const LanePipelineConfig lane_cfg = lane_pipeline_config();

    Rng rng(sc.seed);
    RunResult res;
    res.scenario = sc.name;
    res.controller = options.controller;
    res.seed = sc.seed;
    res.dt_s = dt;
    res.grid = GridMap(sc.grid);

    VehicleState truth = sc.initial;
    truth.theta_rad = normalize_angle(truth.theta_rad);
    VehicleState estimate = truth;
    double odometry_s = 0.0;
    double applied_speed = 0.0;
    double last_steer = 0.0;
    bool steer_was_overridden = false;

    SteeringController controller(options.controller, sc.gains.stanley, sc.gains.pid,
                                  sc.gains.pure_pursuit, vp.wheelbase_m);
    MiddleLineState middle;
    SignFilterBank sign_filters;
    ParkingFsm parking;
    IntersectionFsm intersection;
    SignReactor reactor(sc.sign_reactions);

    std::array<SensorMount, 4> mounts{};
    for (std::size_t i = 0; i < kRangeSides.size(); ++i) mounts[i] = range_mount(kRangeSides[i], vp);

    auto log_transition = [&](int step, const char* machine, const std::optional<Transition>& t) {
        if (t) res.transitions.push_back({step, machine, *t});
    };

    for (long k = 0; k < n_steps; ++k) {
        const int step_index = static_cast<int>(k);
        const double t = static_cast<double>(k) * dt;

        // Sensors.
        const LanePoints lane_points = sample_lane_points(sc, truth, lane_cfg, rng);
        std::array<RangeReading, 4> readings{};
        for (std::size_t i = 0; i < mounts.size(); ++i) {
            readings[i] = simulate_range(sc, truth, mounts[i], rng);
        }
        const auto detections = simulate_detections(sc, truth, t, rng);

        // Mapping from the estimated pose.
        for (const auto& r : readings) integrate_reading(res.grid, estimate, r);

        // Lane geometry, flipped from the BEV frame into the controller frame.
        const LaneFrameResult lane = process_lane_frame(lane_points, middle, lane_cfg);
        middle = lane.middle;
        std::optional<PathError> err;
        if (lane.error) err = PathError{-lane.error->cross_track_m, -lane.error->heading_err_rad};

        // Perception.
        std::vector<SignEvent> raw_events;
        raw_events.reserve(detections.size());
        for (const auto& d : detections) raw_events.push_back(perceive(d, sc));
        const auto events = sign_filters.step(raw_events, odometry_s, sc.rig.sign_camera_ahead_m, dt);

        // Decision layer.
        ParkingInputs pin;
        for (const auto& e : events) {
            if (e.sign_class == SignClass::Park) {
                pin.park_sign = e;
                break;
            }
        }
        pin.ranges = {readings[0].measured_m, readings[1].measured_m, readings[2].measured_m,
                      readings[3].measured_m};
        pin.pose = estimate;
        pin.dt = dt;
        const ParkingStep ps = parking_step(parking, pin, sc.parking);

        IntersectionInputs iin;
        iin.events = events;
        iin.heading_rad = estimate.theta_rad;
        iin.odometry_s = odometry_s;
        iin.lane_detected = lane_detected(middle.provenance);
        iin.dt = dt;
        const IntersectionStep is = intersection_step(intersection, iin, sc.intersection);

        const ActuatorFlags flags_before = reactor.flags();
        const auto ro = reactor.step(events, odometry_s, dt);
        for (const auto& e : ro.triggered) {
            res.transitions.push_back({step_index, "signs",
                                       {flags_text(flags_before), flags_text(ro.flags),
                                        std::string(sign_class_name(e.sign_class))}});
        }

        log_transition(step_index, "parking", ps.transition);
        log_transition(step_index, "intersection", is.transition);
        for (const auto& note : ps.notes) res.transitions.push_back({step_index, "parking", {"", "", note}});
        for (const auto& note : is.notes) res.transitions.push_back({step_index, "intersection", {"", "", note}});

        // Lane controller layer.
        const bool fsm_steer = ps.overlay.steer_rad || is.overlay.steer_rad;
        ControlInput base;
        base.speed_mps = speed_command(sc.gains.speed, lane.curvature_per_m, std::nullopt);
        if (fsm_steer) {
            base.steer_rad = last_steer;
        } else {
            if (steer_was_overridden) controller.reset();
            base.steer_rad = err ? controller.update(*err, std::abs(applied_speed), dt) : last_steer;
        }
        steer_was_overridden = fsm_steer;

        // Obstacle cap, looking in the direction the decision layer wants to move.
        const bool reversing = (ps.overlay.speed_mps && *ps.overlay.speed_mps < 0.0) ||
                               (is.overlay.speed_mps && *is.overlay.speed_mps < 0.0);
        // Distances are taken from the bumper on the side of travel.
        const double bumper = reversing ? vp.rear_overhang_m() : vp.wheelbase_m + vp.front_overhang_m();
        VehicleState look = estimate;
        if (reversing) look.theta_rad = normalize_angle(look.theta_rad + kPi);
        look.x_m += bumper * std::cos(look.theta_rad);
        look.y_m += bumper * std::sin(look.theta_rad);
        const auto nearest = nearest_obstacle(res.grid, look, kObstacleSectorRad);
        ControlOverlay obstacle;
        if (nearest) {
            obstacle.speed_mps = std::clamp(sc.gains.speed.obstacle_gain *
                                                (*nearest - sc.gains.speed.obstacle_stop_m),
                                            0.0, sc.gains.speed.cruise_mps);
        }

        ControlOverlay lane_lost;
        if (!err && !fsm_steer) lane_lost.speed_mps = 0.0;

        const std::array overlays{ps.overlay, is.overlay, ro.overlay, obstacle, lane_lost};
        const ControlInput arbitrated = arbitrate(base, overlays);
        const ControlInput cmd = clamp_input(arbitrated, vp);

        StepRecord rec;
        rec.step = step_index;
        rec.t_s = t;
        rec.truth = truth;
        rec.estimate = estimate;
        if (err) {
            rec.ce_m = err->cross_track_m;
            rec.he_rad = err->heading_err_rad;
        }
        rec.steer_cmd_rad = cmd.steer_rad;
        rec.speed_cmd_mps = cmd.speed_mps;
        rec.controller = options.controller;
        rec.parking = ps.fsm.node;
        rec.intersection = is.fsm.node;
        rec.flags = ro.flags;
        rec.flags.hazard_lights = ro.flags.hazard_lights || ps.flags.hazard_lights;
        rec.nearest_obstacle_m = nearest;
        rec.light = is.fsm.light;
        rec.provenance = middle.provenance;
        rec.lane_speed_mps = base.speed_mps;
        {
            double cap = std::numeric_limits<double>::infinity();
            for (const auto* o : {&ps.overlay, &is.overlay, &ro.overlay}) {
                if (o->speed_mps && *o->speed_mps >= 0.0) cap = std::min(cap, *o->speed_mps);
            }
            rec.fsm_speed_cap_mps = cap;
            rec.obstacle_speed_cap_mps =
                obstacle.speed_mps ? *obstacle.speed_mps : std::numeric_limits<double>::infinity();
        }
        res.steps.push_back(rec);

        if (is.fsm.last_turn_delta_rad && is.transition &&
            is.fsm.node == IntersectionNode::Exit) {
            res.turn_deltas_rad.push_back(*is.fsm.last_turn_delta_rad);
        }
        parking = ps.fsm;
        intersection = is.fsm;
        last_steer = cmd.steer_rad;
        applied_speed = cmd.speed_mps;

        // Plant, gyro and dead reckoning.
        const double true_rate = kinematic_yaw_rate(cmd, vp);
        truth = step(truth, cmd, vp, dt);
        GyroSample gyro;
        gyro.yaw_rate_rps = true_rate + sc.noise.gyro_bias_rps + rng.gaussian(sc.noise.gyro_sigma_rps);
        estimate = localize(estimate, cmd, gyro, vp, dt, sc.fusion_weight);
        odometry_s += cmd.speed_mps * dt;

        // Halting checks on the new true pose.
        const Box body = vehicle_footprint(truth, vp);
        for (const auto& o : sc.obstacles) {
            if (boxes_overlap(body, o)) {
                res.outcome = Outcome::Collision;
                res.failure = fmt::format("collision with {} at t={:.2f}s", o.label.empty() ? "obstacle" : o.label,
                                          t + dt);
                break;
            }
        }
        if (res.outcome == Outcome::Completed) {
            const auto proj = sc.road.project({truth.x_m, truth.y_m});
            if (std::abs(proj.lateral_m) > sc.road.half_width_m() || proj.beyond_end_m > 0.0) {
                res.outcome = Outcome::RoadExit;
                res.failure = fmt::format("left the road at t={:.2f}s (s={:.2f} m, lateral={:.3f} m)",
                                          t + dt, proj.s_m, proj.lateral_m);
            }
        }
        if (res.outcome != Outcome::Completed) {
            res.transitions.push_back({step_index, "run", {"running", std::string(outcome_name(res.outcome)), res.failure}});
            break;
        }
    }

    res.final_truth = truth;
    res.final_estimate = estimate;
    res.parking = parking;
    res.intersection = intersection;
    return res;
}

}  // namespace minicar::sim
