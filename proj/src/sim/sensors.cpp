#include "minicar/sim/sensors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace minicar::sim {

SensorMount range_mount(RangeSide side, const VehicleParams& params) {
    const double half_w = 0.5 * params.overall_width_m;
    switch (side) {
        case RangeSide::Front:
            return {params.wheelbase_m + params.front_overhang_m(), 0.0, 0.0};
        case RangeSide::Rear:
            return {-params.rear_overhang_m(), 0.0, kPi};
        case RangeSide::Left:
            return {0.5 * params.wheelbase_m, half_w, 0.5 * kPi};
        case RangeSide::Right:
            break;
    }
    return {0.5 * params.wheelbase_m, -half_w, -0.5 * kPi};
}

LanePoints sample_lane_points(const Scenario& sc, const VehicleState& truth,
                              const LanePipelineConfig& lane_cfg, Rng& rng) {
    LanePoints out;
    const BevConfig& bev = lane_cfg.bev;
    const double c = std::cos(truth.theta_rad);
    const double s = std::sin(truth.theta_rad);
    const Point2 cam{truth.x_m + sc.rig.lane_camera_ahead_m * c,
                     truth.y_m + sc.rig.lane_camera_ahead_m * s};
    const double s_cam = sc.road.project(cam).s_m;
    const double step = sc.rig.lane_sample_step_m;
    auto k0 = static_cast<long>(std::floor((s_cam - 1.0) / step));
    auto k1 = static_cast<long>(std::ceil((s_cam + bev.roi_length_m + 1.5) / step));
    // Only the painted stretch the camera is on (or the next one ahead of an
    // unmarked junction) belongs to the current lane.
    const auto k_cam = static_cast<long>(std::floor(s_cam / step));
    long k_run = k_cam;
    while (k_run <= k1 && !sc.road.marked_at(static_cast<double>(k_run) * step)) ++k_run;
    long lo = k_run;
    while (lo - 1 >= k0 && sc.road.marked_at(static_cast<double>(lo - 1) * step)) --lo;
    long hi = k_run;
    while (hi + 1 <= k1 && sc.road.marked_at(static_cast<double>(hi + 1) * step)) ++hi;
    k0 = lo;
    k1 = std::min(k1, hi);
    const double half_lane = 0.5 * sc.road.lane_width_m();

    const bool drop_left = rng.bernoulli(sc.noise.lane_dropout_left);
    const bool drop_right = rng.bernoulli(sc.noise.lane_dropout_right);

    for (int side = 0; side < 2; ++side) {
        const bool left = side == 0;
        if (left ? drop_left : drop_right) continue;
        auto& dst = left ? out.left : out.right;
        for (long k = k0; k <= k1; ++k) {
            const double sk = static_cast<double>(k) * step;
            if (!sc.road.marked_at(sk)) continue;
            const Point2 p = sc.road.offset_point(sk, left ? half_lane : -half_lane);
            const double dx = p.x - cam.x;
            const double dy = p.y - cam.y;
            const BevPoint b{dx * c + dy * s, dx * s - dy * c};
            if (b.forward_m < 0.0 || b.forward_m > bev.roi_length_m ||
                std::abs(b.lateral_m) > 0.5 * bev.roi_width_m) {
                continue;
            }
            ImagePoint ip = from_bev(b, out.width_px, out.height_px, bev);
            ip.u_px += rng.gaussian(sc.noise.lane_sigma_px);
            ip.v_px += rng.gaussian(sc.noise.lane_sigma_px);
            if (rng.bernoulli(sc.noise.lane_outlier_prob)) {
                const double jump = 20.0 + 40.0 * rng.uniform();
                ip.u_px += rng.bernoulli(0.5) ? jump : -jump;
            }
            dst.push_back(ip);
        }
    }
    return out;
}

std::optional<double> cast_ray(const std::vector<Box>& boxes, const Point2& origin, double yaw_rad,
                               double max_range_m) {
    std::optional<double> best;
    const double dx = std::cos(yaw_rad);
    const double dy = std::sin(yaw_rad);
    for (const auto& b : boxes) {
        const double cb = std::cos(b.yaw_rad);
        const double sb = std::sin(b.yaw_rad);
        const double rx = origin.x - b.center.x;
        const double ry = origin.y - b.center.y;
        const double o[2] = {rx * cb + ry * sb, -rx * sb + ry * cb};
        const double d[2] = {dx * cb + dy * sb, -dx * sb + dy * cb};
        const double half[2] = {0.5 * b.length_m, 0.5 * b.width_m};
        double t_in = -std::numeric_limits<double>::infinity();
        double t_out = std::numeric_limits<double>::infinity();
        bool miss = false;
        for (int a = 0; a < 2; ++a) {
            if (d[a] == 0.0) {
                if (std::abs(o[a]) > half[a]) miss = true;
                continue;
            }
            double t0 = (-half[a] - o[a]) / d[a];
            double t1 = (half[a] - o[a]) / d[a];
            if (t0 > t1) std::swap(t0, t1);
            t_in = std::max(t_in, t0);
            t_out = std::min(t_out, t1);
        }
        if (miss || t_out < t_in || t_out < 0.0) continue;
        const double t = std::max(t_in, 0.0);
        if (t <= max_range_m && (!best || t < *best)) best = t;
    }
    return best;
}

RangeReading simulate_range(const Scenario& sc, const VehicleState& truth,
                            const SensorMount& mount, Rng& rng) {
    RangeReading r;
    r.mount = mount;
    r.max_range_m = sc.rig.range_max_m;
    const VehicleState sp = sensor_pose(truth, mount);
    const auto hit = cast_ray(sc.obstacles, {sp.x_m, sp.y_m}, sp.theta_rad, r.max_range_m);
    const double exact = hit ? *hit : r.max_range_m;
    r.measured_m = std::clamp(exact + rng.gaussian(sc.noise.range_sigma_m), 0.0, r.max_range_m);
    return r;
}

std::vector<SimDetection> simulate_detections(const Scenario& sc, const VehicleState& truth,
                                              double t_s, Rng& rng) {
    std::vector<SimDetection> out;
    const double c = std::cos(truth.theta_rad);
    const double s = std::sin(truth.theta_rad);
    const Point2 cam{truth.x_m + sc.rig.sign_camera_ahead_m * c,
                     truth.y_m + sc.rig.sign_camera_ahead_m * s};
    const double f_px = sc.camera.focal_length_px();
    const double half_width_px = 0.5 * sc.rig.sign_image_width_px;

    auto observe = [&](SignClass cls, const Point2& pos, double height_mm) {
        const double dx = pos.x - cam.x;
        const double dy = pos.y - cam.y;
        const double along = dx * c + dy * s;
        const double left = -dx * s + dy * c;
        const double dist = std::hypot(dx, dy);
        if (along <= 0.0 || dist > sc.rig.sign_max_range_m || dist < 1e-3) return;
        const double u_off = f_px * left / along;
        if (std::abs(u_off) > half_width_px) return;
        const double h_px = height_mm * f_px / (dist * 1000.0) + rng.gaussian(sc.noise.detection_sigma_px);
        if (!(h_px > 0.5)) return;
        SimDetection det;
        det.sign_class = cls;
        det.detection.class_label = std::string(sign_class_name(cls));
        det.detection.bbox = {half_width_px - u_off, 0.5 * sc.camera.sensor_height_px, h_px, h_px};
        det.detection.known_real_height_mm = sc.known_height_mm(cls);
        det.true_distance_m = dist;
        det.true_bearing_rad = std::atan2(left, along);
        out.push_back(std::move(det));
    };

    for (const auto& sign : sc.signs) observe(sign.sign_class, sign.position, sign.height_mm);
    for (const auto& light : sc.lights) {
        const LightState state = light.state_at(t_s);
        if (state == LightState::None) continue;
        observe(state == LightState::Red ? SignClass::TrafficLightRed : SignClass::TrafficLightGreen,
                light.position, light.height_mm);
    }
    std::stable_sort(out.begin(), out.end(), [](const SimDetection& a, const SimDetection& b) {
        return a.true_distance_m < b.true_distance_m;
    });
    return out;
}

SignEvent perceive(const SimDetection& det, const Scenario& sc) {
    const double raw_mm = distance_to_object(det.detection, sc.camera);
    const double dist_m = corrected_distance(raw_mm, sc.range_correction) / 1000.0;
    const double half_width_px = 0.5 * sc.rig.sign_image_width_px;
    SignEvent ev;
    ev.sign_class = det.sign_class;
    ev.distance_m = dist_m;
    ev.bearing_rad = std::atan((half_width_px - det.detection.bbox.u_px) / sc.camera.focal_length_px());
    ev.confidence = std::clamp(1.0 - 0.2 * dist_m, 0.3, 1.0);
    return ev;
}

Box vehicle_footprint(const VehicleState& pose, const VehicleParams& params) {
    const double ahead = 0.5 * params.overall_length_m - params.rear_overhang_m();
    Box b;
    b.center = {pose.x_m + ahead * std::cos(pose.theta_rad), pose.y_m + ahead * std::sin(pose.theta_rad)};
    b.length_m = params.overall_length_m;
    b.width_m = params.overall_width_m;
    b.yaw_rad = pose.theta_rad;
    b.label = "vehicle";
    return b;
}

namespace {

std::array<Point2, 4> corners(const Box& b) {
    const double c = std::cos(b.yaw_rad);
    const double s = std::sin(b.yaw_rad);
    const double hl = 0.5 * b.length_m;
    const double hw = 0.5 * b.width_m;
    std::array<Point2, 4> out;
    const double sx[4] = {1, 1, -1, -1};
    const double sy[4] = {1, -1, -1, 1};
    for (int i = 0; i < 4; ++i) {
        out[static_cast<std::size_t>(i)] = {b.center.x + sx[i] * hl * c - sy[i] * hw * s,
                                            b.center.y + sx[i] * hl * s + sy[i] * hw * c};
    }
    return out;
}

}  // namespace

bool boxes_overlap(const Box& a, const Box& b) {
    const auto ca = corners(a);
    const auto cb = corners(b);
    for (const Box* box : {&a, &b}) {
        for (double yaw : {box->yaw_rad, box->yaw_rad + 0.5 * kPi}) {
            const double ax = std::cos(yaw);
            const double ay = std::sin(yaw);
            double amin = std::numeric_limits<double>::infinity(), amax = -amin;
            double bmin = amin, bmax = -amin;
            for (const auto& p : ca) {
                const double d = p.x * ax + p.y * ay;
                amin = std::min(amin, d);
                amax = std::max(amax, d);
            }
            for (const auto& p : cb) {
                const double d = p.x * ax + p.y * ay;
                bmin = std::min(bmin, d);
                bmax = std::max(bmax, d);
            }
            if (amax < bmin || bmax < amin) return false;
        }
    }
    return true;
}

}  // namespace minicar::sim
