#include "minicar/sim/road.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace minicar::sim {

Road::Road(VehicleState start, std::vector<RoadSegment> segments, double lane_width_m,
           double half_width_m)
    : segments_(std::move(segments)), lane_width_m_(lane_width_m), half_width_m_(half_width_m) {
    if (segments_.empty()) {
        throw std::invalid_argument("road: at least one segment required");
    }
    if (!(lane_width_m_ > 0.0) || !(half_width_m_ > 0.0)) {
        throw std::invalid_argument("road: widths must be > 0");
    }
    start.theta_rad = normalize_angle(start.theta_rad);
    VehicleState pose = start;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const auto& seg = segments_[i];
        if (!(seg.length_m > 0.0) || !std::isfinite(seg.curvature_per_m)) {
            throw std::invalid_argument("road: segment length must be > 0");
        }
        if (std::abs(seg.curvature_per_m) * seg.length_m >= 2.0 * kPi) {
            throw std::invalid_argument("road: arc must turn less than a full circle");
        }
        starts_.push_back({total_, pose});
        pose = pose_in(i, seg.length_m);
        total_ += seg.length_m;
    }
}

VehicleState Road::pose_in(std::size_t i, double u) const {
    const VehicleState& p0 = starts_[i].pose;
    const double k = segments_[i].curvature_per_m;
    if (k == 0.0) {
        return {p0.x_m + u * std::cos(p0.theta_rad), p0.y_m + u * std::sin(p0.theta_rad),
                p0.theta_rad};
    }
    const double h = p0.theta_rad + k * u;
    return {p0.x_m + (std::sin(h) - std::sin(p0.theta_rad)) / k,
            p0.y_m - (std::cos(h) - std::cos(p0.theta_rad)) / k, normalize_angle(h)};
}

std::size_t Road::segment_at(double s_m) const {
    std::size_t i = 0;
    while (i + 1 < segments_.size() && s_m >= starts_[i + 1].s) ++i;
    return i;
}

VehicleState Road::pose_at(double s_m) const {
    const double s = std::clamp(s_m, 0.0, total_);
    const std::size_t i = segment_at(s);
    return pose_in(i, s - starts_[i].s);
}

Point2 Road::offset_point(double s_m, double lateral_m) const {
    const VehicleState p = pose_at(s_m);
    return {p.x_m - lateral_m * std::sin(p.theta_rad), p.y_m + lateral_m * std::cos(p.theta_rad)};
}

bool Road::marked_at(double s_m) const {
    if (s_m < 0.0 || s_m > total_) return false;
    return segments_[segment_at(s_m)].markings;
}

RoadProjection Road::project(const Point2& p) const {
    RoadProjection best;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const VehicleState& p0 = starts_[i].pose;
        const double len = segments_[i].length_m;
        const double k = segments_[i].curvature_per_m;
        double u;
        if (k == 0.0) {
            u = (p.x - p0.x_m) * std::cos(p0.theta_rad) + (p.y - p0.y_m) * std::sin(p0.theta_rad);
        } else {
            const double cx = p0.x_m - std::sin(p0.theta_rad) / k;
            const double cy = p0.y_m + std::cos(p0.theta_rad) / k;
            const double alpha = std::atan2(p.y - cy, p.x - cx);
            const double h = k > 0.0 ? alpha + 0.5 * kPi : alpha - 0.5 * kPi;
            // Sweep measured from the arc start in the turning direction, in [0, 2 pi).
            double sweep = (h - p0.theta_rad) * (k > 0.0 ? 1.0 : -1.0);
            sweep = std::fmod(std::fmod(sweep, 2.0 * kPi) + 2.0 * kPi, 2.0 * kPi);
            u = sweep / std::abs(k);
            // Points behind the arc start wrap to the far side; pick the nearer end.
            if (u > len) {
                const double past_end = u - len;
                const double before_start = 2.0 * kPi / std::abs(k) - u;
                u = past_end < before_start ? u : -before_start;
            }
        }
        const double uc = std::clamp(u, 0.0, len);
        const VehicleState q = pose_in(i, uc);
        const double dx = p.x - q.x_m;
        const double dy = p.y - q.y_m;
        const double d = std::hypot(dx, dy);
        if (d < best_d) {
            best_d = d;
            best.segment = i;
            best.s_m = starts_[i].s + uc;
            best.heading_rad = q.theta_rad;
            best.lateral_m = std::cos(q.theta_rad) * dy - std::sin(q.theta_rad) * dx;
            best.beyond_end_m = 0.0;
            if (i == 0 && u < 0.0) best.beyond_end_m = -u;
            if (i + 1 == segments_.size() && u > len) best.beyond_end_m = u - len;
        }
    }
    return best;
}

}  // namespace minicar::sim
