#ifndef MINICAR_SIM_ROAD_HPP
#define MINICAR_SIM_ROAD_HPP

#include <optional>
#include <vector>

#include "minicar/grid_map.hpp"
#include "minicar/kinematics.hpp"

namespace minicar::sim {

/// One piece of the road centerline. curvature_per_m is signed (positive turns
/// left) and zero for straight pieces.
struct RoadSegment {
    double length_m = 0.0;
    double curvature_per_m = 0.0;
    bool markings = true;  ///< lane lines painted along this piece
};

/// Nearest centerline point to a query position.
struct RoadProjection {
    double s_m = 0.0;          ///< arc length along the road
    double lateral_m = 0.0;    ///< signed offset, positive to the left of the road
    double heading_rad = 0.0;  ///< centerline tangent at s
    std::size_t segment = 0;
    double beyond_end_m = 0.0;  ///< distance past either road end (0 when within)
};

/// G1-continuous chain of straight and circular pieces.
class Road {
public:
    Road() = default;
    Road(VehicleState start, std::vector<RoadSegment> segments, double lane_width_m,
         double half_width_m);

    const std::vector<RoadSegment>& segments() const { return segments_; }
    double lane_width_m() const { return lane_width_m_; }
    double half_width_m() const { return half_width_m_; }
    double length_m() const { return total_; }
    double segment_start_s(std::size_t i) const { return starts_[i].s; }

    /// Centerline pose at arc length s (clamped to the road).
    VehicleState pose_at(double s_m) const;
    /// Point offset `lateral_m` to the left of the centerline at s.
    Point2 offset_point(double s_m, double lateral_m) const;
    bool marked_at(double s_m) const;
    RoadProjection project(const Point2& p) const;

private:
    struct Anchor {
        double s = 0.0;
        VehicleState pose;
    };
    std::size_t segment_at(double s_m) const;
    VehicleState pose_in(std::size_t i, double u) const;

    std::vector<RoadSegment> segments_;
    std::vector<Anchor> starts_;
    double lane_width_m_ = 0.70;
    double half_width_m_ = 1.0;
    double total_ = 0.0;
};

}  // namespace minicar::sim

#endif  // MINICAR_SIM_ROAD_HPP
