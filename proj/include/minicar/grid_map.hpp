#ifndef MINICAR_GRID_MAP_HPP
#define MINICAR_GRID_MAP_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <vector>

#include "minicar/kinematics.hpp"

namespace minicar {

struct CellIndex {
    int ix = 0;
    int iy = 0;

    friend bool operator==(const CellIndex&, const CellIndex&) = default;
    friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

enum class CellState : std::uint8_t { Unknown, Free, Occupied };

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

/// A range sensor mounted on the body. Offsets are in the vehicle frame
/// (x forward from the rear axle, y to the left).
struct SensorMount {
    double x_m = 0.0;
    double y_m = 0.0;
    double yaw_rad = 0.0;
};

struct RangeReading {
    SensorMount mount;
    double measured_m = 0.0;
    double max_range_m = 2.0;
    bool valid = true;

    bool usable() const;
};

struct GridConfig {
    double cell_size_m = 0.05;
    Point2 origin{-10.0, -10.0};  ///< world position of the (0, 0) cell corner
    int width_cells = 400;
    int height_cells = 400;
    int margin = 3;
    int counter_cap = 10;

    void validate() const;
};

struct CellVote {
    CellIndex cell;
    int delta = 0;

    friend bool operator==(const CellVote&, const CellVote&) = default;
};

/// Fixed-extent occupancy grid. Each cell keeps a saturating signed vote counter;
/// a cell commits to Occupied at counter >= margin and to Free at
/// counter <= -margin, and is Unknown in between.
///
/// Cells are half-open boxes [x0, x0 + size) x [y0, y0 + size), so a point on a
/// cell edge belongs to the cell with the larger coordinate.
class GridMap {
public:
    explicit GridMap(GridConfig cfg = {});

    const GridConfig& config() const { return cfg_; }

    /// Continuous grid coordinates. Values within 1e-9 of an integer snap to it
    /// so that world points on cell edges land on the edge exactly.
    Point2 to_grid(const Point2& world) const;
    CellIndex cell_of(const Point2& world) const;
    Point2 cell_center(const CellIndex& c) const;
    bool contains(const CellIndex& c) const;

    int counter(const CellIndex& c) const;
    CellState state(const CellIndex& c) const;
    CellState cell_state(const Point2& world) const;

    /// Adds `delta` to an in-map cell counter with saturation. Out-of-map cells are ignored.
    void apply_vote(const CellVote& vote);

    const std::set<CellIndex>& occupied_cells() const { return occupied_; }
    const std::vector<int>& counters() const { return counters_; }

    /// Plain-text dump: header line then one row of counters per grid row.
    void write(std::ostream& out) const;
    static GridMap read(std::istream& in);

    friend bool operator==(const GridMap& a, const GridMap& b);

private:
    std::size_t offset(const CellIndex& c) const;

    GridConfig cfg_;
    std::vector<int> counters_;
    std::set<CellIndex> occupied_;
};

/// Cells the segment from -> to passes through, in traversal order. A cell is
/// included when the segment meets its half-open box. When the segment crosses a
/// cell corner exactly, the path steps through the neighbour on the positive-y
/// side, so consecutive cells always share an edge. Cells may lie outside the map.
std::vector<CellIndex> ray_cells(const Point2& from, const Point2& to, const GridMap& map);

/// World pose of a body-mounted sensor.
VehicleState sensor_pose(const VehicleState& vehicle, const SensorMount& mount);

/// Votes a reading casts: -1 for every traversed cell before the hit cell and +2
/// for the hit cell. A max-range reading casts -1 on every cell up to max range
/// and no occupied vote. Unusable readings cast nothing. Cells outside the map are
/// dropped.
std::vector<CellVote> reading_votes(const GridMap& map, const VehicleState& vehicle,
                                    const RangeReading& reading);

inline constexpr int kFreeVote = -1;
inline constexpr int kOccupiedVote = 2;

void integrate_reading(GridMap& map, const VehicleState& vehicle, const RangeReading& reading);

CellState cell_state(const GridMap& map, const Point2& world);

/// Distance from the vehicle reference point to the nearest Occupied cell center
/// whose bearing lies within +/- sector_rad / 2 of the heading.
std::optional<double> nearest_obstacle(const GridMap& map, const VehicleState& vehicle,
                                       double sector_rad);

}  // namespace minicar

#endif  // MINICAR_GRID_MAP_HPP
