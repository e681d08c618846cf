#include "minicar/grid_map.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace minicar {

namespace {

double snap(double g) {
    const double r = std::round(g);
    return std::abs(g - r) < 1e-9 ? r : g;
}

int floor_index(double g) { return static_cast<int>(std::floor(g)); }

}  // namespace

bool RangeReading::usable() const {
    return valid && std::isfinite(measured_m) && std::isfinite(max_range_m) &&
           max_range_m > 0.0 && measured_m >= 0.0 && measured_m <= max_range_m;
}

void GridConfig::validate() const {
    if (!(cell_size_m > 0.0)) {
        throw std::invalid_argument("GridConfig: cell_size_m must be > 0");
    }
    if (width_cells <= 0 || height_cells <= 0) {
        throw std::invalid_argument("GridConfig: extent must be positive");
    }
    if (margin <= 0 || counter_cap < margin) {
        throw std::invalid_argument("GridConfig: need 0 < margin <= counter_cap");
    }
}

GridMap::GridMap(GridConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    counters_.assign(static_cast<std::size_t>(cfg_.width_cells) *
                         static_cast<std::size_t>(cfg_.height_cells),
                     0);
}

Point2 GridMap::to_grid(const Point2& world) const {
    return {snap((world.x - cfg_.origin.x) / cfg_.cell_size_m),
            snap((world.y - cfg_.origin.y) / cfg_.cell_size_m)};
}

CellIndex GridMap::cell_of(const Point2& world) const {
    const Point2 g = to_grid(world);
    return {floor_index(g.x), floor_index(g.y)};
}

Point2 GridMap::cell_center(const CellIndex& c) const {
    return {cfg_.origin.x + (c.ix + 0.5) * cfg_.cell_size_m,
            cfg_.origin.y + (c.iy + 0.5) * cfg_.cell_size_m};
}

bool GridMap::contains(const CellIndex& c) const {
    return c.ix >= 0 && c.iy >= 0 && c.ix < cfg_.width_cells && c.iy < cfg_.height_cells;
}

std::size_t GridMap::offset(const CellIndex& c) const {
    return static_cast<std::size_t>(c.iy) * static_cast<std::size_t>(cfg_.width_cells) +
           static_cast<std::size_t>(c.ix);
}

int GridMap::counter(const CellIndex& c) const { return contains(c) ? counters_[offset(c)] : 0; }

CellState GridMap::state(const CellIndex& c) const {
    const int n = counter(c);
    if (n >= cfg_.margin) return CellState::Occupied;
    if (n <= -cfg_.margin) return CellState::Free;
    return CellState::Unknown;
}

CellState GridMap::cell_state(const Point2& world) const { return state(cell_of(world)); }

void GridMap::apply_vote(const CellVote& vote) {
    if (!contains(vote.cell)) {
        return;
    }
    int& n = counters_[offset(vote.cell)];
    n = std::clamp(n + vote.delta, -cfg_.counter_cap, cfg_.counter_cap);
    if (n >= cfg_.margin) {
        occupied_.insert(vote.cell);
    } else {
        occupied_.erase(vote.cell);
    }
}

void GridMap::write(std::ostream& out) const {
    out << "minicar-grid 1\n";
    out << fmt::format("{:.17g} {:.17g} {:.17g} {} {} {} {}\n", cfg_.cell_size_m, cfg_.origin.x,
                       cfg_.origin.y, cfg_.width_cells, cfg_.height_cells, cfg_.margin,
                       cfg_.counter_cap);
    for (int iy = 0; iy < cfg_.height_cells; ++iy) {
        for (int ix = 0; ix < cfg_.width_cells; ++ix) {
            if (ix) out << ' ';
            out << counters_[offset({ix, iy})];
        }
        out << '\n';
    }
}

GridMap GridMap::read(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "minicar-grid" || version != 1) {
        throw std::runtime_error("grid file: bad header");
    }
    GridConfig cfg;
    if (!(in >> cfg.cell_size_m >> cfg.origin.x >> cfg.origin.y >> cfg.width_cells >>
          cfg.height_cells >> cfg.margin >> cfg.counter_cap)) {
        throw std::runtime_error("grid file: bad geometry line");
    }
    GridMap map(cfg);
    for (int iy = 0; iy < cfg.height_cells; ++iy) {
        for (int ix = 0; ix < cfg.width_cells; ++ix) {
            int n = 0;
            if (!(in >> n)) {
                throw std::runtime_error("grid file: truncated counters");
            }
            map.apply_vote({{ix, iy}, n});
        }
    }
    return map;
}

bool operator==(const GridMap& a, const GridMap& b) {
    const auto& ca = a.cfg_;
    const auto& cb = b.cfg_;
    return ca.cell_size_m == cb.cell_size_m && ca.origin.x == cb.origin.x &&
           ca.origin.y == cb.origin.y && ca.width_cells == cb.width_cells &&
           ca.height_cells == cb.height_cells && ca.margin == cb.margin &&
           ca.counter_cap == cb.counter_cap && a.counters_ == b.counters_;
}

std::vector<CellIndex> ray_cells(const Point2& from, const Point2& to, const GridMap& map) {
    if (!std::isfinite(from.x) || !std::isfinite(from.y) || !std::isfinite(to.x) ||
        !std::isfinite(to.y)) {
        throw std::invalid_argument("ray_cells: non-finite segment");
    }
    const Point2 g0 = map.to_grid(from);
    const Point2 g1 = map.to_grid(to);
    CellIndex cell{floor_index(g0.x), floor_index(g0.y)};
    const CellIndex last{floor_index(g1.x), floor_index(g1.y)};

    const double dx = g1.x - g0.x;
    const double dy = g1.y - g0.y;
    const int step_x = dx > 0.0 ? 1 : (dx < 0.0 ? -1 : 0);
    const int step_y = dy > 0.0 ? 1 : (dy < 0.0 ? -1 : 0);
    const double adx = std::abs(dx);
    const double ady = std::abs(dy);

    // Distance from the start to the next vertical / horizontal edge along each
    // axis. Crossing order compares dist_x / |dx| with dist_y / |dy| by
    // cross-multiplication, recomputed from the start point at every step so
    // exact corner hits are not lost to accumulated rounding.
    auto dist_x = [&] { return step_x > 0 ? (cell.ix + 1) - g0.x : g0.x - cell.ix; };
    auto dist_y = [&] { return step_y > 0 ? (cell.iy + 1) - g0.y : g0.y - cell.iy; };

    const int steps = std::abs(last.ix - cell.ix) + std::abs(last.iy - cell.iy);
    std::vector<CellIndex> cells;
    cells.reserve(static_cast<std::size_t>(steps) + 1);
    cells.push_back(cell);
    for (int k = 0; k < steps; ++k) {
        bool go_x;
        if (cell.ix == last.ix) {
            go_x = false;
        } else if (cell.iy == last.iy) {
            go_x = true;
        } else {
            const double tx = dist_x() * ady;
            const double ty = dist_y() * adx;
            if (tx < ty) {
                go_x = true;
            } else if (ty < tx) {
                go_x = false;
            } else {
                // Exact corner: pass through the neighbour with the larger y index.
                go_x = step_y < 0;
            }
        }
        if (go_x) {
            cell.ix += step_x;
        } else {
            cell.iy += step_y;
        }
        cells.push_back(cell);
    }
    return cells;
}

VehicleState sensor_pose(const VehicleState& vehicle, const SensorMount& mount) {
    const double c = std::cos(vehicle.theta_rad);
    const double s = std::sin(vehicle.theta_rad);
    return {vehicle.x_m + c * mount.x_m - s * mount.y_m, vehicle.y_m + s * mount.x_m + c * mount.y_m,
            normalize_angle(vehicle.theta_rad + mount.yaw_rad)};
}

std::vector<CellVote> reading_votes(const GridMap& map, const VehicleState& vehicle,
                                    const RangeReading& reading) {
    std::vector<CellVote> votes;
    if (!reading.usable() || !std::isfinite(vehicle.x_m) || !std::isfinite(vehicle.y_m) ||
        !std::isfinite(vehicle.theta_rad)) {
        return votes;
    }
    const VehicleState sp = sensor_pose(vehicle, reading.mount);
    const bool hit = reading.measured_m < reading.max_range_m;
    const double reach = hit ? reading.measured_m : reading.max_range_m;
    const Point2 from{sp.x_m, sp.y_m};
    const Point2 to{sp.x_m + reach * std::cos(sp.theta_rad),
                    sp.y_m + reach * std::sin(sp.theta_rad)};
    const auto cells = ray_cells(from, to, map);
    votes.reserve(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!map.contains(cells[i])) continue;
        const bool is_hit_cell = hit && i + 1 == cells.size();
        votes.push_back({cells[i], is_hit_cell ? kOccupiedVote : kFreeVote});
    }
    return votes;
}

void integrate_reading(GridMap& map, const VehicleState& vehicle, const RangeReading& reading) {
    for (const auto& v : reading_votes(map, vehicle, reading)) {
        map.apply_vote(v);
    }
}

CellState cell_state(const GridMap& map, const Point2& world) { return map.cell_state(world); }

std::optional<double> nearest_obstacle(const GridMap& map, const VehicleState& vehicle,
                                       double sector_rad) {
    if (!(sector_rad > 0.0)) {
        throw std::invalid_argument("nearest_obstacle: sector must be > 0");
    }
    std::optional<double> best;
    const double half = 0.5 * sector_rad;
    for (const auto& c : map.occupied_cells()) {
        const Point2 p = map.cell_center(c);
        const double dx = p.x - vehicle.x_m;
        const double dy = p.y - vehicle.y_m;
        const double d = std::hypot(dx, dy);
        if (best && d >= *best) continue;
        const double bearing = d > 0.0 ? angle_diff(std::atan2(dy, dx), vehicle.theta_rad) : 0.0;
        if (std::abs(bearing) <= half) {
            best = d;
        }
    }
    return best;
}

}  // namespace minicar
