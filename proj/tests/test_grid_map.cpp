#include <cmath>
#include <stdexcept>
#include <random>
#include <sstream>

#include "doctest.h"
#include "grid_oracle.hpp"
#include "minicar/grid_map.hpp"

using namespace minicar;

namespace {

GridMap small_map() {
    GridConfig cfg;
    cfg.cell_size_m = 0.1;
    cfg.origin = {0.0, 0.0};
    cfg.width_cells = 40;
    cfg.height_cells = 40;
    return GridMap(cfg);
}

GridMap field_map() {
    GridConfig cfg;
    cfg.cell_size_m = 0.05;
    cfg.origin = {-3.0, -3.0};
    cfg.width_cells = 120;
    cfg.height_cells = 120;
    return GridMap(cfg);
}

}  // namespace

TEST_CASE("integrate_reading: 1 m return along +x") {
    auto map = small_map();
    RangeReading r;
    r.measured_m = 1.0;
    const auto votes = reading_votes(map, {0, 0, 0}, r);
    REQUIRE(votes.size() == 11);
    for (int i = 0; i < 10; ++i) CHECK(votes[static_cast<std::size_t>(i)] == CellVote{{i, 0}, kFreeVote});
    CHECK(votes.back() == CellVote{{10, 0}, kOccupiedVote});
    integrate_reading(map, {0, 0, 0}, r);
    CHECK(map.counter({10, 0}) == 2);
    CHECK(map.counter({3, 0}) == -1);
}

TEST_CASE("integrate_reading: max range and invalid readings") {
    auto map = small_map();
    RangeReading r;
    r.measured_m = r.max_range_m;
    for (const auto& v : reading_votes(map, {0.05, 0.05, 0.3}, r)) CHECK(v.delta == kFreeVote);
    r.valid = false;
    CHECK(reading_votes(map, {0.05, 0.05, 0.3}, r).empty());
    r.valid = true;
    r.measured_m = std::nan("");
    CHECK(reading_votes(map, {0.05, 0.05, 0.3}, r).empty());
    r.measured_m = 0.5;
    CHECK(reading_votes(map, {-50.0, -50.0, kPi}, r).empty());
}

TEST_CASE("counters saturate and commit at the margin") {
    auto map = small_map();
    const CellIndex c{5, 5};
    CHECK(map.state(c) == CellState::Unknown);
    map.apply_vote({c, kOccupiedVote});
    CHECK(map.state(c) == CellState::Unknown);
    map.apply_vote({c, kOccupiedVote});
    CHECK(map.state(c) == CellState::Occupied);
    for (int i = 0; i < 20; ++i) map.apply_vote({c, kOccupiedVote});
    CHECK(map.counter(c) == map.config().counter_cap);
    for (int i = 0; i < 11; ++i) map.apply_vote({c, kFreeVote});
    CHECK(map.state(c) == CellState::Unknown);
    for (int i = 0; i < 2; ++i) map.apply_vote({c, kFreeVote});
    CHECK(map.state(c) == CellState::Free);
    for (int i = 0; i < 40; ++i) map.apply_vote({c, kFreeVote});
    CHECK(map.counter(c) == -map.config().counter_cap);
    CHECK(map.occupied_cells().empty());
    CHECK(cell_state(map, {-1.0, 0.5}) == CellState::Unknown);
    CHECK(cell_state(map, {0.55, 0.55}) == CellState::Free);
}

TEST_CASE("ray_cells: conventions") {
    const auto map = small_map();
    const auto axis = ray_cells({0.05, 0.05}, {1.05, 0.05}, map);
    CHECK(axis.size() == 11);
    CHECK(axis.front() == CellIndex{0, 0});
    CHECK(axis.back() == CellIndex{10, 0});
    const auto dot = ray_cells({0.37, 0.21}, {0.37, 0.21}, map);
    REQUIRE(dot.size() == 1);
    CHECK(dot[0] == CellIndex{3, 2});

    const std::vector<CellIndex> up{{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}, {2, 3}, {3, 3}};
    CHECK(ray_cells({0.0, 0.0}, {0.3, 0.3}, map) == up);
    const std::vector<CellIndex> down{{3, 3}, {2, 3}, {2, 2}, {1, 2}, {1, 1}, {0, 1}, {0, 0}};
    CHECK(ray_cells({0.3, 0.3}, {0.0, 0.0}, map) == down);
    const std::vector<CellIndex> anti{{0, 3}, {0, 2}, {1, 2}, {1, 1}, {2, 1}, {2, 0}, {3, 0}};
    CHECK(ray_cells({0.0, 0.3}, {0.3, 0.0}, map) == anti);
    CHECK(ray_cells({0.0, 0.0}, {0.3, 0.3}, map) == oracle::ray_cells({0.0, 0.0}, {0.3, 0.3}, map));
    CHECK(ray_cells({0.3, 0.3}, {0.0, 0.0}, map) == oracle::ray_cells({0.3, 0.3}, {0.0, 0.0}, map));
    CHECK(ray_cells({0.0, 0.3}, {0.3, 0.0}, map) == oracle::ray_cells({0.0, 0.3}, {0.3, 0.0}, map));
    CHECK(ray_cells({0.3, 0.0}, {0.0, 0.3}, map) == oracle::ray_cells({0.3, 0.0}, {0.0, 0.3}, map));
    // A segment lying on a grid line belongs to the cells above it.
    const std::vector<CellIndex> edge{{1, 2}, {2, 2}, {3, 2}};
    CHECK(ray_cells({0.15, 0.2}, {0.35, 0.2}, map) == edge);
}

TEST_CASE("property: ray_cells agrees with the brute-force oracle") {
    const auto map = field_map();
    std::mt19937_64 gen(47);
    std::uniform_real_distribution<double> u(-2.5, 2.5);
    std::uniform_int_distribution<int> lattice(-40, 40);
    for (int i = 0; i < 3000; ++i) {
        Point2 a{u(gen), u(gen)}, b{u(gen), u(gen)};
        if (i % 3 == 0) {
            // Lattice endpoints make exact edge and corner crossings common.
            a = {0.05 * lattice(gen), 0.05 * lattice(gen)};
            b = {0.05 * lattice(gen), 0.05 * lattice(gen)};
        }
        const auto got = ray_cells(a, b, map);
        REQUIRE(got == oracle::ray_cells(a, b, map));
        for (std::size_t k = 1; k < got.size(); ++k) {
            CHECK(std::abs(got[k].ix - got[k - 1].ix) + std::abs(got[k].iy - got[k - 1].iy) == 1);
        }
    }
}

TEST_CASE("property: densely sampled points land in traversed cells") {
    const auto map = field_map();
    std::mt19937_64 gen(53);
    std::uniform_real_distribution<double> u(-2.5, 2.5);
    for (int i = 0; i < 300; ++i) {
        const Point2 a{u(gen), u(gen)}, b{u(gen), u(gen)};
        const auto cells = ray_cells(a, b, map);
        const std::set<CellIndex> set(cells.begin(), cells.end());
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        const int n = static_cast<int>(len / (map.config().cell_size_m / 100.0)) + 1;
        for (int k = 0; k <= n; ++k) {
            const double t = static_cast<double>(k) / n;
            const Point2 p{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
            CHECK(set.count(map.cell_of(p)) == 1);
        }
    }
}

TEST_CASE("property: votes stay in the reading's bounding box and the hit cell is never freed") {
    const auto map = field_map();
    std::mt19937_64 gen(59);
    std::uniform_real_distribution<double> pos(-0.5, 0.5), ang(-kPi, kPi), range(0.0, 2.0);
    for (int i = 0; i < 1000; ++i) {
        const VehicleState v{pos(gen), pos(gen), ang(gen)};
        RangeReading r;
        r.mount = {0.3, 0.0, ang(gen)};
        r.measured_m = range(gen);
        const auto votes = reading_votes(map, v, r);
        const auto sp = sensor_pose(v, r.mount);
        const Point2 end{sp.x_m + r.measured_m * std::cos(sp.theta_rad),
                         sp.y_m + r.measured_m * std::sin(sp.theta_rad)};
        const auto c0 = map.cell_of({sp.x_m, sp.y_m});
        const auto c1 = map.cell_of(end);
        int occupied = 0;
        for (const auto& vote : votes) {
            CHECK(vote.cell.ix >= std::min(c0.ix, c1.ix));
            CHECK(vote.cell.ix <= std::max(c0.ix, c1.ix));
            CHECK(vote.cell.iy >= std::min(c0.iy, c1.iy));
            CHECK(vote.cell.iy <= std::max(c0.iy, c1.iy));
            if (vote.delta == kOccupiedVote) {
                ++occupied;
                CHECK(vote.cell == c1);
            } else {
                CHECK(vote.cell != c1);
            }
        }
        CHECK(occupied == 1);
    }
}

TEST_CASE("property: map updates are deterministic and state follows the counter") {
    std::mt19937_64 gen(61);
    std::uniform_real_distribution<double> pos(-2.0, 2.0), ang(-kPi, kPi), range(0.0, 2.0);
    auto a = field_map();
    auto b = field_map();
    for (int i = 0; i < 2000; ++i) {
        const VehicleState v{pos(gen), pos(gen), ang(gen)};
        RangeReading r;
        r.measured_m = range(gen);
        integrate_reading(a, v, r);
        integrate_reading(b, v, r);
    }
    CHECK(a == b);
    const int margin = a.config().margin;
    for (int ix = 0; ix < a.config().width_cells; ++ix) {
        for (int iy = 0; iy < a.config().height_cells; ++iy) {
            const int c = a.counter({ix, iy});
            const auto s = a.state({ix, iy});
            CHECK(std::abs(c) <= a.config().counter_cap);
            CHECK((s == CellState::Occupied) == (c >= margin));
            CHECK((s == CellState::Free) == (c <= -margin));
            CHECK((a.occupied_cells().count({ix, iy}) == 1) == (c >= margin));
        }
    }
    std::stringstream text;
    a.write(text);
    CHECK(GridMap::read(text) == a);
}

TEST_CASE("nearest_obstacle") {
    auto map = field_map();
    CHECK_FALSE(nearest_obstacle(map, {0, 0, 0}, kPi / 3));
    const CellIndex ahead = map.cell_of({1.0, 0.0});
    for (int i = 0; i < 3; ++i) map.apply_vote({ahead, kOccupiedVote});
    const auto d = nearest_obstacle(map, {0, 0, 0}, kPi / 3);
    REQUIRE(d);
    const double half_diag = 0.5 * std::sqrt(2.0) * map.config().cell_size_m;
    CHECK(std::abs(*d - 1.0) <= half_diag);
    CHECK_FALSE(nearest_obstacle(map, {0, 0, kPi}, kPi / 3));
    CHECK_THROWS(nearest_obstacle(map, {0, 0, 0}, 0.0));
}

TEST_CASE("property: nearest_obstacle equals an exhaustive scan") {
    std::mt19937_64 gen(67);
    std::uniform_int_distribution<int> cell(0, 119);
    std::uniform_real_distribution<double> pos(-2.0, 2.0), ang(-kPi, kPi);
    for (int trial = 0; trial < 50; ++trial) {
        auto map = field_map();
        for (int k = 0; k < 30; ++k) {
            const CellIndex c{cell(gen), cell(gen)};
            for (int i = 0; i < 2; ++i) map.apply_vote({c, kOccupiedVote});
        }
        const VehicleState v{pos(gen), pos(gen), ang(gen)};
        std::optional<double> best;
        for (int ix = 0; ix < 120; ++ix) {
            for (int iy = 0; iy < 120; ++iy) {
                if (map.state({ix, iy}) != CellState::Occupied) continue;
                const auto p = map.cell_center({ix, iy});
                const double bearing = std::atan2(p.y - v.y_m, p.x - v.x_m) - v.theta_rad;
                if (std::abs(normalize_angle(bearing)) > kPi / 6) continue;
                const double d = std::hypot(p.x - v.x_m, p.y - v.y_m);
                if (!best || d < *best) best = d;
            }
        }
        const auto got = nearest_obstacle(map, v, kPi / 3);
        REQUIRE(got.has_value() == best.has_value());
        if (best) CHECK(*got == doctest::Approx(*best).epsilon(1e-12));
    }
}
