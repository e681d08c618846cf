#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "doctest.h"
#include "minicar/sim/rng.hpp"
#include "minicar/sim/road.hpp"
#include "minicar/sim/run_io.hpp"
#include "minicar/sim/sensors.hpp"
#include "sim_helpers.hpp"

using namespace minicar;
using namespace minicar::sim;

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bool close9(double written, double parsed) {
    return std::abs(written - parsed) <= 5e-9 * std::abs(written) + 1e-300;
}

Scenario minimal_scenario() {
    return parse_scenario(R"({
      "schema": "minicar.scenario/1",
      "name": "unit",
      "road": {"lane_width": 0.7, "half_width": 0.9,
               "segments": [{"type": "line", "length": 10.0}]},
      "duration": 2.0
    })");
}

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("minicar_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("rng: reproducible streams") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        CHECK(x == b.uniform());
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    CHECK(a.gaussian() == b.gaussian());
    CHECK(a.uniform() != c.uniform());
    CHECK(a.gaussian(0.0) == 0.0);
    CHECK_FALSE(a.bernoulli(0.0));
    CHECK(a.bernoulli(1.0));
}

TEST_CASE("road: arc geometry and projection") {
    const Road road({0.0, 0.0, 0.0}, {{2.0, 0.0, true}, {kPi / 2, 1.0, true}}, 0.7, 0.9);
    CHECK(road.length_m() == doctest::Approx(2.0 + kPi / 2));
    const auto end = road.pose_at(road.length_m());
    CHECK(end.x_m == doctest::Approx(3.0));
    CHECK(end.y_m == doctest::Approx(1.0));
    CHECK(end.theta_rad == doctest::Approx(kPi / 2));
    const auto pr = road.project({1.0, 0.25});
    CHECK(pr.s_m == doctest::Approx(1.0));
    CHECK(pr.lateral_m == doctest::Approx(0.25));
    const auto on_arc = road.project(road.offset_point(2.5, -0.1));
    CHECK(on_arc.s_m == doctest::Approx(2.5));
    CHECK(on_arc.lateral_m == doctest::Approx(-0.1));
}

TEST_CASE("sample_lane_points: centered and offset round trips") {
    const Scenario sc = minimal_scenario();
    const auto cfg = lane_pipeline_config();
    Rng rng(1);
    const auto centered = process_lane_frame(sample_lane_points(sc, {1.0, 0.0, 0.0}, cfg, rng), {}, cfg);
    REQUIRE(centered.error);
    CHECK(std::abs(centered.error->cross_track_m) <= 1e-9);
    CHECK(std::abs(centered.error->heading_err_rad) <= 1e-9);
    const auto offset = process_lane_frame(sample_lane_points(sc, {1.0, 0.2, 0.0}, cfg, rng), {}, cfg);
    REQUIRE(offset.error);
    CHECK(std::abs(offset.error->cross_track_m - 0.2) <= 1e-6);
    CHECK(offset.middle.provenance == MiddleProvenance::BothAveraged);
}

TEST_CASE("sample_lane_points: full left dropout") {
    Scenario sc = minimal_scenario();
    sc.noise.lane_dropout_left = 1.0;
    const auto cfg = lane_pipeline_config();
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto pts = sample_lane_points(sc, {1.0 + 0.1 * i, 0.0, 0.0}, cfg, rng);
        CHECK(pts.left.empty());
        CHECK_FALSE(pts.right.empty());
        const auto res = process_lane_frame(pts, {}, cfg);
        CHECK(res.middle.provenance == MiddleProvenance::RightShifted);
        REQUIRE(res.error);
        CHECK(std::abs(res.error->cross_track_m) < 1e-9);
    }
}

TEST_CASE("simulate_range: wall, open space and clamping") {
    Scenario sc = minimal_scenario();
    const VehicleParams vp;
    const auto front = range_mount(RangeSide::Front, vp);
    const double sensor_x = 1.0 + front.x_m;
    sc.obstacles.push_back({{sensor_x + 1.0 + 0.05, 0.0}, 0.1, 1.0, 0.0, "wall"});
    Rng rng(5);
    const auto r = simulate_range(sc, {1.0, 0.0, 0.0}, front, rng);
    CHECK(r.measured_m == doctest::Approx(1.0).epsilon(1e-12));
    const auto rear = simulate_range(sc, {1.0, 0.0, 0.0}, range_mount(RangeSide::Rear, vp), rng);
    CHECK(rear.measured_m == rear.max_range_m);

    // Rotated box: analytic distance to a face tilted 30 degrees.
    const Box tilted{{2.0, 0.0}, 0.2, 2.0, kPi / 6, ""};
    const double face_x = 2.0 - 0.1 / std::cos(kPi / 6);
    CHECK(*cast_ray({tilted}, {0.0, 0.0}, 0.0, 5.0) == doctest::Approx(face_x));

    sc.noise.range_sigma_m = 50.0;
    sc.obstacles.clear();
    sc.obstacles.push_back({{sensor_x + 0.02 + 0.05, 0.0}, 0.1, 1.0, 0.0, "close"});
    bool saw_zero = false;
    for (int i = 0; i < 200; ++i) {
        const auto n = simulate_range(sc, {1.0, 0.0, 0.0}, front, rng);
        CHECK(n.measured_m >= 0.0);
        CHECK(n.measured_m <= n.max_range_m);
        saw_zero |= n.measured_m == 0.0;
    }
    CHECK(saw_zero);
}

TEST_CASE("simulate_detections: ordering, visibility and range recovery") {
    Scenario sc = minimal_scenario();
    sc.signs.push_back({SignClass::Tunnel, {2.5, -0.4}, 100.0});
    sc.signs.push_back({SignClass::Park, {1.8, -0.4}, 100.0});
    sc.signs.push_back({SignClass::Straight, {0.5, -0.4}, 100.0});
    Rng rng(7);
    const auto dets = simulate_detections(sc, {1.0, 0.0, 0.0}, 0.0, rng);
    REQUIRE(dets.size() == 2);
    CHECK(dets[0].sign_class == SignClass::Park);
    CHECK(dets[1].sign_class == SignClass::Tunnel);
    CHECK(dets[0].true_distance_m < dets[1].true_distance_m);
    for (const auto& d : dets) {
        const auto ev = perceive(d, sc);
        CHECK(ev.distance_m == doctest::Approx(d.true_distance_m).epsilon(1e-9));
        CHECK(ev.bearing_rad == doctest::Approx(d.true_bearing_rad).epsilon(1e-9));
        CHECK(ev.bearing_rad < 0.0);
    }
    CHECK(simulate_detections(sc, {3.0, 0.0, 0.0}, 0.0, rng).empty());
}

TEST_CASE("boxes_overlap") {
    const Box a{{0, 0}, 1.0, 1.0, 0.0, ""};
    CHECK(boxes_overlap(a, {{0.9, 0.0}, 1.0, 1.0, 0.0, ""}));
    CHECK_FALSE(boxes_overlap(a, {{1.1, 0.0}, 1.0, 1.0, 0.0, ""}));
    CHECK_FALSE(boxes_overlap(a, {{1.2, 1.2}, 1.0, 1.0, kPi / 4, ""}));
    CHECK(boxes_overlap(a, {{0.9, 0.0}, 1.0, 0.2, kPi / 4, ""}));
}

TEST_CASE("simulate: zero-noise centerline run has CE identically zero") {
    const auto res = testing::run("straight_lane");
    CHECK(res.outcome == Outcome::Completed);
    REQUIRE(res.steps.size() == 2000);
    for (const auto& s : res.steps) {
        REQUIRE(s.ce_m);
        CHECK(std::abs(*s.ce_m) <= 1e-9);
        CHECK(std::abs(s.truth.y_m) <= 1e-9);
    }
}

TEST_CASE("simulate: every controller converges from a 0.5 m offset") {
    const Scenario sc = testing::bundled("straight_lane");
    for (auto kind : {ControllerKind::Stanley, ControllerKind::Pid, ControllerKind::PurePursuit}) {
        RunOptions opts;
        opts.controller = kind;
        opts.initial = VehicleState{0.0, -0.5, 0.0};
        const auto res = simulate(sc, opts);
        CAPTURE(controller_name(kind));
        CHECK(res.outcome == Outcome::Completed);
        double worst_late = 0.0;
        for (const auto& s : res.steps) {
            if (s.t_s >= 10.0) worst_late = std::max(worst_late, std::abs(s.truth.y_m));
        }
        CHECK(worst_late < 0.02);
    }
}

TEST_CASE("simulate: identical seeds give identical logs, different seeds differ under noise") {
    Scenario sc = testing::bundled("s_curve");
    sc.duration_s = 8.0;
    sc.noise.lane_sigma_px = 1.0;
    sc.noise.gyro_sigma_rps = 0.01;
    std::ostringstream a, b, c;
    write_csv(a, simulate(sc, {}).steps);
    write_csv(b, simulate(sc, {}).steps);
    RunOptions other;
    other.seed = 99;
    write_csv(c, simulate(sc, other).steps);
    CHECK(a.str() == b.str());
    CHECK(a.str() != c.str());
}

TEST_CASE("simulate: rejects a non-positive dt") {
    RunOptions opts;
    opts.dt_s = 0.0;
    CHECK_THROWS_AS(simulate(minimal_scenario(), opts), std::invalid_argument);
}

TEST_CASE("simulate: collision halts the run") {
    Scenario sc = minimal_scenario();
    sc.duration_s = 6.0;
    // Narrow post off the centerline: the range rays miss it, the body does not.
    sc.obstacles.push_back({{1.5, 0.1}, 0.1, 0.05, 0.0, "post"});
    const auto res = simulate(sc, {});
    CHECK(res.outcome == Outcome::Collision);
    REQUIRE_FALSE(res.transitions.empty());
    CHECK(res.transitions.back().machine == "run");
}

TEST_CASE("simulate: the obstacle cap stops the car short of a wall") {
    Scenario sc = minimal_scenario();
    sc.duration_s = 10.0;
    sc.obstacles.push_back({{2.0, 0.0}, 0.1, 0.6, 0.0, "wall"});
    const auto res = simulate(sc, {});
    CHECK(res.outcome == Outcome::Completed);
    const VehicleParams vp;
    const double nose = res.final_truth.x_m + vp.wheelbase_m + vp.front_overhang_m();
    CHECK(nose < 1.95);
    CHECK(res.steps.back().speed_cmd_mps < 1e-3);
}

TEST_CASE("csv: header, one row and nine-digit round trip") {
    Scenario sc = testing::bundled("tunnel_crossing");
    RunOptions opts;
    opts.duration_s = 0.01;
    const auto one = simulate(sc, opts);
    REQUIRE(one.steps.size() == 1);
    std::ostringstream single;
    write_csv(single, one.steps);
    const std::string text = single.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);

    sc.noise.gyro_sigma_rps = 0.02;
    const auto res = simulate(sc, {});
    std::ostringstream out;
    write_csv(out, res.steps);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    const auto header = split(line);
    REQUIRE(header.size() == kCsvColumns.size());
    for (std::size_t i = 0; i < header.size(); ++i) CHECK(header[i] == kCsvColumns[i]);
    std::size_t row = 0;
    while (std::getline(in, line)) {
        const auto f = split(line);
        REQUIRE(f.size() == kCsvColumns.size());
        const auto& s = res.steps[row++];
        CHECK(std::stoi(f[0]) == s.step);
        const double written[] = {s.t_s,        s.truth.x_m,    s.truth.y_m,        s.truth.theta_rad,
                                  s.estimate.x_m, s.estimate.y_m, s.estimate.theta_rad};
        for (int k = 0; k < 7; ++k) CHECK(close9(written[k], std::stod(f[static_cast<std::size_t>(k + 1)])));
        CHECK(f[8].empty() == !s.ce_m.has_value());
        if (s.ce_m) CHECK(close9(*s.ce_m, std::stod(f[8])));
        CHECK(close9(s.steer_cmd_rad, std::stod(f[10])));
        CHECK(close9(s.speed_cmd_mps, std::stod(f[11])));
        CHECK(f[12] == controller_name(s.controller));
        CHECK(f[13] == parking_node_name(s.parking));
        CHECK(f[14] == intersection_node_name(s.intersection));
        CHECK(f[15] == (s.flags.hazard_lights ? "1" : "0"));
        CHECK(f[16] == (s.flags.headlights ? "1" : "0"));
        CHECK(f[17].empty() == !s.nearest_obstacle_m.has_value());
    }
    CHECK(row == res.steps.size());
}

TEST_CASE("svg: well-formed with one polyline per path") {
    const Scenario sc = testing::bundled("parking");
    const auto res = simulate(sc, {});
    std::ostringstream out;
    write_svg(out, sc, res);
    std::istringstream in(out.str());
    boost::property_tree::ptree tree;
    REQUIRE_NOTHROW(boost::property_tree::read_xml(in, tree));
    std::vector<std::string> ids;
    std::function<void(const boost::property_tree::ptree&)> walk = [&](const auto& node) {
        for (const auto& [name, child] : node) {
            if (name == "polyline") ids.push_back(child.get("<xmlattr>.id", std::string()));
            walk(child);
        }
    };
    walk(tree);
    std::sort(ids.begin(), ids.end());
    CHECK(ids == std::vector<std::string>{"estimate", "truth"});
}

TEST_CASE("run output: files and unwritable paths") {
    const auto dir = temp_dir("run_io");
    Scenario sc = testing::bundled("straight_lane");
    RunOptions opts;
    opts.duration_s = 0.5;
    const auto res = simulate(sc, opts);
    write_run(dir, sc, res);
    for (const char* f : {"log.csv", "transitions.csv", "run.svg", "grid.txt", "summary.json"}) {
        CHECK(std::filesystem::exists(dir / f));
    }
    std::ifstream grid_in(dir / "grid.txt");
    CHECK(GridMap::read(grid_in) == res.grid);
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(write_run("/proc/minicar/nowhere", sc, res), std::runtime_error);
}

TEST_CASE("pgm: header and cell encoding") {
    GridConfig cfg;
    cfg.cell_size_m = 0.5;
    cfg.origin = {0.0, 0.0};
    cfg.width_cells = 3;
    cfg.height_cells = 2;
    GridMap grid(cfg);
    for (int i = 0; i < 2; ++i) grid.apply_vote({{0, 1}, kOccupiedVote});
    for (int i = 0; i < 3; ++i) grid.apply_vote({{2, 0}, kFreeVote});
    std::ostringstream out;
    write_pgm(out, grid);
    const std::string s = out.str();
    const std::string header = "P5\n3 2\n255\n";
    REQUIRE(s.size() == header.size() + 6);
    CHECK(s.substr(0, header.size()) == header);
    const auto px = [&](int i) { return static_cast<unsigned char>(s[header.size() + static_cast<std::size_t>(i)]); };
    CHECK(px(0) == 0);
    CHECK(px(1) == 128);
    CHECK(px(5) == 255);
}

TEST_CASE("scenario parsing errors") {
    CHECK_THROWS_AS(parse_scenario("{"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse_scenario(R"({"schema": "other/2"})"), doctest::Contains("schema"),
                         std::runtime_error);
    CHECK_THROWS_AS(parse_scenario(R"({"schema": "minicar.scenario/1", "name": "x",
        "road": {"segments": [{"type": "spiral", "length": 1}]}})"),
                    std::runtime_error);
    CHECK_THROWS_AS(parse_scenario(R"({"schema": "minicar.scenario/1", "name": "x",
        "road": {"segments": [{"type": "line", "length": 5}]}, "dt": -1})"),
                    std::runtime_error);
    CHECK_THROWS_AS(parse_scenario(R"({"schema": "minicar.scenario/1", "name": "x",
        "road": {"segments": [{"type": "line", "length": 5}]},
        "signs": [{"class": "Yield", "position": [1, 1]}]})"),
                    std::runtime_error);
    CHECK_THROWS_AS(parse_noise(R"({"lane_dropout_left": 1.5})"), std::runtime_error);
    CHECK_THROWS_AS(resolve_scenario("no_such_scenario"), std::runtime_error);
    const auto names = bundled_scenarios();
    for (const char* n : {"straight_lane", "s_curve", "parking", "intersection_left", "intersection_right",
                          "intersection_straight", "tunnel_crossing"}) {
        CHECK(std::find(names.begin(), names.end(), n) != names.end());
    }
}

TEST_CASE("gains overrides") {
    const Gains base;
    const auto g = parse_gains(R"({"stanley": {"k_ce": 4.0}, "speed": {"cruise": 0.3}})", base);
    CHECK(g.stanley.k_ce == 4.0);
    CHECK(g.stanley.k_he == base.stanley.k_he);
    CHECK(g.speed.cruise_mps == 0.3);
    CHECK_THROWS_AS(parse_gains(R"({"stanley": {"k_ce": -1.0}})", base), std::runtime_error);
}

TEST_CASE("bundled runs: hazard invariant, red-light safety and overlay composition") {
    const auto park = testing::run("parking");
    CHECK(park.outcome == Outcome::Completed);
    CHECK(park.parking.node == ParkingNode::Resume);
    for (const auto& s : park.steps) {
        if (parking_hazard_active(s.parking)) CHECK(s.flags.hazard_lights);
    }

    for (const char* name : {"intersection_left", "intersection_right", "intersection_straight"}) {
        const auto res = testing::run(name);
        CAPTURE(name);
        CHECK(res.outcome == Outcome::Completed);
        for (const auto& s : res.steps) {
            if (s.intersection == IntersectionNode::ExecuteTurn) CHECK(s.light != LightState::Red);
        }
        REQUIRE(res.turn_deltas_rad.size() == 1);
    }

    const auto tunnel = testing::run("tunnel_crossing");
    CHECK(tunnel.outcome == Outcome::Completed);
    int capped = 0;
    for (const auto& s : tunnel.steps) {
        if (!s.ce_m || s.speed_cmd_mps < 0.0) continue;
        const double expected = std::min({s.lane_speed_mps, s.fsm_speed_cap_mps, s.obstacle_speed_cap_mps, 0.9});
        CHECK(s.speed_cmd_mps == expected);
        if (s.fsm_speed_cap_mps == 0.3) {
            ++capped;
            CHECK(s.speed_cmd_mps <= 0.3);
            CHECK(s.flags.hazard_lights);
        }
    }
    CHECK(capped > 0);
}

#ifdef MINICAR_CLI
TEST_CASE("cli: exit codes and outputs") {
    const std::string cli = MINICAR_CLI;
    const auto dir = temp_dir("cli");
    auto run_cli = [&](const std::string& args) {
        const int status = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    const std::string out = (dir / "run").string();
    CHECK(run_cli("simulate --scenario straight_lane --controller pid --duration 1 --out " + out) == 0);
    CHECK(std::filesystem::exists(dir / "run" / "log.csv"));
    CHECK(run_cli("map-dump --run " + out) == 0);
    CHECK(std::filesystem::exists(dir / "run" / "map.pgm"));
    CHECK(std::filesystem::exists(dir / "run" / "map.pgm.txt"));
    CHECK(run_cli("scenarios list") == 0);
    CHECK(run_cli("simulate --scenario nowhere --out " + out) == 3);
    CHECK(run_cli("simulate --scenario straight_lane --controller lqr --out " + out) == 3);
    CHECK(run_cli("simulate --scenario straight_lane --dt 0 --out " + out) == 3);

    {
        std::ofstream bad(dir / "crash.json");
        bad << R"({"schema": "minicar.scenario/1", "name": "crash",
                   "road": {"segments": [{"type": "line", "length": 10}]},
                   "obstacles": [{"center": [1.5, 0.1], "size": [0.1, 0.05]}], "duration": 5})";
    }
    CHECK(run_cli("simulate --scenario " + (dir / "crash.json").string() + " --out " + out) == 2);

    {
        std::ofstream samples(dir / "samples.csv");
        samples << "estimated_mm,true_mm\n";
        for (int e = 300; e <= 2000; e += 100) samples << e << ',' << 0.9 * e + 50.0 << '\n';
    }
    const auto corr = dir / "corr.json";
    CHECK(run_cli("calibrate-range --samples " + (dir / "samples.csv").string() + " --out " +
                  corr.string()) == 0);
    std::ifstream corr_in(corr);
    std::stringstream corr_text;
    corr_text << corr_in.rdbuf();
    CHECK(corr_text.str().find("coefficient") != std::string::npos);
    {
        std::ofstream bad(dir / "flat.csv");
        bad << "500,400\n500,450\n";
    }
    CHECK(run_cli("calibrate-range --samples " + (dir / "flat.csv").string() + " --out " + corr.string()) == 3);
    {
        std::ofstream replay(dir / "replay.csv");
        replay << "frame_id,side,u_px,v_px\n0,left,250,400\n0,left,250,300\n0,right,390,400\n0,right,390,300\n";
    }
    CHECK(run_cli("lane-replay --points " + (dir / "replay.csv").string()) == 0);
    std::filesystem::remove_all(dir);
}
#endif
