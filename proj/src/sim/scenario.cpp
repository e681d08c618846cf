#include "minicar/sim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "json.hpp"

#ifndef MINICAR_SCENARIO_DIR
#define MINICAR_SCENARIO_DIR "scenarios"
#endif

namespace minicar::sim {

using nlohmann::json;

namespace {

double deg(double d) { return d * kPi / 180.0; }

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error("scenario: " + what); }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        fail(fmt::format("field '{}' has the wrong type", key));
    }
}

Point2 read_point(const json& j, const char* key) {
    if (!j.contains(key)) fail(fmt::format("missing '{}'", key));
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2) fail(fmt::format("'{}' must be [x, y]", key));
    return {v[0].get<double>(), v[1].get<double>()};
}

VehicleState read_pose(const json& j) {
    return {get_or(j, "x", 0.0), get_or(j, "y", 0.0), deg(get_or(j, "theta_deg", 0.0))};
}

Box read_box(const json& j) {
    Box b;
    b.center = read_point(j, "center");
    if (!j.contains("size") || !j["size"].is_array() || j["size"].size() != 2) {
        fail("box 'size' must be [length, width]");
    }
    b.length_m = j["size"][0].get<double>();
    b.width_m = j["size"][1].get<double>();
    b.yaw_rad = deg(get_or(j, "yaw_deg", 0.0));
    b.label = get_or<std::string>(j, "label", "");
    if (!(b.length_m > 0.0) || !(b.width_m > 0.0)) fail("box size must be positive");
    return b;
}

SignClass read_class(const json& j) {
    const auto name = get_or<std::string>(j, "class", "");
    const auto c = parse_sign_class(name);
    if (!c) fail(fmt::format("unknown sign class '{}'", name));
    return *c;
}

LightState read_light_state(const std::string& s) {
    if (s == "red") return LightState::Red;
    if (s == "green") return LightState::Green;
    if (s == "off" || s == "none") return LightState::None;
    fail(fmt::format("unknown light state '{}'", s));
}

void apply_gains(const json& j, Gains& g) {
    if (j.contains("stanley")) {
        const auto& s = j["stanley"];
        g.stanley.k_he = get_or(s, "k_he", g.stanley.k_he);
        g.stanley.k_ce = get_or(s, "k_ce", g.stanley.k_ce);
        g.stanley.k_s = get_or(s, "k_s", g.stanley.k_s);
    }
    if (j.contains("pid")) {
        const auto& s = j["pid"];
        g.pid.k_p = get_or(s, "k_p", g.pid.k_p);
        g.pid.k_i = get_or(s, "k_i", g.pid.k_i);
        g.pid.k_d = get_or(s, "k_d", g.pid.k_d);
        g.pid.integral_limit = get_or(s, "integral_limit", g.pid.integral_limit);
    }
    if (j.contains("pure_pursuit")) {
        g.pure_pursuit.k_pp = get_or(j["pure_pursuit"], "k_pp", g.pure_pursuit.k_pp);
    }
    if (j.contains("speed")) {
        const auto& s = j["speed"];
        g.speed.cruise_mps = get_or(s, "cruise", g.speed.cruise_mps);
        g.speed.curvature_gain = get_or(s, "curvature_gain", g.speed.curvature_gain);
        g.speed.obstacle_gain = get_or(s, "obstacle_gain", g.speed.obstacle_gain);
        g.speed.obstacle_stop_m = get_or(s, "obstacle_stop", g.speed.obstacle_stop_m);
    }
    g.stanley.validate();
    g.pid.validate();
    g.pure_pursuit.validate();
    g.speed.validate();
}

SensorNoise read_noise(const json& j) {
    SensorNoise n;
    n.lane_sigma_px = get_or(j, "lane_sigma_px", 0.0);
    n.lane_dropout_left = get_or(j, "lane_dropout_left", 0.0);
    n.lane_dropout_right = get_or(j, "lane_dropout_right", 0.0);
    n.lane_outlier_prob = get_or(j, "lane_outlier_prob", 0.0);
    n.range_sigma_m = get_or(j, "range_sigma_m", 0.0);
    n.gyro_bias_rps = get_or(j, "gyro_bias_rps", 0.0);
    n.gyro_sigma_rps = get_or(j, "gyro_sigma_rps", 0.0);
    n.detection_sigma_px = get_or(j, "detection_sigma_px", 0.0);
    n.validate();
    return n;
}

json parse_json(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(fmt::format("{}: invalid JSON: {}", what, e.what()));
    }
}

}  // namespace

LightState TrafficLightSpec::state_at(double t) const {
    for (const auto& phase : schedule) {
        if (!phase.until_s || t < *phase.until_s) return phase.state;
    }
    return schedule.empty() ? LightState::None : schedule.back().state;
}

void SensorNoise::validate() const {
    for (double sigma : {lane_sigma_px, range_sigma_m, gyro_sigma_rps, detection_sigma_px}) {
        if (!(sigma >= 0.0)) throw std::runtime_error("noise: sigmas must be >= 0");
    }
    for (double p : {lane_dropout_left, lane_dropout_right, lane_outlier_prob}) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::runtime_error("noise: probabilities must be in [0, 1]");
    }
    if (!std::isfinite(gyro_bias_rps)) throw std::runtime_error("noise: gyro bias must be finite");
}

double default_sign_height_mm(SignClass c) {
    switch (c) {
        case SignClass::TrafficLightRed:
        case SignClass::TrafficLightGreen:
            return 120.0;
        default:
            return 100.0;
    }
}

void Scenario::validate() const {
    vehicle.validate();
    if (!(dt_s > 0.0) || !(duration_s > 0.0)) fail("dt and duration must be > 0");
    if (!(fusion_weight >= 0.0 && fusion_weight <= 1.0)) fail("fusion_weight must be in [0, 1]");
    gains.stanley.validate();
    gains.pid.validate();
    gains.pure_pursuit.validate();
    gains.speed.validate();
    noise.validate();
    camera.validate();
    range_correction.validate();
    grid.validate();
    parking.validate();
    intersection.validate();
    for (double h : catalog_mm) {
        if (!(h > 0.0)) fail("sign catalog heights must be > 0");
    }
}

Scenario parse_scenario(const std::string& json_text) {
    const json j = parse_json(json_text, "scenario");
    if (!j.is_object()) fail("top level must be an object");
    const auto schema = get_or<std::string>(j, "schema", "");
    if (schema != kScenarioSchema) {
        fail(fmt::format("unsupported schema '{}' (expected '{}')", schema, kScenarioSchema));
    }

    Scenario sc;
    sc.name = get_or<std::string>(j, "name", "unnamed");
    sc.description = get_or<std::string>(j, "description", "");

    if (j.contains("vehicle")) {
        const auto& v = j["vehicle"];
        sc.vehicle.wheelbase_m = get_or(v, "wheelbase", sc.vehicle.wheelbase_m);
        sc.vehicle.max_speed_mps = get_or(v, "max_speed", sc.vehicle.max_speed_mps);
        sc.vehicle.max_steer_rad = get_or(v, "max_steer", sc.vehicle.max_steer_rad);
        sc.vehicle.overall_length_m = get_or(v, "length", sc.vehicle.overall_length_m);
        sc.vehicle.overall_width_m = get_or(v, "width", sc.vehicle.overall_width_m);
    }
    sc.vehicle.validate();

    if (!j.contains("road")) fail("missing 'road'");
    const auto& r = j["road"];
    std::vector<RoadSegment> segments;
    for (const auto& s : r.value("segments", json::array())) {
        const auto type = get_or<std::string>(s, "type", "");
        RoadSegment seg;
        seg.markings = get_or(s, "markings", true);
        if (type == "line") {
            seg.length_m = get_or(s, "length", 0.0);
        } else if (type == "arc") {
            const double radius = get_or(s, "radius", 0.0);
            const double angle = deg(get_or(s, "angle_deg", 0.0));
            if (!(radius > 0.0) || angle == 0.0) fail("arc needs radius > 0 and a nonzero angle");
            seg.length_m = radius * std::abs(angle);
            seg.curvature_per_m = (angle > 0.0 ? 1.0 : -1.0) / radius;
        } else {
            fail(fmt::format("unknown segment type '{}'", type));
        }
        segments.push_back(seg);
    }
    try {
        sc.road = Road(r.contains("start") ? read_pose(r["start"]) : VehicleState{}, segments,
                       get_or(r, "lane_width", 0.70), get_or(r, "half_width", 0.90));
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }

    sc.initial = j.contains("initial_state") ? read_pose(j["initial_state"]) : sc.road.pose_at(0.0);
    sc.dt_s = get_or(j, "dt", sc.dt_s);
    sc.duration_s = get_or(j, "duration", sc.duration_s);
    sc.seed = get_or<std::uint64_t>(j, "seed", sc.seed);
    sc.fusion_weight = get_or(j, "fusion_weight", sc.fusion_weight);

    for (auto c : kAllSignClasses) {
        sc.catalog_mm[static_cast<std::size_t>(c)] = default_sign_height_mm(c);
    }
    if (j.contains("sign_catalog")) {
        for (const auto& [name, h] : j["sign_catalog"].items()) {
            const auto c = parse_sign_class(name);
            if (!c) fail(fmt::format("unknown sign class '{}' in sign_catalog", name));
            sc.catalog_mm[static_cast<std::size_t>(*c)] = h.get<double>();
        }
    }

    for (const auto& o : j.value("obstacles", json::array())) sc.obstacles.push_back(read_box(o));
    for (const auto& b : j.value("parking_bays", json::array())) sc.parking_bays.push_back(read_box(b));
    for (const auto& s : j.value("signs", json::array())) {
        SignSpec spec;
        spec.sign_class = read_class(s);
        spec.position = read_point(s, "position");
        spec.height_mm = get_or(s, "height_mm", sc.known_height_mm(spec.sign_class));
        sc.signs.push_back(spec);
    }
    for (const auto& l : j.value("traffic_lights", json::array())) {
        TrafficLightSpec spec;
        spec.position = read_point(l, "position");
        spec.height_mm = get_or(l, "height_mm", sc.known_height_mm(SignClass::TrafficLightRed));
        for (const auto& p : l.value("schedule", json::array())) {
            LightPhase phase;
            phase.state = read_light_state(get_or<std::string>(p, "state", ""));
            if (p.contains("until")) phase.until_s = p["until"].get<double>();
            spec.schedule.push_back(phase);
        }
        sc.lights.push_back(spec);
    }

    if (j.contains("gains")) apply_gains(j["gains"], sc.gains);
    if (j.contains("noise")) sc.noise = read_noise(j["noise"]);

    if (j.contains("map")) {
        const auto& m = j["map"];
        sc.grid.cell_size_m = get_or(m, "cell_size", sc.grid.cell_size_m);
        if (m.contains("origin")) sc.grid.origin = read_point(m, "origin");
        sc.grid.width_cells = get_or(m, "width_cells", sc.grid.width_cells);
        sc.grid.height_cells = get_or(m, "height_cells", sc.grid.height_cells);
        sc.grid.margin = get_or(m, "margin", sc.grid.margin);
        sc.grid.counter_cap = get_or(m, "counter_cap", sc.grid.counter_cap);
    }

    sc.parking = ParkingConfig::for_vehicle(sc.vehicle);
    if (j.contains("parking")) {
        const auto& p = j["parking"];
        sc.parking.bay_lateral_offset_m = get_or(p, "bay_lateral_offset", sc.parking.bay_lateral_offset_m);
        sc.parking.bay_side = get_or(p, "bay_side", sc.parking.bay_side);
        sc.parking.scan_length_m = get_or(p, "scan_length", sc.parking.scan_length_m);
        sc.parking.trigger_distance_m = get_or(p, "trigger_distance", sc.parking.trigger_distance_m);
        sc.parking.park_dwell_s = get_or(p, "park_dwell", sc.parking.park_dwell_s);
    }
    sc.intersection.wheelbase_m = sc.vehicle.wheelbase_m;
    sc.intersection.camera_ahead_m = sc.rig.sign_camera_ahead_m;
    if (j.contains("intersection")) {
        const auto& p = j["intersection"];
        sc.intersection.turn_radius_m = get_or(p, "turn_radius", sc.intersection.turn_radius_m);
        sc.intersection.stop_offset_m = get_or(p, "stop_offset", sc.intersection.stop_offset_m);
        sc.intersection.straight_cross_m = get_or(p, "straight_cross", sc.intersection.straight_cross_m);
        sc.intersection.min_wait_s = get_or(p, "min_wait", sc.intersection.min_wait_s);
    }
    sc.sign_reactions.camera_ahead_m = sc.rig.sign_camera_ahead_m;
    if (j.contains("range_correction")) {
        sc.range_correction.coefficient = get_or(j["range_correction"], "coefficient", 1.0);
        sc.range_correction.intercept_mm = get_or(j["range_correction"], "intercept_mm", 0.0);
    }

    try {
        sc.validate();
    } catch (const std::invalid_argument& e) {
        fail(e.what());
    }
    return sc;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Scenario load_scenario(const std::filesystem::path& path) {
    return parse_scenario(read_text_file(path));
}

Gains parse_gains(const std::string& json_text, Gains base) {
    const json j = parse_json(json_text, "gains");
    try {
        apply_gains(j, base);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("gains: ") + e.what());
    }
    return base;
}

SensorNoise parse_noise(const std::string& json_text) {
    return read_noise(parse_json(json_text, "noise"));
}

std::filesystem::path bundled_scenario_dir() {
    if (const char* env = std::getenv("MINICAR_SCENARIO_DIR"); env && *env) return env;
    return MINICAR_SCENARIO_DIR;
}

std::vector<std::string> bundled_scenarios() {
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& e : std::filesystem::directory_iterator(bundled_scenario_dir(), ec)) {
        if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
    }
    std::sort(names.begin(), names.end());
    return names;
}

std::filesystem::path resolve_scenario(const std::string& name_or_path) {
    const std::filesystem::path direct(name_or_path);
    if (std::filesystem::is_regular_file(direct)) return direct;
    const auto bundled = bundled_scenario_dir() / (name_or_path + ".json");
    if (std::filesystem::is_regular_file(bundled)) return bundled;
    throw std::runtime_error(fmt::format("no scenario file or bundled scenario named '{}'", name_or_path));
}

}  // namespace minicar::sim
