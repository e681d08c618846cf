// Command-line front end: run scenarios, dump maps, fit range corrections.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "minicar/grid_map.hpp"
#include "minicar/lane_postprocess.hpp"
#include "minicar/lateral_control.hpp"
#include "minicar/mono_range.hpp"
#include "minicar/sim/run_io.hpp"
#include "minicar/sim/scenario.hpp"
#include "minicar/sim/simulator.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitHalted = 2;
constexpr int kExitConfig = 3;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

int run_simulate(const std::string& scenario_arg, const std::string& controller_arg,
                 const std::string& gains_file, const std::string& noise_file,
                 const std::optional<double>& dt, const std::optional<double>& duration,
                 const std::optional<std::uint64_t>& seed, const std::string& out_dir) {
    using namespace minicar;
    sim::Scenario sc;
    sim::RunOptions opts;
    try {
        sc = sim::load_scenario(sim::resolve_scenario(scenario_arg));
        const auto kind = parse_controller(controller_arg);
        if (!kind) throw ConfigError(fmt::format("unknown controller '{}'", controller_arg));
        opts.controller = *kind;
        if (!gains_file.empty()) opts.gains = sim::parse_gains(sim::read_text_file(gains_file), sc.gains);
        if (!noise_file.empty()) opts.noise = sim::parse_noise(sim::read_text_file(noise_file));
        opts.dt_s = dt;
        opts.duration_s = duration;
        opts.seed = seed;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }

    sim::RunResult run;
    try {
        run = sim::simulate(sc, opts);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    sim::write_run(out_dir, sc, run);
    std::cout << fmt::format("{}: {} steps, {} ({}), parking={}, intersection={}\n", sc.name,
                             run.steps.size(), sim::outcome_name(run.outcome),
                             controller_name(run.controller), parking_node_name(run.parking.node),
                             intersection_node_name(run.intersection.node));
    if (run.outcome != sim::Outcome::Completed) {
        std::cerr << run.failure << '\n';
        return kExitHalted;
    }
    return kExitOk;
}

int run_map_dump(const std::string& run_dir, const std::string& out_file) {
    const std::filesystem::path dir(run_dir);
    std::ifstream in(dir / "grid.txt");
    if (!in) throw ConfigError(fmt::format("no grid.txt in '{}'", run_dir));
    const auto grid = minicar::GridMap::read(in);
    const std::filesystem::path pgm = out_file.empty() ? dir / "map.pgm" : std::filesystem::path(out_file);
    std::ofstream out(pgm, std::ios::binary);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", pgm.string()));
    minicar::sim::write_pgm(out, grid);
    auto header_path = pgm;
    header_path += ".txt";
    std::ofstream header(header_path);
    if (!header) throw std::runtime_error(fmt::format("cannot write '{}'", header_path.string()));
    minicar::sim::write_pgm_header(header, grid);
    std::cout << fmt::format("wrote {} ({} occupied cells)\n", pgm.string(), grid.occupied_cells().size());
    return kExitOk;
}

int run_calibrate(const std::string& samples_file, const std::string& out_file) {
    std::ifstream in(samples_file);
    if (!in) throw ConfigError(fmt::format("cannot open '{}'", samples_file));
    std::vector<std::pair<double, double>> samples;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',')) {
            throw ConfigError(fmt::format("{}:{}: expected estimated_mm,true_mm", samples_file, line_no));
        }
        try {
            samples.emplace_back(std::stod(a), std::stod(b));
        } catch (const std::exception&) {
            if (line_no == 1) continue;  // header row
            throw ConfigError(fmt::format("{}:{}: not a number", samples_file, line_no));
        }
    }
    minicar::RangeCorrection corr;
    try {
        corr = minicar::fit_correction(samples);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    nlohmann::ordered_json j;
    j["range_correction"] = {{"coefficient", corr.coefficient}, {"intercept_mm", corr.intercept_mm}};
    std::ofstream out(out_file);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", out_file));
    out << j.dump(2) << '\n';
    std::cout << fmt::format("coefficient {:.9g}, intercept {:.9g} mm from {} samples\n",
                             corr.coefficient, corr.intercept_mm, samples.size());
    return kExitOk;
}

int run_lane_replay(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError(fmt::format("cannot open '{}'", file));
    const minicar::LanePipelineConfig cfg;
    const auto frames = minicar::read_lane_replay(in, 640, 480);
    minicar::MiddleLineState middle;
    std::cout << "frame_id,provenance,age_frames,ce,he,curvature\n";
    for (const auto& [id, points] : frames) {
        const auto res = minicar::process_lane_frame(points, middle, cfg);
        middle = res.middle;
        std::cout << fmt::format("{},{},{},", id, minicar::provenance_name(middle.provenance),
                                 middle.age_frames);
        if (res.error) {
            std::cout << fmt::format("{:.9g},{:.9g},{:.9g}\n", res.error->cross_track_m,
                                     res.error->heading_err_rad, res.curvature_per_m);
        } else {
            std::cout << ",,\n";
        }
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Desk-scale autonomous car simulator"};
    app.require_subcommand(1);

    std::string scenario, controller = "stanley", gains, noise, out_dir;
    std::optional<double> dt, duration;
    std::optional<std::uint64_t> seed;
    auto* sim_cmd = app.add_subcommand("simulate", "Run a scenario in closed loop");
    sim_cmd->add_option("--scenario", scenario, "Scenario file or bundled scenario name")->required();
    sim_cmd->add_option("--controller", controller, "stanley | pid | pure-pursuit")
        ->check(CLI::IsMember({"stanley", "pid", "pure-pursuit"}));
    sim_cmd->add_option("--gains", gains, "JSON file overriding controller gains");
    sim_cmd->add_option("--dt", dt, "Time step [s]");
    sim_cmd->add_option("--duration", duration, "Run length [s]");
    sim_cmd->add_option("--seed", seed, "Noise seed");
    sim_cmd->add_option("--noise", noise, "JSON file with sensor noise settings");
    sim_cmd->add_option("--out", out_dir, "Output directory")->required();

    std::string run_dir, pgm_out;
    auto* dump_cmd = app.add_subcommand("map-dump", "Write a run's occupancy grid as PGM");
    dump_cmd->add_option("--run", run_dir, "Run output directory")->required();
    dump_cmd->add_option("--out", pgm_out, "PGM path (default <run>/map.pgm)");

    std::string samples, corr_out;
    auto* cal_cmd = app.add_subcommand("calibrate-range", "Fit the range correction regression");
    cal_cmd->add_option("--samples", samples, "CSV of estimated_mm,true_mm")->required();
    cal_cmd->add_option("--out", corr_out, "Output JSON fragment")->required();

    auto* list_cmd = app.add_subcommand("scenarios", "Bundled scenarios");
    auto* list_sub = list_cmd->add_subcommand("list", "List bundled scenario names");
    list_cmd->require_subcommand(1);

    std::string replay_file;
    auto* replay_cmd = app.add_subcommand("lane-replay", "Run the lane pipeline on recorded points");
    replay_cmd->add_option("--points", replay_file, "CSV of frame_id,side,u_px,v_px")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*sim_cmd) {
            return run_simulate(scenario, controller, gains, noise, dt, duration, seed, out_dir);
        }
        if (*dump_cmd) return run_map_dump(run_dir, pgm_out);
        if (*cal_cmd) return run_calibrate(samples, corr_out);
        if (*list_sub) {
            for (const auto& name : minicar::sim::bundled_scenarios()) {
                std::cout << name << '\n';
            }
            return kExitOk;
        }
        if (*replay_cmd) return run_lane_replay(replay_file);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return kExitOk;
}
