#ifndef MINICAR_SIM_RUN_IO_HPP
#define MINICAR_SIM_RUN_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "minicar/grid_map.hpp"
#include "minicar/sim/scenario.hpp"
#include "minicar/sim/simulator.hpp"

namespace minicar::sim {

/// Column order of the step log.
inline constexpr std::array<const char*, 18> kCsvColumns{
    "step",      "t",           "x_true",   "y_true",       "theta_true",      "x_est",
    "y_est",     "theta_est",   "ce",       "he",           "steer_cmd",       "speed_cmd",
    "controller", "parking_node", "intersection_node", "hazard", "headlights", "nearest_obstacle_m",
};

/// One row per step; reals use 9 significant digits and an absent value is an
/// empty field.
void write_csv(std::ostream& out, const std::vector<StepRecord>& steps);
void write_transitions(std::ostream& out, const std::vector<TransitionRecord>& transitions);
/// Top-down plot: road, obstacles, signs, true and estimated paths, transitions.
void write_svg(std::ostream& out, const Scenario& sc, const RunResult& run);
void write_summary(std::ostream& out, const Scenario& sc, const RunResult& run);

/// Grid as binary PGM: Unknown 128, Free 255, Occupied 0. Row 0 is the top
/// (largest y) so the image matches the plot orientation.
void write_pgm(std::ostream& out, const GridMap& grid);
/// Sidecar text for the PGM: origin, cell size and extent.
void write_pgm_header(std::ostream& out, const GridMap& grid);

/// Writes log.csv, transitions.csv, run.svg, grid.txt and summary.json into dir.
/// Throws std::runtime_error when a file cannot be written.
void write_run(const std::filesystem::path& dir, const Scenario& sc, const RunResult& run);

}  // namespace minicar::sim

#endif  // MINICAR_SIM_RUN_IO_HPP
