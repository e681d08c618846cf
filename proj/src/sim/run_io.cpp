#include "minicar/sim/run_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "json.hpp"

namespace minicar::sim {

namespace {

std::string real(double v) { return fmt::format("{:.9g}", v); }

std::string opt_real(const std::optional<double>& v) { return v ? real(*v) : std::string(); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&':
                out += "&amp;";
                break;
            case '<':
                out += "&lt;";
                break;
            case '>':
                out += "&gt;";
                break;
            case '"':
                out += "&quot;";
                break;
            default:
                out += c;
        }
    }
    return out;
}

struct View {
    double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
    double scale = 100.0;  // px per meter

    void include(double x, double y) {
        min_x = std::min(min_x, x);
        min_y = std::min(min_y, y);
        max_x = std::max(max_x, x);
        max_y = std::max(max_y, y);
    }
    double px(double x) const { return (x - min_x) * scale; }
    double py(double y) const { return (max_y - y) * scale; }
    std::string pt(double x, double y) const { return fmt::format("{:.2f},{:.2f}", px(x), py(y)); }
};

std::string box_points(const Box& b, const View& v) {
    const double c = std::cos(b.yaw_rad);
    const double s = std::sin(b.yaw_rad);
    const double hl = 0.5 * b.length_m;
    const double hw = 0.5 * b.width_m;
    std::string out;
    const double sx[4] = {1, 1, -1, -1};
    const double sy[4] = {1, -1, -1, 1};
    for (int i = 0; i < 4; ++i) {
        if (i) out += ' ';
        out += v.pt(b.center.x + sx[i] * hl * c - sy[i] * hw * s,
                    b.center.y + sx[i] * hl * s + sy[i] * hw * c);
    }
    return out;
}

void open_for_write(std::ofstream& f, const std::filesystem::path& p) {
    f.open(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", p.string()));
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<StepRecord>& steps) {
    for (std::size_t i = 0; i < kCsvColumns.size(); ++i) {
        if (i) out << ',';
        out << kCsvColumns[i];
    }
    out << '\n';
    for (const auto& r : steps) {
        out << r.step << ',' << real(r.t_s) << ',' << real(r.truth.x_m) << ',' << real(r.truth.y_m)
            << ',' << real(r.truth.theta_rad) << ',' << real(r.estimate.x_m) << ','
            << real(r.estimate.y_m) << ',' << real(r.estimate.theta_rad) << ',' << opt_real(r.ce_m)
            << ',' << opt_real(r.he_rad) << ',' << real(r.steer_cmd_rad) << ','
            << real(r.speed_cmd_mps) << ',' << controller_name(r.controller) << ','
            << parking_node_name(r.parking) << ',' << intersection_node_name(r.intersection) << ','
            << (r.flags.hazard_lights ? 1 : 0) << ',' << (r.flags.headlights ? 1 : 0) << ','
            << opt_real(r.nearest_obstacle_m) << '\n';
    }
}

void write_transitions(std::ostream& out, const std::vector<TransitionRecord>& transitions) {
    out << "step,machine,from,to,cause\n";
    for (const auto& t : transitions) {
        out << t.step << ',' << csv_field(t.machine) << ',' << csv_field(t.transition.from) << ','
            << csv_field(t.transition.to) << ',' << csv_field(t.transition.cause) << '\n';
    }
}

void write_svg(std::ostream& out, const Scenario& sc, const RunResult& run) {
    View v;
    const auto first = sc.road.pose_at(0.0);
    v.min_x = v.max_x = first.x_m;
    v.min_y = v.max_y = first.y_m;
    const double half_lane = 0.5 * sc.road.lane_width_m();
    const int samples = std::max(2, static_cast<int>(std::ceil(sc.road.length_m() / 0.05)));
    for (int i = 0; i <= samples; ++i) {
        const double s = sc.road.length_m() * i / samples;
        for (double lat : {-sc.road.half_width_m(), sc.road.half_width_m()}) {
            const auto p = sc.road.offset_point(s, lat);
            v.include(p.x, p.y);
        }
    }
    for (const auto& r : run.steps) v.include(r.truth.x_m, r.truth.y_m);
    for (const auto& o : sc.obstacles) {
        const double reach = 0.5 * std::hypot(o.length_m, o.width_m);
        v.include(o.center.x - reach, o.center.y - reach);
        v.include(o.center.x + reach, o.center.y + reach);
    }
    v.min_x -= 0.5;
    v.min_y -= 0.5;
    v.max_x += 0.5;
    v.max_y += 0.5;

    const double w = (v.max_x - v.min_x) * v.scale;
    const double h = (v.max_y - v.min_y) * v.scale;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" height=\"{:.0f}\" "
        "viewBox=\"0 0 {:.2f} {:.2f}\">\n",
        w, h, w, h);
    out << fmt::format("  <title>{} ({})</title>\n", xml_escape(sc.name),
                       controller_name(run.controller));
    out << "  <rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"#fafafa\"/>\n";

    auto road_line = [&](double lat, bool only_marked, const char* style) {
        std::string d;
        bool pen = false;
        for (int i = 0; i <= samples; ++i) {
            const double s = sc.road.length_m() * i / samples;
            if (only_marked && !sc.road.marked_at(s)) {
                pen = false;
                continue;
            }
            const auto p = sc.road.offset_point(s, lat);
            d += fmt::format("{}{} ", pen ? "L" : "M", v.pt(p.x, p.y));
            pen = true;
        }
        if (!d.empty()) out << fmt::format("  <path d=\"{}\" {}/>\n", d, style);
    };
    out << "  <g id=\"road\">\n";
    road_line(sc.road.half_width_m(), false, "fill=\"none\" stroke=\"#999\" stroke-width=\"1\"");
    road_line(-sc.road.half_width_m(), false, "fill=\"none\" stroke=\"#999\" stroke-width=\"1\"");
    road_line(half_lane, true, "fill=\"none\" stroke=\"#333\" stroke-width=\"2\"");
    road_line(-half_lane, true, "fill=\"none\" stroke=\"#333\" stroke-width=\"2\"");
    road_line(0.0, false,
              "fill=\"none\" stroke=\"#bbb\" stroke-width=\"1\" stroke-dasharray=\"6,6\"");
    out << "  </g>\n";

    out << "  <g id=\"obstacles\">\n";
    for (const auto& b : sc.parking_bays) {
        out << fmt::format("    <polygon points=\"{}\" fill=\"none\" stroke=\"#2a7\" "
                           "stroke-dasharray=\"4,3\"/>\n",
                           box_points(b, v));
    }
    for (const auto& o : sc.obstacles) {
        out << fmt::format("    <polygon points=\"{}\" fill=\"#c66\" fill-opacity=\"0.6\" "
                           "stroke=\"#933\"/>\n",
                           box_points(o, v));
    }
    out << "  </g>\n";

    out << "  <g id=\"signs\" font-family=\"sans-serif\" font-size=\"10\">\n";
    for (const auto& s : sc.signs) {
        out << fmt::format("    <circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\" fill=\"#36c\"/>\n",
                           v.px(s.position.x), v.py(s.position.y));
        out << fmt::format("    <text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", v.px(s.position.x) + 6,
                           v.py(s.position.y) + 4, xml_escape(sign_class_name(s.sign_class)));
    }
    for (const auto& l : sc.lights) {
        out << fmt::format("    <rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"8\" height=\"8\" "
                           "fill=\"#e93\"/>\n",
                           v.px(l.position.x) - 4, v.py(l.position.y) - 4);
    }
    out << "  </g>\n";

    auto path = [&](const char* id, const char* color, bool use_truth) {
        std::string pts;
        for (const auto& r : run.steps) {
            const auto& p = use_truth ? r.truth : r.estimate;
            if (!pts.empty()) pts += ' ';
            pts += v.pt(p.x_m, p.y_m);
        }
        out << fmt::format("  <polyline id=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{}\" "
                           "stroke-width=\"1.5\"/>\n",
                           id, pts, color);
    };
    path("truth", "#1a1", true);
    path("estimate", "#d2a", false);

    out << "  <g id=\"annotations\" font-family=\"sans-serif\" font-size=\"9\" fill=\"#222\">\n";
    for (const auto& t : run.transitions) {
        if (t.transition.to.empty() || t.machine == "signs") continue;
        if (t.step < 0 || static_cast<std::size_t>(t.step) >= run.steps.size()) continue;
        const auto& p = run.steps[static_cast<std::size_t>(t.step)].truth;
        out << fmt::format("    <circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"#000\"/>\n",
                           v.px(p.x_m), v.py(p.y_m));
        out << fmt::format("    <text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", v.px(p.x_m) + 4,
                           v.py(p.y_m) - 4, xml_escape(t.transition.to));
    }
    out << "  </g>\n";
    out << "</svg>\n";
}

void write_summary(std::ostream& out, const Scenario& sc, const RunResult& run) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["scenario"] = sc.name;
    j["controller"] = std::string(controller_name(run.controller));
    j["seed"] = run.seed;
    j["dt"] = run.dt_s;
    j["steps"] = run.steps.size();
    j["outcome"] = std::string(outcome_name(run.outcome));
    if (!run.failure.empty()) j["failure"] = run.failure;
    j["final_pose"] = {{"x", run.final_truth.x_m},
                       {"y", run.final_truth.y_m},
                       {"theta", run.final_truth.theta_rad}};
    j["final_estimate"] = {{"x", run.final_estimate.x_m},
                           {"y", run.final_estimate.y_m},
                           {"theta", run.final_estimate.theta_rad}};
    j["parking_node"] = std::string(parking_node_name(run.parking.node));
    j["intersection_node"] = std::string(intersection_node_name(run.intersection.node));
    j["turn_deltas_deg"] = ordered_json::array();
    for (double d : run.turn_deltas_rad) j["turn_deltas_deg"].push_back(d * 180.0 / kPi);

    double sum = 0.0, peak = 0.0;
    std::size_t n = 0;
    for (const auto& r : run.steps) {
        if (!r.ce_m) continue;
        sum += std::abs(*r.ce_m);
        peak = std::max(peak, std::abs(*r.ce_m));
        ++n;
    }
    j["ce_mean_abs_m"] = n ? sum / static_cast<double>(n) : 0.0;
    j["ce_max_abs_m"] = peak;
    j["transitions"] = run.transitions.size();
    j["occupied_cells"] = run.grid.occupied_cells().size();
    out << j.dump(2) << '\n';
}

void write_pgm(std::ostream& out, const GridMap& grid) {
    const auto& cfg = grid.config();
    out << "P5\n" << cfg.width_cells << ' ' << cfg.height_cells << "\n255\n";
    std::string row(static_cast<std::size_t>(cfg.width_cells), '\0');
    for (int iy = cfg.height_cells - 1; iy >= 0; --iy) {
        for (int ix = 0; ix < cfg.width_cells; ++ix) {
            unsigned char px = 128;
            switch (grid.state({ix, iy})) {
                case CellState::Free:
                    px = 255;
                    break;
                case CellState::Occupied:
                    px = 0;
                    break;
                case CellState::Unknown:
                    break;
            }
            row[static_cast<std::size_t>(ix)] = static_cast<char>(px);
        }
        out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
}

void write_pgm_header(std::ostream& out, const GridMap& grid) {
    const auto& cfg = grid.config();
    out << fmt::format("origin_x {:.9g}\norigin_y {:.9g}\ncell_size {:.9g}\nwidth_cells {}\n"
                       "height_cells {}\nmargin {}\ncounter_cap {}\n"
                       "encoding unknown=128 free=255 occupied=0\nrow0 top\n",
                       cfg.origin.x, cfg.origin.y, cfg.cell_size_m, cfg.width_cells,
                       cfg.height_cells, cfg.margin, cfg.counter_cap);
}

void write_run(const std::filesystem::path& dir, const Scenario& sc, const RunResult& run) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
    std::ofstream f;
    open_for_write(f, dir / "log.csv");
    write_csv(f, run.steps);
    f.close();
    open_for_write(f, dir / "transitions.csv");
    write_transitions(f, run.transitions);
    f.close();
    open_for_write(f, dir / "run.svg");
    write_svg(f, sc, run);
    f.close();
    open_for_write(f, dir / "grid.txt");
    run.grid.write(f);
    f.close();
    open_for_write(f, dir / "summary.json");
    write_summary(f, sc, run);
    f.close();
    if (!f) throw std::runtime_error(fmt::format("error writing run files in '{}'", dir.string()));
}

}  // namespace minicar::sim
