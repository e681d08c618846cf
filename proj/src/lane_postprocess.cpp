#include "minicar/lane_postprocess.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

namespace minicar {

namespace {

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
};

// Least-squares line lateral = intercept + slope * forward over the points with
// use[i] set. Degenerate (single forward position) sets give a horizontal line
// through the mean.
LineFit fit_line(std::span<const BevPoint> pts, const std::vector<bool>& use) {
    double n = 0.0, mean_s = 0.0, mean_x = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!use[i]) continue;
        n += 1.0;
        mean_s += pts[i].forward_m;
        mean_x += pts[i].lateral_m;
    }
    mean_s /= n;
    mean_x /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!use[i]) continue;
        const double ds = pts[i].forward_m - mean_s;
        sxx += ds * ds;
        sxy += ds * (pts[i].lateral_m - mean_x);
    }
    LineFit fit;
    fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    fit.intercept = mean_x - fit.slope * mean_s;
    return fit;
}

double residual(const LineFit& f, const BevPoint& p) {
    return p.lateral_m - (f.intercept + f.slope * p.forward_m);
}

// Residual spread of the used points about `fit`, floored at min_sigma.
double spread(std::span<const BevPoint> pts, const std::vector<bool>& use, const LineFit& fit,
              double min_sigma) {
    double ss = 0.0, n = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!use[i]) continue;
        const double r = residual(fit, pts[i]);
        ss += r * r;
        n += 1.0;
    }
    return std::max(std::sqrt(ss / n), min_sigma);
}

struct PolyFit {
    std::array<double, 3> coeffs{0.0, 0.0, 0.0};
    double rms = 0.0;
};

PolyFit least_squares(std::span<const BevPoint> pts, int degree) {
    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd a(n, degree + 1);
    Eigen::VectorXd b(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double s = pts[static_cast<std::size_t>(i)].forward_m;
        double p = 1.0;
        for (int d = 0; d <= degree; ++d) {
            a(i, d) = p;
            p *= s;
        }
        b(i) = pts[static_cast<std::size_t>(i)].lateral_m;
    }
    const Eigen::VectorXd c = a.colPivHouseholderQr().solve(b);
    PolyFit out;
    for (int d = 0; d <= degree; ++d) {
        out.coeffs[static_cast<std::size_t>(d)] = c(d);
    }
    out.rms = std::sqrt((a * c - b).squaredNorm() / static_cast<double>(n));
    return out;
}

}  // namespace

void BevConfig::validate() const {
    if (!(px_per_meter > 0.0) || !(roi_length_m > 0.0) || !(roi_width_m > 0.0)) {
        throw std::invalid_argument("BevConfig: scale and ROI extents must be > 0");
    }
}

std::vector<BevPoint> to_bev(std::span<const ImagePoint> points, int width_px, int height_px,
                             const BevConfig& cfg) {
    std::vector<BevPoint> out;
    out.reserve(points.size());
    const double half_width = 0.5 * cfg.roi_width_m;
    for (const auto& p : points) {
        if (!(p.u_px >= 0.0 && p.u_px < width_px && p.v_px >= 0.0 && p.v_px < height_px)) {
            continue;
        }
        if (p.v_px < cfg.horizon_row_px) {
            continue;
        }
        const BevPoint m{(static_cast<double>(height_px - 1) - p.v_px) / cfg.px_per_meter,
                         (p.u_px - 0.5 * width_px) / cfg.px_per_meter};
        if (m.forward_m < 0.0 || m.forward_m > cfg.roi_length_m ||
            std::abs(m.lateral_m) > half_width) {
            continue;
        }
        out.push_back(m);
    }
    return out;
}

BevPoints to_bev(const LanePoints& points, const BevConfig& cfg) {
    return {to_bev(points.left, points.width_px, points.height_px, cfg),
            to_bev(points.right, points.width_px, points.height_px, cfg)};
}

ImagePoint from_bev(const BevPoint& point, int width_px, int height_px, const BevConfig& cfg) {
    return {0.5 * width_px + point.lateral_m * cfg.px_per_meter,
            static_cast<double>(height_px - 1) - point.forward_m * cfg.px_per_meter};
}

double LanePolynomial::lateral_at(double s) const {
    return coeffs[0] + s * (coeffs[1] + s * coeffs[2]);
}

double LanePolynomial::slope_at(double s) const { return coeffs[1] + 2.0 * coeffs[2] * s; }

LanePolynomial LanePolynomial::shifted(double lateral_offset_m) const {
    LanePolynomial out = *this;
    out.coeffs[0] += lateral_offset_m;
    return out;
}

std::vector<BevPoint> filter_outliers(std::span<const BevPoint> points, double k_sigma,
                                      double min_sigma_m) {
    if (!(k_sigma > 0.0)) {
        throw std::invalid_argument("filter_outliers: k_sigma must be > 0");
    }
    const std::size_t n = points.size();
    if (n < 4) {
        return {points.begin(), points.end()};
    }
    // Screen each point against the fit of all the others, then confirm the
    // screened points against the fit of the unscreened ones.
    std::vector<double> score(n, 0.0);
    std::vector<bool> use(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        use[i] = false;
        const LineFit fit = fit_line(points, use);
        const double sigma = spread(points, use, fit, min_sigma_m);
        use[i] = true;
        const double r = std::abs(residual(fit, points[i]));
        if (r > k_sigma * sigma) {
            score[i] = sigma > 0.0 ? r / sigma : std::numeric_limits<double>::infinity();
        }
    }
    std::vector<bool> clean(n);
    std::size_t n_clean = 0;
    for (std::size_t i = 0; i < n; ++i) {
        clean[i] = score[i] == 0.0;
        n_clean += clean[i] ? 1 : 0;
    }
    if (n_clean >= 2) {
        const LineFit fit = fit_line(points, clean);
        const double sigma = spread(points, clean, fit, min_sigma_m);
        for (std::size_t i = 0; i < n; ++i) {
            if (clean[i]) continue;
            const double r = std::abs(residual(fit, points[i]));
            if (r <= k_sigma * sigma) score[i] = 0.0;
        }
    }
    std::vector<std::size_t> flagged;
    for (std::size_t i = 0; i < n; ++i) {
        if (score[i] > 0.0) flagged.push_back(i);
    }
    const std::size_t max_removed = n / 2;
    if (flagged.size() > max_removed) {
        std::stable_sort(flagged.begin(), flagged.end(),
                         [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
        flagged.resize(max_removed);
    }
    std::vector<bool> drop(n, false);
    for (auto i : flagged) drop[i] = true;
    std::vector<BevPoint> out;
    out.reserve(n - flagged.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (!drop[i]) out.push_back(points[i]);
    }
    return out;
}

std::optional<LanePolynomial> fit_lane(std::span<const BevPoint> points, LaneSource source) {
    if (points.size() < 2) {
        return std::nullopt;
    }
    const auto [lo, hi] = std::minmax_element(
        points.begin(), points.end(),
        [](const BevPoint& a, const BevPoint& b) { return a.forward_m < b.forward_m; });
    if (!(hi->forward_m > lo->forward_m)) {
        return std::nullopt;
    }
    LanePolynomial poly;
    poly.source = source;
    poly.s_min = lo->forward_m;
    poly.s_max = hi->forward_m;

    const PolyFit line = least_squares(points, 1);
    poly.coeffs = line.coeffs;
    poly.degree = 1;
    if (points.size() >= 5) {
        double scale = 1.0;
        for (const auto& p : points) scale = std::max(scale, std::abs(p.lateral_m));
        // A line that already fits to rounding level stays a line.
        if (line.rms > 1e-12 * scale) {
            const PolyFit quad = least_squares(points, 2);
            if (quad.rms <= 0.8 * line.rms) {
                poly.coeffs = quad.coeffs;
                poly.degree = 2;
            }
        }
    }
    return poly;
}

std::string_view provenance_name(MiddleProvenance p) {
    switch (p) {
        case MiddleProvenance::BothAveraged:
            return "both_averaged";
        case MiddleProvenance::LeftShifted:
            return "left_shifted";
        case MiddleProvenance::RightShifted:
            return "right_shifted";
        case MiddleProvenance::HeldFromHistory:
            return "held_from_history";
        case MiddleProvenance::Lost:
            return "lost";
    }
    return "unknown";
}

void MiddleLineConfig::validate() const {
    if (!(lane_width_m > 0.0)) {
        throw std::invalid_argument("MiddleLineConfig: lane_width_m must be > 0");
    }
    if (hold_limit < 0) {
        throw std::invalid_argument("MiddleLineConfig: hold_limit must be >= 0");
    }
}

MiddleLineState middle_line(const std::optional<LanePolynomial>& left,
                            const std::optional<LanePolynomial>& right,
                            const MiddleLineState& prev, const MiddleLineConfig& cfg) {
    cfg.validate();
    const double half = 0.5 * cfg.lane_width_m;
    MiddleLineState next;
    if (left && right) {
        LanePolynomial mid;
        for (std::size_t i = 0; i < 3; ++i) {
            mid.coeffs[i] = 0.5 * (left->coeffs[i] + right->coeffs[i]);
        }
        mid.degree = std::max(left->degree, right->degree);
        mid.s_min = std::min(left->s_min, right->s_min);
        mid.s_max = std::max(left->s_max, right->s_max);
        next.current = mid;
        next.provenance = MiddleProvenance::BothAveraged;
    } else if (left) {
        next.current = left->shifted(+half);
        next.provenance = MiddleProvenance::LeftShifted;
    } else if (right) {
        next.current = right->shifted(-half);
        next.provenance = MiddleProvenance::RightShifted;
    } else {
        if (!prev.current || prev.age_frames + 1 > cfg.hold_limit) {
            next.age_frames = prev.age_frames + 1;
            next.provenance = MiddleProvenance::Lost;
            return next;
        }
        next.current = prev.current;
        next.age_frames = prev.age_frames + 1;
        next.provenance = MiddleProvenance::HeldFromHistory;
        return next;
    }
    next.current->source = LaneSource::Middle;
    next.age_frames = 0;
    return next;
}

PathError path_error(const LanePolynomial& middle) {
    return {middle.lateral_at(0.0), std::atan(middle.slope_at(0.0))};
}

double path_curvature(const LanePolynomial& middle) {
    const double d1 = middle.slope_at(0.0);
    return std::abs(middle.second_derivative()) / std::pow(1.0 + d1 * d1, 1.5);
}

LaneFrameResult process_lane_frame(const LanePoints& points, const MiddleLineState& prev,
                                   const LanePipelineConfig& cfg) {
    const BevPoints bev = to_bev(points, cfg.bev);
    const auto left_pts = filter_outliers(bev.left, cfg.outlier_k_sigma, cfg.outlier_min_sigma_m);
    const auto right_pts =
        filter_outliers(bev.right, cfg.outlier_k_sigma, cfg.outlier_min_sigma_m);
    LaneFrameResult out;
    out.left = fit_lane(left_pts, LaneSource::Left);
    out.right = fit_lane(right_pts, LaneSource::Right);
    out.middle = middle_line(out.left, out.right, prev, cfg.middle);
    if (out.middle.current) {
        out.error = path_error(*out.middle.current);
        out.curvature_per_m = path_curvature(*out.middle.current);
    }
    return out;
}

std::map<int, LanePoints> read_lane_replay(std::istream& in, int width_px, int height_px) {
    std::map<int, LanePoints> frames;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1 && line.find("frame_id") != std::string::npos) continue;
        std::stringstream ss(line);
        std::string frame, side, u, v;
        if (!std::getline(ss, frame, ',') || !std::getline(ss, side, ',') ||
            !std::getline(ss, u, ',') || !std::getline(ss, v, ',')) {
            throw std::runtime_error("lane replay: malformed row at line " +
                                     std::to_string(line_no));
        }
        try {
            auto& lp = frames[std::stoi(frame)];
            lp.width_px = width_px;
            lp.height_px = height_px;
            const ImagePoint p{std::stod(u), std::stod(v)};
            if (side == "left") {
                lp.left.push_back(p);
            } else if (side == "right") {
                lp.right.push_back(p);
            } else {
                throw std::runtime_error("unknown side '" + side + "'");
            }
        } catch (const std::logic_error& e) {
            throw std::runtime_error("lane replay: bad value at line " +
                                     std::to_string(line_no) + ": " + e.what());
        }
    }
    return frames;
}

}  // namespace minicar
