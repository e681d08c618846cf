#ifndef MINICAR_LANE_POSTPROCESS_HPP
#define MINICAR_LANE_POSTPROCESS_HPP

#include <array>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "minicar/lateral_control.hpp"

namespace minicar {

/// Sub-pixel image coordinate; u grows to the right, v grows downwards.
struct ImagePoint {
    double u_px = 0.0;
    double v_px = 0.0;
};

/// Per-frame output of the lane detector: points on the left and right lane lines.
struct LanePoints {
    std::vector<ImagePoint> left;
    std::vector<ImagePoint> right;
    int width_px = 640;
    int height_px = 480;
};

/// Bird's-eye-view mapping. Only the frame region between horizon_row_px and the
/// bottom row is transformed, with a single pixel-to-meter ratio.
struct BevConfig {
    double px_per_meter = 200.0;
    double roi_length_m = 1.5;
    double roi_width_m = 2.0;
    double horizon_row_px = 179.0;

    void validate() const;
};

/// Metric ground point. forward_m is measured from the bottom-center pixel along
/// the camera axis; lateral_m is positive to the right.
struct BevPoint {
    double forward_m = 0.0;
    double lateral_m = 0.0;
};

struct BevPoints {
    std::vector<BevPoint> left;
    std::vector<BevPoint> right;
};

std::vector<BevPoint> to_bev(std::span<const ImagePoint> points, int width_px, int height_px,
                             const BevConfig& cfg);
BevPoints to_bev(const LanePoints& points, const BevConfig& cfg);

/// Exact inverse of the pixel-to-meter scaling in to_bev (no ROI test).
ImagePoint from_bev(const BevPoint& point, int width_px, int height_px, const BevConfig& cfg);

enum class LaneSource { Left, Right, Middle };

/// lateral(s) = c0 + c1 s + c2 s^2 over forward distance s, valid on [s_min, s_max].
struct LanePolynomial {
    std::array<double, 3> coeffs{0.0, 0.0, 0.0};
    int degree = 1;
    double s_min = 0.0;
    double s_max = 0.0;
    LaneSource source = LaneSource::Middle;

    double lateral_at(double s) const;
    double slope_at(double s) const;
    double second_derivative() const { return 2.0 * coeffs[2]; }
    LanePolynomial shifted(double lateral_offset_m) const;
};

/// Drops points whose lateral residual against a line fitted to the remaining
/// points exceeds k_sigma times the spread of those remaining residuals, and
/// which also deviate by more than k_sigma spreads from the line through the
/// points that passed that screen. Spreads are floored at min_sigma_m. Fewer
/// than 4 points pass unchanged, and at most half of the points are removed per
/// call (largest deviations first).
std::vector<BevPoint> filter_outliers(std::span<const BevPoint> points, double k_sigma,
                                      double min_sigma_m = 0.0);

/// Least-squares lane fit. A quadratic is kept only with at least 5 points and a
/// 20% lower RMS residual than the line. Returns nullopt for fewer than two
/// distinct forward positions.
std::optional<LanePolynomial> fit_lane(std::span<const BevPoint> points,
                                       LaneSource source = LaneSource::Middle);

enum class MiddleProvenance { BothAveraged, LeftShifted, RightShifted, HeldFromHistory, Lost };

std::string_view provenance_name(MiddleProvenance p);

struct MiddleLineConfig {
    double lane_width_m = 0.70;
    int hold_limit = 15;

    void validate() const;
};

/// Middle line plus its history bookkeeping. `current` is empty once the lane is
/// lost; nothing is extrapolated past the hold limit.
struct MiddleLineState {
    std::optional<LanePolynomial> current;
    int age_frames = 0;
    MiddleProvenance provenance = MiddleProvenance::Lost;

    bool lane_lost() const { return !current.has_value(); }
};

MiddleLineState middle_line(const std::optional<LanePolynomial>& left,
                            const std::optional<LanePolynomial>& right,
                            const MiddleLineState& prev, const MiddleLineConfig& cfg);

/// Offset and slope angle of the middle line at the nearest BEV row, expressed in
/// the BEV frame: cross_track_m = lateral(0) (line to the right is positive) and
/// heading_err_rad = atan(lateral'(0)).
PathError path_error(const LanePolynomial& middle);

/// Unsigned curvature of the middle line at forward distance 0.
double path_curvature(const LanePolynomial& middle);

struct LanePipelineConfig {
    BevConfig bev;
    MiddleLineConfig middle;
    double outlier_k_sigma = 3.0;
    double outlier_min_sigma_m = 0.005;
};

struct LaneFrameResult {
    MiddleLineState middle;
    std::optional<LanePolynomial> left;
    std::optional<LanePolynomial> right;
    std::optional<PathError> error;  ///< BEV frame, see path_error
    double curvature_per_m = 0.0;
};

/// Full per-frame chain: BEV, outlier filtering, per-side fits, middle line,
/// path error and curvature.
LaneFrameResult process_lane_frame(const LanePoints& points, const MiddleLineState& prev,
                                   const LanePipelineConfig& cfg);

/// Reads replay rows `frame_id,side,u_px,v_px` (optional header line) into frames.
/// Throws std::runtime_error on malformed rows.
std::map<int, LanePoints> read_lane_replay(std::istream& in, int width_px, int height_px);

}  // namespace minicar

#endif  // MINICAR_LANE_POSTPROCESS_HPP
