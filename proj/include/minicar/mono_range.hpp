#ifndef MINICAR_MONO_RANGE_HPP
#define MINICAR_MONO_RANGE_HPP

#include <span>
#include <string>
#include <utility>

namespace minicar {

struct CameraIntrinsics {
    double focal_length_mm = 3.0;
    double sensor_height_mm = 2.76;
    double sensor_height_px = 1080.0;

    void validate() const;
    /// Focal length in pixels, assuming square pixels.
    double focal_length_px() const { return focal_length_mm * sensor_height_px / sensor_height_mm; }
};

struct BoundingBox {
    double u_px = 0.0;  ///< center column
    double v_px = 0.0;  ///< center row
    double width_px = 0.0;
    double height_px = 0.0;
};

struct Detection {
    std::string class_label;
    BoundingBox bbox;
    double known_real_height_mm = 0.0;

    void validate() const;
};

/// Affine correction true = coefficient * estimated + intercept_mm.
struct RangeCorrection {
    double coefficient = 1.0;
    double intercept_mm = 0.0;

    void validate() const;
};

/// Image height of the object on the sensor plane, in mm.
double object_height_on_sensor(const Detection& det, const CameraIntrinsics& cam);

/// Pinhole range: real height * focal length / height on sensor.
double distance_to_object(const Detection& det, const CameraIntrinsics& cam);

/// Inverse of distance_to_object for an unknown object size.
double real_object_height(double distance_mm, double on_sensor_mm, const CameraIntrinsics& cam);

/// Ordinary least squares of true range on estimated range.
/// Samples are (estimated_mm, true_mm). Throws std::invalid_argument unless at
/// least two distinct estimates are present.
RangeCorrection fit_correction(std::span<const std::pair<double, double>> samples);

/// coefficient * raw + intercept, floored at zero.
double corrected_distance(double raw_mm, const RangeCorrection& corr);

}  // namespace minicar

#endif  // MINICAR_MONO_RANGE_HPP
