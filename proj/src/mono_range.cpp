#include "minicar/mono_range.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace minicar {

void CameraIntrinsics::validate() const {
    if (!(focal_length_mm > 0.0) || !(sensor_height_mm > 0.0) || !(sensor_height_px > 0.0)) {
        throw std::invalid_argument("CameraIntrinsics: all fields must be > 0");
    }
}

void Detection::validate() const {
    if (!(bbox.height_px > 0.0) || !std::isfinite(bbox.height_px)) {
        throw std::invalid_argument("Detection: bounding box height must be > 0");
    }
    if (!(known_real_height_mm > 0.0)) {
        throw std::invalid_argument("Detection: known_real_height_mm must be > 0");
    }
}

void RangeCorrection::validate() const {
    if (!(coefficient > 0.0)) {
        throw std::invalid_argument("RangeCorrection: coefficient must be > 0");
    }
}

double object_height_on_sensor(const Detection& det, const CameraIntrinsics& cam) {
    det.validate();
    cam.validate();
    return cam.sensor_height_mm * det.bbox.height_px / cam.sensor_height_px;
}

double distance_to_object(const Detection& det, const CameraIntrinsics& cam) {
    return det.known_real_height_mm * cam.focal_length_mm / object_height_on_sensor(det, cam);
}

double real_object_height(double distance_mm, double on_sensor_mm, const CameraIntrinsics& cam) {
    cam.validate();
    if (!(distance_mm > 0.0) || !(on_sensor_mm > 0.0)) {
        throw std::invalid_argument("real_object_height: distance and sensor height must be > 0");
    }
    return distance_mm * on_sensor_mm / cam.focal_length_mm;
}

RangeCorrection fit_correction(std::span<const std::pair<double, double>> samples) {
    if (samples.size() < 2) {
        throw std::invalid_argument("fit_correction: need at least two samples");
    }
    const double n = static_cast<double>(samples.size());
    double mean_est = 0.0, mean_true = 0.0;
    for (const auto& [est, tru] : samples) {
        mean_est += est;
        mean_true += tru;
    }
    mean_est /= n;
    mean_true /= n;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [est, tru] : samples) {
        sxx += (est - mean_est) * (est - mean_est);
        sxy += (est - mean_est) * (tru - mean_true);
    }
    if (!(sxx > 0.0)) {
        throw std::invalid_argument("fit_correction: estimates must not all be equal");
    }
    RangeCorrection corr;
    corr.coefficient = sxy / sxx;
    corr.intercept_mm = mean_true - corr.coefficient * mean_est;
    return corr;
}

double corrected_distance(double raw_mm, const RangeCorrection& corr) {
    if (raw_mm < 0.0) {
        throw std::invalid_argument("corrected_distance: raw range must be >= 0");
    }
    return std::max(0.0, corr.coefficient * raw_mm + corr.intercept_mm);
}

}  // namespace minicar
