#pragma once

#include "auki/grf.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace auki {

using Point2 = std::array<double, 2>;

struct SensorArray {
    std::vector<Point2> locations;

    std::size_t size() const noexcept { return locations.size(); }

    /// n x n interior lattice {(i/(n+1), j/(n+1)) : i, j = 1..n}, x-fastest.
    static SensorArray interior_lattice(std::size_t n);
};

/// Bilinear interpolation of u at every sensor, in sensor order.
Vector observe(const Field& u, const SensorArray& sensors);

/// Readings of several snapshots stacked frame-major.
Vector observe_frames(const std::vector<Field>& frames, const SensorArray& sensors);

/// Synthetic data with diagonal noise covariance noise_variance * I.
struct ObservationData {
    Vector y_obs;
    double noise_variance = 1.0;
    double delta = 0.0;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(y_obs.size()); }
    Matrix noise_covariance() const;
};

inline constexpr double kDefaultNoiseFloor = 1e-12;

/// y_obs = y_ref + max|y_ref| * delta * xi with xi ~ N(0, I). The noise
/// covariance is (delta max|y_ref|)^2 I, or floor * I when delta = 0.
ObservationData synthesize_data(const Vector& y_ref, double delta, std::uint64_t seed,
                                double noise_floor = kDefaultNoiseFloor);

/// 0.5 * (y - g)^T Sigma^{-1} (y - g) with Sigma = noise_variance * I.
double misfit(const Vector& g, const ObservationData& data);

/// Same quadratic form for a general SPD noise covariance.
double misfit(const Vector& g, const Vector& y, const Matrix& noise_cov);

std::string observation_data_to_json(const ObservationData& data, const SensorArray& sensors);
ObservationData observation_data_from_json(const std::string& text, SensorArray* sensors = nullptr);

} // namespace auki
