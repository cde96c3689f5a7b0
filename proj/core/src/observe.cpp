#include "auki/observe.hpp"

#include <json.hpp>

#include <cmath>

namespace auki {

SensorArray SensorArray::interior_lattice(std::size_t n) {
    SensorArray s;
    const double h = 1.0 / static_cast<double>(n + 1);
    for (std::size_t j = 1; j <= n; ++j)
        for (std::size_t i = 1; i <= n; ++i) s.locations.push_back({static_cast<double>(i) * h, static_cast<double>(j) * h});
    return s;
}

Vector observe(const Field& u, const SensorArray& sensors) {
    const Grid2D& g = u.grid;
    Vector out(static_cast<Eigen::Index>(sensors.size()));
    for (std::size_t s = 0; s < sensors.size(); ++s) {
        const auto [x, y] = sensors.locations[s];
        if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0))
            throw Error("observe: sensor " + std::to_string(s) + " lies outside the unit square");
        const double fx = x * static_cast<double>(g.nx - 1);
        const double fy = y * static_cast<double>(g.ny - 1);
        const auto i = std::min(static_cast<std::size_t>(fx), g.nx - 2);
        const auto j = std::min(static_cast<std::size_t>(fy), g.ny - 2);
        const double tx = fx - static_cast<double>(i), ty = fy - static_cast<double>(j);
        out[static_cast<Eigen::Index>(s)] = (1 - tx) * (1 - ty) * u.at(i, j) + tx * (1 - ty) * u.at(i + 1, j) +
                                            (1 - tx) * ty * u.at(i, j + 1) + tx * ty * u.at(i + 1, j + 1);
    }
    return out;
}

Vector observe_frames(const std::vector<Field>& frames, const SensorArray& sensors) {
    const auto ns = static_cast<Eigen::Index>(sensors.size());
    Vector out(ns * static_cast<Eigen::Index>(frames.size()));
    for (std::size_t f = 0; f < frames.size(); ++f) out.segment(static_cast<Eigen::Index>(f) * ns, ns) = observe(frames[f], sensors);
    return out;
}

Matrix ObservationData::noise_covariance() const {
    return noise_variance * Matrix::Identity(y_obs.size(), y_obs.size());
}

ObservationData synthesize_data(const Vector& y_ref, double delta, std::uint64_t seed, double noise_floor) {
    if (!(delta >= 0.0)) throw Error("synthesize_data: delta must be non-negative");
    if (!y_ref.allFinite()) throw Error("synthesize_data: non-finite reference data");
    const double scale = y_ref.size() > 0 ? y_ref.cwiseAbs().maxCoeff() : 0.0;
    ObservationData d;
    d.delta = delta;
    d.seed = seed;
    if (delta == 0.0) {
        d.y_obs = y_ref;
        d.noise_variance = noise_floor;
        return d;
    }
    const double sd = scale * delta;
    if (!(sd > 0.0)) throw Error("synthesize_data: all-zero reference data gives a singular noise covariance");
    Rng rng(seed);
    d.y_obs = y_ref + sd * standard_normal(rng, y_ref.size());
    d.noise_variance = sd * sd;
    return d;
}

double misfit(const Vector& g, const ObservationData& data) {
    if (g.size() != data.y_obs.size()) throw Error("misfit: dimension mismatch");
    return 0.5 * (data.y_obs - g).squaredNorm() / data.noise_variance;
}

double misfit(const Vector& g, const Vector& y, const Matrix& noise_cov) {
    if (g.size() != y.size() || noise_cov.rows() != y.size() || noise_cov.cols() != y.size())
        throw Error("misfit: dimension mismatch");
    Eigen::LLT<Matrix> llt(noise_cov);
    if (llt.info() != Eigen::Success) throw Error("misfit: noise covariance is not positive definite");
    const Vector w = llt.matrixL().solve(y - g);
    return 0.5 * w.squaredNorm();
}

std::string observation_data_to_json(const ObservationData& data, const SensorArray& sensors) {
    nlohmann::json j;
    j["delta"] = data.delta;
    j["seed"] = data.seed;
    j["noise_variance"] = data.noise_variance;
    j["y_obs"] = std::vector<double>(data.y_obs.data(), data.y_obs.data() + data.y_obs.size());
    auto& locs = j["locations"] = nlohmann::json::array();
    for (const auto& p : sensors.locations) locs.push_back({p[0], p[1]});
    return j.dump(2);
}

ObservationData observation_data_from_json(const std::string& text, SensorArray* sensors) {
    const auto j = nlohmann::json::parse(text);
    ObservationData d;
    d.delta = j.at("delta").get<double>();
    d.seed = j.at("seed").get<std::uint64_t>();
    d.noise_variance = j.at("noise_variance").get<double>();
    const auto y = j.at("y_obs").get<std::vector<double>>();
    d.y_obs = Eigen::Map<const Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
    if (sensors) {
        sensors->locations.clear();
        for (const auto& p : j.at("locations")) sensors->locations.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    return d;
}

} // namespace auki
