#include "windfield/atmosphere.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace windfield {

namespace {
constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kMinElevationDeg = 2.0;
}  // namespace

Grid height_map(const IRFrame &frame, const WeatherRecord &wx, const LapseRateModel &model) {
    if (!(model.gamma > 0.0)) throw ConfigError("lapse rate must be positive");
    const Grid h = model.ref_height + (wx.air_temp - frame.temps.array()) / model.gamma;
    return h.cwiseMax(std::max(0.0, model.ref_height)).cwiseMin(kMaxHeightM);
}

Vec row_elevations(const GeometryModel &geom, int rows, int cols) {
    if (!(geom.sun_elevation > 0.0 && geom.sun_elevation <= 90.0))
        throw ConfigError(fmt::format("sun elevation {} outside (0, 90]", geom.sun_elevation));
    if (!(geom.fov_diag > 0.0)) throw ConfigError("fov_diag must be positive");
    // Square pixels: the diagonal field of view spans the pixel diagonal.
    const double step = geom.fov_diag * kDeg / std::hypot(static_cast<double>(rows), static_cast<double>(cols));
    const double center = 0.5 * (rows - 1);
    Vec theta(rows);
    for (int i = 0; i < rows; ++i) {
        theta(i) = geom.sun_elevation * kDeg + (center - i) * step;
        if (theta(i) <= kMinElevationDeg * kDeg)
            throw GeometryError(fmt::format("row {} looks {:.2f} deg above the horizon (grazing projection)", i,
                                            theta(i) / kDeg));
    }
    return theta;
}

PixelDims pixel_dims(const GeometryModel &geom, int rows, int cols) {
    const Vec theta = row_elevations(geom, rows, cols);
    const double step = geom.fov_diag * kDeg / std::hypot(static_cast<double>(rows), static_cast<double>(cols));
    PixelDims d{Grid(rows, cols), Grid(rows, cols)};
    for (int i = 0; i < rows; ++i) {
        const double s = std::sin(theta(i));
        d.dx.row(i).setConstant(step / s);
        d.dy.row(i).setConstant(step / (s * s));
    }
    return d;
}

PixelDims unit_dims(int rows, int cols) { return {Grid::Ones(rows, cols), Grid::Ones(rows, cols)}; }

VelocityField transform_velocity(const std::vector<Grid> &raw_u, const std::vector<Grid> &raw_v,
                                 const std::vector<Grid> &gamma, const std::vector<double> &heights,
                                 const PixelDims &dims, const GeometryModel &geom) {
    const std::size_t layers = raw_u.size();
    if (raw_v.size() != layers || gamma.size() != layers || heights.size() != layers)
        throw ShapeError(fmt::format("transform_velocity: {} flows, {} responsibilities, {} heights", layers,
                                     gamma.size(), heights.size()));
    if (layers == 0) throw ShapeError("transform_velocity: no layers");
    if (!(geom.frame_rate > 0.0) || !(geom.delta > 0.0)) throw ConfigError("frame rate and delta must be positive");
    const Grid &ref = dims.dx;
    Grid su = Grid::Zero(ref.rows(), ref.cols());
    Grid sv = su;
    for (std::size_t c = 0; c < layers; ++c) {
        require_same_shape(raw_u[c], ref, "transform_velocity");
        require_same_shape(raw_v[c], ref, "transform_velocity");
        require_same_shape(gamma[c], ref, "transform_velocity");
        su.array() += heights[c] * gamma[c].array() * raw_u[c].array();
        sv.array() += heights[c] * gamma[c].array() * raw_v[c].array();
    }
    const double gain = geom.delta / geom.frame_rate;
    return {gain * dims.dx.cwiseProduct(su), gain * dims.dy.cwiseProduct(sv)};
}

}  // namespace windfield
