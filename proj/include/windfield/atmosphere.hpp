#pragma once

#include <vector>

#include "windfield/grid.hpp"
#include "windfield/imaging.hpp"

namespace windfield {

inline constexpr double kMaxHeightM = 15000.0;

// Linear stand-in for the moist adiabatic lapse rate.
struct LapseRateModel {
    double gamma = 6.5e-3;  // K per meter
    double ref_height = 0.0;
};

struct GeometryModel {
    double sun_elevation = 90.0;  // degrees
    double sun_azimuth = 0.0;     // degrees, recorded only
    double fov_diag = 60.0;       // degrees
    double frame_rate = 1.0 / 15.0;  // frames per second
    double delta = 2.29;
};

// Pixel extents per meter of layer height.
struct PixelDims {
    Grid dx;
    Grid dy;
};

Grid height_map(const IRFrame &frame, const WeatherRecord &wx, const LapseRateModel &model = {});

PixelDims pixel_dims(const GeometryModel &geom, int rows = kReferenceRows, int cols = kReferenceCols);

// Uniform unit dims, handy for analytic checks.
PixelDims unit_dims(int rows, int cols);

// Elevation angle (radians) of each row under the tilted pinhole model.
Vec row_elevations(const GeometryModel &geom, int rows, int cols);

struct VelocityField {
    Grid u;
    Grid v;
};

// raw_u[c], raw_v[c] in pixels per frame; gamma[c] layer responsibilities; heights[c] = Ĥ_c in meters.
VelocityField transform_velocity(const std::vector<Grid> &raw_u, const std::vector<Grid> &raw_v,
                                 const std::vector<Grid> &gamma, const std::vector<double> &heights,
                                 const PixelDims &dims, const GeometryModel &geom);

}  // namespace windfield
