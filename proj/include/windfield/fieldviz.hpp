#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "windfield/atmosphere.hpp"
#include "windfield/grid.hpp"

namespace windfield {

struct DivCurl {
    Grid div;
    Grid curl;
};

// Forward differences, last row/column replicated (zero difference there).
DivCurl div_curl(const Grid &u, const Grid &v);

// Axis-ordered trapezoid integration from pixel (0, 0): along row 0 in x, then down column j in y.
Grid integrate_stream(const Grid &u, const Grid &v, const PixelDims &dims, double height,
                      std::vector<std::string> *warnings = nullptr);
Grid integrate_potential(const Grid &u, const Grid &v, const PixelDims &dims, double height,
                         std::vector<std::string> *warnings = nullptr);

// Mean over interior pixels of |∇Φ·∇Ψ| / (‖∇Φ‖‖∇Ψ‖ + 1e-12), central differences in metric units.
double orthogonality(const Grid &phi, const Grid &psi, const PixelDims &dims);

struct FieldGrid {
    Grid u, v, div, curl, phi, psi;
};

FieldGrid make_field_grid(const VelocityField &field, const PixelDims &dims, double height,
                          std::vector<std::string> *warnings = nullptr);

struct LayerTruth {
    double height_m = 0.0;
    double speed_mps = 0.0;
    double angle_rad = 0.0;
};

// Layers ordered highest first.
struct GroundTruthStats {
    std::vector<LayerTruth> layers;
};

GroundTruthStats read_truth(const std::filesystem::path &file);
void write_truth(const std::filesystem::path &file, const GroundTruthStats &truth);

struct MetricsReport {
    double mae = 0.0;
    double wmae = 0.0;
    double div_sum = 0.0;
    double curl_sum = 0.0;
    std::optional<double> mape_height;
    std::optional<double> mape_speed;
    std::optional<double> mape_angle;
    double runtime = 0.0;
    bool has_rows = false;
};

struct VectorErrors {
    double mae = 0.0;
    double wmae = 0.0;
};

// Per row error (|Δu| + |Δv|)/2; WMAE weights rows by z and falls back to MAE when Σz = 0.
VectorErrors vector_errors(const Mat &pred, const Mat &truth, const Vec &z);

double wrap_angle(double a);
double percent_error(double pred, double truth);
double angle_percent_error(double pred, double truth);

// Mean flow of a field: hypot and atan2 of the grid-mean components (image axes, y down).
LayerTruth field_summary(const Grid &u, const Grid &v, double height);

struct LayerMape {
    double height = 0.0;
    double speed = 0.0;
    double angle = 0.0;
    [[nodiscard]] double mean() const noexcept { return (height + speed + angle) / 3.0; }
};

// Layer-by-layer comparison over min(pred, truth) layers, both ordered highest first.
LayerMape layer_mape(const std::vector<LayerTruth> &pred, const GroundTruthStats &truth);

void write_field_csv(const std::filesystem::path &file, const FieldGrid &field);
void write_metrics(const std::filesystem::path &file, const MetricsReport &report);

}  // namespace windfield
