#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string_view>
#include <vector>

#include "windfield/errors.hpp"

namespace windfield {

// Row index i runs along y (top to bottom), column index j along x.
using Grid = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr int kReferenceRows = 60;
inline constexpr int kReferenceCols = 80;

inline void require_same_shape(const Grid &a, const Grid &b, std::string_view what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ")");
    }
}

// One velocity vector anchored at a pixel; x = column, y = row.
struct VectorRow {
    double x = 0.0;
    double y = 0.0;
    double u = 0.0;
    double v = 0.0;

    friend bool operator==(const VectorRow &, const VectorRow &) = default;
};

using VectorSet = std::vector<VectorRow>;

}  // namespace windfield
