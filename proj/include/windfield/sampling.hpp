#pragma once

#include <cstdint>
#include <vector>

#include "windfield/grid.hpp"
#include "windfield/layers.hpp"

namespace windfield {

struct TrainingSet {
    Mat x;                 // N*×2 pixel coordinates (x, y)
    Mat v;                 // N*×2 velocities (u, v)
    Mat z;                 // N*×C posterior weights
    std::vector<int> source_layer;  // layer whose weights drew each row
    bool truncated = false;         // fewer vectors than requested; all rows taken

    [[nodiscard]] Eigen::Index size() const noexcept { return x.rows(); }
};

// Per-vector log densities under each layer's velocity model, Nᵏ×C.
Mat velocity_log_densities(const VectorSet &dataset, const std::vector<GaussianLayer> &layers);

// ŵ for one layer, normalized in log space.
Vec importance_weights(const VectorSet &dataset, const GaussianLayer &layer);

// Smallest i with w̃ᵢ ≥ z; never returns a zero-weight row.
Eigen::Index cdf_select(const Vec &cumulative, double z);

std::vector<Eigen::Index> cdf_sample(const Vec &weights, int n, std::uint64_t seed);

// N*/C rows per layer, concatenated in layer order.
TrainingSet build_training_set(const VectorSet &dataset, const std::vector<GaussianLayer> &layers, int n_star,
                               std::uint64_t seed);

}  // namespace windfield
