#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "windfield/atmosphere.hpp"
#include "windfield/grid.hpp"
#include "windfield/imaging.hpp"

namespace windfield {

inline constexpr double kCovJitter = 1e-8;
inline constexpr int kIcmMaxIterations = 100;
inline constexpr int kIcmMaxReseeds = 5;
inline constexpr int kIcmRandomStarts = 5;

struct GaussianLayer {
    Eigen::Vector2d mu_v = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov_v = Eigen::Matrix2d::Identity();
    double mu_h = 0.0;
    double var_h = 1.0;
    int count = 0;  // vectors (velocity ICM) or cloud pixels (height ICM) assigned
};

// Lifts the smallest eigenvalue to kCovJitter when needed; leaves well-conditioned input untouched.
Eigen::MatrixXd regularize_covariance(const Eigen::MatrixXd &cov);

double mvn_logpdf(const Eigen::Vector2d &v, const Eigen::Vector2d &mu, const Eigen::Matrix2d &cov);

struct IcmVelocityResult {
    std::vector<GaussianLayer> layers;
    std::vector<int> labels;        // hard assignment λ, one layer index per vector
    std::vector<double> objective;  // complete-data log-likelihood after each reassignment
    int iterations = 0;
    int reseeds = 0;
    bool converged = false;
};

// Best of kIcmRandomStarts random initial assignments derived from `seed`, or a single run from the
// MAP assignment under `warm_start` when given.
IcmVelocityResult icm_velocity(const VectorSet &dataset, int layers, std::uint64_t seed,
                               const std::vector<GaussianLayer> *warm_start = nullptr);

struct IcmHeightResult {
    std::vector<GaussianLayer> layers;  // velocity and height parameters, highest layer first
    Eigen::MatrixXi rho;                // hard pixel labels after relabelling
    std::vector<double> mean_heights;   // H̄_c over cloud pixels
    std::vector<int> order;             // order[new] = index of the layer in the input
    std::vector<double> objective;
    int iterations = 0;
};

// Heights of the cloud pixels, initialized from the MAP velocity layer of each pixel's flow vector.
IcmHeightResult icm_height(const Grid &heights, const CloudMask &mask, const VelocityField &flow,
                           const std::vector<GaussianLayer> &velocity_layers);

// λ as an N×C indicator matrix.
Eigen::MatrixXi one_hot(const std::vector<int> &labels, int layers);

// MAP layer of a velocity under the fitted layers; ties go to the lower index.
int map_velocity_layer(const Eigen::Vector2d &v, const std::vector<GaussianLayer> &layers);

}  // namespace windfield
