#pragma once

#include <vector>

#include "windfield/grid.hpp"
#include "windfield/imaging.hpp"

namespace windfield {

struct WLKParams {
    int window = 5;         // side of the square neighbourhood, pixels
    double area = 16.0;     // nominal window area the side was derived from, pixels²
    double tau_reg = 1e-8;  // ridge added to the normal equations
    double sigma = 1.0;     // derivative-of-Gaussian amplitude, pixels

    // Odd side 2·⌊√area/2⌋+1 for a nominal window area.
    static int side_for_area(double area);
    // Side forced odd and at least 3.
    [[nodiscard]] int effective_window() const;
};

struct Gradients {
    Grid ix, iy, it;
};

// One (u, v) grid pair per layer, pixels per frame.
struct LayerFlow {
    std::vector<Grid> u;
    std::vector<Grid> v;
};

inline constexpr double kMinWindowMass = 1e-12;

// Ix, Iy from 5-tap derivative-of-Gaussian filters on the mean frame; It = curr - prev.
Gradients spatiotemporal_gradients(const IntensityFrame &prev, const IntensityFrame &curr, double sigma);

// Per layer, solves (AᵀWA + τI)[u v]ᵀ = -AᵀW·It over each window, with W the layer's per-pixel weights.
LayerFlow wlk_flow(const IntensityFrame &prev, const IntensityFrame &curr, const std::vector<Grid> &weights,
                   const WLKParams &params);
LayerFlow wlk_flow(const Gradients &grad, const std::vector<Grid> &weights, const WLKParams &params);

// Plain Lucas-Kanade over the same window.
LayerFlow lk_flow(const IntensityFrame &prev, const IntensityFrame &curr, const WLKParams &params);

}  // namespace windfield
