#include "windfield/optflow.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>

namespace windfield {

int WLKParams::side_for_area(double area) {
    return 2 * static_cast<int>(std::floor(std::sqrt(area) / 2.0)) + 1;
}

int WLKParams::effective_window() const {
    int side = std::max(window, 3);
    if (side % 2 == 0) ++side;
    return side;
}

namespace {

using Taps = std::array<double, 5>;

Taps gaussian_taps(double sigma) {
    Taps t{};
    double sum = 0.0;
    for (int k = -2; k <= 2; ++k) sum += t[k + 2] = std::exp(-0.5 * k * k / (sigma * sigma));
    for (auto &x : t) x /= sum;
    return t;
}

// Scaled so that a unit ramp differentiates to exactly 1.
Taps derivative_taps(double sigma) {
    Taps t{};
    double moment = 0.0;
    for (int k = -2; k <= 2; ++k) {
        t[k + 2] = k * std::exp(-0.5 * k * k / (sigma * sigma));
        moment += k * t[k + 2];
    }
    for (auto &x : t) x /= moment;
    return t;
}

Grid filter_rows(const Grid &g, const Taps &t) {  // along x (columns)
    Grid out(g.rows(), g.cols());
    const Eigen::Index n = g.cols();
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int k = -2; k <= 2; ++k) acc += t[k + 2] * g(i, std::clamp<Eigen::Index>(j + k, 0, n - 1));
            out(i, j) = acc;
        }
    return out;
}

Grid filter_cols(const Grid &g, const Taps &t) {  // along y (rows)
    Grid out(g.rows(), g.cols());
    const Eigen::Index m = g.rows();
    for (Eigen::Index j = 0; j < g.cols(); ++j)
        for (Eigen::Index i = 0; i < m; ++i) {
            double acc = 0.0;
            for (int k = -2; k <= 2; ++k) acc += t[k + 2] * g(std::clamp<Eigen::Index>(i + k, 0, m - 1), j);
            out(i, j) = acc;
        }
    return out;
}

// Sum over the (2r+1)² window clipped to the frame.
Grid box_sum(const Grid &g, int r) {
    const Eigen::Index m = g.rows(), n = g.cols();
    Grid out(m, n);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            double acc = 0.0;
            for (Eigen::Index y = std::max<Eigen::Index>(0, i - r); y <= std::min<Eigen::Index>(m - 1, i + r); ++y)
                for (Eigen::Index x = std::max<Eigen::Index>(0, j - r); x <= std::min<Eigen::Index>(n - 1, j + r); ++x)
                    acc += g(y, x);
            out(i, j) = acc;
        }
    return out;
}

}  // namespace

Gradients spatiotemporal_gradients(const IntensityFrame &prev, const IntensityFrame &curr, double sigma) {
    require_same_shape(prev.i, curr.i, "spatiotemporal_gradients");
    if (!(sigma > 0.0)) throw ConfigError("derivative kernel sigma must be positive");
    const Grid mean = 0.5 * (prev.i + curr.i);
    const Taps g = gaussian_taps(sigma);
    const Taps d = derivative_taps(sigma);
    return {filter_cols(filter_rows(mean, d), g), filter_rows(filter_cols(mean, d), g), curr.i - prev.i};
}

LayerFlow wlk_flow(const Gradients &grad, const std::vector<Grid> &weights, const WLKParams &params) {
    if (!(params.tau_reg > 0.0)) throw ConfigError("WLK regularization must be positive");
    const int r = params.effective_window() / 2;
    const Grid xx = grad.ix.cwiseProduct(grad.ix);
    const Grid xy = grad.ix.cwiseProduct(grad.iy);
    const Grid yy = grad.iy.cwiseProduct(grad.iy);
    const Grid xt = grad.ix.cwiseProduct(grad.it);
    const Grid yt = grad.iy.cwiseProduct(grad.it);

    LayerFlow flow;
    for (const Grid &w : weights) {
        require_same_shape(w, grad.ix, "wlk_flow");
        const Grid mass = box_sum(w, r);
        const Grid sxx = box_sum(w.cwiseProduct(xx), r);
        const Grid sxy = box_sum(w.cwiseProduct(xy), r);
        const Grid syy = box_sum(w.cwiseProduct(yy), r);
        const Grid sxt = box_sum(w.cwiseProduct(xt), r);
        const Grid syt = box_sum(w.cwiseProduct(yt), r);
        Grid u = Grid::Zero(w.rows(), w.cols());
        Grid v = u;
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                if (mass(i, j) < kMinWindowMass) continue;
                const double a = sxx(i, j) + params.tau_reg, b = sxy(i, j), d = syy(i, j) + params.tau_reg;
                const double det = a * d - b * b;
                u(i, j) = -(d * sxt(i, j) - b * syt(i, j)) / det;
                v(i, j) = -(a * syt(i, j) - b * sxt(i, j)) / det;
            }
        flow.u.push_back(std::move(u));
        flow.v.push_back(std::move(v));
    }
    return flow;
}

LayerFlow wlk_flow(const IntensityFrame &prev, const IntensityFrame &curr, const std::vector<Grid> &weights,
                   const WLKParams &params) {
    for (const Grid &w : weights)
        if ((w.array() < 0.0).any() || (w.array() > 1.0).any())
            throw DomainError("WLK weights must lie in [0, 1]");
    return wlk_flow(spatiotemporal_gradients(prev, curr, params.sigma), weights, params);
}

LayerFlow lk_flow(const IntensityFrame &prev, const IntensityFrame &curr, const WLKParams &params) {
    const Gradients grad = spatiotemporal_gradients(prev, curr, params.sigma);
    if (!(params.tau_reg > 0.0)) throw ConfigError("WLK regularization must be positive");
    const int r = params.effective_window() / 2;
    const Eigen::Index m = grad.ix.rows(), n = grad.ix.cols();
    Grid u = Grid::Zero(m, n), v = Grid::Zero(m, n);
    // Direct window loop, independent of the weighted path.
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            double a = params.tau_reg, b = 0.0, d = params.tau_reg, p = 0.0, q = 0.0;
            for (Eigen::Index y = std::max<Eigen::Index>(0, i - r); y <= std::min<Eigen::Index>(m - 1, i + r); ++y)
                for (Eigen::Index x = std::max<Eigen::Index>(0, j - r); x <= std::min<Eigen::Index>(n - 1, j + r); ++x) {
                    const double gx = grad.ix(y, x), gy = grad.iy(y, x), gt = grad.it(y, x);
                    a += gx * gx;
                    b += gx * gy;
                    d += gy * gy;
                    p += gx * gt;
                    q += gy * gt;
                }
            const double det = a * d - b * b;
            u(i, j) = -(d * p - b * q) / det;
            v(i, j) = -(a * q - b * p) / det;
        }
    return {{u}, {v}};
}

}  // namespace windfield
