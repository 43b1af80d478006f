#pragma once

#include <array>
#include <optional>
#include <vector>

#include "windfield/grid.hpp"
#include "windfield/imaging.hpp"

namespace windfield {

struct BetaMixture {
    std::vector<double> pi;
    std::vector<double> alpha;
    std::vector<double> beta;

    [[nodiscard]] int size() const noexcept { return static_cast<int>(pi.size()); }
    [[nodiscard]] double mean(int c) const { return alpha[c] / (alpha[c] + beta[c]); }
};

// gamma[c](i, j) = posterior of layer c at pixel (i, j).
struct Responsibilities {
    std::vector<Grid> gamma;
};

struct EmOptions {
    int max_rounds = 200;
    double tol_per_pixel = 1e-6;
    int inner_steps = 50;
    double initial_step = 1e-3;
    double shape_min = 1e-3;
    double shape_max = 1e3;
};

struct EmResult {
    BetaMixture mixture;
    Responsibilities resp;
    std::vector<double> loglik;        // mixture log-likelihood after each E-step
    std::vector<BetaMixture> history;  // parameters behind each loglik entry, final label order
    int rounds = 0;
};

double beta_logpdf(double t, double alpha, double beta);

// Σ γ log π_c + Σ γ log f(t; α_c, β_c) with the responsibilities held fixed.
double cdll(const Grid &tbar, const Responsibilities &resp, const BetaMixture &mix);

// Per layer (∂/∂α_c, ∂/∂β_c) of the CDLL.
std::vector<std::array<double, 2>> cdll_gradient(const Grid &tbar, const Responsibilities &resp,
                                                 const BetaMixture &mix);

// Method-of-moments start on C quantile slices of T̄, uniform priors.
BetaMixture initial_mixture(const Grid &tbar, int layers);

// Layers come back sorted by mean α/(α+β), warmest (lowest cloud) first.
EmResult em_fit(const NormFrame &frame, int layers, const std::optional<BetaMixture> &init = std::nullopt,
                const EmOptions &opts = {});

Responsibilities e_step(const Grid &tbar, const BetaMixture &mix, double *loglik = nullptr);

// Ĥ_c: responsibility-weighted mean height over cloud pixels.
std::vector<double> layer_mean_heights(const Responsibilities &resp, const Grid &heights, const CloudMask &mask);

// One CSV row per EM round: round, loglik, then pi/alpha/beta per layer.
void write_em_trace(const std::filesystem::path &file, const EmResult &fit);

}  // namespace windfield
