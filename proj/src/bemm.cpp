#include "windfield/bemm.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "windfield/special.hpp"

namespace windfield {

namespace {

struct SufficientStats {
    double n = 0.0;       // Σ γ
    double log_t = 0.0;   // Σ γ log t
    double log_1t = 0.0;  // Σ γ log(1 - t)
};

SufficientStats stats_for(const Grid &tbar, const Grid &gamma) {
    SufficientStats s;
    s.n = gamma.sum();
    s.log_t = (gamma.array() * tbar.array().log()).sum();
    s.log_1t = (gamma.array() * (1.0 - tbar.array()).log()).sum();
    return s;
}

double layer_objective(const SufficientStats &s, double a, double b) {
    return (a - 1.0) * s.log_t + (b - 1.0) * s.log_1t - s.n * log_beta(a, b);
}

std::array<double, 2> layer_gradient(const SufficientStats &s, double a, double b) {
    const double common = digamma(a + b);
    return {s.log_t - s.n * (digamma(a) - common), s.log_1t - s.n * (digamma(b) - common)};
}

void check_domain(const Grid &tbar) {
    if ((tbar.array() <= 0.0).any() || (tbar.array() >= 1.0).any() || !tbar.allFinite())
        throw DomainError("normalized temperatures must lie in (0, 1)");
}

}  // namespace

double beta_logpdf(double t, double alpha, double beta) {
    if (!(t > 0.0 && t < 1.0)) throw DomainError(fmt::format("beta density undefined at t={}", t));
    if (!(alpha > 0.0 && beta > 0.0)) throw DomainError(fmt::format("beta shapes must be positive ({}, {})", alpha, beta));
    return (alpha - 1.0) * std::log(t) + (beta - 1.0) * std::log1p(-t) - log_beta(alpha, beta);
}

double cdll(const Grid &tbar, const Responsibilities &resp, const BetaMixture &mix) {
    double total = 0.0;
    for (int c = 0; c < mix.size(); ++c) {
        const auto s = stats_for(tbar, resp.gamma[c]);
        total += s.n * std::log(mix.pi[c]) + layer_objective(s, mix.alpha[c], mix.beta[c]);
    }
    return total;
}

std::vector<std::array<double, 2>> cdll_gradient(const Grid &tbar, const Responsibilities &resp,
                                                 const BetaMixture &mix) {
    std::vector<std::array<double, 2>> g;
    for (int c = 0; c < mix.size(); ++c) {
        g.push_back(layer_gradient(stats_for(tbar, resp.gamma[c]), mix.alpha[c], mix.beta[c]));
    }
    return g;
}

BetaMixture initial_mixture(const Grid &tbar, int layers) {
    std::vector<double> sorted(tbar.data(), tbar.data() + tbar.size());
    std::sort(sorted.begin(), sorted.end());
    BetaMixture mix;
    const std::size_t n = sorted.size();
    for (int c = 0; c < layers; ++c) {
        const std::size_t lo = n * c / layers;
        const std::size_t hi = std::max(lo + 1, n * (c + 1) / layers);
        const double count = static_cast<double>(hi - lo);
        const double m = std::accumulate(sorted.begin() + lo, sorted.begin() + hi, 0.0) / count;
        double var = 0.0;
        for (std::size_t k = lo; k < hi; ++k) var += (sorted[k] - m) * (sorted[k] - m);
        var /= count;
        double a = 1.0, b = 1.0;
        if (var > 0.0) {
            const double common = m * (1.0 - m) / var - 1.0;
            if (common > 0.0) {
                a = m * common;
                b = (1.0 - m) * common;
            }
        }
        mix.alpha.push_back(std::clamp(a, 1e-3, 1e3));
        mix.beta.push_back(std::clamp(b, 1e-3, 1e3));
        mix.pi.push_back(1.0 / layers);
    }
    return mix;
}

Responsibilities e_step(const Grid &tbar, const BetaMixture &mix, double *loglik) {
    const int layers = mix.size();
    std::vector<Grid> logp(layers);
    for (int c = 0; c < layers; ++c) {
        const double a = mix.alpha[c], b = mix.beta[c];
        logp[c] = (a - 1.0) * tbar.array().log() + (b - 1.0) * (1.0 - tbar.array()).log() +
                  (std::log(mix.pi[c]) - log_beta(a, b));
    }
    Grid peak = logp[0];
    for (int c = 1; c < layers; ++c) peak = peak.cwiseMax(logp[c]);
    Grid total = Grid::Zero(tbar.rows(), tbar.cols());
    for (int c = 0; c < layers; ++c) {
        logp[c].array() = (logp[c].array() - peak.array()).exp();
        total += logp[c];
    }
    Responsibilities r;
    for (int c = 0; c < layers; ++c) r.gamma.push_back(logp[c].cwiseQuotient(total));
    if (loglik) *loglik = (peak.array() + total.array().log()).sum();
    return r;
}

EmResult em_fit(const NormFrame &frame, int layers, const std::optional<BetaMixture> &init, const EmOptions &opts) {
    const Grid &tbar = frame.tbar;
    if (layers < 1 || layers > tbar.size())
        throw DomainError(fmt::format("layer count {} invalid for {} pixels", layers, tbar.size()));
    check_domain(tbar);

    EmResult out;
    BetaMixture mix = (init && init->size() == layers) ? *init : initial_mixture(tbar, layers);
    const double tol = opts.tol_per_pixel * static_cast<double>(tbar.size());
    auto project = [&](double x) { return std::clamp(x, opts.shape_min, opts.shape_max); };

    double ll = 0.0;
    Responsibilities resp = e_step(tbar, mix, &ll);
    out.loglik.push_back(ll);
    std::vector<BetaMixture> history{mix};
    for (int round = 0; round < opts.max_rounds; ++round) {
        // M-step: closed-form priors, backtracking gradient ascent on each layer's shapes.
        for (int c = 0; c < layers; ++c) {
            const auto s = stats_for(tbar, resp.gamma[c]);
            mix.pi[c] = s.n / static_cast<double>(tbar.size());
            if (s.n <= 0.0) continue;
            double a = mix.alpha[c], b = mix.beta[c];
            double f = layer_objective(s, a, b);
            double step = opts.initial_step;
            for (int inner = 0; inner < opts.inner_steps; ++inner) {
                const auto g = layer_gradient(s, a, b);
                const double na = project(a + step * g[0]);
                const double nb = project(b + step * g[1]);
                const double nf = layer_objective(s, na, nb);
                if (nf > f) {
                    a = na;
                    b = nb;
                    f = nf;
                    step *= 2.0;
                } else {
                    step *= 0.5;
                    if (step < 1e-14) break;
                }
            }
            mix.alpha[c] = a;
            mix.beta[c] = b;
        }
        for (auto &p : mix.pi) p = std::max(p, 1e-300);

        double next = 0.0;
        resp = e_step(tbar, mix, &next);
        if (!std::isfinite(next)) throw NumericalError("BeMM log-likelihood became non-finite");
        out.loglik.push_back(next);
        history.push_back(mix);
        out.rounds = round + 1;
        const bool done = std::abs(next - ll) < tol;
        ll = next;
        if (done) break;
    }

    std::vector<int> order(layers);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return mix.mean(x) > mix.mean(y); });
    auto permuted = [&](const BetaMixture &m) {
        BetaMixture p;
        for (int c : order) {
            p.pi.push_back(m.pi[c]);
            p.alpha.push_back(m.alpha[c]);
            p.beta.push_back(m.beta[c]);
        }
        return p;
    };
    out.mixture = permuted(mix);
    for (const auto &m : history) out.history.push_back(permuted(m));
    for (int c : order) out.resp.gamma.push_back(resp.gamma[c]);
    return out;
}

std::vector<double> layer_mean_heights(const Responsibilities &resp, const Grid &heights, const CloudMask &mask) {
    const Grid cloud = mask.cast<double>();
    std::vector<double> out;
    for (std::size_t c = 0; c < resp.gamma.size(); ++c) {
        require_same_shape(resp.gamma[c], heights, "layer_mean_heights");
        require_same_shape(cloud, heights, "layer_mean_heights");
        const double mass = (resp.gamma[c].array() * cloud.array()).sum();
        if (!(mass > 0.0)) throw EmptyLayerError(fmt::format("layer {} has no cloud support", c));
        out.push_back((resp.gamma[c].array() * heights.array() * cloud.array()).sum() / mass);
    }
    return out;
}

void write_em_trace(const std::filesystem::path &file, const EmResult &fit) {
    std::ofstream out(file);
    if (!out) throw FormatError("cannot write " + file.string());
    out << "round,loglik";
    for (int c = 0; c < fit.mixture.size(); ++c) out << fmt::format(",pi_{0},alpha_{0},beta_{0}", c);
    out << '\n';
    for (std::size_t r = 0; r < fit.loglik.size(); ++r) {
        out << fmt::format("{},{:.9g}", r, fit.loglik[r]);
        const auto &m = r < fit.history.size() ? fit.history[r] : fit.mixture;
        for (int c = 0; c < m.size(); ++c) out << fmt::format(",{:.9g},{:.9g},{:.9g}", m.pi[c], m.alpha[c], m.beta[c]);
        out << '\n';
    }
}

}  // namespace windfield
