#include "windfield/layers.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>

#include "windfield/rng.hpp"

namespace windfield {

namespace {

using MatD = Eigen::MatrixXd;
using VecD = Eigen::VectorXd;

struct Component {
    VecD mean;
    MatD cov;
    MatD cov_inv;
    double log_norm = 0.0;  // -½(d log 2π + log|Σ|)
};

Component make_component(const VecD &mean, const MatD &cov_raw) {
    Component c;
    c.mean = mean;
    c.cov = regularize_covariance(cov_raw);
    Eigen::LDLT<MatD> ldlt(c.cov);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0)
        throw NumericalError("covariance is singular after jitter");
    c.cov_inv = ldlt.solve(MatD::Identity(mean.size(), mean.size()));
    const double logdet = ldlt.vectorD().array().log().sum();
    c.log_norm = -0.5 * (static_cast<double>(mean.size()) * std::log(2.0 * std::numbers::pi) + logdet);
    return c;
}

double log_density(const Component &c, const VecD &x) {
    const VecD d = x - c.mean;
    return c.log_norm - 0.5 * d.dot(c.cov_inv * d);
}

double mahalanobis2(const Component &c, const VecD &x) {
    const VecD d = x - c.mean;
    return d.dot(c.cov_inv * d);
}

std::vector<int> counts_of(const std::vector<int> &labels, int layers) {
    std::vector<int> n(layers, 0);
    for (int l : labels) ++n[l];
    return n;
}

// Hard-assignment maximum likelihood means and covariances.
std::vector<Component> fit_components(const MatD &data, const std::vector<int> &labels, int layers) {
    const Eigen::Index d = data.cols();
    std::vector<VecD> sum(layers, VecD::Zero(d));
    std::vector<int> n = counts_of(labels, layers);
    for (Eigen::Index i = 0; i < data.rows(); ++i) sum[labels[i]] += data.row(i).transpose();
    std::vector<Component> out;
    std::vector<MatD> scatter(layers, MatD::Zero(d, d));
    std::vector<VecD> mean(layers);
    for (int c = 0; c < layers; ++c) mean[c] = sum[c] / static_cast<double>(n[c]);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const VecD dv = data.row(i).transpose() - mean[labels[i]];
        scatter[labels[i]] += dv * dv.transpose();
    }
    // An empty layer (height ICM only) falls back to the pooled moments.
    VecD pooled_mean = data.colwise().mean().transpose();
    MatD pooled = MatD::Zero(d, d);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const VecD dv = data.row(i).transpose() - pooled_mean;
        pooled += dv * dv.transpose();
    }
    pooled /= static_cast<double>(data.rows());
    for (int c = 0; c < layers; ++c)
        out.push_back(n[c] > 0 ? make_component(mean[c], scatter[c] / static_cast<double>(n[c]))
                               : make_component(pooled_mean, pooled));
    return out;
}

std::vector<int> map_assign(const MatD &data, const std::vector<Component> &comps) {
    std::vector<int> labels(data.rows());
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const VecD x = data.row(i).transpose();
        int best = 0;
        double best_lp = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < static_cast<int>(comps.size()); ++c) {
            const double lp = log_density(comps[c], x);
            if (lp > best_lp) {
                best_lp = lp;
                best = c;
            }
        }
        labels[i] = best;
    }
    return labels;
}

double objective_of(const MatD &data, const std::vector<int> &labels, const std::vector<Component> &comps) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) total += log_density(comps[labels[i]], data.row(i).transpose());
    return total;
}

struct IcmRun {
    std::vector<Component> comps;
    std::vector<int> labels;
    std::vector<double> objective;
    int iterations = 0;
    int reseeds = 0;
    bool converged = false;
};

// Moves the vector farthest (Mahalanobis) from its own layer into each empty layer.
// With allow_empty, an exhausted budget or a lack of spare vectors leaves the layer empty.
void reseed_empty(const MatD &data, std::vector<int> &labels, int layers, int &reseeds, bool allow_empty) {
    for (;;) {
        auto n = counts_of(labels, layers);
        const auto empty = std::find(n.begin(), n.end(), 0);
        if (empty == n.end()) return;
        if (allow_empty && reseeds >= kIcmMaxReseeds) return;
        if (reseeds >= kIcmMaxReseeds)
            throw EmptyLayerError(fmt::format("layer {} stayed empty after {} reseeds",
                                              static_cast<int>(empty - n.begin()), reseeds));
        ++reseeds;
        std::vector<Component> comps(layers);
        for (int c = 0; c < layers; ++c) {
            if (n[c] == 0) continue;
            VecD mean = VecD::Zero(data.cols());
            for (Eigen::Index i = 0; i < data.rows(); ++i)
                if (labels[i] == c) mean += data.row(i).transpose();
            mean /= n[c];
            MatD cov = MatD::Zero(data.cols(), data.cols());
            for (Eigen::Index i = 0; i < data.rows(); ++i)
                if (labels[i] == c) {
                    const VecD dv = data.row(i).transpose() - mean;
                    cov += dv * dv.transpose();
                }
            comps[c] = make_component(mean, cov / n[c]);
        }
        Eigen::Index far = -1;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < data.rows(); ++i) {
            if (n[labels[i]] < 2) continue;
            const double d2 = mahalanobis2(comps[labels[i]], data.row(i).transpose());
            if (d2 > far_d) {
                far_d = d2;
                far = i;
            }
        }
        if (far < 0 && allow_empty) return;
        if (far < 0) throw EmptyLayerError("no layer has a vector to spare for reseeding");
        labels[far] = static_cast<int>(empty - n.begin());
    }
}

IcmRun run_icm(const MatD &data, std::vector<int> labels, int layers, bool allow_empty = false) {
    IcmRun run;
    for (int it = 0; it < kIcmMaxIterations; ++it) {
        reseed_empty(data, labels, layers, run.reseeds, allow_empty);
        run.comps = fit_components(data, labels, layers);
        std::vector<int> next = map_assign(data, run.comps);
        run.objective.push_back(objective_of(data, next, run.comps));
        run.iterations = it + 1;
        if (next == labels) {
            run.converged = true;
            break;
        }
        labels = std::move(next);
    }
    if (!run.converged) {
        reseed_empty(data, labels, layers, run.reseeds, allow_empty);
        run.comps = fit_components(data, labels, layers);
    }
    run.labels = std::move(labels);
    return run;
}

Component velocity_component(const GaussianLayer &l) { return make_component(l.mu_v, l.cov_v); }

}  // namespace

MatD regularize_covariance(const MatD &cov) {
    const MatD sym = 0.5 * (cov + cov.transpose());
    Eigen::SelfAdjointEigenSolver<MatD> es(sym, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (lo >= kCovJitter) return sym;
    return sym + (kCovJitter - lo) * MatD::Identity(cov.rows(), cov.cols());
}

double mvn_logpdf(const Eigen::Vector2d &v, const Eigen::Vector2d &mu, const Eigen::Matrix2d &cov) {
    return log_density(make_component(mu, cov), v);
}

int map_velocity_layer(const Eigen::Vector2d &v, const std::vector<GaussianLayer> &layers) {
    int best = 0;
    double best_lp = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < static_cast<int>(layers.size()); ++c) {
        const double lp = mvn_logpdf(v, layers[c].mu_v, layers[c].cov_v);
        if (lp > best_lp) {
            best_lp = lp;
            best = c;
        }
    }
    return best;
}

Eigen::MatrixXi one_hot(const std::vector<int> &labels, int layers) {
    Eigen::MatrixXi out = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(labels.size()), layers);
    for (std::size_t i = 0; i < labels.size(); ++i) out(static_cast<Eigen::Index>(i), labels[i]) = 1;
    return out;
}

IcmVelocityResult icm_velocity(const VectorSet &dataset, int layers, std::uint64_t seed,
                               const std::vector<GaussianLayer> *warm_start) {
    if (layers < 1 || layers > 2) throw ConfigError(fmt::format("layer count {} not in {{1, 2}}", layers));
    if (static_cast<int>(dataset.size()) < layers)
        throw EmptyLayerError(fmt::format("{} vectors cannot populate {} layers", dataset.size(), layers));
    MatD data(static_cast<Eigen::Index>(dataset.size()), 2);
    for (std::size_t i = 0; i < dataset.size(); ++i) data.row(static_cast<Eigen::Index>(i)) << dataset[i].u, dataset[i].v;

    IcmRun run;
    if (warm_start && static_cast<int>(warm_start->size()) == layers) {
        std::vector<Component> comps;
        for (const auto &l : *warm_start) comps.push_back(velocity_component(l));
        run = run_icm(data, map_assign(data, comps), layers);
    } else if (layers == 1) {
        run = run_icm(data, std::vector<int>(dataset.size(), 0), layers);
    } else {
        // Random restarts; the highest final objective wins, earlier restarts on ties.
        bool have = false;
        std::optional<EmptyLayerError> last_error;
        for (int r = 0; r < kIcmRandomStarts; ++r) {
            Rng rng(r == 0 ? seed : mix_seed(seed, static_cast<std::uint64_t>(r)));
            std::vector<int> init(dataset.size());
            for (auto &l : init) l = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(layers)));
            try {
                IcmRun cand = run_icm(data, std::move(init), layers);
                if (!have || cand.objective.back() > run.objective.back()) {
                    run = std::move(cand);
                    have = true;
                }
            } catch (const EmptyLayerError &e) {
                last_error = e;
            }
        }
        if (!have) throw *last_error;
    }
    IcmVelocityResult out;
    const auto n = counts_of(run.labels, layers);
    for (int c = 0; c < layers; ++c) {
        GaussianLayer g;
        g.mu_v = run.comps[c].mean;
        g.cov_v = run.comps[c].cov;
        g.count = n[c];
        out.layers.push_back(g);
    }
    out.labels = std::move(run.labels);
    out.objective = std::move(run.objective);
    out.iterations = run.iterations;
    out.reseeds = run.reseeds;
    out.converged = run.converged;
    return out;
}

IcmHeightResult icm_height(const Grid &heights, const CloudMask &mask, const VelocityField &flow,
                           const std::vector<GaussianLayer> &velocity_layers) {
    require_same_shape(heights, flow.u, "icm_height");
    require_same_shape(flow.u, flow.v, "icm_height");
    if (mask.rows() != heights.rows() || mask.cols() != heights.cols())
        throw ShapeError("icm_height: mask and heights differ in shape");
    const int layers = static_cast<int>(velocity_layers.size());
    if (layers < 1) throw ConfigError("icm_height needs fitted velocity layers");

    std::vector<std::pair<Eigen::Index, Eigen::Index>> pixels;
    for (Eigen::Index i = 0; i < mask.rows(); ++i)
        for (Eigen::Index j = 0; j < mask.cols(); ++j)
            if (mask(i, j)) pixels.emplace_back(i, j);
    if (pixels.empty()) throw EmptyLayerError("cloud mask is empty");

    MatD data(static_cast<Eigen::Index>(pixels.size()), 1);
    std::vector<int> init(pixels.size());
    for (std::size_t k = 0; k < pixels.size(); ++k) {
        const auto [i, j] = pixels[k];
        data(static_cast<Eigen::Index>(k), 0) = heights(i, j);
        init[k] = map_velocity_layer({flow.u(i, j), flow.v(i, j)}, velocity_layers);
    }
    IcmRun run = run_icm(data, std::move(init), layers, true);

    // H̄_c over cloud pixels with the final hard labels; an empty layer reports its fallback mean.
    std::vector<double> hbar(layers, 0.0);
    std::vector<int> n = counts_of(run.labels, layers);
    for (std::size_t k = 0; k < pixels.size(); ++k) hbar[run.labels[k]] += data(static_cast<Eigen::Index>(k), 0);
    for (int c = 0; c < layers; ++c) hbar[c] = n[c] > 0 ? hbar[c] / n[c] : run.comps[c].mean(0);

    IcmHeightResult out;
    out.order.resize(layers);
    std::iota(out.order.begin(), out.order.end(), 0);
    std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) { return hbar[a] > hbar[b]; });
    std::vector<int> rank(layers);
    for (int c = 0; c < layers; ++c) rank[out.order[c]] = c;

    for (int c = 0; c < layers; ++c) {
        const int src = out.order[c];
        GaussianLayer g = velocity_layers[src];
        g.mu_h = run.comps[src].mean(0);
        g.var_h = run.comps[src].cov(0, 0);
        g.count = n[src];
        out.layers.push_back(g);
        out.mean_heights.push_back(hbar[src]);
    }
    // Every pixel gets its MAP height layer; cloud pixels keep their ICM label.
    out.rho = Eigen::MatrixXi::Zero(heights.rows(), heights.cols());
    for (Eigen::Index i = 0; i < heights.rows(); ++i)
        for (Eigen::Index j = 0; j < heights.cols(); ++j) {
            VecD x(1);
            x(0) = heights(i, j);
            int best = 0;
            double best_lp = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < layers; ++c) {
                const double lp = log_density(run.comps[c], x);
                if (lp > best_lp) {
                    best_lp = lp;
                    best = c;
                }
            }
            out.rho(i, j) = rank[best];
        }
    for (std::size_t k = 0; k < pixels.size(); ++k) out.rho(pixels[k].first, pixels[k].second) = rank[run.labels[k]];
    out.objective = std::move(run.objective);
    out.iterations = run.iterations;
    return out;
}

}  // namespace windfield
