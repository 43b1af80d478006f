#include "windfield/sampling.hpp"

#include <fmt/format.h>

#include <cmath>

#include "windfield/rng.hpp"

namespace windfield {

namespace {

Vec normalize_log_weights(const Vec &logw) {
    const double peak = logw.maxCoeff();
    if (!std::isfinite(peak)) throw NumericalError("importance weights are degenerate");
    Vec w = (logw.array() - peak).exp().matrix();
    const double total = w.sum();
    if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("importance weights do not normalize");
    return w / total;
}

}  // namespace

Mat velocity_log_densities(const VectorSet &dataset, const std::vector<GaussianLayer> &layers) {
    Mat out(static_cast<Eigen::Index>(dataset.size()), static_cast<Eigen::Index>(layers.size()));
    for (std::size_t c = 0; c < layers.size(); ++c)
        for (std::size_t i = 0; i < dataset.size(); ++i)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                mvn_logpdf({dataset[i].u, dataset[i].v}, layers[c].mu_v, layers[c].cov_v);
    return out;
}

Vec importance_weights(const VectorSet &dataset, const GaussianLayer &layer) {
    if (dataset.empty()) throw EmptyDatasetError("no vectors to weight");
    return normalize_log_weights(velocity_log_densities(dataset, {layer}).col(0));
}

Eigen::Index cdf_select(const Vec &cumulative, double z) {
    const Eigen::Index n = cumulative.size();
    Eigen::Index lo = 0;
    Eigen::Index hi = n - 1;
    while (lo < hi) {
        const Eigen::Index mid = lo + (hi - lo) / 2;
        if (cumulative(mid) >= z)
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

std::vector<Eigen::Index> cdf_sample(const Vec &weights, int n, std::uint64_t seed) {
    if (n < 1) throw ConfigError(fmt::format("sample count {} < 1", n));
    if (weights.size() == 0) throw EmptyDatasetError("no weights to sample from");
    Vec cumulative(weights.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        acc += weights(i);
        cumulative(i) = acc;
    }
    // Guard against rounding in the last prefix sum; trailing zero-weight rows stay unreachable.
    Eigen::Index last = weights.size() - 1;
    while (last > 0 && weights(last) <= 0.0) --last;
    for (Eigen::Index i = last; i < weights.size(); ++i) cumulative(i) = std::max(cumulative(i), 1.0);

    Rng rng(seed);
    std::vector<Eigen::Index> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        double z = uniform01(rng);
        while (z <= 0.0) z = uniform01(rng);
        out.push_back(cdf_select(cumulative, z));
    }
    return out;
}

TrainingSet build_training_set(const VectorSet &dataset, const std::vector<GaussianLayer> &layers, int n_star,
                               std::uint64_t seed) {
    const int c_count = static_cast<int>(layers.size());
    if (c_count < 1) throw ConfigError("no layers to sample from");
    if (n_star < c_count) throw ConfigError(fmt::format("N* = {} below layer count {}", n_star, c_count));
    if (dataset.empty()) throw EmptyDatasetError("no vectors to sample from");

    const Mat logp = velocity_log_densities(dataset, layers);
    std::vector<Eigen::Index> rows;
    std::vector<int> source;
    TrainingSet ts;
    if (static_cast<int>(dataset.size()) < n_star) {
        ts.truncated = true;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            rows.push_back(static_cast<Eigen::Index>(i));
            Eigen::Index best;
            logp.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
            source.push_back(static_cast<int>(best));
        }
    } else {
        const int per_layer = n_star / c_count;
        for (int c = 0; c < c_count; ++c) {
            const Vec w = normalize_log_weights(logp.col(c));
            for (Eigen::Index idx : cdf_sample(w, per_layer, mix_seed(seed, static_cast<std::uint64_t>(c)))) {
                rows.push_back(idx);
                source.push_back(c);
            }
        }
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    ts.x.resize(n, 2);
    ts.v.resize(n, 2);
    ts.z.resize(n, c_count);
    for (Eigen::Index k = 0; k < n; ++k) {
        const VectorRow &r = dataset[static_cast<std::size_t>(rows[static_cast<std::size_t>(k)])];
        ts.x.row(k) << r.x, r.y;
        ts.v.row(k) << r.u, r.v;
        const Eigen::RowVectorXd lp = logp.row(rows[static_cast<std::size_t>(k)]);
        const Eigen::RowVectorXd p = (lp.array() - lp.maxCoeff()).exp().matrix();
        ts.z.row(k) = p / p.sum();
    }
    ts.source_layer = std::move(source);
    return ts;
}

}  // namespace windfield
