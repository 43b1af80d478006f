#include "windfield/kernels.hpp"

#include <fmt/format.h>

#include <cmath>

namespace windfield {

KernelKind parse_kernel_kind(std::string_view name) {
    if (name == "linear") return KernelKind::Linear;
    if (name == "rbf") return KernelKind::Rbf;
    if (name == "poly") return KernelKind::Poly;
    throw ConfigError(fmt::format("unknown kernel '{}'", name));
}

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::Linear: return "linear";
        case KernelKind::Rbf: return "rbf";
        case KernelKind::Poly: return "poly";
    }
    return "unknown";
}

void validate(const KernelSpec &spec) {
    if (spec.kind != KernelKind::Linear && !(spec.gamma > 0.0))
        throw ConfigError(fmt::format("kernel gamma must be positive, got {}", spec.gamma));
    if (!(spec.input_scale > 0.0)) throw ConfigError("kernel input scale must be positive");
    if (spec.kind == KernelKind::Poly && spec.degree < 1)
        throw ConfigError(fmt::format("polynomial degree must be >= 1, got {}", spec.degree));
}

double kernel_eval(const KernelSpec &spec, const Eigen::Ref<const Eigen::RowVectorXd> &x,
                   const Eigen::Ref<const Eigen::RowVectorXd> &xp) {
    const double s2 = spec.input_scale * spec.input_scale;
    switch (spec.kind) {
        case KernelKind::Linear: return s2 * x.dot(xp);
        case KernelKind::Rbf: return std::exp(-spec.gamma * s2 * (x - xp).squaredNorm());
        case KernelKind::Poly: return std::pow(spec.gamma * s2 * x.dot(xp) + spec.beta_off, spec.degree);
    }
    return 0.0;
}

Mat gram(const KernelSpec &spec, const Mat &x, const Mat &xp) {
    if (x.cols() != xp.cols()) throw ShapeError("gram: coordinate dimensions differ");
    const Mat xs = x * spec.input_scale;
    const Mat xps = xp * spec.input_scale;
    Mat k(x.rows(), xp.rows());
    switch (spec.kind) {
        case KernelKind::Linear: k.noalias() = xs * xps.transpose(); break;
        case KernelKind::Poly:
            k.noalias() = xs * xps.transpose();
            k = (spec.gamma * k.array() + spec.beta_off).pow(spec.degree).matrix();
            break;
        case KernelKind::Rbf: {
            for (Eigen::Index j = 0; j < xp.rows(); ++j)
                for (Eigen::Index i = 0; i < x.rows(); ++i)
                    k(i, j) = std::exp(-spec.gamma * (xs.row(i) - xps.row(j)).squaredNorm());
            break;
        }
    }
    return k;
}

}  // namespace windfield
