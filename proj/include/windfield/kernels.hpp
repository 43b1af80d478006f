#pragma once

#include <string>
#include <string_view>

#include "windfield/grid.hpp"

namespace windfield {

enum class KernelKind { Linear, Rbf, Poly };

struct KernelSpec {
    KernelKind kind = KernelKind::Linear;
    double gamma = 1.0;
    double beta_off = 1.0;
    int degree = 2;
    double input_scale = 1.0;  // coordinates are multiplied by this before evaluation
};

KernelKind parse_kernel_kind(std::string_view name);
std::string to_string(KernelKind kind);
void validate(const KernelSpec &spec);

double kernel_eval(const KernelSpec &spec, const Eigen::Ref<const Eigen::RowVectorXd> &x,
                   const Eigen::Ref<const Eigen::RowVectorXd> &xp);

// K(i, j) = k(X.row(i), Xp.row(j)).
Mat gram(const KernelSpec &spec, const Mat &x, const Mat &xp);

}  // namespace windfield
