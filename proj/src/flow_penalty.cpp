#include <fmt/format.h>

#include "windfield/regression.hpp"

namespace windfield {

Mat grid_coords(int rows, int cols) {
    Mat out(static_cast<Eigen::Index>(rows) * cols, 2);
    Eigen::Index k = 0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j, ++k) out.row(k) << j, i;
    return out;
}

FlowPenalty assemble_flow_penalty(const KernelSpec &spec, const Mat &support_x, int rows, int cols, int stride) {
    if (rows < 1 || cols < 1) throw ConfigError("penalty grid must be nonempty");
    if (stride < 1) throw ConfigError(fmt::format("penalty stride {} < 1", stride));
    const Eigen::Index n = support_x.rows();
    const Mat k = gram(spec, grid_coords(rows, cols), support_x);
    auto at = [&](int i, int j) { return k.row(static_cast<Eigen::Index>(i) * cols + j); };

    // Decimated indices always keep the last row and column.
    auto decimate = [stride](int count) {
        std::vector<int> idx;
        for (int t = 0; t < count; t += stride) idx.push_back(t);
        if (idx.back() != count - 1) idx.push_back(count - 1);
        return idx;
    };
    std::vector<std::pair<int, int>> pix;
    for (int i : decimate(rows))
        for (int j : decimate(cols)) pix.emplace_back(i, j);

    FlowPenalty fp;
    fp.stride = stride;
    fp.l_div = Mat::Zero(static_cast<Eigen::Index>(pix.size()), 2 * n);
    fp.l_curl = Mat::Zero(static_cast<Eigen::Index>(pix.size()), 2 * n);
    for (std::size_t r = 0; r < pix.size(); ++r) {
        const auto [i, j] = pix[r];
        const auto row = static_cast<Eigen::Index>(r);
        if (j + 1 < cols) {
            const Eigen::RowVectorXd dx = at(i, j + 1) - at(i, j);
            fp.l_div.row(row).head(n) += dx;   // ∂u/∂x
            fp.l_curl.row(row).tail(n) += dx;  // ∂v/∂x
        }
        if (i + 1 < rows) {
            const Eigen::RowVectorXd dy = at(i + 1, j) - at(i, j);
            fp.l_div.row(row).tail(n) += dy;   // ∂v/∂y
            fp.l_curl.row(row).head(n) -= dy;  // −∂u/∂y
        }
    }
    fp.p_div = fp.l_div.transpose() * fp.l_div;
    fp.p_curl = fp.l_curl.transpose() * fp.l_curl;
    return fp;
}

}  // namespace windfield
