#include "windfield/selection.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>

namespace windfield {

DiffMap diff_map(const IntensityFrame &prev, const IntensityFrame &curr) {
    require_same_shape(prev.i, curr.i, "diff_map");
    const Grid change = (prev.i - curr.i).cwiseAbs();
    const double total = change.sum();
    if (!(total > 0.0)) throw ZeroDiffError("consecutive frames are identical");
    return {change / total};
}

SelectionMask threshold_mask(const DiffMap &d, double tau) {
    if (!(tau >= 0.0 && tau < 1.0)) throw ConfigError(fmt::format("threshold tau={} outside [0, 1)", tau));
    const Eigen::Index m = d.d.rows(), n = d.d.cols();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(m * n));
    std::iota(order.begin(), order.end(), 0);
    // Row-major flat index k = i·n + j keeps ties in (row, col) order.
    auto at = [&](Eigen::Index k) { return d.d(k / n, k % n); };
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return at(a) < at(b); });

    SelectionMask out{CloudMask::Zero(m, n), Grid::Zero(m, n), tau};
    double acc = 0.0;
    for (const Eigen::Index k : order) {
        acc += at(k);
        out.r(k / n, k % n) = acc;
        out.b(k / n, k % n) = acc >= tau ? 1 : 0;
    }
    return out;
}

VectorSet masked_vectors(const VelocityField &field, const SelectionMask &mask) {
    require_same_shape(field.u, field.v, "masked_vectors");
    if (field.u.rows() != mask.b.rows() || field.u.cols() != mask.b.cols())
        throw ShapeError("masked_vectors: mask and field differ in shape");
    VectorSet rows;
    for (Eigen::Index i = 0; i < mask.b.rows(); ++i)
        for (Eigen::Index j = 0; j < mask.b.cols(); ++j)
            if (mask.b(i, j)) rows.push_back({static_cast<double>(j), static_cast<double>(i), field.u(i, j), field.v(i, j)});
    return rows;
}

LagBuffer::LagBuffer(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw ConfigError(fmt::format("lag must be at least 1, got {}", capacity));
}

void LagBuffer::push(int frame, VectorSet rows) {
    if (!entries_.empty() && frame <= entries_.front().frame)
        throw SequenceError(fmt::format("frame {} pushed after frame {}", frame, entries_.front().frame));
    entries_.push_front({frame, std::move(rows)});
    while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_back();
}

VectorSet LagBuffer::collect() const {
    VectorSet out;
    for (const auto &e : entries_) out.insert(out.end(), e.rows.begin(), e.rows.end());
    if (out.empty()) throw EmptyDatasetError("no selected vectors in the lag window");
    return out;
}

VectorSet LagBuffer::push_and_collect(int frame, VectorSet rows) {
    push(frame, std::move(rows));
    return collect();
}

int LagBuffer::newest_frame() const {
    if (entries_.empty()) throw EmptyDatasetError("lag buffer is empty");
    return entries_.front().frame;
}

}  // namespace windfield
