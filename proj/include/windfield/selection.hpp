#pragma once

#include <deque>

#include "windfield/atmosphere.hpp"
#include "windfield/grid.hpp"
#include "windfield/imaging.hpp"

namespace windfield {

// Normalized absolute intensity change; sums to one.
struct DiffMap {
    Grid d;
};

struct SelectionMask {
    CloudMask b;
    Grid r;  // accumulated change mass scattered back to pixel positions
    double tau = 0.0;

    [[nodiscard]] Eigen::Index count() const { return b.cast<Eigen::Index>().sum(); }
};

DiffMap diff_map(const IntensityFrame &prev, const IntensityFrame &curr);

// Ascending sort of d (ties in row-major order), prefix sums r, select r ≥ tau.
SelectionMask threshold_mask(const DiffMap &d, double tau);

// Rows (x, y, u, v) at selected pixels, row-major order.
VectorSet masked_vectors(const VelocityField &field, const SelectionMask &mask);

// Ring of the ℓ most recent per-frame vector sets, newest first.
class LagBuffer {
public:
    struct Entry {
        int frame = 0;
        VectorSet rows;
    };

    explicit LagBuffer(int capacity);

    void push(int frame, VectorSet rows);
    // Newest-first concatenation of the stored sets.
    [[nodiscard]] VectorSet collect() const;
    // push followed by collect.
    VectorSet push_and_collect(int frame, VectorSet rows);

    [[nodiscard]] int capacity() const noexcept { return capacity_; }
    [[nodiscard]] const std::deque<Entry> &entries() const noexcept { return entries_; }
    [[nodiscard]] int newest_frame() const;

private:
    int capacity_;
    std::deque<Entry> entries_;
};

}  // namespace windfield
