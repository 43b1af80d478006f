#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "windfield/grid.hpp"
#include "windfield/rng.hpp"

namespace testutil {

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string &tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("windfield_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;
    [[nodiscard]] const std::filesystem::path &path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Smooth periodic texture sampled at (x - sx, y - sy); values roughly in [0, 255].
inline windfield::Grid texture(int rows, int cols, double sx, double sy, std::uint64_t seed = 7) {
    windfield::Rng rng(seed);
    struct Mode {
        double kx, ky, ph, amp;
    };
    std::vector<Mode> modes;
    for (int m = 0; m < 12; ++m) {
        const double wl = 14.0 + 16.0 * windfield::uniform01(rng);
        const double dir = 6.283185307179586 * windfield::uniform01(rng);
        modes.push_back({6.283185307179586 / wl * std::cos(dir), 6.283185307179586 / wl * std::sin(dir),
                         6.283185307179586 * windfield::uniform01(rng), 0.5 + windfield::uniform01(rng)});
    }
    windfield::Grid g(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            double s = 0.0;
            for (const auto &m : modes) s += m.amp * std::cos(m.kx * (j - sx) + m.ky * (i - sy) + m.ph);
            g(i, j) = 128.0 + 16.0 * s;
        }
    return g;
}

inline double median(std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    return v[v.size() / 2];
}

}  // namespace testutil
