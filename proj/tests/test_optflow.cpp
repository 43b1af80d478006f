#include <doctest.h>

#include <chrono>

#include "test_util.hpp"
#include "windfield/optflow.hpp"

using namespace windfield;

namespace {

constexpr int kRows = 60, kCols = 80, kBorder = 5;

std::pair<std::vector<double>, std::vector<double>> interior(const Grid &u, const Grid &v) {
    std::vector<double> us, vs;
    for (int i = kBorder; i < u.rows() - kBorder; ++i)
        for (int j = kBorder; j < u.cols() - kBorder; ++j) {
            us.push_back(u(i, j));
            vs.push_back(v(i, j));
        }
    return {us, vs};
}

}  // namespace

TEST_CASE("window side from the nominal area") {
    CHECK(WLKParams::side_for_area(16.0) == 5);
    CHECK(WLKParams::side_for_area(9.0) == 3);
    WLKParams p;
    p.window = 4;
    CHECK(p.effective_window() % 2 == 1);
    CHECK(p.effective_window() >= 3);
    p.window = 1;
    CHECK(p.effective_window() == 3);
}

TEST_CASE("gradients: static scene, ramp and brightness constancy") {
    const IntensityFrame a{testutil::texture(kRows, kCols, 0, 0)};
    const Gradients s = spatiotemporal_gradients(a, a, 1.0);
    CHECK(s.it.cwiseAbs().maxCoeff() == 0.0);

    Grid ramp(kRows, kCols);
    for (int i = 0; i < kRows; ++i)
        for (int j = 0; j < kCols; ++j) ramp(i, j) = j;
    const Gradients r = spatiotemporal_gradients({ramp}, {ramp}, 1.0);
    for (int i = kBorder; i < kRows - kBorder; ++i)
        for (int j = kBorder; j < kCols - kBorder; ++j) {
            CHECK(r.ix(i, j) == doctest::Approx(1.0).epsilon(1e-9));
            CHECK(std::abs(r.iy(i, j)) < 1e-9);
        }

    Grid b0(kRows, kCols), b1(kRows, kCols);
    for (int i = 0; i < kRows; ++i)
        for (int j = 0; j < kCols; ++j) {
            auto blob = [&](double cx) { return 100.0 * std::exp(-((j - cx) * (j - cx) + (i - 30.0) * (i - 30.0)) / 72.0); };
            b0(i, j) = blob(40.0);
            b1(i, j) = blob(41.0);
        }
    const Gradients g = spatiotemporal_gradients({b0}, {b1}, 1.0);
    double err = 0.0, scale = 0.0;
    for (int i = 20; i < 40; ++i)
        for (int j = 30; j < 50; ++j) {
            err += std::abs(g.it(i, j) + g.ix(i, j));
            scale += std::abs(g.ix(i, j));
        }
    CHECK(err / scale < 0.05);
    CHECK_THROWS_AS(spatiotemporal_gradients({b0}, {Grid::Zero(3, 3)}, 1.0), ShapeError);
}

TEST_CASE("static scene gives zero flow") {
    const IntensityFrame a{testutil::texture(kRows, kCols, 0, 0)};
    const LayerFlow f = lk_flow(a, a, {});
    CHECK(f.u[0].cwiseAbs().maxCoeff() == 0.0);
    CHECK(f.v[0].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("translated texture (+2, 0) is recovered") {
    const IntensityFrame a{testutil::texture(kRows, kCols, 0, 0)}, b{testutil::texture(kRows, kCols, 2, 0)};
    const LayerFlow f = lk_flow(a, b, {});
    auto [us, vs] = interior(f.u[0], f.v[0]);
    const double mu = testutil::median(us), mv = testutil::median(vs);
    CHECK(mu >= 1.8);
    CHECK(mu <= 2.2);
    CHECK(std::abs(mv) <= 0.2);
}

TEST_CASE("swapping the frame pair flips the flow") {
    const IntensityFrame a{testutil::texture(kRows, kCols, 0, 0)}, b{testutil::texture(kRows, kCols, 1, -0.5)};
    const LayerFlow f = lk_flow(a, b, {}), r = lk_flow(b, a, {});
    auto [fu, fv] = interior(f.u[0], f.v[0]);
    auto [ru, rv] = interior(r.u[0], r.v[0]);
    CHECK(std::abs(testutil::median(fu) + testutil::median(ru)) < 0.2);
    CHECK(std::abs(testutil::median(fv) + testutil::median(rv)) < 0.2);
}

TEST_CASE("uniform weights reproduce unweighted Lucas-Kanade; zero weights give zero flow") {
    const IntensityFrame a{testutil::texture(kRows, kCols, 0, 0)}, b{testutil::texture(kRows, kCols, 0.7, 0.4)};
    const LayerFlow plain = lk_flow(a, b, {});
    const LayerFlow w = wlk_flow(a, b, {Grid::Ones(kRows, kCols), Grid::Zero(kRows, kCols)}, {});
    CHECK((plain.u[0] - w.u[0]).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((plain.v[0] - w.v[0]).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(w.u[1].cwiseAbs().maxCoeff() == 0.0);
    CHECK(w.v[1].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a stronger ridge never lengthens the solution") {
    const IntensityFrame a{testutil::texture(kRows, kCols, 0, 0)}, b{testutil::texture(kRows, kCols, 0.5, 0.5, 7)};
    Rng rng(3);
    Grid w(kRows, kCols);
    for (Eigen::Index p = 0; p < w.size(); ++p) w.data()[p] = uniform01(rng);
    const Gradients g = spatiotemporal_gradients(a, b, 1.0);
    for (double tau : {1e-8, 1e-2, 1.0, 100.0}) {
        WLKParams lo, hi;
        lo.tau_reg = tau;
        hi.tau_reg = 10.0 * tau;
        const LayerFlow fl = wlk_flow(g, {w}, lo), fh = wlk_flow(g, {w}, hi);
        const Grid nl = fl.u[0].cwiseAbs2() + fl.v[0].cwiseAbs2();
        const Grid nh = fh.u[0].cwiseAbs2() + fh.v[0].cwiseAbs2();
        CHECK(((nh - nl).array() <= 1e-12 * (1.0 + nl.array())).all());
    }
}

TEST_CASE("weighting singles out the layer that owns the pixels") {
    // Left half moves right, right half moves down; weights select each half.
    Grid a = testutil::texture(kRows, kCols, 0, 0, 3), b(kRows, kCols);
    const Grid right = testutil::texture(kRows, kCols, 1.0, 0, 3), down = testutil::texture(kRows, kCols, 0, 1.0, 3);
    Grid wl = Grid::Zero(kRows, kCols);
    for (int i = 0; i < kRows; ++i)
        for (int j = 0; j < kCols; ++j) {
            b(i, j) = j < kCols / 2 ? right(i, j) : down(i, j);
            wl(i, j) = j < kCols / 2 ? 1.0 : 0.0;
        }
    const Grid wr = Grid::Ones(kRows, kCols) - wl;
    const LayerFlow f = wlk_flow({a}, {b}, {wl, wr}, {});
    // Pixels straddling the seam see only their own side through the weights.
    CHECK(f.u[0](30, kCols / 2 - 1) == doctest::Approx(1.0).epsilon(0.15));
    CHECK(std::abs(f.v[0](30, kCols / 2 - 1)) < 0.15);
    CHECK(f.v[1](30, kCols / 2) == doctest::Approx(1.0).epsilon(0.15));
    CHECK(std::abs(f.u[1](30, kCols / 2)) < 0.15);
}

TEST_CASE("dense flow stays under a second per frame") {
    const IntensityFrame a{testutil::texture(kRows, kCols, 0, 0)}, b{testutil::texture(kRows, kCols, 2, -1)};
    const auto t0 = std::chrono::steady_clock::now();
    const LayerFlow f = wlk_flow(a, b, {Grid::Ones(kRows, kCols), Grid::Ones(kRows, kCols)}, {});
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(s < 1.0);
    CHECK(f.u.size() == 2);
}
