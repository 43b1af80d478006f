#include <doctest.h>

#include "test_util.hpp"
#include "windfield/atmosphere.hpp"

using namespace windfield;

namespace {

IRFrame constant_frame(double t, int rows = 2, int cols = 3) {
    IRFrame f;
    f.temps = Grid::Constant(rows, cols, t);
    return f;
}

WeatherRecord air(double t) { return {0.0, 1013.0, t, t - 5.0, 0.5}; }

}  // namespace

TEST_CASE("height map: zero deficit, hand value and ceiling clamp") {
    const LapseRateModel lapse;
    CHECK(height_map(constant_frame(293.0), air(293.0), lapse)(0, 0) == 0.0);
    CHECK(height_map(constant_frame(280.0), air(293.0), lapse)(1, 2) == doctest::Approx(2000.0));
    CHECK(height_map(constant_frame(293.0 - 97.5), air(293.0), lapse)(0, 1) == doctest::Approx(15000.0));
    CHECK(height_map(constant_frame(293.0 - 200.0), air(293.0), lapse)(0, 1) == 15000.0);
    // Warmer than the air: clamped to the reference height.
    CHECK(height_map(constant_frame(297.0), air(293.0), lapse)(0, 0) == 0.0);
}

TEST_CASE("height map slope is -1/gamma before clamping") {
    LapseRateModel lapse;
    lapse.gamma = 8e-3;
    IRFrame f = constant_frame(270.0, 1, 2);
    f.temps(0, 1) = 271.0;
    const Grid h = height_map(f, air(290.0), lapse);
    CHECK(h(0, 1) - h(0, 0) == doctest::Approx(-1.0 / lapse.gamma));
    lapse.gamma = 0.0;
    CHECK_THROWS_AS(height_map(f, air(290.0), lapse), ConfigError);
}

TEST_CASE("pixel dims: positive, growing downward at low sun, symmetric at zenith") {
    GeometryModel g;
    g.sun_elevation = 45.0;
    const PixelDims d = pixel_dims(g);
    CHECK(d.dx.minCoeff() > 0.0);
    CHECK(d.dy.minCoeff() > 0.0);
    CHECK(d.dy(kReferenceRows - 1, 0) > d.dy(0, 0));
    for (int i = 1; i < kReferenceRows; ++i) CHECK(d.dy(i, 5) > d.dy(i - 1, 5));

    g.sun_elevation = 90.0;
    const PixelDims z = pixel_dims(g);
    for (int i = 0; i < kReferenceRows; ++i) {
        CHECK(z.dy(i, 0) == doctest::Approx(z.dy(kReferenceRows - 1 - i, 0)).epsilon(1e-12));
        CHECK(z.dx(i, 0) == doctest::Approx(z.dx(kReferenceRows - 1 - i, 0)).epsilon(1e-12));
    }
    // Within the 60 degree field the zenith view varies by only the off-axis cosine factors.
    CHECK(z.dy.maxCoeff() / z.dy.minCoeff() < 1.2);
}

TEST_CASE("halving the field of view halves the pixel dims to first order") {
    GeometryModel g;
    g.sun_elevation = 70.0;
    g.fov_diag = 20.0;
    const PixelDims a = pixel_dims(g);
    g.fov_diag = 10.0;
    const PixelDims b = pixel_dims(g);
    // Small-angle reference: extent step/sin θ at the centre row.
    const double step = 10.0 * std::numbers::pi / 180.0 / std::hypot(60.0, 80.0);
    const double s = std::sin(70.0 * std::numbers::pi / 180.0);
    CHECK(b.dx(30, 0) == doctest::Approx(step / s).epsilon(0.01));
    CHECK(b.dy(30, 0) == doctest::Approx(step / (s * s)).epsilon(0.01));
    CHECK((b.dx.array() / a.dx.array()).maxCoeff() == doctest::Approx(0.5).epsilon(0.03));
    CHECK((b.dy.array() / a.dy.array()).minCoeff() == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("pixel dims ignore azimuth and reject grazing views") {
    GeometryModel g;
    g.sun_elevation = 50.0;
    g.sun_azimuth = 10.0;
    const PixelDims a = pixel_dims(g);
    g.sun_azimuth = 250.0;
    const PixelDims b = pixel_dims(g);
    CHECK((a.dx - b.dx).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.dy - b.dy).cwiseAbs().maxCoeff() == 0.0);
    g.sun_elevation = 15.0;
    CHECK_THROWS_AS(pixel_dims(g), GeometryError);
    g.sun_elevation = 0.0;
    CHECK_THROWS_AS(pixel_dims(g), ConfigError);
}

TEST_CASE("velocity transform: hand value, zero flow and linearity") {
    GeometryModel g;
    g.delta = 2.29;
    g.frame_rate = 1.0 / 15.0;
    PixelDims d{Grid::Constant(2, 2, 1e-3), Grid::Constant(2, 2, 2e-3)};
    std::vector<Grid> ones{Grid::Ones(2, 2)};
    const VelocityField f = transform_velocity(ones, ones, ones, {1000.0}, d, g);
    CHECK(f.u(0, 0) == doctest::Approx(34.35));
    CHECK(f.v(1, 1) == doctest::Approx(68.7));

    std::vector<Grid> zero{Grid::Zero(2, 2)};
    const VelocityField z = transform_velocity(zero, zero, ones, {1000.0}, d, g);
    CHECK(z.u.cwiseAbs().maxCoeff() == 0.0);

    const VelocityField twice = transform_velocity(ones, ones, ones, {2000.0}, d, g);
    CHECK(twice.u(0, 1) == doctest::Approx(2.0 * f.u(0, 1)));
    std::vector<Grid> triple{Grid::Constant(2, 2, 3.0)};
    const VelocityField t3 = transform_velocity(triple, triple, ones, {1000.0}, d, g);
    CHECK(t3.v(1, 0) == doctest::Approx(3.0 * f.v(1, 0)));
}

TEST_CASE("velocity transform mixes layers by responsibility") {
    GeometryModel g;
    PixelDims d = unit_dims(1, 1);
    std::vector<Grid> u{Grid::Constant(1, 1, 1.0), Grid::Constant(1, 1, -2.0)};
    std::vector<Grid> gam{Grid::Constant(1, 1, 0.25), Grid::Constant(1, 1, 0.75)};
    const VelocityField f = transform_velocity(u, u, gam, {1000.0, 3000.0}, d, g);
    const double gain = g.delta / g.frame_rate;
    CHECK(f.u(0, 0) == doctest::Approx(gain * (0.25 * 1000.0 - 0.75 * 2.0 * 3000.0)));
    CHECK_THROWS_AS(transform_velocity(u, u, {gam[0]}, {1000.0, 3000.0}, d, g), ShapeError);
}
