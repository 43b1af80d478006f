#include <doctest.h>

#include <fstream>

#include "test_util.hpp"
#include "windfield/imaging.hpp"

using namespace windfield;

namespace {

IRFrame frame_from(const Grid &t, double ts, int k) {
    IRFrame f;
    f.temps = t;
    f.timestamp = ts;
    f.sun_elevation = 60.0;
    f.sun_azimuth = 120.0;
    f.index = k;
    return f;
}

void write_dir(const std::filesystem::path &dir, int n, bool shuffled = false) {
    std::vector<IRFrame> frames;
    for (int k = 0; k < n; ++k) {
        Grid t = Grid::Constant(kReferenceRows, kReferenceCols, 250.0 + k);
        t(0, 0) = 240.0;
        frames.push_back(frame_from(t, 1000.0 + 15.0 * k, k));
        write_frame_csv(dir / frame_filename(k), t);
    }
    if (shuffled) std::reverse(frames.begin(), frames.end());
    write_manifest(dir / "sequence.csv", frames);
}

}  // namespace

TEST_CASE("load_frames returns 21 frames in time order") {
    testutil::TempDir tmp("imaging21");
    write_dir(tmp.path(), 21);
    const auto frames = load_frames(tmp.path());
    REQUIRE(frames.size() == 21);
    for (std::size_t k = 0; k < frames.size(); ++k) {
        CHECK(frames[k].index == static_cast<int>(k));
        CHECK(frames[k].temps.rows() == kReferenceRows);
        CHECK(frames[k].temps.cols() == kReferenceCols);
        CHECK(frames[k].temps(1, 1) == doctest::Approx(250.0 + k));
        if (k > 0) CHECK(frames[k].timestamp > frames[k - 1].timestamp);
    }
    CHECK(frames[3].sun_elevation == doctest::Approx(60.0));
}

TEST_CASE("shuffled manifest rows still load time-sorted") {
    testutil::TempDir tmp("imaging_shuffle");
    write_dir(tmp.path(), 5, true);
    const auto frames = load_frames(tmp.path());
    REQUIRE(frames.size() == 5);
    for (int k = 0; k < 5; ++k) CHECK(frames[static_cast<std::size_t>(k)].index == k);
}

TEST_CASE("empty directory is a sequence error") {
    testutil::TempDir tmp("imaging_empty");
    CHECK_THROWS_AS(load_frames(tmp.path()), SequenceError);
    std::ofstream(tmp.path() / "sequence.csv") << "index,timestamp,sun_elevation_deg,sun_azimuth_deg\n";
    CHECK_THROWS_AS(load_frames(tmp.path()), SequenceError);
}

TEST_CASE("ragged or missing frames are format errors") {
    testutil::TempDir tmp("imaging_ragged");
    write_dir(tmp.path(), 3);
    std::filesystem::remove(tmp.path() / frame_filename(2));
    CHECK_THROWS_AS(load_frames(tmp.path()), FormatError);
    std::ofstream(tmp.path() / frame_filename(2)) << "25000,25000\n25000\n";
    CHECK_THROWS_AS(load_frames(tmp.path()), FormatError);
}

TEST_CASE("duplicate timestamps are rejected") {
    testutil::TempDir tmp("imaging_dup");
    write_dir(tmp.path(), 2);
    std::ofstream(tmp.path() / "sequence.csv") << "index,timestamp,sun_elevation_deg,sun_azimuth_deg\n0,5,60,0\n1,5,60,0\n";
    CHECK_THROWS_AS(load_frames(tmp.path()), SequenceError);
}

TEST_CASE("frame files round-trip in centikelvin") {
    testutil::TempDir tmp("imaging_rt");
    Grid t(3, 4);
    t << 250.01, 251.5, 260, 270.99, 280, 281.25, 282, 283, 290, 291, 292, 293.07;
    write_frame_csv(tmp.path() / "f.csv", t);
    std::ifstream in(tmp.path() / "f.csv");
    std::string first;
    std::getline(in, first);
    CHECK(first == "25001,25150,26000,27099");
}

TEST_CASE("masks must cover every frame or none") {
    testutil::TempDir tmp("imaging_masks");
    write_dir(tmp.path(), 3);
    write_mask_csv(tmp.path() / mask_filename(0), CloudMask::Ones(kReferenceRows, kReferenceCols));
    std::vector<CloudMask> masks;
    CHECK_THROWS_AS(load_frames(tmp.path(), &masks), FormatError);
    for (int k = 1; k < 3; ++k)
        write_mask_csv(tmp.path() / mask_filename(k), CloudMask::Zero(kReferenceRows, kReferenceCols));
    const auto frames = load_frames(tmp.path(), &masks);
    CHECK(masks.size() == 3);
    CHECK(masks[0].cast<int>().sum() == kReferenceRows * kReferenceCols);
    CHECK(masks[1].cast<int>().sum() == 0);
}

TEST_CASE("normalize maps endpoints affinely") {
    Grid t(1, 3);
    t << 250, 275, 300;
    const Grid s = minmax_scale(t);
    CHECK(s(0, 0) == 0.0);
    CHECK(s(0, 1) == doctest::Approx(0.5));
    CHECK(s(0, 2) == 1.0);
    const NormFrame n = normalize(frame_from(t, 0, 0));
    CHECK(n.tbar(0, 0) == doctest::Approx(kNormClamp));
    CHECK(n.tbar(0, 2) == doctest::Approx(1.0 - kNormClamp));
}

TEST_CASE("constant frame has a degenerate range") {
    CHECK_THROWS_AS(normalize(frame_from(Grid::Constant(4, 4, 280.0), 0, 0)), DegenerateRangeError);
}

TEST_CASE("normalize matches direct recomputation, preserves order and is idempotent") {
    Rng rng(11);
    Grid t(kReferenceRows, kReferenceCols);
    for (Eigen::Index p = 0; p < t.size(); ++p) t.data()[p] = 230.0 + 60.0 * uniform01(rng);
    const double lo = t.minCoeff(), hi = t.maxCoeff();
    const Grid s = minmax_scale(t);
    CHECK(s.minCoeff() == 0.0);
    CHECK(s.maxCoeff() == 1.0);
    for (Eigen::Index p = 0; p < t.size(); ++p) CHECK(s.data()[p] == doctest::Approx((t.data()[p] - lo) / (hi - lo)));
    const NormFrame n = normalize(frame_from(t, 0, 0));
    for (Eigen::Index p = 1; p < t.size(); ++p)
        if (t.data()[p] <= t.data()[p - 1]) CHECK(n.tbar.data()[p] <= n.tbar.data()[p - 1]);
    const NormFrame again = normalize(frame_from(n.tbar, 0, 0));
    CHECK((again.tbar - n.tbar).cwiseAbs().maxCoeff() < 1e-5);
    const IntensityFrame i = to_intensity(frame_from(t, 0, 0));
    CHECK(i.i.minCoeff() >= 0.0);
    CHECK(i.i.maxCoeff() < 256.0);
}

TEST_CASE("weather interpolation: nodes, midpoints and range") {
    std::vector<WeatherRecord> recs{{0.0, 1000.0, 290.0, 280.0, 0.5}, {600.0, 1002.0, 292.0, 281.0, 0.7},
                                    {1200.0, 1001.0, 291.0, 279.0, 0.6}};
    const auto at = interpolate_weather(recs, 600.0);
    CHECK(at.pressure == 1002.0);
    CHECK(at.air_temp == 292.0);
    const auto mid = interpolate_weather(recs, 300.0);
    CHECK(mid.pressure == doctest::Approx(1001.0));
    CHECK(mid.air_temp == doctest::Approx(291.0));
    CHECK(mid.dew_point == doctest::Approx(280.5));
    CHECK(mid.humidity == doctest::Approx(0.6));
    // 15 s cadence over 10-minute records stays piecewise linear and bounded.
    for (double t = 0.0; t <= 1200.0; t += 15.0) {
        const auto w = interpolate_weather(recs, t);
        const auto &a = recs[t < 600.0 ? 0 : 1];
        const auto &b = recs[t < 600.0 ? 1 : 2];
        CHECK(w.air_temp >= std::min(a.air_temp, b.air_temp) - 1e-12);
        CHECK(w.air_temp <= std::max(a.air_temp, b.air_temp) + 1e-12);
        CHECK(w.air_temp == doctest::Approx(a.air_temp + (b.air_temp - a.air_temp) * (t - a.timestamp) / 600.0));
    }
    CHECK_THROWS_AS(interpolate_weather(recs, -1.0), ExtrapolationError);
    CHECK_THROWS_AS(interpolate_weather(recs, 1200.5), ExtrapolationError);
}

TEST_CASE("weather file round-trips") {
    testutil::TempDir tmp("imaging_wx");
    std::vector<WeatherRecord> recs{{0.0, 1000.0, 290.0, 280.0, 0.5}, {600.0, 1002.0, 292.0, 281.0, 0.7}};
    write_weather(tmp.path() / "weather.csv", recs);
    const auto back = load_weather(tmp.path() / "weather.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[1].pressure == 1002.0);
    CHECK(back[1].humidity == doctest::Approx(0.7));
}

TEST_CASE("fallback mask keeps warm pixels below the ceiling") {
    NormFrame n{Grid(1, 4)};
    n.tbar << 0.1, 0.4, 0.8, 0.9;
    Grid h(1, 4);
    h << 1000, 1000, 1000, 13000;
    const CloudMask m = fallback_mask(n, h, 12000.0, 0.5);
    CHECK(m(0, 0) == 0);
    CHECK(m(0, 1) == 0);
    CHECK(m(0, 2) == 1);
    CHECK(m(0, 3) == 0);
}
