#include "windfield/imaging.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "csv.hpp"

namespace windfield {

namespace csv {

std::vector<std::string> split(const std::string &line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string{} : field.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::vector<std::string> read_lines(const std::filesystem::path &file) {
    std::ifstream in(file);
    if (!in) throw FormatError("cannot open " + file.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (line[line.find_first_not_of(" \t")] == '#') continue;
        lines.push_back(line);
    }
    return lines;
}

double to_double(const std::string &field, const std::string &context) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        return v;
    } catch (const std::exception &) {
        throw FormatError(fmt::format("{}: '{}' is not a number", context, field));
    }
}

long long to_integer(const std::string &field, const std::string &context) {
    long long v = 0;
    const auto *end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc{} || ptr != end) throw FormatError(fmt::format("{}: '{}' is not an integer", context, field));
    return v;
}

}  // namespace csv

namespace {

Mat read_integer_grid(const std::filesystem::path &file) {
    const auto lines = csv::read_lines(file);
    if (lines.empty()) throw FormatError("empty grid file " + file.string());
    std::vector<std::vector<long long>> rows;
    for (const auto &line : lines) {
        std::vector<long long> row;
        for (const auto &f : csv::split(line)) row.push_back(csv::to_integer(f, file.string()));
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw FormatError(fmt::format("{}: ragged row {} has {} columns, expected {}", file.string(), rows.size(),
                                          row.size(), rows.front().size()));
        }
        rows.push_back(std::move(row));
    }
    Mat out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < out.rows(); ++i)
        for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) = static_cast<double>(rows[i][j]);
    return out;
}

struct ManifestRow {
    int index;
    double timestamp, elevation, azimuth;
};

std::vector<ManifestRow> read_manifest(const std::filesystem::path &dir) {
    const auto file = dir / "sequence.csv";
    if (!std::filesystem::exists(file)) throw SequenceError("no sequence.csv in " + dir.string());
    auto lines = csv::read_lines(file);
    if (!lines.empty() && lines.front().rfind("index", 0) == 0) lines.erase(lines.begin());
    if (lines.empty()) throw SequenceError("sequence.csv lists no frames in " + dir.string());
    std::vector<ManifestRow> rows;
    for (const auto &line : lines) {
        const auto f = csv::split(line);
        if (f.size() != 4) throw FormatError("sequence.csv: expected 4 columns in '" + line + "'");
        rows.push_back({static_cast<int>(csv::to_integer(f[0], "sequence.csv")), csv::to_double(f[1], "sequence.csv"),
                        csv::to_double(f[2], "sequence.csv"), csv::to_double(f[3], "sequence.csv")});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const ManifestRow &a, const ManifestRow &b) { return a.timestamp < b.timestamp; });
    for (std::size_t n = 1; n < rows.size(); ++n) {
        if (!(rows[n].timestamp > rows[n - 1].timestamp))
            throw SequenceError(fmt::format("duplicate timestamp {} in sequence.csv", rows[n].timestamp));
        if (rows[n].index != rows[n - 1].index + 1)
            throw SequenceError(fmt::format("frame indices not monotonic in time: {} follows {}", rows[n].index,
                                            rows[n - 1].index));
    }
    return rows;
}

}  // namespace

std::string frame_filename(int k) { return fmt::format("frame_{:05d}.csv", k); }
std::string mask_filename(int k) { return fmt::format("mask_{:05d}.csv", k); }

std::vector<IRFrame> load_frames(const std::filesystem::path &dir, std::vector<CloudMask> *masks) {
    if (!std::filesystem::is_directory(dir)) throw SequenceError("not a directory: " + dir.string());
    const auto manifest = read_manifest(dir);
    std::vector<IRFrame> frames;
    std::vector<CloudMask> found;
    std::size_t mask_count = 0;
    for (const auto &row : manifest) {
        const auto path = dir / frame_filename(row.index);
        if (!std::filesystem::exists(path)) throw FormatError("missing frame file " + path.string());
        IRFrame frame;
        frame.temps = read_integer_grid(path) / 100.0;
        if (!frames.empty() && (frame.temps.rows() != frames.front().temps.rows() ||
                                frame.temps.cols() != frames.front().temps.cols()))
            throw FormatError("frame " + path.string() + " differs in shape from the first frame");
        if (!frame.temps.allFinite() || frame.temps.minCoeff() <= 0.0)
            throw FormatError("frame " + path.string() + " holds non-positive temperatures");
        frame.timestamp = row.timestamp;
        frame.sun_elevation = row.elevation;
        frame.sun_azimuth = row.azimuth;
        frame.index = row.index;

        const auto mpath = dir / mask_filename(row.index);
        if (std::filesystem::exists(mpath)) {
            const Mat m = read_integer_grid(mpath);
            if (m.rows() != frame.temps.rows() || m.cols() != frame.temps.cols())
                throw FormatError("mask " + mpath.string() + " differs in shape from its frame");
            if (((m.array() != 0.0) && (m.array() != 1.0)).any())
                throw FormatError("mask " + mpath.string() + " is not binary");
            found.push_back(m.cast<std::uint8_t>());
            ++mask_count;
        } else {
            found.emplace_back();
        }
        frames.push_back(std::move(frame));
    }
    if (mask_count != 0 && mask_count != frames.size())
        throw FormatError(fmt::format("{} masks for {} frames; masks must cover every frame or none", mask_count,
                                      frames.size()));
    if (masks) {
        masks->clear();
        if (mask_count) *masks = std::move(found);
    }
    return frames;
}

std::vector<WeatherRecord> load_weather(const std::filesystem::path &file) {
    auto lines = csv::read_lines(file);
    if (!lines.empty() && lines.front().rfind("timestamp", 0) == 0) lines.erase(lines.begin());
    std::vector<WeatherRecord> out;
    for (const auto &line : lines) {
        const auto f = csv::split(line);
        if (f.size() != 5) throw FormatError("weather.csv: expected 5 columns in '" + line + "'");
        WeatherRecord r;
        r.timestamp = csv::to_double(f[0], "weather.csv");
        r.pressure = csv::to_double(f[1], "weather.csv");
        r.air_temp = csv::to_double(f[2], "weather.csv");
        r.dew_point = csv::to_double(f[3], "weather.csv");
        r.humidity = csv::to_double(f[4], "weather.csv");
        if (r.dew_point > r.air_temp || r.humidity < 0.0 || r.humidity > 1.0)
            throw FormatError("weather.csv: inconsistent record '" + line + "'");
        out.push_back(r);
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const WeatherRecord &a, const WeatherRecord &b) { return a.timestamp < b.timestamp; });
    return out;
}

Sequence load_sequence(const std::filesystem::path &dir) {
    Sequence seq;
    seq.frames = load_frames(dir, &seq.masks);
    if (std::filesystem::exists(dir / "weather.csv")) seq.weather = load_weather(dir / "weather.csv");
    return seq;
}

Grid minmax_scale(const Grid &temps) {
    const double lo = temps.minCoeff();
    const double hi = temps.maxCoeff();
    if (!(hi > lo)) throw DegenerateRangeError(fmt::format("constant frame at {} K has no temperature range", lo));
    return (temps.array() - lo) / (hi - lo);
}

NormFrame normalize(const IRFrame &frame) {
    return {minmax_scale(frame.temps).cwiseMax(kNormClamp).cwiseMin(1.0 - kNormClamp)};
}

IntensityFrame to_intensity(const IRFrame &frame) { return {minmax_scale(frame.temps) * 255.0}; }

WeatherRecord interpolate_weather(const std::vector<WeatherRecord> &records, double t) {
    if (records.empty() || t < records.front().timestamp || t > records.back().timestamp)
        throw ExtrapolationError(fmt::format("t={} outside the weather record span", t));
    const auto hi = std::lower_bound(records.begin(), records.end(), t,
                                     [](const WeatherRecord &r, double v) { return r.timestamp < v; });
    if (hi->timestamp == t) return *hi;
    const auto lo = std::prev(hi);
    const double w = (t - lo->timestamp) / (hi->timestamp - lo->timestamp);
    auto lerp = [w](double a, double b) { return a + w * (b - a); };
    return {t, lerp(lo->pressure, hi->pressure), lerp(lo->air_temp, hi->air_temp), lerp(lo->dew_point, hi->dew_point),
            lerp(lo->humidity, hi->humidity)};
}

CloudMask fallback_mask(const NormFrame &norm, const Grid &heights, double height_ceiling_m,
                        double clear_sky_quantile) {
    require_same_shape(norm.tbar, heights, "fallback_mask");
    std::vector<double> values(norm.tbar.data(), norm.tbar.data() + norm.tbar.size());
    const auto nth = static_cast<std::size_t>(
        std::clamp(clear_sky_quantile, 0.0, 1.0) * static_cast<double>(values.size() - 1));
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(nth), values.end());
    const double cut = values[nth];
    return ((norm.tbar.array() > cut) && (heights.array() < height_ceiling_m)).cast<std::uint8_t>();
}

namespace {

template <typename Matrix>
void write_integer_grid(const std::filesystem::path &file, const Matrix &grid) {
    std::ofstream out(file);
    if (!out) throw FormatError("cannot write " + file.string());
    for (Eigen::Index i = 0; i < grid.rows(); ++i) {
        for (Eigen::Index j = 0; j < grid.cols(); ++j) {
            if (j) out << ',';
            out << static_cast<long long>(grid(i, j));
        }
        out << '\n';
    }
}

}  // namespace

void write_frame_csv(const std::filesystem::path &file, const Grid &temps_kelvin) {
    write_integer_grid(file, (temps_kelvin * 100.0).array().round().matrix());
}

void write_mask_csv(const std::filesystem::path &file, const CloudMask &mask) { write_integer_grid(file, mask); }

void write_manifest(const std::filesystem::path &file, const std::vector<IRFrame> &frames) {
    std::ofstream out(file);
    if (!out) throw FormatError("cannot write " + file.string());
    out << "index,timestamp,sun_elevation_deg,sun_azimuth_deg\n";
    for (const auto &f : frames)
        out << fmt::format("{},{:.9g},{:.9g},{:.9g}\n", f.index, f.timestamp, f.sun_elevation, f.sun_azimuth);
}

void write_weather(const std::filesystem::path &file, const std::vector<WeatherRecord> &records) {
    std::ofstream out(file);
    if (!out) throw FormatError("cannot write " + file.string());
    out << "timestamp,pressure_hpa,air_temp_k,dew_point_k,humidity\n";
    for (const auto &r : records)
        out << fmt::format("{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", r.timestamp, r.pressure, r.air_temp, r.dew_point,
                           r.humidity);
}

}  // namespace windfield
