#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "windfield/grid.hpp"

namespace windfield {

struct IRFrame {
    Grid temps;  // kelvin
    double timestamp = 0.0;
    double sun_elevation = 90.0;  // degrees
    double sun_azimuth = 0.0;     // degrees
    int index = 0;
};

// Normalized temperatures, clamped into (kNormClamp, 1 - kNormClamp).
struct NormFrame {
    Grid tbar;
};

// Intensities in [0, 256).
struct IntensityFrame {
    Grid i;
};

struct WeatherRecord {
    double timestamp = 0.0;
    double pressure = 0.0;   // hPa
    double air_temp = 0.0;   // K
    double dew_point = 0.0;  // K
    double humidity = 0.0;   // fraction
};

using CloudMask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kNormClamp = 1e-6;

struct Sequence {
    std::vector<IRFrame> frames;
    std::vector<CloudMask> masks;  // empty, or one per frame
    std::vector<WeatherRecord> weather;
};

// Reads `sequence.csv`, `frame_<k>.csv` and optional `mask_<k>.csv`; frames come out time-sorted.
std::vector<IRFrame> load_frames(const std::filesystem::path &dir, std::vector<CloudMask> *masks = nullptr);
std::vector<WeatherRecord> load_weather(const std::filesystem::path &file);
// Frames, masks and `weather.csv` when present.
Sequence load_sequence(const std::filesystem::path &dir);

// Affine map of the frame onto [0, 1] without clamping.
Grid minmax_scale(const Grid &temps);
NormFrame normalize(const IRFrame &frame);
IntensityFrame to_intensity(const IRFrame &frame);

WeatherRecord interpolate_weather(const std::vector<WeatherRecord> &records, double t);

// Cloud pixels: below the height ceiling and warmer than the clear-sky quantile of T̄.
CloudMask fallback_mask(const NormFrame &norm, const Grid &heights, double height_ceiling_m = 12000.0,
                        double clear_sky_quantile = 0.5);

// Writers used by the synthetic generator; formats mirror the loaders.
void write_frame_csv(const std::filesystem::path &file, const Grid &temps_kelvin);
void write_mask_csv(const std::filesystem::path &file, const CloudMask &mask);
void write_manifest(const std::filesystem::path &file, const std::vector<IRFrame> &frames);
void write_weather(const std::filesystem::path &file, const std::vector<WeatherRecord> &records);

std::string frame_filename(int k);
std::string mask_filename(int k);

}  // namespace windfield
