#include "windfield/synth.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "windfield/atmosphere.hpp"
#include "windfield/config.hpp"
#include "windfield/rng.hpp"

namespace windfield {

namespace {

struct Mode {
    double kx, ky, phase;
};

std::vector<Mode> draw_modes(const SynthLayer &layer, int count, Rng &rng) {
    std::vector<Mode> modes;
    for (int m = 0; m < count; ++m) {
        const double wavelength = layer.texture_scale_m * (0.6 + uniform01(rng));
        const double dir = 2.0 * std::numbers::pi * uniform01(rng);
        const double k = 2.0 * std::numbers::pi / wavelength;
        modes.push_back({k * std::cos(dir), k * std::sin(dir), 2.0 * std::numbers::pi * uniform01(rng)});
    }
    return modes;
}

double texture(const std::vector<Mode> &modes, double x, double y) {
    double s = 0.0;
    for (const auto &m : modes) s += std::cos(m.kx * x + m.ky * y + m.phase);
    return s * std::sqrt(2.0 / static_cast<double>(modes.size()));
}

// Opacity ramp; exactly 0 below −1 and 1 above +1.
double smoothstep(double x) {
    const double t = std::clamp(0.5 * (x + 1.0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

}  // namespace

void SynthSpec::validate() const {
    if (layers.empty() || layers.size() > 2)
        throw ConfigError(fmt::format("synthetic spec needs 1 or 2 layers, got {}", layers.size()));
    if (rows < 8 || cols < 8) throw ConfigError("synthetic frames must be at least 8x8");
    for (const auto &l : layers) {
        if (!(l.height_m > 0.0)) throw ConfigError("layer heights must be positive");
        if (!(l.texture_scale_m > 0.0)) throw ConfigError("texture scales must be positive");
        if (!(l.coverage > 0.0 && l.coverage <= 1.0)) throw ConfigError("coverage must be in (0, 1]");
        if (!(l.speed_mps >= 0.0)) throw ConfigError("speeds must be nonnegative");
        if (ground_temp_k - lapse_rate * l.height_m <= sky_temp_k)
            throw ConfigError(fmt::format("layer at {} m is not warmer than the sky", l.height_m));
    }
    if (modes < 1) throw ConfigError("modes must be >= 1");
    if (!(edge_width > 0.0)) throw ConfigError("edge_width must be positive");
    if (!(frame_interval_s > 0.0) || !(delta_ref > 0.0) || !(lapse_rate > 0.0))
        throw ConfigError("frame interval, delta_ref and lapse rate must be positive");
    if (!(noise_k >= 0.0)) throw ConfigError("noise must be nonnegative");
}

SynthSpec parse_synth_spec(const std::string &text) {
    SynthSpec s;
    int layer_count = -1;
    std::vector<std::pair<std::string, std::string>> layer_keys;
    for (const auto &[k, v] : parse_key_values(text)) {
        auto d = [&] { return parse_double(k, v); };
        if (k == "layers") layer_count = static_cast<int>(parse_int(k, v));
        else if (k == "rows") s.rows = static_cast<int>(parse_int(k, v));
        else if (k == "cols") s.cols = static_cast<int>(parse_int(k, v));
        else if (k == "ground_temp_k") s.ground_temp_k = d();
        else if (k == "sky_temp_k") s.sky_temp_k = d();
        else if (k == "sky_gradient_k") s.sky_gradient_k = d();
        else if (k == "lapse_rate_k_per_m") s.lapse_rate = d();
        else if (k == "sun_elevation_deg") s.sun_elevation = d();
        else if (k == "sun_azimuth_deg") s.sun_azimuth = d();
        else if (k == "fov_diag_deg") s.fov_diag = d();
        else if (k == "frame_interval_s") s.frame_interval_s = d();
        else if (k == "delta_ref") s.delta_ref = d();
        else if (k == "start_time") s.start_time = d();
        else if (k == "noise_k") s.noise_k = d();
        else if (k == "modes") s.modes = static_cast<int>(parse_int(k, v));
        else if (k == "mask_opacity") s.mask_opacity = d();
        else if (k == "edge_width") s.edge_width = d();
        else if (k == "write_masks") s.write_masks = parse_bool(k, v);
        else if (k.rfind("layer", 0) == 0) layer_keys.emplace_back(k, v);
        else throw ConfigError(fmt::format("unknown synth key '{}'", k));
    }
    if (layer_count < 1 || layer_count > 2) throw ConfigError("synth spec needs layers = 1 or 2");
    s.layers.resize(static_cast<std::size_t>(layer_count));
    for (const auto &[k, v] : layer_keys) {
        const auto us = k.find('_');
        if (us == std::string::npos || us <= 5) throw ConfigError(fmt::format("malformed layer key '{}'", k));
        const long long idx = parse_int(k, k.substr(5, us - 5));
        if (idx < 0 || idx >= layer_count) throw ConfigError(fmt::format("layer index in '{}' out of range", k));
        SynthLayer &l = s.layers[static_cast<std::size_t>(idx)];
        const std::string field = k.substr(us + 1);
        const double x = parse_double(k, v);
        if (field == "height_m") l.height_m = x;
        else if (field == "speed_mps") l.speed_mps = x;
        else if (field == "angle_rad") l.angle_rad = x;
        else if (field == "angle_deg") l.angle_rad = x * std::numbers::pi / 180.0;
        else if (field == "texture_scale_m") l.texture_scale_m = x;
        else if (field == "contrast_k") l.contrast_k = x;
        else if (field == "coverage") l.coverage = x;
        else throw ConfigError(fmt::format("unknown layer field in '{}'", k));
    }
    s.validate();
    return s;
}

SynthSpec load_synth_spec(const std::filesystem::path &file) { return parse_synth_spec(read_text_file(file)); }

SynthSequence synth_sequence(const SynthSpec &spec, int frames, std::uint64_t seed) {
    spec.validate();
    if (frames < 2) throw ConfigError(fmt::format("need at least 2 frames, got {}", frames));
    const int rows = spec.rows, cols = spec.cols;
    GeometryModel geom;
    geom.sun_elevation = spec.sun_elevation;
    geom.sun_azimuth = spec.sun_azimuth;
    geom.fov_diag = spec.fov_diag;
    const Vec theta = row_elevations(geom, rows, cols);
    const double step = spec.fov_diag * std::numbers::pi / 180.0 / std::hypot(double(rows), double(cols));
    const double jc = 0.5 * (cols - 1);

    Rng rng(mix_seed(seed, 0));
    const std::size_t nl = spec.layers.size();
    std::vector<std::vector<Mode>> modes;
    for (const auto &l : spec.layers) modes.push_back(draw_modes(l, spec.modes, rng));

    // Layers are composited from the highest down, so lower clouds occlude higher ones.
    std::vector<std::size_t> order(nl);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return spec.layers[a].height_m > spec.layers[b].height_m; });

    std::vector<double> offset(nl, 0.0);
    SynthSequence out;
    Rng noise(mix_seed(seed, 1));
    for (int k = 0; k < frames; ++k) {
        Grid temps(rows, cols);
        Grid opacity_max = Grid::Zero(rows, cols);
        Eigen::MatrixXi visible = Eigen::MatrixXi::Constant(rows, cols, -1);
        for (int i = 0; i < rows; ++i)
            temps.row(i).setConstant(spec.sky_temp_k + spec.sky_gradient_k * i / double(rows - 1));
        for (std::size_t c : order) {
            const SynthLayer &l = spec.layers[c];
            // Meters per frame in the layer plane; inverse of the pipeline's (δ/f_r)·Δx·Ĥ scaling.
            const double per_frame = l.speed_mps * (1.0 / spec.frame_interval_s) / spec.delta_ref;
            const double sx = per_frame * std::cos(l.angle_rad) * k, sy = per_frame * std::sin(l.angle_rad) * k;
            Grid f(rows, cols);
            for (int i = 0; i < rows; ++i) {
                const double s = std::sin(theta(i));
                const double y = l.height_m * std::cos(theta(i)) / s;
                for (int j = 0; j < cols; ++j) {
                    const double x = (j - jc) * step * l.height_m / s;
                    f(i, j) = texture(modes[c], x - sx, y - sy);
                }
            }
            if (k == 0) {
                std::vector<double> vals(f.data(), f.data() + f.size());
                const auto q = static_cast<std::size_t>((1.0 - l.coverage) * static_cast<double>(vals.size() - 1));
                std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(q), vals.end());
                offset[c] = l.coverage >= 1.0 ? -1e9 : vals[q];
            }
            const double base = spec.ground_temp_k - spec.lapse_rate * l.height_m;
            for (int i = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j) {
                    const double g = f(i, j) - offset[c];
                    const double o = l.coverage >= 1.0 ? 1.0 : smoothstep(g / spec.edge_width);
                    const double tc = base + 0.5 * l.contrast_k * std::tanh(f(i, j));
                    temps(i, j) = (1.0 - o) * temps(i, j) + o * tc;
                    opacity_max(i, j) = std::max(opacity_max(i, j), o);
                    if (o >= spec.mask_opacity) visible(i, j) = static_cast<int>(c);
                    else if (o > 0.0) visible(i, j) = -1;
                }
        }
        if (spec.noise_k > 0.0)
            for (Eigen::Index p = 0; p < temps.size(); ++p) temps.data()[p] += spec.noise_k * standard_normal(noise);
        // Same quantization as the centikelvin frame files.
        temps = (temps.array() * 100.0).round().matrix() / 100.0;

        IRFrame fr;
        fr.temps = std::move(temps);
        fr.timestamp = spec.start_time + k * spec.frame_interval_s;
        fr.sun_elevation = spec.sun_elevation;
        fr.sun_azimuth = spec.sun_azimuth;
        fr.index = k;
        out.sequence.frames.push_back(std::move(fr));
        if (spec.write_masks)
            out.sequence.masks.push_back((opacity_max.array() >= spec.mask_opacity).cast<std::uint8_t>().matrix());
        out.visible.push_back(std::move(visible));
    }

    const double t0 = spec.start_time - 600.0;
    const double t1 = spec.start_time + frames * spec.frame_interval_s + 600.0;
    for (double t = t0; t <= t1 + 1e-9; t += 600.0)
        out.sequence.weather.push_back({t, 1013.0, spec.ground_temp_k, spec.ground_temp_k - 8.0, 0.6});

    for (std::size_t c : order)
        out.truth.layers.push_back({spec.layers[c].height_m, spec.layers[c].speed_mps, spec.layers[c].angle_rad});
    return out;
}

void write_sequence(const std::filesystem::path &dir, const Sequence &seq) {
    std::filesystem::create_directories(dir);
    for (std::size_t k = 0; k < seq.frames.size(); ++k) {
        write_frame_csv(dir / frame_filename(seq.frames[k].index), seq.frames[k].temps);
        if (!seq.masks.empty()) write_mask_csv(dir / mask_filename(seq.frames[k].index), seq.masks[k]);
    }
    write_manifest(dir / "sequence.csv", seq.frames);
    if (!seq.weather.empty()) write_weather(dir / "weather.csv", seq.weather);
}

GroundTruthStats synth_generate(const SynthSpec &spec, int frames, std::uint64_t seed,
                                const std::filesystem::path &dir) {
    SynthSequence s = synth_sequence(spec, frames, seed);
    write_sequence(dir, s.sequence);
    write_truth(dir / "truth.csv", s.truth);
    return s.truth;
}

}  // namespace windfield
