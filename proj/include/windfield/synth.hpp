#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "windfield/fieldviz.hpp"
#include "windfield/imaging.hpp"

namespace windfield {

struct SynthLayer {
    double height_m = 2000.0;
    double speed_mps = 0.0;  // in the units the pipeline's velocity transform produces
    double angle_rad = 0.0;  // image axes, y down
    double texture_scale_m = 400.0;
    double contrast_k = 6.0;
    double coverage = 0.5;   // fraction of the frame the layer covers
};

struct SynthSpec {
    int rows = kReferenceRows;
    int cols = kReferenceCols;
    std::vector<SynthLayer> layers;
    double ground_temp_k = 293.0;
    double sky_temp_k = 240.0;
    double sky_gradient_k = 3.0;  // warming from top to bottom row
    double lapse_rate = 6.5e-3;
    double sun_elevation = 70.0;
    double sun_azimuth = 180.0;
    double fov_diag = 60.0;
    double frame_interval_s = 15.0;
    double delta_ref = 2.29;  // δ the pipeline is expected to recover
    double start_time = 1.6e9;
    double noise_k = 0.02;
    int modes = 24;
    double mask_opacity = 0.8;
    double edge_width = 0.75;  // half-width of the opacity ramp at cloud edges, texture units
    bool write_masks = true;

    // 1 ≤ layers ≤ 2, positive heights and scales; throws ConfigError.
    void validate() const;
};

SynthSpec parse_synth_spec(const std::string &text);
SynthSpec load_synth_spec(const std::filesystem::path &file);

struct SynthSequence {
    Sequence sequence;
    GroundTruthStats truth;  // highest layer first
    // Per frame, index into spec.layers of the visible (frontmost opaque) layer;
    // −1 for clear sky or a partially transparent edge.
    std::vector<Eigen::MatrixXi> visible;
};

SynthSequence synth_sequence(const SynthSpec &spec, int frames, std::uint64_t seed);

// Writes frames, masks, manifest, weather and `truth.csv` into `dir`.
GroundTruthStats synth_generate(const SynthSpec &spec, int frames, std::uint64_t seed,
                                const std::filesystem::path &dir);

void write_sequence(const std::filesystem::path &dir, const Sequence &seq);

}  // namespace windfield
