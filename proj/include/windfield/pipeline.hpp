#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "windfield/atmosphere.hpp"
#include "windfield/bemm.hpp"
#include "windfield/config.hpp"
#include "windfield/fieldviz.hpp"
#include "windfield/imaging.hpp"
#include "windfield/optflow.hpp"
#include "windfield/regression.hpp"
#include "windfield/selection.hpp"

namespace windfield {

// Per-frame quantities that do not depend on δ, τ, ℓ or N*.
struct PreparedFrame {
    int k = 0;
    double timestamp = 0.0;
    GeometryModel geom;
    bool ok = false;
    std::string reason;
    EmResult em;
    Grid heights;
    CloudMask mask;
    std::vector<double> hhat;  // Ĥ_c, BeMM label order
    LayerFlow raw;             // pixels per frame, relative to frame k − 1
    PixelDims dims;
    DiffMap diff;
    double seconds = 0.0;
};

struct PreparedSequence {
    int rows = 0;
    int cols = 0;
    int layers = 0;
    std::vector<PreparedFrame> frames;  // frames[0] carries only the BeMM fit
};

PreparedSequence prepare_sequence(const Sequence &seq, const PipelineConfig &cfg);

struct LayerOutput {
    double height = 0.0;  // H̄_c
    double c_reg = 0.0;
    double epsilon = 0.0;
    KernelSpec kernel;
    FlowDiagnostics flow;
    LayerTruth summary;
    double orthogonality = 0.0;
};

struct FrameResult {
    int k = 0;
    int test_frame = 0;
    bool skipped = false;
    std::string reason;
    std::vector<int> train_frames;  // lag buffer contents, newest first
    int dataset_rows = 0;
    int train_rows = 0;
    int test_rows = 0;
    std::vector<LayerOutput> layers;
    MetricsReport metrics;
    std::optional<LayerMape> mape;
    double seconds = 0.0;
    std::string timings;
};

struct RunResult {
    std::vector<FrameResult> frames;
    MetricsReport aggregate;
    int processed = 0;
    int skipped = 0;
    long cv_calls = 0;
    std::optional<double> mape_mean;
    std::optional<double> mape_score;  // mean MAPE + Σ|MAPEₖ − MAPEₖ₋₁|
    double seconds = 0.0;
};

// Frames k = 1 … K−1−ℓ; training pool from the last ℓ frames, test vectors from frame k+ℓ.
// Writes per-frame outputs into `out_dir` unless it is empty.
RunResult run_prepared(const PreparedSequence &prep, const PipelineConfig &cfg, const GroundTruthStats *truth,
                       const std::filesystem::path &out_dir);

// Loads cfg.input, runs, writes into cfg.output; picks up `truth.csv` from the input directory when present.
RunResult run_sequence(const PipelineConfig &cfg);

// Mean MAPE plus total variation of the per-frame MAPE sequence.
double mape_criterion(const std::vector<double> &per_frame);

struct ValidationRow {
    double delta = 0.0;
    double threshold = 0.0;
    int lag = 0;
    int n_samples = 0;
    double score = 0.0;
    double mean_mape = 0.0;
};

struct ValidationResult {
    ValidationRow best;
    std::vector<ValidationRow> table;
};

// Ties go to the smaller ℓ, then the smaller N*.
ValidationResult validate_selection_params(const std::vector<PreparedSequence> &seqs,
                                           const std::vector<GroundTruthStats> &truths, const SelectionGrid &grid,
                                           const PipelineConfig &base);

void write_validation_table(const std::filesystem::path &file, const ValidationResult &result);

}  // namespace windfield
