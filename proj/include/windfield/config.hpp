#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "windfield/atmosphere.hpp"
#include "windfield/bemm.hpp"
#include "windfield/kernels.hpp"
#include "windfield/optflow.hpp"
#include "windfield/regression.hpp"

namespace windfield {

enum class RunMode { OnlineCv, FixedParams };

RunMode parse_run_mode(const std::string &name);
std::string to_string(RunMode mode);

// Grids over the selection parameters (δ, τ, ℓ, N*).
struct SelectionGrid {
    std::vector<double> delta{1.5, 2.29, 3.0};
    std::vector<double> threshold{0.9, 0.95, 0.98};
    std::vector<int> lag{3, 6, 9};
    std::vector<int> n_samples{100, 200, 400};
};

struct PipelineConfig {
    int layers = 2;
    WLKParams wlk;
    LapseRateModel lapse;
    GeometryModel geometry;  // elevation/azimuth are taken per frame from the manifest
    double height_ceiling_m = 12000.0;
    double clear_sky_quantile = 0.5;
    EmOptions em;

    double threshold = 0.95;
    int lag = 6;
    int n_samples = 200;

    KernelSpec kernel{.input_scale = 0.0};  // 0 means 1/(max(rows, cols) − 1)
    double c_reg = 38.5;          // fixed-params mode
    double epsilon = 0.19;
    HyperGrid grid;
    int cv_folds = 3;
    bool cv_flow_constraints = false;

    bool flow_constraints = true;
    PenaltySchedule schedule;

    RunMode mode = RunMode::OnlineCv;
    std::uint64_t seed = 0;
    bool write_models = false;
    bool write_em_traces = false;

    SelectionGrid selection;

    std::filesystem::path input;
    std::filesystem::path output;

    // δ > 0, τ ∈ [0, 1), ℓ ≥ 1, N* ≥ C, C ∈ {1, 2}; throws ConfigError.
    void validate() const;
};

// Flat `key = value` lines, `#` comments; unknown keys are rejected.
PipelineConfig parse_config(const std::string &text);
PipelineConfig load_config(const std::filesystem::path &file);
void apply_config_value(PipelineConfig &cfg, const std::string &key, const std::string &value);

// Shared `key = value` reader for config and synth spec files.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string &text);
std::string read_text_file(const std::filesystem::path &file);

double parse_double(const std::string &key, const std::string &value);
long long parse_int(const std::string &key, const std::string &value);
bool parse_bool(const std::string &key, const std::string &value);
std::vector<double> parse_double_list(const std::string &key, const std::string &value);
std::vector<int> parse_int_list(const std::string &key, const std::string &value);

}  // namespace windfield
