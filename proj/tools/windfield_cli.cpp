#include <fmt/format.h>

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "windfield/config.hpp"
#include "windfield/errors.hpp"
#include "windfield/pipeline.hpp"
#include "windfield/synth.hpp"

namespace fs = std::filesystem;
using namespace windfield;

namespace {

int run_command(const std::string &config_file, const std::string &input, const std::string &output,
                const std::optional<std::string> &mode, const std::optional<long long> &seed) {
    PipelineConfig cfg = load_config(config_file);
    if (!input.empty()) cfg.input = input;
    if (!output.empty()) cfg.output = output;
    if (mode) cfg.mode = parse_run_mode(*mode);
    if (seed) cfg.seed = static_cast<std::uint64_t>(*seed);
    if (cfg.output.empty()) throw ConfigError("no output directory given");
    const RunResult r = run_sequence(cfg);
    fmt::print("processed {} frames ({} skipped), cv solves {}, mean div_sum {:.6g}, mean curl_sum {:.6g}\n",
               r.processed, r.skipped, r.cv_calls, r.aggregate.div_sum, r.aggregate.curl_sum);
    if (r.aggregate.has_rows) fmt::print("test MAE {:.6g}, WMAE {:.6g}\n", r.aggregate.mae, r.aggregate.wmae);
    if (r.mape_score) fmt::print("MAPE mean {:.6g}, criterion {:.6g}\n", *r.mape_mean, *r.mape_score);
    return 0;
}

int validate_command(const std::string &config_file, const std::vector<std::string> &inputs,
                     const std::vector<std::string> &truth_files, const std::string &output) {
    PipelineConfig cfg = load_config(config_file);
    cfg.flow_constraints = false;
    std::vector<std::string> dirs = inputs;
    if (dirs.empty() && !cfg.input.empty()) dirs.push_back(cfg.input.string());
    if (dirs.empty()) throw ConfigError("no validation sequences given");
    if (!truth_files.empty() && truth_files.size() != dirs.size())
        throw ConfigError(fmt::format("{} truth files for {} sequences", truth_files.size(), dirs.size()));

    std::vector<PreparedSequence> preps;
    std::vector<GroundTruthStats> truths;
    for (std::size_t s = 0; s < dirs.size(); ++s) {
        const fs::path truth_path = truth_files.empty() ? fs::path(dirs[s]) / "truth.csv" : fs::path(truth_files[s]);
        if (!fs::exists(truth_path)) throw ConfigError("missing ground truth " + truth_path.string());
        truths.push_back(read_truth(truth_path));
        preps.push_back(prepare_sequence(load_sequence(dirs[s]), cfg));
    }
    const ValidationResult v = validate_selection_params(preps, truths, cfg.selection, cfg);
    if (!output.empty()) {
        fs::create_directories(output);
        write_validation_table(fs::path(output) / "validation.csv", v);
    }
    fmt::print("selected delta={} threshold={} lag={} n_samples={} score={:.6g} mean_mape={:.6g}\n", v.best.delta,
               v.best.threshold, v.best.lag, v.best.n_samples, v.best.score, v.best.mean_mape);
    return 0;
}

int synth_command(const std::string &spec_file, const std::string &output, int frames, long long seed) {
    const SynthSpec spec = load_synth_spec(spec_file);
    const GroundTruthStats truth = synth_generate(spec, frames, static_cast<std::uint64_t>(seed), output);
    fmt::print("wrote {} frames with {} layers to {}\n", frames, truth.layers.size(), output);
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Cloud-layer wind velocity field estimation from infrared sky images"};
    app.require_subcommand(1);

    auto *run = app.add_subcommand("run", "estimate velocity fields over a sequence");
    std::string run_config, run_input, run_output;
    std::optional<std::string> run_mode;
    std::optional<long long> run_seed;
    run->add_option("--config", run_config, "configuration file")->required()->check(CLI::ExistingFile);
    run->add_option("--input", run_input, "sequence directory");
    run->add_option("--output", run_output, "output directory");
    run->add_option("--mode", run_mode, "online-cv or fixed-params");
    run->add_option("--seed", run_seed, "random seed");

    auto *val = app.add_subcommand("validate", "grid-search the selection parameters against ground truth");
    std::string val_config, val_output;
    std::vector<std::string> val_inputs, val_truth;
    val->add_option("--config", val_config, "configuration file")->required()->check(CLI::ExistingFile);
    val->add_option("--input", val_inputs, "validation sequence directories");
    val->add_option("--truth", val_truth, "ground-truth CSV per sequence (default <input>/truth.csv)");
    val->add_option("--output", val_output, "directory for validation.csv");

    auto *syn = app.add_subcommand("synth", "generate a synthetic sequence");
    std::string syn_spec, syn_output;
    int syn_frames = 28;
    long long syn_seed = 0;
    syn->add_option("--spec", syn_spec, "synthetic scene spec")->required()->check(CLI::ExistingFile);
    syn->add_option("--output", syn_output, "output directory")->required();
    syn->add_option("--frames", syn_frames, "frame count");
    syn->add_option("--seed", syn_seed, "random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::Config);
    }

    try {
        if (*run) return run_command(run_config, run_input, run_output, run_mode, run_seed);
        if (*val) return validate_command(val_config, val_inputs, val_truth, val_output);
        if (*syn) return synth_command(syn_spec, syn_output, syn_frames, syn_seed);
    } catch (const Error &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(e.kind());
    } catch (const fs::filesystem_error &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(ErrorKind::Data);
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return static_cast<int>(ErrorKind::Numerical);
    }
    return 0;
}
