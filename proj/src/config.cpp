#include "windfield/config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>

namespace windfield {

namespace {

std::string trim(const std::string &s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

RunMode parse_run_mode(const std::string &name) {
    if (name == "online-cv") return RunMode::OnlineCv;
    if (name == "fixed-params") return RunMode::FixedParams;
    throw ConfigError(fmt::format("unknown mode '{}'", name));
}

std::string to_string(RunMode mode) { return mode == RunMode::OnlineCv ? "online-cv" : "fixed-params"; }

std::string read_text_file(const std::filesystem::path &file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string &text) {
    std::vector<std::pair<std::string, std::string>> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(fmt::format("line {}: expected key = value", lineno));
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(fmt::format("line {}: empty key", lineno));
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

double parse_double(const std::string &key, const std::string &value) {
    double x = 0.0;
    const auto *end = value.data() + value.size();
    auto [p, ec] = std::from_chars(value.data(), end, x);
    if (ec != std::errc() || p != end || value.empty())
        throw ConfigError(fmt::format("{}: '{}' is not a number", key, value));
    return x;
}

long long parse_int(const std::string &key, const std::string &value) {
    long long x = 0;
    const auto *end = value.data() + value.size();
    auto [p, ec] = std::from_chars(value.data(), end, x);
    if (ec != std::errc() || p != end || value.empty())
        throw ConfigError(fmt::format("{}: '{}' is not an integer", key, value));
    return x;
}

bool parse_bool(const std::string &key, const std::string &value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw ConfigError(fmt::format("{}: '{}' is not a boolean", key, value));
}

std::vector<double> parse_double_list(const std::string &key, const std::string &value) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
    if (out.empty()) throw ConfigError(fmt::format("{}: empty list", key));
    return out;
}

std::vector<int> parse_int_list(const std::string &key, const std::string &value) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(parse_int(key, trim(item))));
    if (out.empty()) throw ConfigError(fmt::format("{}: empty list", key));
    return out;
}

void apply_config_value(PipelineConfig &c, const std::string &k, const std::string &v) {
    auto d = [&] { return parse_double(k, v); };
    auto i = [&] { return static_cast<int>(parse_int(k, v)); };
    auto b = [&] { return parse_bool(k, v); };
    if (k == "layers") c.layers = i();
    else if (k == "window_area") {
        c.wlk.area = d();
        c.wlk.window = WLKParams::side_for_area(c.wlk.area);
    } else if (k == "wlk_tau") c.wlk.tau_reg = d();
    else if (k == "wlk_sigma") c.wlk.sigma = d();
    else if (k == "lapse_rate_k_per_m") c.lapse.gamma = d();
    else if (k == "ref_height_m") c.lapse.ref_height = d();
    else if (k == "fov_diag_deg") c.geometry.fov_diag = d();
    else if (k == "frame_rate_hz") c.geometry.frame_rate = d();
    else if (k == "delta_scale") c.geometry.delta = d();
    else if (k == "height_ceiling_m") c.height_ceiling_m = d();
    else if (k == "clear_sky_quantile") c.clear_sky_quantile = d();
    else if (k == "em_max_rounds") c.em.max_rounds = i();
    else if (k == "em_tol_per_pixel") c.em.tol_per_pixel = d();
    else if (k == "threshold") c.threshold = d();
    else if (k == "lag") c.lag = i();
    else if (k == "n_samples") c.n_samples = i();
    else if (k == "kernel") c.kernel.kind = parse_kernel_kind(v);
    else if (k == "gamma") c.kernel.gamma = d();
    else if (k == "beta_off") c.kernel.beta_off = d();
    else if (k == "degree") c.kernel.degree = i();
    else if (k == "kernel_input_scale") c.kernel.input_scale = d();
    else if (k == "c_reg") c.c_reg = d();
    else if (k == "epsilon") c.epsilon = d();
    else if (k == "grid_c_reg") c.grid.c_reg = parse_double_list(k, v);
    else if (k == "grid_epsilon") c.grid.epsilon = parse_double_list(k, v);
    else if (k == "grid_gamma") c.grid.gamma = parse_double_list(k, v);
    else if (k == "grid_beta_off") c.grid.beta_off = parse_double_list(k, v);
    else if (k == "grid_degree") c.grid.degree = parse_int_list(k, v);
    else if (k == "cv_folds") c.cv_folds = i();
    else if (k == "cv_flow_constraints") c.cv_flow_constraints = b();
    else if (k == "flow_constraints") c.flow_constraints = b();
    else if (k == "mu0") c.schedule.mu0 = d();
    else if (k == "mu_factor") c.schedule.factor = d();
    else if (k == "mu_rounds") c.schedule.rounds = i();
    else if (k == "tol_flow") c.schedule.tol_flow = d();
    else if (k == "penalty_stride") c.schedule.stride = i();
    else if (k == "mode") c.mode = parse_run_mode(v);
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(parse_int(k, v));
    else if (k == "write_models") c.write_models = b();
    else if (k == "write_em_traces") c.write_em_traces = b();
    else if (k == "grid_delta") c.selection.delta = parse_double_list(k, v);
    else if (k == "grid_threshold") c.selection.threshold = parse_double_list(k, v);
    else if (k == "grid_lag") c.selection.lag = parse_int_list(k, v);
    else if (k == "grid_n_samples") c.selection.n_samples = parse_int_list(k, v);
    else if (k == "input") c.input = v;
    else if (k == "output") c.output = v;
    else throw ConfigError(fmt::format("unknown config key '{}'", k));
}

void PipelineConfig::validate() const {
    if (layers < 1 || layers > 2) throw ConfigError(fmt::format("layers = {} not in {{1, 2}}", layers));
    if (!(geometry.delta > 0.0)) throw ConfigError(fmt::format("delta_scale = {} must be positive", geometry.delta));
    if (!(threshold >= 0.0 && threshold < 1.0))
        throw ConfigError(fmt::format("threshold = {} outside [0, 1)", threshold));
    if (lag < 1) throw ConfigError(fmt::format("lag = {} must be >= 1", lag));
    if (n_samples < layers) throw ConfigError(fmt::format("n_samples = {} below layer count {}", n_samples, layers));
    if (!(geometry.frame_rate > 0.0)) throw ConfigError("frame_rate_hz must be positive");
    if (!(geometry.fov_diag > 0.0)) throw ConfigError("fov_diag_deg must be positive");
    if (!(lapse.gamma > 0.0)) throw ConfigError("lapse_rate_k_per_m must be positive");
    if (!(wlk.tau_reg >= 0.0)) throw ConfigError("wlk_tau must be nonnegative");
    if (!(wlk.sigma > 0.0)) throw ConfigError("wlk_sigma must be positive");
    if (!(c_reg > 0.0) || !(epsilon >= 0.0)) throw ConfigError("c_reg must be positive and epsilon nonnegative");
    if (!(kernel.input_scale >= 0.0)) throw ConfigError("kernel_input_scale must be nonnegative");
    if (cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
    if (schedule.stride < 1) throw ConfigError("penalty_stride must be >= 1");
    if (!(schedule.mu0 >= 0.0)) throw ConfigError("mu0 must be nonnegative");
    if (!(clear_sky_quantile >= 0.0 && clear_sky_quantile <= 1.0))
        throw ConfigError("clear_sky_quantile outside [0, 1]");
}

PipelineConfig parse_config(const std::string &text) {
    PipelineConfig cfg;
    for (const auto &[k, v] : parse_key_values(text)) apply_config_value(cfg, k, v);
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path &file) { return parse_config(read_text_file(file)); }

}  // namespace windfield
