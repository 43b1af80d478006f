#include <doctest.h>

#include "test_util.hpp"
#include "windfield/config.hpp"

using namespace windfield;

TEST_CASE("defaults validate") {
    PipelineConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.geometry.delta == 2.29);
    CHECK(cfg.threshold == 0.95);
    CHECK(cfg.lag == 6);
    CHECK(cfg.c_reg == 38.5);
    CHECK(cfg.epsilon == 0.19);
}

TEST_CASE("key = value parsing") {
    const PipelineConfig c = parse_config(
        "# comment\n"
        "layers = 1\n"
        "mode = fixed-params   # trailing comment\n"
        "delta_scale=3.0\n"
        "kernel = rbf\n"
        "gamma = 13.92\n"
        "grid_c_reg = 1, 5,10\n"
        "grid_lag = 3,9\n"
        "flow_constraints = false\n"
        "seed = 42\n");
    CHECK(c.layers == 1);
    CHECK(c.mode == RunMode::FixedParams);
    CHECK(c.geometry.delta == 3.0);
    CHECK(c.kernel.kind == KernelKind::Rbf);
    CHECK(c.kernel.gamma == 13.92);
    CHECK(c.grid.c_reg == std::vector<double>{1, 5, 10});
    CHECK(c.selection.lag == std::vector<int>{3, 9});
    CHECK_FALSE(c.flow_constraints);
    CHECK(c.seed == 42);
}

TEST_CASE("malformed configs are rejected") {
    CHECK_THROWS_AS(parse_config("colour = blue\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("layers\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("lag = six\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("threshold = 0.9x\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("flow_constraints = maybe\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("mode = offline\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("grid_c_reg = \n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/windfield.conf"), ConfigError);
}

TEST_CASE("validation bounds") {
    auto bad = [](const std::string &text) { CHECK_THROWS_AS(parse_config(text).validate(), ConfigError); };
    bad("layers = 3\n");
    bad("layers = 0\n");
    bad("delta_scale = 0\n");
    bad("threshold = 1\n");
    bad("threshold = -0.1\n");
    bad("lag = 0\n");
    bad("n_samples = 1\n");
    bad("c_reg = 0\n");
    bad("epsilon = -1\n");
    bad("cv_folds = 1\n");
    CHECK_NOTHROW(parse_config("threshold = 0\nlayers = 1\nn_samples = 1\n").validate());
}

TEST_CASE("shipped default config parses") {
    const PipelineConfig c = load_config(std::filesystem::path(WINDFIELD_SOURCE_DIR) / "configs" / "default.conf");
    CHECK_NOTHROW(c.validate());
    CHECK(c.mode == RunMode::FixedParams);
}
