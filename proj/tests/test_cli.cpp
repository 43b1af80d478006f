#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "test_util.hpp"
#include "windfield/errors.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string &args, const fs::path &log) {
    const std::string cmd = std::string("\"") + WINDFIELD_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_file(const fs::path &p, const std::string &text) {
    std::ofstream out(p);
    out << text;
}

const fs::path kConfigs = fs::path(WINDFIELD_SOURCE_DIR) / "configs";

}  // namespace

TEST_CASE("exit codes map to error classes") {
    CHECK(static_cast<int>(windfield::ErrorKind::Config) == 1);
    CHECK(static_cast<int>(windfield::ErrorKind::Data) == 2);
    CHECK(static_cast<int>(windfield::ErrorKind::Numerical) == 3);
    CHECK(windfield::DomainError("x").kind() == windfield::ErrorKind::Numerical);
    CHECK(windfield::SequenceError("x").kind() == windfield::ErrorKind::Data);
}

TEST_CASE("command-line usage errors") {
    testutil::TempDir dir("cli_usage");
    const fs::path log = dir.path() / "log.txt";
    CHECK(run_cli("--help", log) == 0);
    CHECK(run_cli("", log) == 1);
    CHECK(run_cli("fly", log) == 1);
    CHECK(run_cli("run", log) == 1);
    CHECK(run_cli("run --config /nonexistent.conf", log) == 1);
    write_file(dir.path() / "bad.conf", "colour = blue\n");
    CHECK(run_cli("run --config \"" + (dir.path() / "bad.conf").string() + "\" --output x", log) == 1);
    CHECK(run_cli("run --config \"" + (kConfigs / "default.conf").string() + "\" --input \"" + dir.path().string() +
                      "\" --output \"" + (dir.path() / "out").string() + "\" --mode sideways",
                  log) == 1);
}

TEST_CASE("synth, run and validate end to end") {
    testutil::TempDir dir("cli_e2e");
    const fs::path log = dir.path() / "log.txt";
    const fs::path seq = dir.path() / "seq";
    write_file(dir.path() / "small.synth", "layers = 1\nrows = 24\ncols = 32\nlayer0_speed_mps = 800\n"
                                           "layer0_texture_scale_m = 800\nlayer0_coverage = 1\n");
    REQUIRE(run_cli("synth --spec \"" + (dir.path() / "small.synth").string() + "\" --output \"" + seq.string() +
                        "\" --frames 8 --seed 2",
                    log) == 0);
    CHECK(fs::exists(seq / "truth.csv"));
    CHECK(fs::exists(seq / "sequence.csv"));

    const fs::path conf = dir.path() / "run.conf";
    write_file(conf, "layers = 1\nmode = fixed-params\nlag = 2\nn_samples = 50\nflow_constraints = false\n");
    const fs::path out = dir.path() / "out";
    CHECK(run_cli("run --config \"" + conf.string() + "\" --input \"" + seq.string() + "\" --output \"" +
                      out.string() + "\" --seed 4",
                  log) == 0);
    CHECK(fs::exists(out / "summary.csv"));
    CHECK(fs::exists(out / "metrics.json"));
    CHECK(fs::exists(out / "run_log.txt"));

    // Missing input data is a data error.
    const fs::path empty = dir.path() / "empty";
    fs::create_directories(empty);
    CHECK(run_cli("run --config \"" + conf.string() + "\" --input \"" + empty.string() + "\" --output \"" +
                      out.string() + "\"",
                  log) == 2);

    write_file(dir.path() / "val.conf", "layers = 1\nmode = fixed-params\nn_samples = 50\n"
                                        "grid_delta = 2.29\ngrid_threshold = 0.95\ngrid_lag = 2\ngrid_n_samples = 50\n");
    CHECK(run_cli("validate --config \"" + (dir.path() / "val.conf").string() + "\" --input \"" + seq.string() +
                      "\" --output \"" + out.string() + "\"",
                  log) == 0);
    CHECK(fs::exists(out / "validation.csv"));

    fs::remove(seq / "truth.csv");
    CHECK(run_cli("validate --config \"" + (dir.path() / "val.conf").string() + "\" --input \"" + seq.string() + "\"",
                  log) == 1);
}
