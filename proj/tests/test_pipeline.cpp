#include <doctest.h>

#include <fstream>
#include <sstream>

#include "test_util.hpp"
#include "windfield/pipeline.hpp"
#include "windfield/synth.hpp"

using namespace windfield;

namespace {

SynthSpec small_spec(int layers) {
    SynthSpec s = load_synth_spec(std::filesystem::path(WINDFIELD_SOURCE_DIR) / "configs" / "two_layer.synth");
    s.rows = 30;
    s.cols = 40;
    s.layers.resize(static_cast<std::size_t>(layers));
    return s;
}

PipelineConfig fast_config(int layers) {
    PipelineConfig cfg;
    cfg.layers = layers;
    cfg.mode = RunMode::FixedParams;
    cfg.flow_constraints = false;
    cfg.n_samples = 100;
    return cfg;
}

struct Fixture {
    SynthSequence synth;
    PreparedSequence prep;
};

const Fixture &two_layer_fixture() {
    static const Fixture f = [] {
        Fixture x;
        x.synth = synth_sequence(small_spec(2), 28, 5);
        x.prep = prepare_sequence(x.synth.sequence, fast_config(2));
        return x;
    }();
    return f;
}

std::string slurp(const std::filesystem::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("frame protocol: lag 6 over 28 frames processes 21 frames") {
    const Fixture &f = two_layer_fixture();
    const RunResult r = run_prepared(f.prep, fast_config(2), &f.synth.truth, {});
    REQUIRE(r.frames.size() == 21);
    CHECK(r.processed + r.skipped == 21);
    for (std::size_t n = 0; n < r.frames.size(); ++n) {
        const FrameResult &fr = r.frames[n];
        CHECK(fr.k == static_cast<int>(n) + 1);
        CHECK(fr.test_frame == fr.k + 6);
        const auto expected = static_cast<std::size_t>(std::min(fr.k, 6));
        REQUIRE(fr.train_frames.size() == expected);
        CHECK(fr.train_frames.front() == fr.k);
        if (!fr.skipped) CHECK(fr.layers.size() == 2);
        if (!fr.skipped) CHECK(fr.layers[0].height >= fr.layers[1].height);
    }
    CHECK(r.mape_mean.has_value());
    CHECK(r.cv_calls == 0);
}

TEST_CASE("too few frames for the lag") {
    PipelineConfig cfg = fast_config(2);
    cfg.lag = 27;
    CHECK_THROWS_AS(run_prepared(two_layer_fixture().prep, cfg, nullptr, {}), SequenceError);
    cfg.layers = 1;
    cfg.lag = 6;
    CHECK_THROWS_AS(run_prepared(two_layer_fixture().prep, cfg, nullptr, {}), ConfigError);
}

TEST_CASE("single-layer runs produce one layer per frame") {
    const SynthSequence s = synth_sequence(small_spec(1), 12, 6);
    PipelineConfig cfg = fast_config(1);
    cfg.lag = 3;
    const RunResult r = run_prepared(prepare_sequence(s.sequence, cfg), cfg, &s.truth, {});
    CHECK(r.frames.size() == 8);
    for (const auto &f : r.frames)
        if (!f.skipped) CHECK(f.layers.size() == 1);
    CHECK(r.processed >= 6);
}

TEST_CASE("online cross-validation counts solves; fixed mode does none") {
    const Fixture &f = two_layer_fixture();
    PipelineConfig cfg = fast_config(2);
    cfg.mode = RunMode::OnlineCv;
    cfg.grid.c_reg = {10, 40};
    cfg.grid.epsilon = {0.1};
    cfg.lag = 20;
    const RunResult r = run_prepared(f.prep, cfg, nullptr, {});
    REQUIRE(r.frames.size() == 7);
    CHECK(r.cv_calls == static_cast<long>(r.processed) * 2 * 2 * cfg.cv_folds);
    cfg.mode = RunMode::FixedParams;
    CHECK(run_prepared(f.prep, cfg, nullptr, {}).cv_calls == 0);
}

TEST_CASE("runs with the same seed write identical outputs") {
    testutil::TempDir a("pipe_a"), b("pipe_b");
    const Fixture &f = two_layer_fixture();
    PipelineConfig cfg = fast_config(2);
    cfg.flow_constraints = true;
    cfg.lag = 18;
    run_prepared(f.prep, cfg, &f.synth.truth, a.path());
    run_prepared(f.prep, cfg, &f.synth.truth, b.path());
    int compared = 0;
    for (const auto &e : std::filesystem::directory_iterator(a.path())) {
        const auto name = e.path().filename();
        if (name == "run_log.txt") continue;
        REQUIRE(std::filesystem::exists(b.path() / name));
        CHECK_MESSAGE(slurp(e.path()) == slurp(b.path() / name), name.string());
        ++compared;
    }
    CHECK(compared > 10);
    CHECK(std::filesystem::exists(a.path() / "summary.csv"));
    CHECK(std::filesystem::exists(a.path() / "field_00001_0.csv"));
}

TEST_CASE("mostly failing sequences are a sequence error") {
    Sequence seq = two_layer_fixture().synth.sequence;
    seq.frames.resize(12);
    seq.masks.resize(12);
    for (std::size_t k = 3; k < seq.frames.size(); ++k) seq.frames[k].temps.setConstant(250.0);
    PipelineConfig cfg = fast_config(2);
    cfg.lag = 3;
    const PreparedSequence prep = prepare_sequence(seq, cfg);
    CHECK_FALSE(prep.frames[5].ok);
    CHECK_THROWS_AS(run_prepared(prep, cfg, nullptr, {}), SequenceError);
}

TEST_CASE("MAPE criterion") {
    CHECK(mape_criterion({10.0, 20.0, 15.0}) == doctest::Approx(15.0 + 15.0));
    CHECK(mape_criterion({7.0}) == 7.0);
}

TEST_CASE("selection-parameter validation") {
    const Fixture &f = two_layer_fixture();
    const std::vector<PreparedSequence> seqs{f.prep};
    const std::vector<GroundTruthStats> truths{f.synth.truth};
    PipelineConfig base = fast_config(2);

    SelectionGrid one;
    one.delta = {2.29};
    one.threshold = {0.95};
    one.lag = {12};
    one.n_samples = {100};
    const ValidationResult v1 = validate_selection_params(seqs, truths, one, base);
    REQUIRE(v1.table.size() == 1);
    CHECK(v1.best.lag == 12);
    CHECK(std::isfinite(v1.best.score));

    SelectionGrid g;
    g.delta = {1.5, 2.29};
    g.threshold = {0.95};
    g.lag = {18, 12};
    g.n_samples = {100};
    const ValidationResult v = validate_selection_params(seqs, truths, g, base);
    REQUIRE(v.table.size() == 4);
    double best = std::numeric_limits<double>::infinity();
    for (const auto &row : v.table) best = std::min(best, row.score);
    CHECK(v.best.score == best);
    CHECK(v.table.front().lag == 12);

    // Identical rows tie; the smaller lag wins.
    SelectionGrid tie = one;
    tie.lag = {12, 12};
    CHECK(validate_selection_params(seqs, truths, tie, base).best.lag == 12);

    CHECK_THROWS_AS(validate_selection_params(seqs, {}, one, base), ConfigError);
    CHECK_THROWS_AS(validate_selection_params(seqs, {GroundTruthStats{}}, one, base), ConfigError);
    SelectionGrid empty = one;
    empty.lag.clear();
    CHECK_THROWS_AS(validate_selection_params(seqs, truths, empty, base), ConfigError);

    testutil::TempDir dir("validation");
    write_validation_table(dir.path() / "validation.csv", v);
    const std::string text = slurp(dir.path() / "validation.csv");
    CHECK(text.rfind("delta,threshold,lag,n_samples,score,mean_mape,selected\n", 0) == 0);
    long selected = 0;
    for (std::size_t p = 0; (p = text.find(",1\n", p)) != std::string::npos; ++p) ++selected;
    CHECK(selected == 1);
}
