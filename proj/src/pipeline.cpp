#include "windfield/pipeline.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "windfield/layers.hpp"
#include "windfield/rng.hpp"
#include "windfield/sampling.hpp"

namespace windfield {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double x) { return fmt::format("{:.9g}", x); }

KernelSpec resolved_kernel(const KernelSpec &k, int rows, int cols) {
    KernelSpec out = k;
    if (out.input_scale == 0.0) out.input_scale = 1.0 / static_cast<double>(std::max(rows, cols) - 1);
    return out;
}

std::string frame_tag(int k) { return fmt::format("{:05d}", k); }

void write_summary(const std::filesystem::path &file, const RunResult &r) {
    std::ofstream out(file);
    if (!out) throw FormatError("cannot write " + file.string());
    out << "k,test_frame,status,layers,dataset_rows,train_rows,test_rows,mae,wmae,div_sum,curl_sum,"
           "mape_height,mape_speed,mape_angle\n";
    for (const auto &f : r.frames) {
        if (f.skipped) {
            out << f.k << ',' << f.test_frame << ",skipped,,,,,,,,,,,\n";
            continue;
        }
        out << f.k << ',' << f.test_frame << ",ok," << f.layers.size() << ',' << f.dataset_rows << ','
            << f.train_rows << ',' << f.test_rows << ',';
        out << (f.metrics.has_rows ? num(f.metrics.mae) : "") << ',' << (f.metrics.has_rows ? num(f.metrics.wmae) : "")
            << ',' << num(f.metrics.div_sum) << ',' << num(f.metrics.curl_sum) << ',';
        if (f.mape)
            out << num(f.mape->height) << ',' << num(f.mape->speed) << ',' << num(f.mape->angle) << '\n';
        else
            out << ",,\n";
    }
}

}  // namespace

PreparedSequence prepare_sequence(const Sequence &seq, const PipelineConfig &cfg) {
    cfg.validate();
    if (seq.frames.size() < 2) throw SequenceError("need at least two frames");
    if (seq.weather.empty()) throw FormatError("weather records are required");
    PreparedSequence prep;
    prep.rows = static_cast<int>(seq.frames[0].temps.rows());
    prep.cols = static_cast<int>(seq.frames[0].temps.cols());
    prep.layers = cfg.layers;

    std::optional<BetaMixture> warm;
    std::optional<IntensityFrame> prev_intensity;
    for (std::size_t idx = 0; idx < seq.frames.size(); ++idx) {
        const auto t0 = Clock::now();
        const IRFrame &frame = seq.frames[idx];
        PreparedFrame pf;
        pf.k = static_cast<int>(idx);
        pf.timestamp = frame.timestamp;
        pf.geom = cfg.geometry;
        pf.geom.sun_elevation = frame.sun_elevation;
        pf.geom.sun_azimuth = frame.sun_azimuth;
        std::optional<IntensityFrame> intensity;
        try {
            intensity = to_intensity(frame);
            const NormFrame norm = normalize(frame);
            pf.em = em_fit(norm, cfg.layers, warm, cfg.em);
            warm = pf.em.mixture;
            if (idx > 0) {
                const WeatherRecord wx = interpolate_weather(seq.weather, frame.timestamp);
                pf.heights = height_map(frame, wx, cfg.lapse);
                pf.mask = seq.masks.empty()
                              ? fallback_mask(norm, pf.heights, cfg.height_ceiling_m, cfg.clear_sky_quantile)
                              : seq.masks[idx];
                pf.hhat = layer_mean_heights(pf.em.resp, pf.heights, pf.mask);
                if (!prev_intensity) throw SequenceError("previous frame unavailable");
                pf.raw = wlk_flow(*prev_intensity, *intensity, pf.em.resp.gamma, cfg.wlk);
                pf.dims = pixel_dims(pf.geom, prep.rows, prep.cols);
                pf.diff = diff_map(*prev_intensity, *intensity);
            }
            pf.ok = true;
        } catch (const Error &e) {
            pf.ok = false;
            pf.reason = e.what();
            warm.reset();
        }
        prev_intensity = intensity;
        pf.seconds = seconds_since(t0);
        prep.frames.push_back(std::move(pf));
    }
    return prep;
}

double mape_criterion(const std::vector<double> &m) {
    if (m.empty()) return std::numeric_limits<double>::infinity();
    double mean = 0.0, tv = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) {
        mean += m[k];
        if (k > 0) tv += std::abs(m[k] - m[k - 1]);
    }
    return mean / static_cast<double>(m.size()) + tv;
}

RunResult run_prepared(const PreparedSequence &prep, const PipelineConfig &cfg, const GroundTruthStats *truth,
                       const std::filesystem::path &out_dir) {
    cfg.validate();
    if (prep.layers != cfg.layers) throw ConfigError("prepared sequence was built for a different layer count");
    const auto run_t0 = Clock::now();
    const int K = static_cast<int>(prep.frames.size());
    const int last = K - 1 - cfg.lag;
    if (last < 1)
        throw SequenceError(fmt::format("{} frames are too few for lag {} (need at least {})", K, cfg.lag, cfg.lag + 2));
    const bool write = !out_dir.empty();
    if (write) std::filesystem::create_directories(out_dir);
    const int rows = prep.rows, cols = prep.cols;
    const KernelSpec family = resolved_kernel(cfg.kernel, rows, cols);

    // Selected, transformed vectors of every frame; frame k + ℓ supplies the test rows.
    std::vector<VectorSet> vectors(static_cast<std::size_t>(K));
    std::vector<VelocityField> fields(static_cast<std::size_t>(K));
    std::vector<std::string> vec_error(static_cast<std::size_t>(K));
    for (int k = 1; k < K; ++k) {
        const PreparedFrame &pf = prep.frames[static_cast<std::size_t>(k)];
        if (!pf.ok) {
            vec_error[static_cast<std::size_t>(k)] = pf.reason;
            continue;
        }
        try {
            GeometryModel g = pf.geom;
            g.delta = cfg.geometry.delta;
            g.frame_rate = cfg.geometry.frame_rate;
            fields[static_cast<std::size_t>(k)] = transform_velocity(pf.raw.u, pf.raw.v, pf.em.resp.gamma, pf.hhat, pf.dims, g);
            const SelectionMask sel = threshold_mask(pf.diff, cfg.threshold);
            vectors[static_cast<std::size_t>(k)] = masked_vectors(fields[static_cast<std::size_t>(k)], sel);
        } catch (const Error &e) {
            vec_error[static_cast<std::size_t>(k)] = e.what();
        }
    }

    const long cv_before = cv_solve_count();
    RunResult result;
    LagBuffer lag(cfg.lag);
    std::optional<std::vector<GaussianLayer>> warm_layers;
    std::vector<double> mape_seq;

    for (int k = 1; k <= last; ++k) {
        const auto t0 = Clock::now();
        FrameResult fr;
        fr.k = k;
        fr.test_frame = k + cfg.lag;
        const std::size_t ks = static_cast<std::size_t>(k);
        lag.push(k, vectors[ks]);
        for (const auto &e : lag.entries()) fr.train_frames.push_back(e.frame);
        std::string timings;
        try {
            if (!vec_error[ks].empty()) throw SequenceError(vec_error[ks]);
            const PreparedFrame &pf = prep.frames[ks];
            const VectorSet dataset = lag.collect();
            fr.dataset_rows = static_cast<int>(dataset.size());
            const std::uint64_t fseed = mix_seed(cfg.seed, static_cast<std::uint64_t>(k));

            auto ts = Clock::now();
            const IcmVelocityResult vel = icm_velocity(dataset, cfg.layers, mix_seed(fseed, 1),
                                                       warm_layers ? &*warm_layers : nullptr);
            const IcmHeightResult hgt = icm_height(pf.heights, pf.mask, fields[ks], vel.layers);
            warm_layers = hgt.layers;
            timings += fmt::format(" icm={:.3f}", seconds_since(ts));

            ts = Clock::now();
            const TrainingSet train = build_training_set(dataset, hgt.layers, cfg.n_samples, mix_seed(fseed, 2));
            fr.train_rows = static_cast<int>(train.size());

            std::vector<SVRModel> models;
            for (int c = 0; c < cfg.layers; ++c) {
                const Vec z = train.z.col(c);
                LayerOutput lo;
                lo.height = hgt.mean_heights[static_cast<std::size_t>(c)];
                lo.c_reg = cfg.c_reg;
                lo.epsilon = cfg.epsilon;
                lo.kernel = family;
                if (cfg.mode == RunMode::OnlineCv) {
                    CvOptions co;
                    co.folds = cfg.cv_folds;
                    co.seed = mix_seed(fseed, 3 + static_cast<std::uint64_t>(c));
                    co.flow_constraints = cfg.cv_flow_constraints;
                    co.schedule = cfg.schedule;
                    co.rows = rows;
                    co.cols = cols;
                    const CvResult cv = cross_validate(train.x, train.v, z, family, cfg.grid, co);
                    lo.c_reg = cv.c_reg;
                    lo.epsilon = cv.epsilon;
                    lo.kernel = cv.kernel;
                }
                SVRModel model;
                if (cfg.flow_constraints) {
                    FlowConstrainedFit fc = solve_mo_wsvm_fc(train.x, train.v, z, lo.c_reg, lo.epsilon, lo.kernel,
                                                             cfg.schedule, rows, cols);
                    model = std::move(fc.model);
                    lo.flow = fc.final;
                } else {
                    model = solve_mo_wsvm(train.x, train.v, z, lo.c_reg, lo.epsilon, lo.kernel);
                    lo.flow = flow_diagnostics(model, rows, cols);
                }
                const VelocityField field = extrapolate(model, rows, cols);
                std::vector<std::string> warnings;
                const FieldGrid grid = make_field_grid(field, pf.dims, lo.height, &warnings);
                lo.summary = field_summary(field.u, field.v, lo.height);
                lo.orthogonality = orthogonality(grid.phi, grid.psi, pf.dims);
                if (write) {
                    write_field_csv(out_dir / fmt::format("field_{}_{}.csv", frame_tag(k), c), grid);
                    if (cfg.write_models)
                        write_model(out_dir / fmt::format("model_{}_{}.txt", frame_tag(k), c), model, &lo.flow);
                }
                fr.metrics.div_sum += lo.flow.div_sum;
                fr.metrics.curl_sum += lo.flow.curl_sum;
                fr.layers.push_back(lo);
                models.push_back(std::move(model));
            }
            timings += fmt::format(" fit={:.3f}", seconds_since(ts));

            // Held-out vectors from frame k + ℓ, scored by their MAP layer's model.
            const VectorSet &test = vectors[static_cast<std::size_t>(fr.test_frame)];
            fr.test_rows = static_cast<int>(test.size());
            if (!test.empty()) {
                const Mat logp = velocity_log_densities(test, hgt.layers);
                Mat coords(fr.test_rows, 2), truth_v(fr.test_rows, 2), pred(fr.test_rows, 2);
                Vec own(fr.test_rows);
                for (int i = 0; i < fr.test_rows; ++i) {
                    const auto &r = test[static_cast<std::size_t>(i)];
                    coords.row(i) << r.x, r.y;
                    truth_v.row(i) << r.u, r.v;
                }
                std::vector<Mat> preds;
                for (const auto &m : models) preds.push_back(m.predict(coords));
                for (int i = 0; i < fr.test_rows; ++i) {
                    Eigen::Index best;
                    const double top = logp.row(i).maxCoeff(&best);
                    const double norm = (logp.row(i).array() - top).exp().sum();
                    own(i) = 1.0 / norm;
                    pred.row(i) = preds[static_cast<std::size_t>(best)].row(i);
                }
                const VectorErrors err = vector_errors(pred, truth_v, own);
                fr.metrics.mae = err.mae;
                fr.metrics.wmae = err.wmae;
                fr.metrics.has_rows = true;
            }
            if (truth && !truth->layers.empty()) {
                std::vector<LayerTruth> pred_layers;
                for (const auto &lo : fr.layers) pred_layers.push_back(lo.summary);
                fr.mape = layer_mape(pred_layers, *truth);
                fr.metrics.mape_height = fr.mape->height;
                fr.metrics.mape_speed = fr.mape->speed;
                fr.metrics.mape_angle = fr.mape->angle;
                mape_seq.push_back(fr.mape->mean());
            }
            if (write) write_metrics(out_dir / fmt::format("metrics_{}.json", frame_tag(k)), fr.metrics);
            ++result.processed;
        } catch (const Error &e) {
            fr.skipped = true;
            fr.reason = e.what();
            fr.layers.clear();
            warm_layers.reset();
            ++result.skipped;
        }
        fr.seconds = seconds_since(t0);
        fr.metrics.runtime = fr.seconds;
        fr.timings = timings;
        result.frames.push_back(std::move(fr));
    }
    result.cv_calls = cv_solve_count() - cv_before;
    result.seconds = seconds_since(run_t0);

    int with_rows = 0, with_mape = 0;
    MetricsReport &agg = result.aggregate;
    double mh = 0, ms = 0, ma = 0;
    for (const auto &f : result.frames) {
        if (f.skipped) continue;
        agg.div_sum += f.metrics.div_sum;
        agg.curl_sum += f.metrics.curl_sum;
        if (f.metrics.has_rows) {
            agg.mae += f.metrics.mae;
            agg.wmae += f.metrics.wmae;
            ++with_rows;
        }
        if (f.mape) {
            mh += f.mape->height;
            ms += f.mape->speed;
            ma += f.mape->angle;
            ++with_mape;
        }
    }
    if (result.processed > 0) {
        agg.div_sum /= result.processed;
        agg.curl_sum /= result.processed;
    }
    if (with_rows > 0) {
        agg.mae /= with_rows;
        agg.wmae /= with_rows;
        agg.has_rows = true;
    }
    if (with_mape > 0) {
        agg.mape_height = mh / with_mape;
        agg.mape_speed = ms / with_mape;
        agg.mape_angle = ma / with_mape;
        double mean = 0.0;
        for (double m : mape_seq) mean += m;
        result.mape_mean = mean / static_cast<double>(mape_seq.size());
        result.mape_score = mape_criterion(mape_seq);
    }
    agg.runtime = result.seconds;

    if (write) {
        write_summary(out_dir / "summary.csv", result);
        write_metrics(out_dir / "metrics.json", agg);
        std::ofstream log(out_dir / "run_log.txt");
        log << fmt::format("mode={} processed={} skipped={} cv_calls={} runtime_s={:.3f}\n", to_string(cfg.mode),
                           result.processed, result.skipped, result.cv_calls, result.seconds);
        for (const auto &f : result.frames) {
            if (f.skipped)
                log << fmt::format("frame={} skipped reason=\"{}\"\n", f.k, f.reason);
            else
                log << fmt::format("frame={} test={} seconds={:.3f}{}\n", f.k, f.test_frame, f.seconds, f.timings);
        }
    }
    if (2 * result.skipped > result.processed + result.skipped) {
        std::string reason;
        for (const auto &f : result.frames)
            if (f.skipped) {
                reason = f.reason;
                break;
            }
        throw SequenceError(fmt::format("{} of {} frames skipped; first reason: {}", result.skipped,
                                        result.processed + result.skipped, reason));
    }
    return result;
}

RunResult run_sequence(const PipelineConfig &cfg) {
    cfg.validate();
    if (cfg.input.empty()) throw ConfigError("no input directory given");
    const Sequence seq = load_sequence(cfg.input);
    std::optional<GroundTruthStats> truth;
    if (std::filesystem::exists(cfg.input / "truth.csv")) truth = read_truth(cfg.input / "truth.csv");
    const PreparedSequence prep = prepare_sequence(seq, cfg);
    return run_prepared(prep, cfg, truth ? &*truth : nullptr, cfg.output);
}

ValidationResult validate_selection_params(const std::vector<PreparedSequence> &seqs,
                                           const std::vector<GroundTruthStats> &truths, const SelectionGrid &grid,
                                           const PipelineConfig &base) {
    if (seqs.empty()) throw ConfigError("no validation sequences");
    if (truths.size() != seqs.size()) throw ConfigError("every validation sequence needs ground-truth stats");
    for (const auto &t : truths)
        if (t.layers.empty()) throw ConfigError("ground-truth stats are empty");
    if (grid.delta.empty() || grid.threshold.empty() || grid.lag.empty() || grid.n_samples.empty())
        throw ConfigError("selection grid is empty");

    std::vector<int> lags = grid.lag, ns = grid.n_samples;
    std::sort(lags.begin(), lags.end());
    std::sort(ns.begin(), ns.end());
    ValidationResult out;
    bool found = false;
    for (int l : lags)
        for (int n : ns)
            for (double d : grid.delta)
                for (double t : grid.threshold) {
                    PipelineConfig cfg = base;
                    cfg.geometry.delta = d;
                    cfg.threshold = t;
                    cfg.lag = l;
                    cfg.n_samples = n;
                    cfg.validate();
                    ValidationRow row{d, t, l, n, 0.0, 0.0};
                    for (std::size_t s = 0; s < seqs.size(); ++s) {
                        try {
                            const RunResult r = run_prepared(seqs[s], cfg, &truths[s], {});
                            if (!r.mape_score) throw SequenceError("no frame produced MAPE values");
                            row.score += *r.mape_score;
                            row.mean_mape += *r.mape_mean;
                        } catch (const Error &e) {
                            if (e.kind() == ErrorKind::Config) throw;
                            row.score = std::numeric_limits<double>::infinity();
                            row.mean_mape = std::numeric_limits<double>::infinity();
                            break;
                        }
                    }
                    row.score /= static_cast<double>(seqs.size());
                    row.mean_mape /= static_cast<double>(seqs.size());
                    out.table.push_back(row);
                    if (!found || row.score < out.best.score) {
                        found = true;
                        out.best = row;
                    }
                }
    return out;
}

void write_validation_table(const std::filesystem::path &file, const ValidationResult &result) {
    std::ofstream out(file);
    if (!out) throw FormatError("cannot write " + file.string());
    out << "delta,threshold,lag,n_samples,score,mean_mape,selected\n";
    for (const auto &r : result.table) {
        const bool sel = r.delta == result.best.delta && r.threshold == result.best.threshold &&
                         r.lag == result.best.lag && r.n_samples == result.best.n_samples;
        out << fmt::format("{},{},{},{},{},{},{}\n", num(r.delta), num(r.threshold), r.lag, r.n_samples, num(r.score),
                           num(r.mean_mape), sel ? 1 : 0);
    }
}

}  // namespace windfield
