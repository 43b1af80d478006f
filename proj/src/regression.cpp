#include "windfield/regression.hpp"

#include <fmt/format.h>

#include <Eigen/Cholesky>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "windfield/fieldviz.hpp"
#include "windfield/rng.hpp"

namespace windfield {

namespace {

constexpr double kPenaltyJitter = 1e-10;

std::atomic<long> g_cv_solves{0};

std::string num(double x) { return fmt::format("{:.9g}", x); }

}  // namespace

long cv_solve_count() noexcept { return g_cv_solves.load(); }
void reset_cv_solve_count() noexcept { g_cv_solves.store(0); }

VelocityField extrapolate(const SVRModel &model, int rows, int cols) {
    if (model.outputs() != 2) throw ShapeError("extrapolate needs a two-output model");
    const Mat pred = model.predict(grid_coords(rows, cols));
    VelocityField f{Grid(rows, cols), Grid(rows, cols)};
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            const Eigen::Index k = static_cast<Eigen::Index>(i) * cols + j;
            f.u(i, j) = pred(k, 0);
            f.v(i, j) = pred(k, 1);
        }
    return f;
}

FlowDiagnostics flow_diagnostics(const SVRModel &model, int rows, int cols) {
    const VelocityField f = extrapolate(model, rows, cols);
    const DivCurl dc = div_curl(f.u, f.v);
    FlowDiagnostics d;
    d.mu = model.mu;
    d.div_sum = dc.div.cwiseAbs().sum();
    d.curl_sum = dc.curl.cwiseAbs().sum();
    const double n = static_cast<double>(dc.div.size());
    d.div_mean = d.div_sum / n;
    d.curl_mean = d.curl_sum / n;
    return d;
}

FlowConstrainedFit solve_mo_wsvm_fc(const Mat &x, const Mat &v, const Vec &z, double c_reg, double epsilon,
                                    const KernelSpec &spec, const PenaltySchedule &schedule, int rows, int cols,
                                    const QPOptions &opts) {
    if (!(schedule.mu0 >= 0.0)) throw ConfigError("penalty mu must be nonnegative");
    FlowConstrainedFit out;
    if (schedule.mu0 == 0.0 || schedule.rounds < 1) {
        out.model = solve_mo_wsvm(x, v, z, c_reg, epsilon, spec, opts);
        out.final = flow_diagnostics(out.model, rows, cols);
        out.rounds.push_back(out.final);
        return out;
    }
    if (!(schedule.factor >= 1.0)) throw ConfigError("penalty factor must be >= 1");
    validate_svr_inputs(x, v.rows(), z, c_reg, epsilon);
    validate(spec);
    if (v.cols() != 2) throw ShapeError("multi-output SVR expects two velocity columns");

    const QPProblem base = mo_problem(gram(spec, x, x), v, z, c_reg, epsilon);
    const FlowPenalty fp = assemble_flow_penalty(spec, x, rows, cols, schedule.stride);
    // Per kernel-input unit, with the decimated sum scaled up to the full grid and μ in units of the target scale.
    const double target_scale = std::max(1.0, v.cwiseAbs().maxCoeff());
    const double scale = target_scale * static_cast<double>(schedule.stride * schedule.stride) /
                         (spec.input_scale * spec.input_scale);
    const Mat penalty = scale * (fp.p_div + fp.p_curl);

    Vec warm;
    double mu = schedule.mu0;
    for (int r = 0; r < schedule.rounds; ++r, mu *= schedule.factor) {
        QPProblem p = base;
        p.q += 2.0 * mu * penalty;
        p.q.diagonal().array() += kPenaltyJitter;
        QPOptions o = opts;
        if (warm.size() == p.size()) o.warm_start = &warm;
        QPResult res = solve_qp(p, o);
        warm = res.beta;
        out.model = model_from_solution(x, z, c_reg, epsilon, spec, std::move(p), std::move(res), 2);
        out.model.mu = mu;
        out.final = flow_diagnostics(out.model, rows, cols);
        out.rounds.push_back(out.final);
        if (out.final.div_mean < schedule.tol_flow && out.final.curl_mean < schedule.tol_flow) break;
    }
    return out;
}

std::vector<KernelSpec> kernel_candidates(const KernelSpec &family, const HyperGrid &grid) {
    std::vector<KernelSpec> out;
    switch (family.kind) {
        case KernelKind::Linear: out.push_back(family); break;
        case KernelKind::Rbf:
            for (double g : grid.gamma) {
                KernelSpec k = family;
                k.gamma = g;
                out.push_back(k);
            }
            break;
        case KernelKind::Poly:
            for (int d : grid.degree)
                for (double g : grid.gamma)
                    for (double b : grid.beta_off) {
                        KernelSpec k = family;
                        k.gamma = g;
                        k.beta_off = b;
                        k.degree = d;
                        out.push_back(k);
                    }
            break;
    }
    if (out.empty()) out.push_back(family);
    return out;
}

CvResult cross_validate(const Mat &x, const Mat &v, const Vec &z, const KernelSpec &family, const HyperGrid &grid,
                        const CvOptions &opts) {
    if (grid.c_reg.empty() || grid.epsilon.empty()) throw ConfigError("hyperparameter grid is empty");
    if (opts.folds < 2) throw ConfigError(fmt::format("need at least 2 folds, got {}", opts.folds));
    const Eigen::Index n = x.rows();
    if (n < 2 * opts.folds)
        throw EmptyDatasetError(fmt::format("{} rows are too few for {}-fold validation", n, opts.folds));
    if (v.rows() != n || z.size() != n) throw ShapeError("cross_validate inputs have mismatched rows");

    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(opts.seed);
    for (std::size_t i = perm.size() - 1; i > 0; --i)
        std::swap(perm[i], perm[uniform_index(rng, i + 1)]);

    struct Fold {
        Mat xt, vt, xv, vv;
        Vec zt, zv;
    };
    std::vector<Fold> folds(static_cast<std::size_t>(opts.folds));
    for (int f = 0; f < opts.folds; ++f) {
        std::vector<Eigen::Index> tr, va;
        for (std::size_t k = 0; k < perm.size(); ++k)
            (static_cast<int>(k % static_cast<std::size_t>(opts.folds)) == f ? va : tr).push_back(perm[k]);
        Fold &fd = folds[static_cast<std::size_t>(f)];
        auto take = [&](const std::vector<Eigen::Index> &idx, Mat &xo, Mat &vo, Vec &zo) {
            xo.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
            vo.resize(static_cast<Eigen::Index>(idx.size()), v.cols());
            zo.resize(static_cast<Eigen::Index>(idx.size()));
            for (std::size_t r = 0; r < idx.size(); ++r) {
                xo.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
                vo.row(static_cast<Eigen::Index>(r)) = v.row(idx[r]);
                zo(static_cast<Eigen::Index>(r)) = z(idx[r]);
            }
        };
        take(tr, fd.xt, fd.vt, fd.zt);
        take(va, fd.xv, fd.vv, fd.zv);
    }

    std::vector<double> cs = grid.c_reg, es = grid.epsilon;
    std::sort(cs.begin(), cs.end());
    std::sort(es.begin(), es.end());
    const auto kernels = kernel_candidates(family, grid);

    CvResult best;
    best.score = std::numeric_limits<double>::infinity();
    bool found = false;
    for (double c : cs)
        for (double e : es)
            for (const auto &k : kernels) {
                double total = 0.0;
                bool ok = true;
                for (const Fold &fd : folds) {
                    try {
                        ++g_cv_solves;
                        SVRModel m;
                        if (opts.flow_constraints)
                            m = solve_mo_wsvm_fc(fd.xt, fd.vt, fd.zt, c, e, k, opts.schedule, opts.rows, opts.cols,
                                                 opts.qp)
                                    .model;
                        else
                            m = solve_mo_wsvm(fd.xt, fd.vt, fd.zt, c, e, k, opts.qp);
                        total += vector_errors(m.predict(fd.xv), fd.vv, fd.zv).wmae;
                    } catch (const SolverError &) {
                        ok = false;
                        break;
                    }
                }
                ++best.evaluated;
                if (!ok) continue;
                const double score = total / static_cast<double>(folds.size());
                if (!found || score < best.score) {
                    found = true;
                    best.score = score;
                    best.c_reg = c;
                    best.epsilon = e;
                    best.kernel = k;
                }
            }
    if (!found) throw SolverError("no grid point produced a converged fit");
    return best;
}

Mat RidgeModel::predict(const Mat &x) const { return gram(kernel, x, support_x) * coef; }

RidgeModel mo_rr_fit(const Mat &x, const Mat &v, double reg, const KernelSpec &spec) {
    if (!(reg > 0.0)) throw ConfigError(fmt::format("ridge regularization must be positive, got {}", reg));
    if (x.rows() < 1 || v.rows() != x.rows()) throw ShapeError("mo_rr_fit inputs have mismatched rows");
    validate(spec);
    const Mat k = gram(spec, x, x);
    const Eigen::Index n = k.rows();
    RidgeModel m;
    m.kernel = spec;
    m.support_x = x;
    m.reg = reg;
    double jitter = 0.0;
    for (int attempt = 0; attempt < 2; ++attempt) {
        Mat a = k;
        a.diagonal().array() += reg + jitter;
        Eigen::LLT<Mat> llt(a);
        if (llt.info() == Eigen::Success) {
            m.coef = llt.solve(v);
            if (m.coef.allFinite()) return m;
        }
        jitter = 1e-10 * (k.trace() / static_cast<double>(n) + 1.0);
    }
    throw NumericalError("kernel ridge system is ill-conditioned");
}

void write_model(const std::filesystem::path &file, const SVRModel &m, const FlowDiagnostics *diag) {
    std::ofstream out(file);
    if (!out) throw FormatError("cannot write " + file.string());
    out << "kernel " << to_string(m.kernel.kind) << '\n';
    out << "gamma " << num(m.kernel.gamma) << '\n';
    out << "beta_off " << num(m.kernel.beta_off) << '\n';
    out << "degree " << m.kernel.degree << '\n';
    out << "input_scale " << num(m.kernel.input_scale) << '\n';
    out << "c_reg " << num(m.c_reg) << '\n';
    out << "epsilon " << num(m.epsilon) << '\n';
    out << "mu " << num(m.mu) << '\n';
    out << "bias";
    for (Eigen::Index d = 0; d < m.bias.size(); ++d) out << ' ' << num(m.bias(d));
    out << '\n';
    if (diag) {
        out << "div_sum " << num(diag->div_sum) << '\n';
        out << "curl_sum " << num(diag->curl_sum) << '\n';
    }
    out << "x,y,z";
    for (Eigen::Index d = 0; d < m.dual.cols(); ++d) out << ",dual" << d;
    out << '\n';
    for (Eigen::Index i = 0; i < m.support_x.rows(); ++i) {
        out << num(m.support_x(i, 0)) << ',' << num(m.support_x(i, 1)) << ',' << num(m.weights(i));
        for (Eigen::Index d = 0; d < m.dual.cols(); ++d) out << ',' << num(m.dual(i, d));
        out << '\n';
    }
}

}  // namespace windfield
