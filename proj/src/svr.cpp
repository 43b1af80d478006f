#include "windfield/svr.hpp"

#include <Eigen/LU>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace windfield {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();
// Sweeps between Newton steps on the free variables; well-conditioned problems finish first.
constexpr long kPolishSweeps = 20;

// LIBSVM-style doubled variables: a = (α; α*), sign s = (+1; −1), β = α − α*.
class PairSolver {
public:
    PairSolver(const QPProblem &p, const QPOptions &opts) : p_(p), opts_(opts), m_(p.size()) {
        const Eigen::Index n2 = 2 * m_;
        a_ = Vec::Zero(n2);
        if (opts.warm_start && opts.warm_start->size() == m_) {
            const Vec &w = *opts.warm_start;
            for (Eigen::Index i = 0; i < m_; ++i) {
                a_(i) = std::clamp(w(i), 0.0, p.upper(i));
                a_(i + m_) = std::clamp(-w(i), 0.0, p.upper(i));
            }
            if (equality_residual() > 1e-12 * std::max(1.0, p.upper.maxCoeff())) a_.setZero();
        }
        lin_.resize(n2);
        for (Eigen::Index i = 0; i < m_; ++i) {
            lin_(i) = p.epsilon(i) - p.target(i);
            lin_(i + m_) = p.epsilon(i) + p.target(i);
        }
        const Vec beta = a_.head(m_) - a_.tail(m_);
        const Vec qb = p.q * beta;
        grad_.resize(n2);
        grad_.head(m_) = qb + lin_.head(m_);
        grad_.tail(m_) = -qb + lin_.tail(m_);
        scale_ = std::max(1.0, p.target.cwiseAbs().maxCoeff());
    }

    QPResult run() {
        QPResult r;
        const long cap = static_cast<long>(opts_.max_sweeps) * std::max<Eigen::Index>(m_, 1);
        const double tol = opts_.tol * scale_;
        bool done = m_ == 0;
        std::vector<Eigen::Index> pi(static_cast<std::size_t>(p_.groups)), pj(pi.size());
        std::vector<double> pv(pi.size());
        while (!done) {
            int best_group = -1;
            double worst = -kInf;
            for (int g = 0; g < p_.groups; ++g) {
                const auto gs = static_cast<std::size_t>(g);
                pv[gs] = select(g, pi[gs], pj[gs]);
                if (pj[gs] < 0) pv[gs] = -kInf;
                if (pv[gs] > worst) {
                    worst = pv[gs];
                    best_group = g;
                }
            }
            r.max_violation = std::max(worst, 0.0);
            if (best_group < 0 || worst < tol) break;
            if (r.updates >= cap)
                throw SolverError(fmt::format("QP did not converge in {} sweeps (violation {:.3g})",
                                              opts_.max_sweeps, worst));
            // Two coupled groups move together so a cross-group penalty cannot stall block-wise descent.
            if (p_.groups == 2 && pv[0] >= tol && pv[1] >= tol)
                joint_update(pi[0], pj[0], pi[1], pj[1]);
            else
                update(pi[static_cast<std::size_t>(best_group)], pj[static_cast<std::size_t>(best_group)]);
            ++r.updates;
            if (r.updates % (kPolishSweeps * std::max<Eigen::Index>(m_, 1)) == 0) polish();
            if (opts_.record_trace && r.updates % std::max<Eigen::Index>(m_, 1) == 0)
                r.trace.push_back(packed_objective());
        }
        r.sweeps = static_cast<int>((r.updates + std::max<Eigen::Index>(m_, 1) - 1) / std::max<Eigen::Index>(m_, 1));
        if (opts_.record_trace) r.trace.push_back(packed_objective());
        r.beta = a_.head(m_) - a_.tail(m_);
        r.bias = biases();
        r.objective = qp_objective(p_, r.beta);
        return r;
    }

private:
    [[nodiscard]] double sign(Eigen::Index k) const { return k < m_ ? 1.0 : -1.0; }
    [[nodiscard]] Eigen::Index var(Eigen::Index k) const { return k < m_ ? k : k - m_; }
    [[nodiscard]] double cap(Eigen::Index k) const { return p_.upper(var(k)); }
    [[nodiscard]] double qbar(Eigen::Index k, Eigen::Index l) const {
        return sign(k) * sign(l) * p_.q(var(k), var(l));
    }
    [[nodiscard]] bool at_upper(Eigen::Index k) const { return a_(k) >= cap(k); }
    [[nodiscard]] bool at_lower(Eigen::Index k) const { return a_(k) <= 0.0; }

    [[nodiscard]] double equality_residual() const {
        Vec sums = Vec::Zero(p_.groups);
        for (Eigen::Index i = 0; i < m_; ++i) sums(p_.group[i]) += a_(i) - a_(i + m_);
        return sums.cwiseAbs().maxCoeff();
    }

    [[nodiscard]] double packed_objective() const { return 0.5 * (a_.dot(grad_) + a_.dot(lin_)); }

    // Returns the group's maximal violation; sets the working pair (j < 0 if nothing to do).
    double select(int g, Eigen::Index &out_i, Eigen::Index &out_j) const {
        double gmax = -kInf;
        Eigen::Index i = -1;
        for (Eigen::Index k = 0; k < 2 * m_; ++k) {
            if (p_.group[var(k)] != g) continue;
            if (sign(k) > 0) {
                if (!at_upper(k) && -grad_(k) >= gmax) {
                    gmax = -grad_(k);
                    i = k;
                }
            } else if (!at_lower(k) && grad_(k) >= gmax) {
                gmax = grad_(k);
                i = k;
            }
        }
        double gmax2 = -kInf;
        double best = kInf;
        Eigen::Index j = -1;
        const double qii = i >= 0 ? p_.q(var(i), var(i)) : 0.0;
        const double si = i >= 0 ? sign(i) : 1.0;
        for (Eigen::Index k = 0; k < 2 * m_; ++k) {
            if (p_.group[var(k)] != g) continue;
            const double qkk = p_.q(var(k), var(k));
            if (sign(k) > 0) {
                if (at_lower(k)) continue;
                const double diff = gmax + grad_(k);
                gmax2 = std::max(gmax2, grad_(k));
                if (i >= 0 && diff > 0.0) {
                    double quad = qii + qkk - 2.0 * si * qbar(i, k);
                    if (quad <= 0.0) quad = kTau;
                    const double obj = -(diff * diff) / quad;
                    if (obj <= best) {
                        best = obj;
                        j = k;
                    }
                }
            } else {
                if (at_upper(k)) continue;
                const double diff = gmax - grad_(k);
                gmax2 = std::max(gmax2, -grad_(k));
                if (i >= 0 && diff > 0.0) {
                    double quad = qii + qkk + 2.0 * si * qbar(i, k);
                    if (quad <= 0.0) quad = kTau;
                    const double obj = -(diff * diff) / quad;
                    if (obj <= best) {
                        best = obj;
                        j = k;
                    }
                }
            }
        }
        out_i = i;
        out_j = j;
        if (i < 0 || gmax2 == -kInf) return -kInf;
        return gmax + gmax2;
    }

    void update(Eigen::Index i, Eigen::Index j) {
        const double ci = cap(i), cj = cap(j);
        const double old_i = a_(i), old_j = a_(j);
        const double qii = p_.q(var(i), var(i)), qjj = p_.q(var(j), var(j));
        const double qij = qbar(i, j);
        double ai = old_i, aj = old_j;
        if (sign(i) != sign(j)) {
            double quad = qii + qjj + 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad_(i) - grad_(j)) / quad;
            const double diff = ai - aj;
            ai += delta;
            aj += delta;
            if (diff > 0.0) {
                if (aj < 0.0) {
                    aj = 0.0;
                    ai = diff;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = -diff;
            }
            if (diff > ci - cj) {
                if (ai > ci) {
                    ai = ci;
                    aj = ci - diff;
                }
            } else if (aj > cj) {
                aj = cj;
                ai = cj + diff;
            }
        } else {
            double quad = qii + qjj - 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad_(i) - grad_(j)) / quad;
            const double sum = ai + aj;
            ai -= delta;
            aj += delta;
            if (sum > ci) {
                if (ai > ci) {
                    ai = ci;
                    aj = sum - ci;
                }
            } else if (aj < 0.0) {
                aj = 0.0;
                ai = sum;
            }
            if (sum > cj) {
                if (aj > cj) {
                    aj = cj;
                    ai = sum - cj;
                }
            } else if (ai < 0.0) {
                ai = 0.0;
                aj = sum;
            }
        }
        a_(i) = ai;
        a_(j) = aj;
        const double di = ai - old_i, dj = aj - old_j;
        // Column of Q̄ for k: s_k·s_l·Q(var k, var l).
        const double wi = sign(i) * di, wj = sign(j) * dj;
        const Eigen::Index vi = var(i), vj = var(j);
        for (Eigen::Index l = 0; l < m_; ++l) {
            const double delta_qb = p_.q(l, vi) * wi + p_.q(l, vj) * wj;
            grad_(l) += delta_qb;
            grad_(l + m_) -= delta_qb;
        }
    }

    // Longest step t ≥ 0 along a_i += s_i·t, a_j −= s_j·t, and which end stops it.
    [[nodiscard]] double max_step(Eigen::Index i, Eigen::Index j, bool &i_limits) const {
        const double ti = sign(i) > 0 ? cap(i) - a_(i) : a_(i);
        const double tj = sign(j) > 0 ? a_(j) : cap(j) - a_(j);
        i_limits = ti <= tj;
        return std::max(0.0, std::min(ti, tj));
    }

    void apply_step(Eigen::Index i, Eigen::Index j, double t, double t_max, bool i_limits, Vec &dbeta) {
        double ai = a_(i) + sign(i) * t, aj = a_(j) - sign(j) * t;
        if (t >= t_max) {
            if (i_limits)
                ai = sign(i) > 0 ? cap(i) : 0.0;
            else
                aj = sign(j) > 0 ? 0.0 : cap(j);
        }
        ai = std::clamp(ai, 0.0, cap(i));
        aj = std::clamp(aj, 0.0, cap(j));
        dbeta(var(i)) += sign(i) * (ai - a_(i));
        dbeta(var(j)) += sign(j) * (aj - a_(j));
        a_(i) = ai;
        a_(j) = aj;
    }

    [[nodiscard]] double curvature(Eigen::Index i, Eigen::Index j, Eigen::Index k, Eigen::Index l) const {
        const Eigen::Index vi = var(i), vj = var(j), vk = var(k), vl = var(l);
        return p_.q(vi, vk) - p_.q(vi, vl) - p_.q(vj, vk) + p_.q(vj, vl);
    }

    // Exact minimization over (t₁, t₂) ∈ [0, T₁]×[0, T₂] of the objective along the two groups' pair directions.
    void joint_update(Eigen::Index i1, Eigen::Index j1, Eigen::Index i2, Eigen::Index j2) {
        const double v1 = sign(j1) * grad_(j1) - sign(i1) * grad_(i1);
        const double v2 = sign(j2) * grad_(j2) - sign(i2) * grad_(i2);
        bool lim1 = false, lim2 = false;
        const double T1 = max_step(i1, j1, lim1), T2 = max_step(i2, j2, lim2);
        const double h11 = std::max(curvature(i1, j1, i1, j1), kTau), h22 = std::max(curvature(i2, j2, i2, j2), kTau);
        const double h12 = curvature(i1, j1, i2, j2);
        auto f = [&](double t1, double t2) {
            return -v1 * t1 - v2 * t2 + 0.5 * (h11 * t1 * t1 + 2.0 * h12 * t1 * t2 + h22 * t2 * t2);
        };
        double b1 = 0.0, b2 = 0.0, best = 0.0;
        auto consider = [&](double t1, double t2) {
            const double val = f(t1, t2);
            if (val < best) {
                best = val;
                b1 = t1;
                b2 = t2;
            }
        };
        const double det = h11 * h22 - h12 * h12;
        if (det > 1e-12 * h11 * h22) {
            const double t1 = (v1 * h22 - v2 * h12) / det, t2 = (v2 * h11 - v1 * h12) / det;
            if (t1 >= 0.0 && t1 <= T1 && t2 >= 0.0 && t2 <= T2) consider(t1, t2);
        }
        for (double t2 : {0.0, T2}) consider(std::clamp((v1 - h12 * t2) / h11, 0.0, T1), t2);
        for (double t1 : {0.0, T1}) consider(t1, std::clamp((v2 - h12 * t1) / h22, 0.0, T2));
        Vec dbeta = Vec::Zero(m_);
        apply_step(i1, j1, b1, T1, lim1, dbeta);
        apply_step(i2, j2, b2, T2, lim2, dbeta);
        const Eigen::Index idx[4] = {var(i1), var(j1), var(i2), var(j2)};
        for (Eigen::Index l = 0; l < m_; ++l) {
            double delta_qb = 0.0;
            for (int t = 0; t < 4; ++t) {
                if (t % 2 == 1 && idx[t] == idx[t - 1]) continue;
                delta_qb += p_.q(l, idx[t]) * dbeta(idx[t]);
            }
            grad_(l) += delta_qb;
            grad_(l + m_) -= delta_qb;
        }
    }

    // Newton step on the free βᵢ with the bounded ones fixed, exact line search clipped to the face.
    void polish() {
        for (Eigen::Index v = 0; v < m_; ++v) {
            const double both = std::min(a_(v), a_(v + m_));
            a_(v) -= both;
            a_(v + m_) -= both;
        }
        Vec beta = a_.head(m_) - a_.tail(m_);
        std::vector<Eigen::Index> free;
        for (Eigen::Index v = 0; v < m_; ++v)
            if (beta(v) != 0.0 && std::abs(beta(v)) < p_.upper(v)) free.push_back(v);
        const auto nf = static_cast<Eigen::Index>(free.size());
        if (nf > 0) {
            std::vector<int> row(static_cast<std::size_t>(p_.groups), -1);
            int nc = 0;
            for (Eigen::Index v : free)
                if (row[static_cast<std::size_t>(p_.group[v])] < 0) row[static_cast<std::size_t>(p_.group[v])] = nc++;
            const Vec qb = p_.q * beta;
            Mat kkt = Mat::Zero(nf + nc, nf + nc);
            Vec rhs = Vec::Zero(nf + nc);
            double diag = 0.0;
            for (Eigen::Index p = 0; p < nf; ++p) diag = std::max(diag, p_.q(free[p], free[p]));
            for (Eigen::Index p = 0; p < nf; ++p) {
                const Eigen::Index v = free[p];
                for (Eigen::Index q = 0; q < nf; ++q) kkt(p, q) = p_.q(v, free[q]);
                kkt(p, p) += 1e-10 * std::max(diag, 1.0);
                const Eigen::Index c = nf + row[static_cast<std::size_t>(p_.group[v])];
                kkt(p, c) = kkt(c, p) = 1.0;
                rhs(p) = -(beta(v) > 0.0 ? qb(v) + lin_(v) : qb(v) - lin_(v + m_));
            }
            const Vec sol = kkt.partialPivLu().solve(rhs);
            Vec d = Vec::Zero(m_);
            for (Eigen::Index p = 0; p < nf; ++p) d(free[p]) = sol(p);
            double slope = 0.0;
            for (Eigen::Index p = 0; p < nf; ++p) slope -= rhs(p) * sol(p);
            const double curv = d.dot(p_.q * d);
            if (std::isfinite(slope) && std::isfinite(curv) && slope < 0.0) {
                double t = curv > 0.0 ? -slope / curv : kInf;
                Eigen::Index stop = -1;
                for (Eigen::Index v : free) {
                    if (d(v) == 0.0) continue;
                    const double lim = beta(v) > 0.0 ? (d(v) > 0.0 ? p_.upper(v) - beta(v) : beta(v)) / std::abs(d(v))
                                                     : (d(v) < 0.0 ? p_.upper(v) + beta(v) : -beta(v)) / std::abs(d(v));
                    if (lim < t) {
                        t = lim;
                        stop = v;
                    }
                }
                if (std::isfinite(t)) {
                    for (Eigen::Index v : free) {
                        double b = beta(v) + t * d(v);
                        if (v == stop) b = std::abs(b) * 2.0 > p_.upper(v) ? std::copysign(p_.upper(v), beta(v)) : 0.0;
                        if (beta(v) > 0.0) b = std::clamp(b, 0.0, p_.upper(v));
                        else b = std::clamp(b, -p_.upper(v), 0.0);
                        beta(v) = b;
                    }
                }
            }
        }
        a_.head(m_) = beta.cwiseMax(0.0);
        a_.tail(m_) = (-beta).cwiseMax(0.0);
        const Vec qb = p_.q * beta;
        grad_.head(m_) = qb + lin_.head(m_);
        grad_.tail(m_) = -qb + lin_.tail(m_);
    }

    [[nodiscard]] Vec biases() const {
        Vec b(p_.groups);
        for (int g = 0; g < p_.groups; ++g) {
            double ub = kInf, lb = -kInf, sum = 0.0;
            int nfree = 0;
            for (Eigen::Index k = 0; k < 2 * m_; ++k) {
                if (p_.group[var(k)] != g) continue;
                const double yg = sign(k) * grad_(k);
                if (cap(k) <= 0.0) continue;
                if (at_upper(k)) {
                    if (sign(k) < 0)
                        ub = std::min(ub, yg);
                    else
                        lb = std::max(lb, yg);
                } else if (at_lower(k)) {
                    if (sign(k) > 0)
                        ub = std::min(ub, yg);
                    else
                        lb = std::max(lb, yg);
                } else {
                    sum += yg;
                    ++nfree;
                }
            }
            double rho;
            if (nfree > 0)
                rho = sum / nfree;
            else if (std::isfinite(ub) && std::isfinite(lb))
                rho = 0.5 * (ub + lb);
            else
                rho = std::isfinite(ub) ? ub : (std::isfinite(lb) ? lb : 0.0);
            b(g) = -rho;
        }
        return b;
    }

    const QPProblem &p_;
    const QPOptions &opts_;
    Eigen::Index m_;
    Vec a_;
    Vec lin_;
    Vec grad_;
    double scale_ = 1.0;
};

}  // namespace

double qp_objective(const QPProblem &p, const Vec &beta) {
    return 0.5 * beta.dot(p.q * beta) - p.target.dot(beta) + p.epsilon.dot(beta.cwiseAbs());
}

QPResult solve_qp(const QPProblem &p, const QPOptions &opts) {
    const Eigen::Index m = p.size();
    if (p.q.rows() != m || p.q.cols() != m || p.epsilon.size() != m || p.upper.size() != m ||
        static_cast<Eigen::Index>(p.group.size()) != m)
        throw ShapeError("QP problem dimensions disagree");
    for (int g : p.group)
        if (g < 0 || g >= p.groups) throw ShapeError("QP group index out of range");
    if ((p.upper.array() < 0.0).any()) throw ConfigError("QP box bounds must be nonnegative");
    PairSolver solver(p, opts);
    return solver.run();
}

KktReport check_kkt(const QPProblem &p, const QPResult &r, double slack) {
    KktReport rep;
    Vec sums = Vec::Zero(p.groups);
    for (Eigen::Index i = 0; i < p.size(); ++i) sums(p.group[i]) += r.beta(i);
    rep.equality_residual = p.groups > 0 ? sums.cwiseAbs().maxCoeff() : 0.0;
    const Vec qb = p.q * r.beta;
    slack *= std::max(1.0, p.target.size() ? p.target.cwiseAbs().maxCoeff() : 0.0);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        rep.box_violation = std::max(rep.box_violation, std::abs(r.beta(i)) - p.upper(i));
        const double res = p.target(i) - qb(i) - r.bias(p.group[i]);
        const double tube = p.epsilon(i);
        if (std::abs(res) < tube - slack && r.beta(i) != 0.0) ++rep.slackness_violations;
        if (r.beta(i) > 0.0 && res < tube - slack) ++rep.sign_violations;
        if (r.beta(i) < 0.0 && res > -tube + slack) ++rep.sign_violations;
        const bool interior = std::abs(r.beta(i)) < p.upper(i);
        if (interior && std::abs(res) > tube + slack) ++rep.slackness_violations;
    }
    rep.box_violation = std::max(rep.box_violation, 0.0);
    return rep;
}

Mat SVRModel::predict(const Mat &x) const {
    const Mat k = gram(kernel, x, support_x);
    Mat out = k * dual;
    out.rowwise() += bias.transpose();
    return out;
}

void validate_svr_inputs(const Mat &x, Eigen::Index targets, const Vec &z, double c_reg, double epsilon) {
    if (x.rows() < 2) throw EmptyDatasetError(fmt::format("SVR needs at least 2 rows, got {}", x.rows()));
    if (targets != x.rows() || z.size() != x.rows()) throw ShapeError("SVR inputs have mismatched rows");
    if (!(c_reg > 0.0)) throw ConfigError(fmt::format("C_reg must be positive, got {}", c_reg));
    if (!(epsilon >= 0.0)) throw ConfigError(fmt::format("epsilon must be nonnegative, got {}", epsilon));
    if ((z.array() < 0.0).any()) throw ConfigError("sample weights must be nonnegative");
}

SVRModel model_from_solution(const Mat &x, const Vec &z, double c_reg, double epsilon, const KernelSpec &spec,
                             QPProblem problem, QPResult solution, int outputs) {
    SVRModel m;
    m.kernel = spec;
    m.support_x = x;
    const Eigen::Index n = x.rows();
    m.dual.resize(n, outputs);
    for (int d = 0; d < outputs; ++d) m.dual.col(d) = solution.beta.segment(d * n, n);
    m.bias = solution.bias;
    m.c_reg = c_reg;
    m.epsilon = epsilon;
    m.weights = z;
    m.sweeps = solution.sweeps;
    m.objective = solution.objective;
    m.problem = std::move(problem);
    m.solution = std::move(solution);
    return m;
}

SVRModel solve_wsvr(const Mat &x, const Vec &y, const Vec &z, double c_reg, double epsilon, const KernelSpec &spec,
                    const QPOptions &opts) {
    validate_svr_inputs(x, y.size(), z, c_reg, epsilon);
    validate(spec);
    const auto n = x.rows();
    QPProblem p;
    p.q = gram(spec, x, x);
    p.target = y;
    p.epsilon = Vec::Constant(n, epsilon);
    p.upper = z * (c_reg / static_cast<double>(n));
    p.group.assign(static_cast<std::size_t>(n), 0);
    p.groups = 1;
    QPResult r = solve_qp(p, opts);
    return model_from_solution(x, z, c_reg, epsilon, spec, std::move(p), std::move(r), 1);
}

QPProblem mo_problem(const Mat &k, const Mat &v, const Vec &z, double c_reg, double epsilon) {
    const Eigen::Index n = k.rows();
    const Eigen::Index d = v.cols();
    QPProblem p;
    p.q = Mat::Zero(d * n, d * n);
    for (Eigen::Index b = 0; b < d; ++b) p.q.block(b * n, b * n, n, n) = k;
    p.target.resize(d * n);
    p.upper.resize(d * n);
    for (Eigen::Index b = 0; b < d; ++b) {
        p.target.segment(b * n, n) = v.col(b);
        p.upper.segment(b * n, n) = z * (c_reg / (static_cast<double>(d) * static_cast<double>(n)));
    }
    p.epsilon = Vec::Constant(d * n, epsilon);
    p.group.resize(static_cast<std::size_t>(d * n));
    for (Eigen::Index i = 0; i < d * n; ++i) p.group[static_cast<std::size_t>(i)] = static_cast<int>(i / n);
    p.groups = static_cast<int>(d);
    return p;
}

SVRModel solve_mo_wsvm(const Mat &x, const Mat &v, const Vec &z, double c_reg, double epsilon,
                       const KernelSpec &spec, const QPOptions &opts) {
    validate_svr_inputs(x, v.rows(), z, c_reg, epsilon);
    validate(spec);
    if (v.cols() != 2) throw ShapeError("multi-output SVR expects two velocity columns");
    QPProblem p = mo_problem(gram(spec, x, x), v, z, c_reg, epsilon);
    QPResult r = solve_qp(p, opts);
    return model_from_solution(x, z, c_reg, epsilon, spec, std::move(p), std::move(r), 2);
}

}  // namespace windfield
