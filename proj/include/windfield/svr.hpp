#pragma once

#include <vector>

#include "windfield/grid.hpp"
#include "windfield/kernels.hpp"

namespace windfield {

// minimize ½βᵀQβ − yᵀβ + Σ εᵢ|βᵢ|  s.t.  Σ_{i∈g} βᵢ = 0 for every group g,  |βᵢ| ≤ cᵢ.
struct QPProblem {
    Mat q;
    Vec target;
    Vec epsilon;
    Vec upper;
    std::vector<int> group;  // equality group of each variable, 0-based
    int groups = 1;

    [[nodiscard]] Eigen::Index size() const noexcept { return target.size(); }
};

struct QPOptions {
    double tol = 1e-9;          // KKT violation, relative to max(1, max|y|)
    int max_sweeps = 10000;     // one sweep = size() pair updates
    bool record_trace = false;  // objective after every sweep
    const Vec *warm_start = nullptr;
};

struct QPResult {
    Vec beta;
    Vec bias;  // equality multiplier per group
    double objective = 0.0;
    double max_violation = 0.0;
    long updates = 0;
    int sweeps = 0;
    std::vector<double> trace;
};

double qp_objective(const QPProblem &p, const Vec &beta);

// SMO pair updates within one equality group at a time, second-order working-set choice.
QPResult solve_qp(const QPProblem &p, const QPOptions &opts = {});

struct KktReport {
    double equality_residual = 0.0;  // max_g |Σ_{i∈g} βᵢ|
    double box_violation = 0.0;      // max_i (|βᵢ| − cᵢ)₊
    int slackness_violations = 0;    // rows inside the tube with nonzero dual or wrong-signed duals
    int sign_violations = 0;

    [[nodiscard]] bool ok(double eq_tol) const noexcept {
        return equality_residual <= eq_tol && box_violation <= 0.0 && slackness_violations == 0 &&
               sign_violations == 0;
    }
};

// Residuals rᵢ = yᵢ − (Qβ)ᵢ − b_g; slack (relative to max(1, max|y|)) is the tolerance on the tube edges.
KktReport check_kkt(const QPProblem &p, const QPResult &r, double slack = 1e-7);

struct SVRModel {
    KernelSpec kernel;
    Mat support_x;  // N×2 raw coordinates
    Mat dual;       // N×D, column per output
    Vec bias;       // D
    double c_reg = 0.0;
    double epsilon = 0.0;
    Vec weights;    // z per row
    // Diagnostics of the final solve.
    int sweeps = 0;
    double objective = 0.0;
    double mu = 0.0;
    QPProblem problem;
    QPResult solution;

    [[nodiscard]] Eigen::Index outputs() const noexcept { return dual.cols(); }
    // Rows × D predictions at raw coordinates.
    [[nodiscard]] Mat predict(const Mat &x) const;
};

void validate_svr_inputs(const Mat &x, Eigen::Index targets, const Vec &z, double c_reg, double epsilon);

SVRModel solve_wsvr(const Mat &x, const Vec &y, const Vec &z, double c_reg, double epsilon, const KernelSpec &spec,
                    const QPOptions &opts = {});

// Block-diagonal Gram diag(K, K); per-output equality; box z·C_reg/(2N) on every stacked row.
QPProblem mo_problem(const Mat &k, const Mat &v, const Vec &z, double c_reg, double epsilon);

SVRModel solve_mo_wsvm(const Mat &x, const Mat &v, const Vec &z, double c_reg, double epsilon,
                       const KernelSpec &spec, const QPOptions &opts = {});

// Wraps a solved stacked problem into a D-output model.
SVRModel model_from_solution(const Mat &x, const Vec &z, double c_reg, double epsilon, const KernelSpec &spec,
                             QPProblem problem, QPResult solution, int outputs);

}  // namespace windfield
