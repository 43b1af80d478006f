#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "windfield/atmosphere.hpp"
#include "windfield/grid.hpp"
#include "windfield/kernels.hpp"
#include "windfield/svr.hpp"

namespace windfield {

// Linear maps from stacked duals β̃ = (β_u; β_v) to forward-difference divergence and curl
// of the extrapolated field at every `stride`-th pixel.
struct FlowPenalty {
    Mat l_div;
    Mat l_curl;
    Mat p_div;   // L_divᵀ L_div
    Mat p_curl;  // L_curlᵀ L_curl
    int stride = 1;
};

FlowPenalty assemble_flow_penalty(const KernelSpec &spec, const Mat &support_x, int rows, int cols, int stride = 2);

// Pixel centres (x = column, y = row) in row-major order.
Mat grid_coords(int rows, int cols);

VelocityField extrapolate(const SVRModel &model, int rows, int cols);

struct PenaltySchedule {
    double mu0 = 1e-2;
    double factor = 10.0;
    int rounds = 4;
    double tol_flow = 1e-3;  // grid mean |div| and |curl|
    int stride = 2;
};

struct FlowDiagnostics {
    double mu = 0.0;
    double div_sum = 0.0;
    double curl_sum = 0.0;
    double div_mean = 0.0;
    double curl_mean = 0.0;
};

struct FlowConstrainedFit {
    SVRModel model;
    FlowDiagnostics final;
    std::vector<FlowDiagnostics> rounds;
};

FlowDiagnostics flow_diagnostics(const SVRModel &model, int rows, int cols);

// μ0 = 0 reduces to solve_mo_wsvm. Penalty derivatives are per unit of kernel input, the decimated
// sum is scaled up to the full grid, and μ is measured against max|v|.
FlowConstrainedFit solve_mo_wsvm_fc(const Mat &x, const Mat &v, const Vec &z, double c_reg, double epsilon,
                                    const KernelSpec &spec, const PenaltySchedule &schedule, int rows, int cols,
                                    const QPOptions &opts = {});

struct HyperGrid {
    std::vector<double> c_reg{1, 5, 10, 20, 40, 80};
    std::vector<double> epsilon{0.05, 0.1, 0.2, 0.35, 0.5};
    std::vector<double> gamma{0.5, 1, 3.78, 5.61, 13.92};
    std::vector<double> beta_off{1, 8.34, 44.8};
    std::vector<int> degree{2, 3};
};

struct CvResult {
    double c_reg = 0.0;
    double epsilon = 0.0;
    KernelSpec kernel;
    double score = 0.0;
    int evaluated = 0;
};

struct CvOptions {
    int folds = 3;
    std::uint64_t seed = 0;
    bool flow_constraints = false;
    PenaltySchedule schedule;
    int rows = kReferenceRows;
    int cols = kReferenceCols;
    QPOptions qp;
};

// Mean validation WMAE of the multi-output machine per grid point; ties go to the smaller C_reg, then ε.
CvResult cross_validate(const Mat &x, const Mat &v, const Vec &z, const KernelSpec &family, const HyperGrid &grid,
                        const CvOptions &opts = {});

// Kernel parameter combinations the grid spans for the given family.
std::vector<KernelSpec> kernel_candidates(const KernelSpec &family, const HyperGrid &grid);

long cv_solve_count() noexcept;
void reset_cv_solve_count() noexcept;

struct RidgeModel {
    KernelSpec kernel;
    Mat support_x;
    Mat coef;  // N×2
    double reg = 0.0;

    [[nodiscard]] Mat predict(const Mat &x) const;
};

RidgeModel mo_rr_fit(const Mat &x, const Mat &v, double reg, const KernelSpec &spec);

void write_model(const std::filesystem::path &file, const SVRModel &model, const FlowDiagnostics *diag = nullptr);

}  // namespace windfield
