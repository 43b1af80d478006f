#include "windfield/fieldviz.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <numbers>

#include "csv.hpp"

namespace windfield {

namespace {

constexpr double kFlowWarnPerPixel = 1e-3;

void check_shapes(const Grid &u, const Grid &v, const PixelDims &dims, const char *what) {
    require_same_shape(u, v, what);
    require_same_shape(u, dims.dx, what);
    require_same_shape(u, dims.dy, what);
}

// Cumulative trapezoid of f along row 0, indexed by column.
Vec trap_row0(const Grid &f) {
    Vec out = Vec::Zero(f.cols());
    for (Eigen::Index j = 1; j < f.cols(); ++j) out(j) = out(j - 1) + 0.5 * (f(0, j - 1) + f(0, j));
    return out;
}

// Cumulative trapezoid of f down every column.
Grid trap_cols(const Grid &f) {
    Grid out = Grid::Zero(f.rows(), f.cols());
    for (Eigen::Index i = 1; i < f.rows(); ++i) out.row(i) = out.row(i - 1) + 0.5 * (f.row(i - 1) + f.row(i));
    return out;
}

void warn_if(std::vector<std::string> *warnings, const Grid &g, const char *what) {
    const double sum = g.cwiseAbs().sum();
    const double limit = kFlowWarnPerPixel * static_cast<double>(g.size());
    if (warnings && sum > limit)
        warnings->push_back(fmt::format("{} sum {:.3g} exceeds {:.3g}; integral is path dependent", what, sum, limit));
}

std::string num(double x) { return fmt::format("{:.9g}", x); }

}  // namespace

DivCurl div_curl(const Grid &u, const Grid &v) {
    require_same_shape(u, v, "div_curl");
    const Eigen::Index m = u.rows(), n = u.cols();
    Grid ux = Grid::Zero(m, n), uy = Grid::Zero(m, n), vx = Grid::Zero(m, n), vy = Grid::Zero(m, n);
    if (n > 1) {
        ux.leftCols(n - 1) = u.rightCols(n - 1) - u.leftCols(n - 1);
        vx.leftCols(n - 1) = v.rightCols(n - 1) - v.leftCols(n - 1);
    }
    if (m > 1) {
        uy.topRows(m - 1) = u.bottomRows(m - 1) - u.topRows(m - 1);
        vy.topRows(m - 1) = v.bottomRows(m - 1) - v.topRows(m - 1);
    }
    return {ux + vy, vx - uy};
}

Grid integrate_stream(const Grid &u, const Grid &v, const PixelDims &dims, double height,
                      std::vector<std::string> *warnings) {
    check_shapes(u, v, dims, "integrate_stream");
    warn_if(warnings, div_curl(u, v).div, "divergence");
    const Grid down = trap_cols(u.cwiseProduct(dims.dy));
    const Vec across = trap_row0(v.cwiseProduct(dims.dx));
    Grid phi = down;
    phi.rowwise() -= across.transpose();
    return 0.5 * height * phi;
}

Grid integrate_potential(const Grid &u, const Grid &v, const PixelDims &dims, double height,
                         std::vector<std::string> *warnings) {
    check_shapes(u, v, dims, "integrate_potential");
    warn_if(warnings, div_curl(u, v).curl, "curl");
    const Vec across = trap_row0(u.cwiseProduct(dims.dx));
    Grid psi = trap_cols(v.cwiseProduct(dims.dy));
    psi.rowwise() += across.transpose();
    return 0.5 * height * psi;
}

double orthogonality(const Grid &phi, const Grid &psi, const PixelDims &dims) {
    require_same_shape(phi, psi, "orthogonality");
    require_same_shape(phi, dims.dx, "orthogonality");
    double total = 0.0;
    long count = 0;
    for (Eigen::Index i = 1; i + 1 < phi.rows(); ++i)
        for (Eigen::Index j = 1; j + 1 < phi.cols(); ++j) {
            const double hx = 2.0 * dims.dx(i, j), hy = 2.0 * dims.dy(i, j);
            const double ax = (phi(i, j + 1) - phi(i, j - 1)) / hx, ay = (phi(i + 1, j) - phi(i - 1, j)) / hy;
            const double bx = (psi(i, j + 1) - psi(i, j - 1)) / hx, by = (psi(i + 1, j) - psi(i - 1, j)) / hy;
            total += std::abs(ax * bx + ay * by) / (std::hypot(ax, ay) * std::hypot(bx, by) + 1e-12);
            ++count;
        }
    return count ? total / static_cast<double>(count) : 0.0;
}

FieldGrid make_field_grid(const VelocityField &field, const PixelDims &dims, double height,
                          std::vector<std::string> *warnings) {
    FieldGrid g;
    g.u = field.u;
    g.v = field.v;
    auto dc = div_curl(field.u, field.v);
    g.div = std::move(dc.div);
    g.curl = std::move(dc.curl);
    g.phi = integrate_stream(field.u, field.v, dims, height, warnings);
    g.psi = integrate_potential(field.u, field.v, dims, height, warnings);
    return g;
}

GroundTruthStats read_truth(const std::filesystem::path &file) {
    const auto lines = csv::read_lines(file);
    if (lines.empty()) throw FormatError("truth file is empty: " + file.string());
    GroundTruthStats t;
    for (std::size_t k = 1; k < lines.size(); ++k) {
        const auto f = csv::split(lines[k]);
        if (f.size() != 4) throw FormatError(fmt::format("{}:{}: expected 4 fields", file.string(), k + 1));
        LayerTruth l;
        l.height_m = csv::to_double(f[1], "height_m");
        l.speed_mps = csv::to_double(f[2], "speed_mps");
        l.angle_rad = csv::to_double(f[3], "angle_rad");
        if (!(l.height_m > 0.0)) throw FormatError("truth heights must be positive");
        t.layers.push_back(l);
    }
    return t;
}

void write_truth(const std::filesystem::path &file, const GroundTruthStats &truth) {
    std::ofstream out(file);
    if (!out) throw FormatError("cannot write " + file.string());
    out << "layer,height_m,speed_mps,angle_rad\n";
    for (std::size_t c = 0; c < truth.layers.size(); ++c) {
        const auto &l = truth.layers[c];
        out << fmt::format("{},{},{},{}\n", c, l.height_m, l.speed_mps, l.angle_rad);
    }
}

VectorErrors vector_errors(const Mat &pred, const Mat &truth, const Vec &z) {
    if (pred.rows() != truth.rows() || pred.cols() != 2 || truth.cols() != 2 || z.size() != pred.rows())
        throw ShapeError("vector_errors: rows do not align");
    VectorErrors e;
    if (pred.rows() == 0) return e;
    const Vec row_err = 0.5 * (pred - truth).cwiseAbs().rowwise().sum();
    e.mae = row_err.mean();
    const double zs = z.sum();
    e.wmae = zs > 0.0 ? z.dot(row_err) / zs : e.mae;
    return e;
}

double wrap_angle(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    if (a > std::numbers::pi) a -= two_pi;
    return a;
}

double percent_error(double pred, double truth) {
    if (truth == 0.0) return pred == 0.0 ? 0.0 : 100.0;
    return std::abs(pred - truth) / std::abs(truth) * 100.0;
}

double angle_percent_error(double pred, double truth) {
    return std::abs(wrap_angle(pred - truth)) / std::numbers::pi * 100.0;
}

LayerTruth field_summary(const Grid &u, const Grid &v, double height) {
    const double mu = u.mean(), mv = v.mean();
    return {height, std::hypot(mu, mv), std::atan2(mv, mu)};
}

LayerMape layer_mape(const std::vector<LayerTruth> &pred, const GroundTruthStats &truth) {
    const std::size_t n = std::min(pred.size(), truth.layers.size());
    LayerMape m;
    if (n == 0) return m;
    for (std::size_t c = 0; c < n; ++c) {
        m.height += percent_error(pred[c].height_m, truth.layers[c].height_m);
        m.speed += percent_error(pred[c].speed_mps, truth.layers[c].speed_mps);
        m.angle += angle_percent_error(pred[c].angle_rad, truth.layers[c].angle_rad);
    }
    m.height /= static_cast<double>(n);
    m.speed /= static_cast<double>(n);
    m.angle /= static_cast<double>(n);
    return m;
}

void write_field_csv(const std::filesystem::path &file, const FieldGrid &g) {
    std::ofstream out(file);
    if (!out) throw FormatError("cannot write " + file.string());
    out << "# u,v m/s; div,curl m/s per pixel; phi,psi height-scaled flux (m^2/s)\n";
    out << "x,y,u,v,div,curl,phi,psi\n";
    for (Eigen::Index i = 0; i < g.u.rows(); ++i)
        for (Eigen::Index j = 0; j < g.u.cols(); ++j)
            out << j << ',' << i << ',' << num(g.u(i, j)) << ',' << num(g.v(i, j)) << ',' << num(g.div(i, j)) << ','
                << num(g.curl(i, j)) << ',' << num(g.phi(i, j)) << ',' << num(g.psi(i, j)) << '\n';
}

void write_metrics(const std::filesystem::path &file, const MetricsReport &r) {
    std::ofstream out(file);
    if (!out) throw FormatError("cannot write " + file.string());
    auto opt = [](const std::optional<double> &x) { return x ? num(*x) : std::string("null"); };
    out << "{\n";
    if (r.has_rows) {
        out << "  \"mae\": " << num(r.mae) << ",\n";
        out << "  \"wmae\": " << num(r.wmae) << ",\n";
    } else {
        out << "  \"mae\": null,\n  \"wmae\": null,\n";
    }
    out << "  \"div_sum\": " << num(r.div_sum) << ",\n";
    out << "  \"curl_sum\": " << num(r.curl_sum) << ",\n";
    out << "  \"mape_height\": " << opt(r.mape_height) << ",\n";
    out << "  \"mape_speed\": " << opt(r.mape_speed) << ",\n";
    out << "  \"mape_angle\": " << opt(r.mape_angle) << "\n";
    out << "}\n";
}

}  // namespace windfield
