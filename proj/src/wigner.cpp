#include "tomolab/wigner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "tomolab/errors.hpp"
#include "tomolab/oscillator_basis.hpp"
#include "tomolab/parallel.hpp"

namespace tomolab {

namespace {

constexpr double kPi = std::numbers::pi;

// All wigner_basis(a, b), a >= b, a < dim, at one point: out(a, b).
void basis_lower(int dim, double q, double p, ComplexMatrix& out) {
    out.setZero(dim, dim);
    const double r2 = q * q + p * p;
    const double y = 2.0 * r2;
    const double gauss = std::exp(-r2) / kPi;
    const Complex z(std::sqrt(2.0) * q, -std::sqrt(2.0) * p);
    Complex zd = 1.0;  // z^d
    for (int d = 0; d < dim; ++d) {
        // L_b^d(y) by the three-term recurrence in b
        double l_prev = 0.0, l_cur = 1.0;
        for (int b = 0; b + d < dim; ++b) {
            if (b == 1) {
                l_prev = 1.0;
                l_cur = 1.0 + d - y;
            } else if (b > 1) {
                double next = ((2.0 * (b - 1) + 1.0 + d - y) * l_cur - (b - 1.0 + d) * l_prev) / b;
                l_prev = l_cur;
                l_cur = next;
            }
            double coef = std::exp(0.5 * (std::lgamma(b + 1.0) - std::lgamma(b + d + 1.0)));
            double sign = (b % 2 == 0) ? 1.0 : -1.0;
            out(b + d, b) = sign * coef * gauss * l_cur * zd;
        }
        zd *= z;
    }
}

void check_imag(double residue) {
    if (std::abs(residue) > 1e-9) throw NumericalError("Wigner function: imaginary residue above 1e-9");
}

} // namespace

Complex wigner_basis(int a, int b, double q, double p) {
    if (a < 0 || b < 0) throw ParameterError("Wigner basis indices must be non-negative");
    if (std::max(a, b) > basis::kDefaultIndexCap)
        throw ParameterError("basis index overflow: " + std::to_string(std::max(a, b)));
    ComplexMatrix m;
    basis_lower(std::max(a, b) + 1, q, p, m);
    return a >= b ? m(a, b) : std::conj(m(b, a));
}

void GridGeometry::validate() const {
    if (!(q_max > q_min) || !(p_max > p_min) || nq < 2 || np < 2)
        throw ParameterError("grid needs q_max > q_min, p_max > p_min and at least 2 cells per axis");
}

double WignerGrid::integral() const { return values.sum() * geometry.dq() * geometry.dp(); }

double WignerGrid::max_abs() const { return values.cwiseAbs().maxCoeff(); }

double WignerGrid::edge_max() const {
    const Eigen::Index r = values.rows() - 1, c = values.cols() - 1;
    return std::max({values.row(0).cwiseAbs().maxCoeff(), values.row(r).cwiseAbs().maxCoeff(),
                     values.col(0).cwiseAbs().maxCoeff(), values.col(c).cwiseAbs().maxCoeff()});
}

WignerGrid wigner_of_state(const RawMatrix& rho, const GridGeometry& geometry) {
    geometry.validate();
    const int dim = rho.dim();
    if (dim < 1) throw ParameterError("Wigner function needs dim >= 1");
    WignerGrid grid{geometry, Eigen::MatrixXd(geometry.nq, geometry.np)};
    parallel_blocks(static_cast<std::size_t>(geometry.nq), [&](std::size_t i) {
        ComplexMatrix w;
        const double q = geometry.q(static_cast<int>(i));
        for (int j = 0; j < geometry.np; ++j) {
            basis_lower(dim, q, geometry.p(j), w);
            Complex s = 0.0;
            for (int b = 0; b < dim; ++b) {
                s += rho(b, b) * w(b, b);
                for (int a = b + 1; a < dim; ++a) s += rho(a, b) * w(a, b) + rho(b, a) * std::conj(w(a, b));
            }
            check_imag(s.imag());
            grid.values(static_cast<Eigen::Index>(i), j) = s.real();
        }
    });
    return grid;
}

WignerGrid plugin_estimate(const RawMatrix& estimate, const GridGeometry& geometry) {
    return wigner_of_state(estimate, geometry);
}

double kernel(double c, double x) {
    if (!(c > 0.0)) throw ParameterError("kernel cut-off c must be > 0");
    const double cx = c * x;
    if (std::abs(cx) < 1.0) {
        // sum_m (-1)^m x^{2m} c^{2m+2} / ((2m)! (2m+2))
        double term = c * c;  // (cx)^{2m} c^2 / (2m)!
        double sum = term / 2.0;
        for (int m = 1; m < 30; ++m) {
            term *= -cx * cx / ((2.0 * m - 1.0) * (2.0 * m));
            double add = term / (2.0 * m + 2.0);
            sum += add;
            if (std::abs(add) < 1e-18 * std::abs(sum)) break;
        }
        return sum;
    }
    return (cx * std::sin(cx) + std::cos(cx) - 1.0) / (x * x);
}

WignerGrid kernel_estimate(const SampleSet& data, double c, const GridGeometry& geometry) {
    geometry.validate();
    if (!(c > 0.0)) throw ParameterError("kernel cut-off c must be > 0");
    if (data.eta < 1.0) throw ParameterError("kernel estimator needs ideal (eta = 1) data");
    if (data.size() < 1) throw ParameterError("empty sample set");
    const std::size_t n = data.size();
    const double dp = geometry.dp();
    // Along a grid row the kernel argument is an arithmetic progression, so
    // cos/sin(c x) advance by a fixed rotation per cell.
    std::vector<double> cs(n), sn(n), rot_c(n), rot_s(n);
    for (std::size_t l = 0; l < n; ++l) {
        cs[l] = std::cos(data.samples[l].phi);
        sn[l] = std::sin(data.samples[l].phi);
        rot_c[l] = std::cos(c * dp * sn[l]);
        rot_s[l] = std::sin(c * dp * sn[l]);
    }
    WignerGrid grid{geometry, Eigen::MatrixXd(geometry.nq, geometry.np)};
    const double scale = 1.0 / (2.0 * kPi * static_cast<double>(n));
    const double p0 = geometry.p(0);
    parallel_blocks(static_cast<std::size_t>(geometry.nq), [&](std::size_t i) {
        const double q = geometry.q(static_cast<int>(i));
        std::vector<double> row(geometry.np, 0.0);
        for (std::size_t l = 0; l < n; ++l) {
            const double a0 = q * cs[l] + p0 * sn[l] - data.samples[l].x;
            const double step = dp * sn[l];
            double co = std::cos(c * a0), si = std::sin(c * a0);
            for (int j = 0; j < geometry.np; ++j) {
                const double x = a0 + j * step;
                const double cx = c * x;
                row[j] += std::abs(cx) < 1.0 ? kernel(c, x) : (cx * si + co - 1.0) / (x * x);
                const double next_co = co * rot_c[l] - si * rot_s[l];
                si = si * rot_c[l] + co * rot_s[l];
                co = next_co;
            }
        }
        for (int j = 0; j < geometry.np; ++j) grid.values(static_cast<Eigen::Index>(i), j) = row[j] * scale;
    });
    return grid;
}

double radon(const WignerGrid& grid, double x, double phi, std::optional<std::string>* warning) {
    const GridGeometry& g = grid.geometry;
    if (warning) {
        double peak = grid.max_abs();
        if (peak > 0.0 && grid.edge_max() > kRadonEdgeTolerance * peak)
            *warning = "radon: grid border carries mass; line integral may miss part of the support";
        else
            warning->reset();
    }
    // point(t) = (x cos phi + t sin phi, x sin phi - t cos phi), restricted to the
    // rectangle spanned by the first and last cell centres
    const double c = std::cos(phi), s = std::sin(phi);
    const double q_lo = g.q(0), q_hi = g.q(g.nq - 1), p_lo = g.p(0), p_hi = g.p(g.np - 1);
    double t_lo = -std::numeric_limits<double>::infinity(), t_hi = std::numeric_limits<double>::infinity();
    auto clip = [&](double origin, double dir, double lo, double hi) {
        if (std::abs(dir) < 1e-15) {
            if (origin < lo || origin > hi) t_hi = t_lo - 1.0;
            return;
        }
        double a = (lo - origin) / dir, b = (hi - origin) / dir;
        t_lo = std::max(t_lo, std::min(a, b));
        t_hi = std::min(t_hi, std::max(a, b));
    };
    clip(x * c, s, q_lo, q_hi);
    clip(x * s, -c, p_lo, p_hi);
    if (!(t_hi > t_lo)) return 0.0;
    const double h = 0.5 * std::min(g.dq(), g.dp());
    const int steps = std::max(1, static_cast<int>(std::ceil((t_hi - t_lo) / h)));
    const double dt = (t_hi - t_lo) / steps;
    auto interp = [&](double q, double p) {
        double fi = std::clamp((q - q_lo) / g.dq(), 0.0, g.nq - 1.0);
        double fj = std::clamp((p - p_lo) / g.dp(), 0.0, g.np - 1.0);
        int i = std::min(static_cast<int>(fi), g.nq - 2), j = std::min(static_cast<int>(fj), g.np - 2);
        double u = fi - i, v = fj - j;
        const auto& w = grid.values;
        return (1 - u) * (1 - v) * w(i, j) + u * (1 - v) * w(i + 1, j) + (1 - u) * v * w(i, j + 1) +
               u * v * w(i + 1, j + 1);
    };
    double sum = 0.0;
    for (int k = 0; k <= steps; ++k) {
        double t = t_lo + k * dt;
        double v = interp(x * c + t * s, x * s - t * c);
        sum += (k == 0 || k == steps) ? 0.5 * v : v;
    }
    return sum * dt;
}

void write_wigner_csv(const std::filesystem::path& path, const WignerGrid& grid) {
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path.string());
    out.precision(17);
    const GridGeometry& g = grid.geometry;
    out << "# " << g.q_min << ' ' << g.q_max << ' ' << g.nq << '\n';
    out << "# " << g.p_min << ' ' << g.p_max << ' ' << g.np << '\n';
    for (int i = 0; i < g.nq; ++i) {
        for (int j = 0; j < g.np; ++j) out << (j ? "," : "") << grid.values(i, j);
        out << '\n';
    }
}

WignerGrid read_wigner_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot read " + path.string());
    WignerGrid grid;
    GridGeometry& g = grid.geometry;
    std::string line;
    auto header = [&](double& lo, double& hi, int& n) {
        if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw ParameterError(path.string() + ": missing header");
        std::istringstream is(line.substr(2));
        if (!(is >> lo >> hi >> n)) throw ParameterError(path.string() + ": malformed header");
    };
    header(g.q_min, g.q_max, g.nq);
    header(g.p_min, g.p_max, g.np);
    g.validate();
    grid.values.resize(g.nq, g.np);
    for (int i = 0; i < g.nq; ++i) {
        if (!std::getline(in, line)) throw ParameterError(path.string() + ": too few rows");
        std::istringstream is(line);
        std::string cell;
        for (int j = 0; j < g.np; ++j) {
            if (!std::getline(is, cell, ',')) throw ParameterError(path.string() + ": too few columns");
            grid.values(i, j) = std::stod(cell);
        }
    }
    return grid;
}

nlohmann::json to_json(const WignerGrid& grid) {
    const GridGeometry& g = grid.geometry;
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < g.nq; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < g.np; ++j) row.push_back(grid.values(i, j));
        rows.push_back(std::move(row));
    }
    return {{"q_min", g.q_min}, {"q_max", g.q_max}, {"nq", g.nq}, {"p_min", g.p_min},
            {"p_max", g.p_max}, {"np", g.np},       {"values", std::move(rows)}};
}

WignerGrid wigner_grid_from_json(const nlohmann::json& j) {
    try {
        WignerGrid grid;
        GridGeometry& g = grid.geometry;
        g.q_min = j.at("q_min");
        g.q_max = j.at("q_max");
        g.nq = j.at("nq");
        g.p_min = j.at("p_min");
        g.p_max = j.at("p_max");
        g.np = j.at("np");
        g.validate();
        const auto& rows = j.at("values");
        if (rows.size() != static_cast<std::size_t>(g.nq)) throw ParameterError("Wigner JSON: row count mismatch");
        grid.values.resize(g.nq, g.np);
        for (int r = 0; r < g.nq; ++r) {
            if (rows[r].size() != static_cast<std::size_t>(g.np)) throw ParameterError("Wigner JSON: column count mismatch");
            for (int c = 0; c < g.np; ++c) grid.values(r, c) = rows[r][c].get<double>();
        }
        return grid;
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("Wigner JSON: ") + e.what());
    }
}

} // namespace tomolab
