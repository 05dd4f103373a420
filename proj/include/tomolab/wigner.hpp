#pragma once

// Wigner functions on phase-space grids.
//
// wigner_basis(a, b) is the Wigner function of |a><b|, so
//     W_rho = sum_{a,b} rho_{a,b} wigner_basis(a, b).
// Its line integrals are the conditional quadrature densities:
//     radon(W_rho)(x, phi) = int W(x cos phi + t sin phi, x sin phi - t cos phi) dt
//                          = p(x | phi) = pi * density(rho, x, phi).

#include <complex>
#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "tomolab/homodyne.hpp"
#include "tomolab/quantum_states.hpp"

namespace tomolab {

// For a >= b:
//   ((-1)^b / pi) sqrt(b!/a!) (sqrt2 (q - i p))^{a-b} e^{-(q^2+p^2)} L_b^{a-b}(2(q^2+p^2));
// for a < b the complex conjugate of wigner_basis(b, a).
Complex wigner_basis(int a, int b, double q, double p);

// Uniform grid; values sit at cell centres.
struct GridGeometry {
    double q_min = -6.0, q_max = 6.0;
    double p_min = -6.0, p_max = 6.0;
    int nq = 256, np = 256;

    double dq() const { return (q_max - q_min) / nq; }
    double dp() const { return (p_max - p_min) / np; }
    double q(int i) const { return q_min + (i + 0.5) * dq(); }
    double p(int j) const { return p_min + (j + 0.5) * dp(); }
    void validate() const;

    static GridGeometry square(double half_width, int n) { return {-half_width, half_width, -half_width, half_width, n, n}; }
};

struct WignerGrid {
    GridGeometry geometry;
    Eigen::MatrixXd values;  // (q index, p index)

    // Midpoint-rule integral.
    double integral() const;
    double max_abs() const;
    // Largest |value| on the outermost ring of cells.
    double edge_max() const;
};

WignerGrid wigner_of_state(const RawMatrix& rho, const GridGeometry& geometry = {});
// Plug-in estimator: the Wigner function of a fitted matrix.
WignerGrid plugin_estimate(const RawMatrix& estimate, const GridGeometry& geometry = {});

// K_c(x) = (1/2) int_{-c}^{c} |xi| e^{i xi x} d xi = (c x sin(cx) + cos(cx) - 1) / x^2.
double kernel(double c, double x);

// Filtered back-projection from ideal data:
//   W_hat(q, p) = (1/(2 pi n)) sum_l K_c(q cos Phi_l + p sin Phi_l - X_l).
WignerGrid kernel_estimate(const SampleSet& data, double c, const GridGeometry& geometry = {});

// Line integral of the bilinear interpolant, trapezoid steps of half the
// finer grid spacing; zero outside the grid. If `warning` is given it
// receives a message when the grid border carries more than
// kRadonEdgeTolerance of the peak, i.e. the line may leave the support.
inline constexpr double kRadonEdgeTolerance = 1e-6;
double radon(const WignerGrid& grid, double x, double phi, std::optional<std::string>* warning = nullptr);

// CSV: "# q_min q_max nq", "# p_min p_max np", then nq rows of np values.
void write_wigner_csv(const std::filesystem::path& path, const WignerGrid& grid);
WignerGrid read_wigner_csv(const std::filesystem::path& path);
nlohmann::json to_json(const WignerGrid& grid);
WignerGrid wigner_grid_from_json(const nlohmann::json& j);

} // namespace tomolab
