#pragma once

// Homodyne data model: the joint density of (X, Phi), a seeded sampler for
// ideal and lossy detection, and classical distances between data laws.
//
// Joint density on R x [0, pi]:
//     p(x, phi) = (1/pi) sum_{j,k} rho_{j,k} psi_j(x) psi_k(x) e^{-i(j-k)phi}
// so the conditional density of X given Phi = phi is pi * p(x, phi).

#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tomolab/quantum_states.hpp"

namespace tomolab {

struct QuadratureSample {
    double x = 0.0;
    double phi = 0.0;  // in [0, pi]
};

struct SampleSet {
    std::vector<QuadratureSample> samples;
    double eta = 1.0;  // detector efficiency in (0, 1]
    std::uint64_t seed = 0;
    std::string state_label;

    std::size_t size() const { return samples.size(); }
};

// Evaluates p(x, phi) for a fixed matrix through the diagonal sums
//     g_d(x) = sum_k rho_{k+d,k} psi_{k+d}(x) psi_k(x),   d >= 0,
//     p(x, phi) = (1/pi) [g_0(x) + 2 Re sum_{d>0} e^{-i d phi} g_d(x)].
// Accepts raw matrices too (the result may then be negative).
class HomodyneDensity {
public:
    explicit HomodyneDensity(const RawMatrix& rho);

    int dim() const { return static_cast<int>(rho_.rows()); }
    double operator()(double x, double phi) const;
    // g_0..g_{dim-1} at x.
    void diagonals(double x, std::vector<Complex>& g) const;
    // Half-width of the x-range holding the mass: 6 + 2 sqrt(2 <n> + 1).
    double support_half_width() const;

private:
    ComplexMatrix rho_;
    double mean_photons_;
};

// Joint density for a physical state. Throws NumericalError "unphysical
// state" if the value is below -1e-9; tiny negatives are clipped to 0.
double density(const DensityMatrix& rho, double x, double phi);

// Density of lossy data Y = sqrt(eta) X + sqrt((1-eta)/2) xi, evaluated as
// the ideal density of the state after the photon-loss channel.
double noisy_density(const DensityMatrix& rho, double y, double phi, double eta);

// n draws: Phi uniform on [0, pi], X by inverse CDF of the conditional law on
// a 4096-node grid over +-support_half_width(), Gaussian noise added when
// eta < 1. Samples are generated in blocks of kSampleBlock with one
// generator per block, so the output depends only on the seed.
inline constexpr std::size_t kSampleBlock = 1024;
SampleSet sample(const DensityMatrix& rho, std::size_t n, double eta, std::uint64_t seed,
                 const std::string& state_label = "");

// Density on a tensor grid: out(i, j) = p(xs[i], phis[j]).
using GridDensity =
    std::function<void(const std::vector<double>& xs, const std::vector<double>& phis, Eigen::MatrixXd& out)>;

GridDensity grid_density(const RawMatrix& rho);
// Adapts a pointwise density.
GridDensity grid_density(std::function<double(double, double)> pointwise);

struct Divergences {
    double hellinger = 0.0;        // (int (sqrt p - sqrt q)^2)^{1/2}
    double total_variation = 0.0;  // (1/2) int |p - q|
    double chi_squared = 0.0;      // int (p - q)^2 / q, or +inf
    double achieved_tolerance = 0.0;
    int grid_x = 0;
    int grid_phi = 0;
};

struct DivergenceOptions {
    double x_half_width = 10.0;
    int start_x = 1024;
    int start_phi = 128;
    int max_x = 32768;
    int max_phi = 1024;
    double rel_tol = 1e-6;
};

// Midpoint quadrature on [-w, w] x [0, pi], doubling the x grid (and the phi
// grid until max_phi) until every quantity changes by less than rel_tol. Throws
// NumericalError with the achieved tolerance if the cap is reached.
Divergences divergences(const GridDensity& p, const GridDensity& q, const DivergenceOptions& opts = {});
Divergences divergences(const RawMatrix& rho, const RawMatrix& tau);

// CSV "x,phi" plus sidecar JSON {"n","eta","seed","state_label"} at
// <path>.json. Readers accept a missing sidecar (eta = 1, seed = 0).
std::filesystem::path sidecar_path(const std::filesystem::path& csv);
void write_samples(const std::filesystem::path& csv, const SampleSet& data,
                   const nlohmann::json& extra = nlohmann::json::object());
SampleSet read_samples(const std::filesystem::path& csv);

} // namespace tomolab
