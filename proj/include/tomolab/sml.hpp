#pragma once

// Sieve maximum likelihood over states with at most N - 1 photons.
//
// A state in the sieve is a mixture rho = sum_r p_r v_r v_r^H of N unit
// vectors (the EM parameterization), or rho = T^H T with T upper triangular
// (the direct-ascent parameterization). For a sample (x, phi) let
// u_j = psi_j(x) e^{i j phi}; the ideal density of a pure component is
// |v^H u|^2 / pi. With detector efficiency eta < 1 the component density is
// sum_p |v^H K_p^H u|^2 / pi, where K_p are the Kraus operators of the loss
// channel, K_p|m> = sqrt(C(m,p) eta^{m-p} (1-eta)^p) |m-p>.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tomolab/homodyne.hpp"
#include "tomolab/quantum_states.hpp"

namespace tomolab {

enum class SmlInit { one_photon_like, chaotic, pilot_estimate };

struct SieveConfig {
    int N = 1;
    int max_iter = 500;
    double tol = 1e-8;  // relative log-likelihood change
    SmlInit init = SmlInit::chaotic;
    bool strict = false;
    int inner_steps = 5;  // projected-gradient steps per component in the M-step
};

struct MixtureParam {
    int N = 0;
    Eigen::VectorXd weights;  // p_r
    ComplexMatrix vectors;    // column r is v_r (unit norm)

    DensityMatrix assemble() const;
    // Throws ContractViolation on broken invariants.
    void validate() const;
    static MixtureParam initial(int N, SmlInit init);
};

struct CholeskyFactor {
    ComplexMatrix T;  // upper triangular, real non-negative diagonal, |T|_F = 1

    int N() const { return static_cast<int>(T.rows()); }
    DensityMatrix assemble() const;  // T^H T
    static CholeskyFactor from_density(const DensityMatrix& rho);
};

inline constexpr double kDensityFloor = 1e-300;

struct LogLikelihood {
    double value = 0.0;        // sum_l log p(X_l, Phi_l), including the 1/pi
    std::size_t floored = 0;   // terms clamped at kDensityFloor
};

LogLikelihood loglik(const MixtureParam& param, const SampleSet& data);
LogLikelihood loglik(const CholeskyFactor& factor, const SampleSet& data);
LogLikelihood loglik(const RawMatrix& rho, const SampleSet& data);

struct EmDiagnostics {
    int frozen_components = 0;  // positive weight but vanishing responsibilities
};

// One generalized-EM update: closed-form weights, projected-gradient ascent
// with backtracking for each vector; a step that lowers the component's
// objective is rejected.
MixtureParam em_step(const MixtureParam& param, const SampleSet& data, int inner_steps = 5,
                     EmDiagnostics* diagnostics = nullptr);

struct SmlFit {
    DensityMatrix rho;
    MixtureParam mixture;  // empty for the Cholesky backend
    std::vector<double> loglik_trace;
    int iters = 0;
    bool converged = false;
    std::size_t floored = 0;
    int frozen_components = 0;
    std::vector<std::string> warnings;
};

// EM from cfg.init.
SmlFit estimate_sml(const SampleSet& data, const SieveConfig& cfg);
// Projected-gradient ascent on the Cholesky factor, started from the same
// initial state mixed with 1e-3 of the maximally mixed state.
SmlFit estimate_sml_cholesky(const SampleSet& data, const SieveConfig& cfg);
// EM continued from a given mixture. A smaller start is padded with Fock
// components that together carry weight 1e-2.
SmlFit estimate_sml_from(const SampleSet& data, const SieveConfig& cfg, const MixtureParam& start);

std::string to_string(SmlInit init);
SmlInit sml_init_from_string(const std::string& name);

} // namespace tomolab
