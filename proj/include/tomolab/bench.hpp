#pragma once

// Monte Carlo harness for risk curves of the PFP and SML estimators.
//
// Each (n, rep) cell draws its own sample with a seed derived from the base
// seed, n and rep, so cells are independent of scheduling. L2 risk is the
// mean Frobenius error |rho_hat - rho|_2 over repetitions.

#include <cstdint>
#include <string>
#include <vector>

#include "tomolab/quantum_states.hpp"
#include "tomolab/sml.hpp"

namespace tomolab {

std::uint64_t cell_seed(std::uint64_t base, std::size_t n, int rep);

struct BenchOptions {
    int pfp_N_max = 30;           // PFP errors and CV over N = 1..pfp_N_max
    std::vector<int> sml_dims;    // SML sieve dimensions; empty = default_sml_dims(pfp_N_max)
    SieveConfig sml;              // N is overwritten per fit
    bool run_sml = true;
};

// 1..12, then every second N up to n_max.
std::vector<int> default_sml_dims(int n_max);

struct RepResult {
    std::size_t n = 0;
    int rep = 0;
    std::uint64_t seed = 0;
    std::vector<double> pfp_error;  // [N-1]
    std::vector<double> cv_curve;   // J_hat(N), [N-1]
    int cv_N_star = 0;
    std::vector<int> sml_dims;
    std::vector<double> sml_error;  // aligned with sml_dims
    std::vector<bool> sml_converged;
};

RepResult run_rep(const DensityMatrix& truth, std::size_t n, int rep, std::uint64_t base_seed,
                  const BenchOptions& opts);
std::vector<RepResult> run_reps(const DensityMatrix& truth, const std::vector<std::size_t>& ns, int reps,
                                std::uint64_t base_seed, const BenchOptions& opts);

// Mean error per dimension at one n, and the minimizing dimension.
struct DimCurve {
    std::vector<int> dims;
    std::vector<double> mean_error;
    std::vector<double> se;
    int N_star = 0;
    double risk = 0.0;               // mean error at N_star
    std::vector<double> rep_errors;  // per-rep error at N_star
};
DimCurve pfp_curve(const std::vector<RepResult>& reps);
DimCurve sml_curve(const std::vector<RepResult>& reps);
double mean_cv_N_star(const std::vector<RepResult>& reps);

struct SlopeFit {
    double tau = 0.0;  // risk ~ n^{-tau}
    double se = 0.0;
};
// Least-squares slope of log risk against log n.
SlopeFit fit_decay(const std::vector<double>& ns, const std::vector<double>& risks);

struct RiskRow {
    std::size_t n = 0;
    std::string estimator;
    int N_star = 0;
    double l2_risk = 0.0;
    double N_cv = 0.0;  // mean CV-selected N (PFP only)
    std::vector<double> rep_errors;
};

struct RiskScaling {
    std::vector<RiskRow> rows;
    SlopeFit pfp;
    SlopeFit sml;
};

RiskScaling bench_risk_scaling(const DensityMatrix& truth, const std::vector<std::size_t>& ns, int reps,
                               std::uint64_t base_seed, const BenchOptions& opts);

// CSV writers for the three figures.
void write_risk_csv(const std::string& path, const RiskScaling& result);
void write_dim_csv(const std::string& path, std::size_t n, const DimCurve& pfp, const DimCurve& sml);
void write_cv_csv(const std::string& path, const std::vector<RepResult>& reps);

} // namespace tomolab
