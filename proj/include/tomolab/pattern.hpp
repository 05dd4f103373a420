#pragma once

// Pattern functions and the pattern-function projection (PFP) estimator.
//
// f_{k,j} = d/dx(psi_k phi_j) for k <= j, extended symmetrically. Evaluated as
//     f_{k,j} = 2x psi_k phi_j - sqrt(2(k+1)) psi_{k+1} phi_j - sqrt(2(j+1)) psi_k phi_{j+1}
// inside |x| <= pattern_window(k, j); beyond it the tail a x^{-2-|k-j|} sgn(x)^{k+j}
// is used, with a matched to the value at the window edge.
//
// The estimator averages F_{k,j}(x, phi) = f_{k,j}(x) e^{-i(j-k)phi}, whose
// expectation under the data law is rho_{k,j}.

#include <vector>

#include <Eigen/Dense>

#include "tomolab/homodyne.hpp"
#include "tomolab/oscillator_basis.hpp"
#include "tomolab/quantum_states.hpp"

namespace tomolab {

double pattern_window(int k, int j);
double pattern(int k, int j, double x);

// The same three-term sum with the roles of the indices exchanged
// (psi on the larger index). Kept for comparison only: it also reproduces
// rho under the data law but does not decay for k != j.
double pattern_swapped(int k, int j, double x);

// All f_{k,j}, k, j < dim, at one x. Thread-safe.
class PatternEvaluator {
public:
    explicit PatternEvaluator(int dim);

    int dim() const { return dim_; }
    // out is resized to dim x dim.
    void evaluate(double x, Eigen::MatrixXd& out) const;
    // Tail amplitude a_{k,j} and exponent -2-|k-j| used beyond the window.
    double tail_amplitude(int k, int j) const { return amplitude_(k, j); }

private:
    void direct(double x, Eigen::MatrixXd& out, std::vector<long double>& psi,
                std::vector<long double>& phi) const;

    int dim_;
    basis::BasisTable table_;
    Eigen::MatrixXd window_;
    Eigen::MatrixXd amplitude_;
};

// f_{k,j} sampled on a uniform grid and linearly interpolated; the tail
// model takes over outside the grid. tail_exponents(k, j) is the log-log
// slope of |f_{k,j}| fitted on the last tenth of the direct-evaluation window.
struct PatternTable {
    int dim = 0;
    std::vector<double> grid;
    std::vector<double> values;  // [(k * dim + j) * grid.size() + i]
    Eigen::MatrixXd tail_exponents;
    Eigen::MatrixXd tail_amplitudes;

    static PatternTable build(int dim, double half_width, std::size_t nodes);
    double operator()(int k, int j, double x) const;
};

// Per-pair sup norms and L2 norms of f_{k,j} over R.
struct PatternNorms {
    Eigen::MatrixXd sup;
    Eigen::MatrixXd l2;
};
PatternNorms pattern_norms(int dim, double spacing = 1.0 / 64);

// rho_hat_{k,j} = (1/n) sum_l F_{k,j}(X_l, Phi_l) for k, j < N.
// Rejects lossy data (eta < 1).
RawMatrix estimate_pfp(const SampleSet& data, int N);

struct CrossValidation {
    int N_star = 1;
    std::vector<double> risk_curve;  // risk_curve[N-1] = J_hat(N)
};

// Unbiased L2-risk surrogate
//   J_hat(N) = sum_{k,j<N} |rho_hat|^2 - 2 (n^2 |rho_hat|^2 - sum_l |F|^2) / (n(n-1)),
// minimized over 1 <= N <= N_max (ties to the smallest N).
CrossValidation cross_validate(const SampleSet& data, int N_max);

struct MiseSplit {
    double bias2 = 0.0;
    double variance = 0.0;
};

// bias2 = sum_{max(k,j) >= N} |rho_{k,j}|^2 + |mean(est) - rho restricted to N|_F^2,
// variance = mean |est - mean(est)|_F^2, both over the N x N block.
MiseSplit mise_decomposition(const DensityMatrix& truth, const std::vector<RawMatrix>& estimates, int N);

} // namespace tomolab
