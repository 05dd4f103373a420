#pragma once

// Regular and irregular solutions of the harmonic-oscillator equation
//
//     [-1/2 d^2/dx^2 + 1/2 x^2] u = (k + 1/2) u
//
// psi_k are the normalized Hermite functions. phi_k are the odd/even
// non-normalizable partners with parity (-1)^{k+1}, scaled so that the
// Wronskian psi_k phi_k' - psi_k' phi_k equals 2; with that scaling
// d/dx(psi_k phi_j), k <= j, are the pattern functions.
//
// psi_k follows the upward three-term recurrence, which is stable.
// phi_k is the recessive solution of the same recurrence once x leaves the
// classically allowed region, so it is integrated in x instead: phi_k is the
// dominant solution of the ODE, and Taylor steps outward from exact data at
// x = 0 are stable.

#include <span>
#include <vector>

namespace tomolab::basis {

inline constexpr int kDefaultIndexCap = 512;

// psi_0(0) = pi^{-1/4}, obtained once by quadrature of exp(-x^2).
double psi0_normalization();

// |x| limit for evaluating phi_k directly: 12 + sqrt(2k).
double phi_window(int k);

double psi(int k, double x, int index_cap = kDefaultIndexCap);
std::vector<double> psi_all(int k_max, double x, int index_cap = kDefaultIndexCap);

double phi(int k, double x, int index_cap = kDefaultIndexCap);
std::vector<double> phi_all(int k_max, double x, int index_cap = kDefaultIndexCap);

struct BasisEvaluation {
    int k_max = 0;  // exclusive
    double x = 0.0;
    std::vector<double> psi;
    std::vector<double> phi;
};

BasisEvaluation evaluate(int k_max, double x, int index_cap = kDefaultIndexCap);

// Precomputed phi_k(x), phi_k'(x) on nodes of spacing `spacing` over
// [0, phi_window(k_max) + 1]. Evaluation takes one short Taylor step from the
// nearest node, so it is as accurate as direct integration. Immutable after
// construction and safe to share between threads.
//
// Values are returned in long double: psi_k and phi_k carry factors
// exp(-x^2/2) and exp(+x^2/2) that overflow double for large |x|, while
// their products (the pattern functions) stay moderate.
class BasisTable {
public:
    explicit BasisTable(int k_max, double spacing = 1.0 / 16, int index_cap = kDefaultIndexCap);

    int k_max() const { return k_max_; }
    double reach() const { return reach_; }

    // Fills psi[0..k_max) and phi[0..k_max) at x. Requires |x| <= reach().
    void evaluate(double x, std::span<long double> psi, std::span<long double> phi) const;
    BasisEvaluation evaluate(double x) const;

private:
    int k_max_;
    double spacing_;
    double reach_;
    std::size_t n_nodes_;
    // [k * n_nodes + i] -> value / derivative at node i
    std::vector<long double> value_;
    std::vector<long double> slope_;
};

namespace detail {
// Upward recurrence for psi_0..psi_{k_max-1} at x, in long double.
void psi_recurrence(double x, std::span<long double> out);
// phi_k(0) and phi_k'(0).
void phi_origin(int k, long double& value, long double& slope);
// Taylor step for u'' = (x^2 - energy2) u from (x0, u, u') to x0 + t.
void taylor_step(long double x0, long double energy2, long double t, long double& u,
                 long double& du);
} // namespace detail

} // namespace tomolab::basis
