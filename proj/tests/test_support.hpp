#pragma once

#include <random>

#include "tomolab/quantum_states.hpp"

namespace test_support {

// Ginibre-distributed mixed state G G^H / tr, optionally of reduced rank.
inline tomolab::DensityMatrix random_state(int dim, std::mt19937_64& gen, int rank = -1) {
    std::normal_distribution<double> g;
    if (rank < 1) rank = dim;
    tomolab::ComplexMatrix m(dim, rank);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < rank; ++j) m(i, j) = {g(gen), g(gen)};
    tomolab::ComplexMatrix rho = m * m.adjoint();
    rho /= rho.trace().real();
    return tomolab::DensityMatrix(tomolab::ComplexMatrix((rho + rho.adjoint()) * 0.5));
}

// Random state whose photon-number weights decay like decay^k, so that
// truncation effects stay small.
inline tomolab::DensityMatrix random_concentrated_state(int dim, double decay, std::mt19937_64& gen) {
    tomolab::DensityMatrix base = random_state(dim, gen);
    tomolab::ComplexMatrix d = tomolab::ComplexMatrix::Zero(dim, dim);
    for (int k = 0; k < dim; ++k) d(k, k) = std::pow(decay, 0.5 * k);
    tomolab::ComplexMatrix rho = d * base.matrix() * d;
    rho /= rho.trace().real();
    return tomolab::DensityMatrix(tomolab::ComplexMatrix((rho + rho.adjoint()) * 0.5));
}

} // namespace test_support
