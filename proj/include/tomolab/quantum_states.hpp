#pragma once

// Density matrices in the photon-number basis.
//
// Entry (j, k) of every matrix here is rho_{j,k} = <j|rho|k>. The homodyne
// density built from it is (1/pi) sum_{j,k} rho_{j,k} psi_j psi_k e^{-i(j-k)phi}.

#include <complex>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

namespace tomolab {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

// Hermitian matrix with no trace or positivity guarantee (e.g. a raw
// pattern-function estimate). Construction symmetrizes exactly, so
// m(j,k) == conj(m(k,j)) bit-for-bit afterwards.
class RawMatrix {
public:
    RawMatrix() = default;
    // Throws ContractViolation if m deviates from Hermitian by more than
    // `tolerance` (max-abs, relative to max(1, |m|_max)).
    explicit RawMatrix(const ComplexMatrix& m, double tolerance = 1e-10);

    int dim() const { return static_cast<int>(m_.rows()); }
    const ComplexMatrix& matrix() const { return m_; }
    Complex operator()(int j, int k) const { return m_(j, k); }
    double trace() const { return m_.trace().real(); }
    // Ascending eigenvalues.
    Eigen::VectorXd eigenvalues() const;
    // Zero-pads or truncates to `dim`.
    RawMatrix resized(int dim) const;
    // Mean photon number sum_k k rho_kk.
    double mean_photons() const;

protected:
    ComplexMatrix m_;
};

// Physical state: Hermitian, trace 1 within 1e-9, eigenvalues >= -1e-9.
class DensityMatrix : public RawMatrix {
public:
    DensityMatrix() = default;
    explicit DensityMatrix(const ComplexMatrix& m);
    explicit DensityMatrix(const RawMatrix& m) : DensityMatrix(m.matrix()) {}

    DensityMatrix resized(int dim) const;

    static constexpr double kTraceTolerance = 1e-9;
    static constexpr double kEigenTolerance = 1e-9;
};

// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

// Pure state |v><v| from a (not necessarily normalized) amplitude vector.
DensityMatrix pure_state(const ComplexVector& amplitudes);

enum class StateKind { vacuum, fock, thermal, coherent, squeezed };

struct StateSpec {
    StateKind kind = StateKind::vacuum;
    int photons = 0;            // fock
    double beta = 1.0;          // thermal
    double mean_photons = 0.0;  // coherent, squeezed (N)
    double xi = 0.0;            // squeezed

    static StateSpec vacuum() { return {}; }
    static StateSpec fock(int k) { return {StateKind::fock, k, 1.0, 0.0, 0.0}; }
    static StateSpec thermal(double beta) { return {StateKind::thermal, 0, beta, 0.0, 0.0}; }
    static StateSpec coherent(double n) { return {StateKind::coherent, 0, 1.0, n, 0.0}; }
    static StateSpec squeezed(double n, double xi) { return {StateKind::squeezed, 0, 1.0, n, xi}; }

    // Canonical text form, e.g. "squeezed:N=1.2,xi=0.4".
    std::string label() const;
};

struct PreparedState {
    DensityMatrix rho;
    double truncated_mass = 0.0;  // probability mass beyond the truncation
    std::optional<std::string> warning;
};

inline constexpr double kTruncationWarnMass = 1e-6;
inline constexpr double kTruncationErrorMass = 1e-3;

// Truncated, renormalized state. A warning is attached when more than 1e-6 of
// the mass is cut; in strict mode cutting more than 1e-3 is an error.
PreparedState make_state(const StateSpec& spec, int dim, bool strict = false);

// Smallest dimension that keeps 1 - lost_mass of the state's probability.
int minimal_dim(const StateSpec& spec, double lost_mass = 1e-6);

// Unnormalized photon-number amplitudes c_0..c_{count-1} of a pure factory
// state (coherent or squeezed), normalized over the infinite expansion.
ComplexVector pure_amplitudes(const StateSpec& spec, int count);

enum class Norm { trace, frobenius };

// Trace norm |a - b|_1 via Hermitian eigendecomposition (eigenvalues with
// |lambda| <= 1e-12 count as zero), or Frobenius norm. Dimensions may differ;
// the smaller matrix is zero-padded.
double distance(const RawMatrix& a, const RawMatrix& b, Norm norm);

// Clips negative eigenvalues and renormalizes. Throws NumericalError
// "no positive mass" if nothing survives.
DensityMatrix project_physical(const RawMatrix& m);

struct BernoulliOptions {
    int pad = 32;  // zero-padding columns for the p-sum; the sum is finite for truncated input
};

// Photon-loss (efficiency eta) channel:
//   rho^eta_{j,k} = sum_p sqrt(b_j^{j+p}(eta) b_k^{k+p}(eta)) rho_{j+p,k+p},
//   b_j^{j+p}(eta) = C(j+p, j) eta^j (1-eta)^p.
// Requires 0 < eta <= 1.
DensityMatrix bernoulli_transform(const DensityMatrix& rho, double eta, BernoulliOptions opts = {});

// Inverse channel, i.e. the same sum with eta replaced by 1/eta. Only for
// eta > 1/2; the series diverges otherwise. The result need not be positive.
RawMatrix bernoulli_inverse(const RawMatrix& rho, double eta, BernoulliOptions opts = {});

// Binomial thinning of a photon-number distribution: q_j = sum_k b_j^k(eta) p_k.
Eigen::VectorXd binomial_thinning(const Eigen::VectorXd& photon_probabilities, double eta);

// {"dim": N, "re": [[...]], "im": [[...]]}; raw matrices add "physical": false.
nlohmann::json to_json(const RawMatrix& m, bool physical);
RawMatrix raw_matrix_from_json(const nlohmann::json& j);
DensityMatrix density_matrix_from_json(const nlohmann::json& j);

} // namespace tomolab
