#include "tomolab/quantum_states.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "tomolab/errors.hpp"

namespace tomolab {

namespace {

ComplexMatrix hermitian_part(const ComplexMatrix& m) {
    // (a + conj(b)) / 2 and (b + conj(a)) / 2 are exact conjugates of each other.
    ComplexMatrix h(m.rows(), m.cols());
    for (Eigen::Index j = 0; j < m.rows(); ++j)
        for (Eigen::Index k = 0; k < m.cols(); ++k) h(j, k) = (m(j, k) + std::conj(m(k, j))) * 0.5;
    return h;
}

ComplexMatrix padded(const ComplexMatrix& m, Eigen::Index dim) {
    ComplexMatrix out = ComplexMatrix::Zero(dim, dim);
    Eigen::Index n = std::min(dim, m.rows());
    out.topLeftCorner(n, n) = m.topLeftCorner(n, n);
    return out;
}

double log_binomial(int n, int k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// sqrt(b_j^{j+p} b_k^{k+p}) with the (1-eta)^p factor kept signed, so the
// same formula serves eta > 1 (the inverse channel).
double loss_coefficient(int j, int k, int p, double eta) {
    double one_minus = 1.0 - eta;
    if (p == 0) return std::pow(eta, 0.5 * (j + k));
    if (one_minus == 0.0) return 0.0;
    double log_mag = 0.5 * (log_binomial(j + p, j) + log_binomial(k + p, k)) + 0.5 * (j + k) * std::log(eta) +
                     p * std::log(std::abs(one_minus));
    double sign = (one_minus < 0.0 && p % 2 == 1) ? -1.0 : 1.0;
    return sign * std::exp(log_mag);
}

ComplexMatrix apply_loss(const ComplexMatrix& rho, double eta) {
    const int n = static_cast<int>(rho.rows());
    ComplexMatrix out = ComplexMatrix::Zero(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            Complex acc = 0.0;
            for (int p = 0; j + p < n && k + p < n; ++p) acc += loss_coefficient(j, k, p, eta) * rho(j + p, k + p);
            out(j, k) = acc;
        }
    return out;
}

// Amplitudes c_n of D(a) S(xi)|0> with real a = sqrt(N - sinh^2 xi), up to a
// common factor: c_n ~ (tanh(xi)/2)^{n/2} H_n(gamma) / sqrt(n!), computed as
// c_{n+1} = (2 s u c_n - 2 sqrt(n) s^2 c_{n-1}) / sqrt(n+1), where
// s u = a e^xi / (2 cosh xi) and s^2 = tanh(xi) / 2.
std::vector<double> squeezed_series(double mean_photons, double xi, int count) {
    double shift = std::sqrt(mean_photons - std::sinh(xi) * std::sinh(xi));
    double su = shift * std::exp(xi) / (2.0 * std::cosh(xi));
    double s2 = std::tanh(xi) / 2.0;
    std::vector<double> c(static_cast<std::size_t>(std::max(count, 2)));
    c[0] = 1.0;
    c[1] = 2.0 * su;
    for (int n = 1; n + 1 < count; ++n)
        c[n + 1] = (2.0 * su * c[n] - 2.0 * std::sqrt(static_cast<double>(n)) * s2 * c[n - 1]) / std::sqrt(n + 1.0);
    c.resize(static_cast<std::size_t>(count));
    return c;
}

void validate(const StateSpec& spec) {
    switch (spec.kind) {
    case StateKind::vacuum:
        break;
    case StateKind::fock:
        if (spec.photons < 0) throw ParameterError("fock: photon number must be >= 0");
        break;
    case StateKind::thermal:
        if (!(spec.beta > 0.0)) throw ParameterError("thermal: beta must be > 0");
        break;
    case StateKind::coherent:
        if (!(spec.mean_photons >= 0.0)) throw ParameterError("coherent: N must be >= 0");
        break;
    case StateKind::squeezed: {
        double sh = std::sinh(spec.xi);
        if (!(spec.mean_photons >= 0.0) || spec.mean_photons < sh * sh)
            throw ParameterError("squeezed: requires N >= sinh^2(xi)");
        break;
    }
    }
}

// Photon-number probabilities of the untruncated state at indices < count,
// plus the total mass at indices >= count.
std::pair<Eigen::VectorXd, double> photon_distribution(const StateSpec& spec, int count) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(count);
    double tail = 0.0;
    switch (spec.kind) {
    case StateKind::vacuum:
        if (count > 0) p(0) = 1.0; else tail = 1.0;
        break;
    case StateKind::fock:
        if (spec.photons < count) p(spec.photons) = 1.0; else tail = 1.0;
        break;
    case StateKind::thermal: {
        double q = std::exp(-spec.beta);
        for (int k = 0; k < count; ++k) p(k) = (1.0 - q) * std::pow(q, k);
        tail = std::pow(q, count);
        break;
    }
    case StateKind::coherent:
    case StateKind::squeezed: {
        ComplexVector c = pure_amplitudes(spec, count);
        p = c.cwiseAbs2();
        tail = std::max(0.0, 1.0 - p.sum());
        break;
    }
    }
    return {p, tail};
}

} // namespace

RawMatrix::RawMatrix(const ComplexMatrix& m, double tolerance) {
    if (m.rows() != m.cols()) throw ContractViolation("matrix must be square");
    double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (m.size() > 0 && (m - m.adjoint()).cwiseAbs().maxCoeff() > tolerance * scale)
        throw ContractViolation("non-Hermitian input");
    m_ = hermitian_part(m);
}

Eigen::VectorXd RawMatrix::eigenvalues() const {
    if (dim() == 0) return {};
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

RawMatrix RawMatrix::resized(int dim) const { return RawMatrix(padded(m_, dim)); }

double RawMatrix::mean_photons() const {
    double s = 0.0;
    for (int k = 0; k < dim(); ++k) s += k * m_(k, k).real();
    return s;
}

DensityMatrix::DensityMatrix(const ComplexMatrix& m) : RawMatrix(m) {
    if (dim() == 0) throw ContractViolation("density matrix must have dim >= 1");
    if (std::abs(trace() - 1.0) > kTraceTolerance)
        throw ContractViolation("density matrix trace " + std::to_string(trace()) + " != 1");
    if (eigenvalues()(0) < -kEigenTolerance) throw ContractViolation("density matrix is not positive semidefinite");
}

DensityMatrix DensityMatrix::resized(int dim) const { return DensityMatrix(padded(m_, dim)); }

DensityMatrix pure_state(const ComplexVector& amplitudes) {
    ComplexVector v = amplitudes / amplitudes.norm();
    return DensityMatrix(ComplexMatrix(v * v.adjoint()));
}

std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string StateSpec::label() const {
    switch (kind) {
    case StateKind::vacuum: return "vacuum";
    case StateKind::fock: return "fock:k=" + std::to_string(photons);
    case StateKind::thermal: return "thermal:beta=" + format_number(beta);
    case StateKind::coherent: return "coherent:N=" + format_number(mean_photons);
    case StateKind::squeezed: return "squeezed:N=" + format_number(mean_photons) + ",xi=" + format_number(xi);
    }
    return "vacuum";
}

ComplexVector pure_amplitudes(const StateSpec& spec, int count) {
    validate(spec);
    ComplexVector out = ComplexVector::Zero(count);
    if (spec.kind == StateKind::coherent) {
        double alpha = std::sqrt(spec.mean_photons);
        double c = std::exp(-spec.mean_photons / 2.0);
        for (int k = 0; k < count; ++k) {
            out(k) = c;
            c *= alpha / std::sqrt(k + 1.0);
        }
        return out;
    }
    if (spec.kind != StateKind::squeezed) throw ParameterError("pure_amplitudes: coherent or squeezed only");
    // Extend the series until its tail is negligible, then normalize over all of it.
    int total = std::max(count, 64);
    for (;;) {
        std::vector<double> c = squeezed_series(spec.mean_photons, spec.xi, total);
        double norm2 = 0.0, tail2 = 0.0;
        for (int k = 0; k < total; ++k) norm2 += c[k] * c[k];
        for (int k = total - 16; k < total; ++k) tail2 += c[k] * c[k];
        if (tail2 <= 1e-30 * norm2 || total > 20000) {
            double inv = 1.0 / std::sqrt(norm2);
            for (int k = 0; k < count; ++k) out(k) = c[k] * inv;
            return out;
        }
        total *= 2;
    }
}

PreparedState make_state(const StateSpec& spec, int dim, bool strict) {
    validate(spec);
    if (dim < 1) throw ParameterError("state dimension must be >= 1");
    if (spec.kind == StateKind::fock && spec.photons >= dim)
        throw ParameterError("fock state does not fit in dimension " + std::to_string(dim));

    ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
    double kept = 0.0;
    switch (spec.kind) {
    case StateKind::vacuum:
        m(0, 0) = 1.0;
        kept = 1.0;
        break;
    case StateKind::fock:
        m(spec.photons, spec.photons) = 1.0;
        kept = 1.0;
        break;
    case StateKind::thermal: {
        auto [p, tail] = photon_distribution(spec, dim);
        for (int k = 0; k < dim; ++k) m(k, k) = p(k);
        kept = p.sum();
        break;
    }
    case StateKind::coherent:
    case StateKind::squeezed: {
        ComplexVector c = pure_amplitudes(spec, dim);
        m = c * c.adjoint();
        kept = c.squaredNorm();
        break;
    }
    }
    PreparedState out;
    out.truncated_mass = std::max(0.0, 1.0 - kept);
    if (out.truncated_mass > kTruncationErrorMass && strict)
        throw ParameterError("dimension " + std::to_string(dim) + " too small for " + spec.label() +
                             ": truncated mass " + std::to_string(out.truncated_mass));
    if (out.truncated_mass > kTruncationWarnMass) {
        std::ostringstream os;
        os << spec.label() << " truncated at dim " << dim << " loses mass " << out.truncated_mass;
        out.warning = os.str();
    }
    if (kept <= 0.0) throw NumericalError("state has no mass below dimension " + std::to_string(dim));
    out.rho = DensityMatrix(ComplexMatrix(m / kept));
    return out;
}

int minimal_dim(const StateSpec& spec, double lost_mass) {
    validate(spec);
    for (int dim = 1; dim <= 4096; dim *= 2) {
        auto [p, tail] = photon_distribution(spec, dim);
        if (tail > lost_mass) continue;
        // refine within (dim/2, dim]
        double cum = 0.0;
        for (int k = 0; k < dim; ++k) {
            cum += p(k);
            if (1.0 - cum <= lost_mass) return k + 1;
        }
        return dim;
    }
    throw ParameterError("no dimension up to 4096 holds the requested mass for " + spec.label());
}

double distance(const RawMatrix& a, const RawMatrix& b, Norm norm) {
    Eigen::Index dim = std::max(a.dim(), b.dim());
    ComplexMatrix diff = padded(a.matrix(), dim) - padded(b.matrix(), dim);
    if (norm == Norm::frobenius) return diff.norm();
    if (dim == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(diff), Eigen::EigenvaluesOnly);
    double s = 0.0;
    for (double lambda : es.eigenvalues())
        if (std::abs(lambda) > 1e-12) s += std::abs(lambda);
    return s;
}

DensityMatrix project_physical(const RawMatrix& m) {
    if (m.dim() == 0) throw NumericalError("no positive mass");
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m.matrix());
    Eigen::VectorXd lambda = es.eigenvalues();
    if (lambda(0) >= 0.0 && std::abs(lambda.sum() - 1.0) <= 1e-12) return DensityMatrix(m.matrix());
    lambda = lambda.cwiseMax(0.0);
    double total = lambda.sum();
    if (!(total > 0.0)) throw NumericalError("no positive mass");
    lambda /= total;
    const ComplexMatrix& v = es.eigenvectors();
    return DensityMatrix(ComplexMatrix(v * lambda.asDiagonal() * v.adjoint()));
}

DensityMatrix bernoulli_transform(const DensityMatrix& rho, double eta, BernoulliOptions opts) {
    if (!(eta > 0.0 && eta <= 1.0)) throw ParameterError("efficiency must satisfy 0 < eta <= 1");
    if (opts.pad < 0) throw ParameterError("padding must be >= 0");
    if (eta == 1.0) return rho;
    const int n = rho.dim();
    ComplexMatrix out = apply_loss(padded(rho.matrix(), n + opts.pad), eta);
    return DensityMatrix(ComplexMatrix(out.topLeftCorner(n, n)));
}

RawMatrix bernoulli_inverse(const RawMatrix& rho, double eta, BernoulliOptions opts) {
    if (!(eta > 0.0 && eta <= 1.0)) throw ParameterError("efficiency must satisfy 0 < eta <= 1");
    if (eta <= 0.5) throw ParameterError("divergent inverse: Bernoulli inverse requires eta > 1/2");
    if (opts.pad < 0) throw ParameterError("padding must be >= 0");
    if (eta == 1.0) return rho;
    const int n = rho.dim();
    ComplexMatrix out = apply_loss(padded(rho.matrix(), n + opts.pad), 1.0 / eta);
    return RawMatrix(ComplexMatrix(out.topLeftCorner(n, n)), 1e-8);
}

Eigen::VectorXd binomial_thinning(const Eigen::VectorXd& p, double eta) {
    if (!(eta > 0.0 && eta <= 1.0)) throw ParameterError("efficiency must satisfy 0 < eta <= 1");
    const int n = static_cast<int>(p.size());
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j)
        for (int k = j; k < n; ++k) {
            double b = (eta == 1.0) ? (k == j ? 1.0 : 0.0)
                                    : std::exp(log_binomial(k, j) + j * std::log(eta) + (k - j) * std::log1p(-eta));
            q(j) += b * p(k);
        }
    return q;
}

nlohmann::json to_json(const RawMatrix& m, bool physical) {
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
    for (int j = 0; j < m.dim(); ++j) {
        nlohmann::json r = nlohmann::json::array(), i = nlohmann::json::array();
        for (int k = 0; k < m.dim(); ++k) {
            r.push_back(m(j, k).real());
            i.push_back(m(j, k).imag());
        }
        re.push_back(std::move(r));
        im.push_back(std::move(i));
    }
    nlohmann::json out = {{"dim", m.dim()}, {"re", std::move(re)}, {"im", std::move(im)}};
    if (!physical) out["physical"] = false;
    return out;
}

RawMatrix raw_matrix_from_json(const nlohmann::json& j) {
    try {
        int dim = j.at("dim").get<int>();
        const auto& re = j.at("re");
        const auto& im = j.at("im");
        if (dim < 0 || re.size() != static_cast<std::size_t>(dim) || im.size() != static_cast<std::size_t>(dim))
            throw ParameterError("matrix JSON: row count does not match dim");
        ComplexMatrix m(dim, dim);
        for (int r = 0; r < dim; ++r) {
            if (re[r].size() != static_cast<std::size_t>(dim) || im[r].size() != static_cast<std::size_t>(dim))
                throw ParameterError("matrix JSON: column count does not match dim");
            for (int c = 0; c < dim; ++c) m(r, c) = Complex(re[r][c].get<double>(), im[r][c].get<double>());
        }
        return RawMatrix(m);
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("matrix JSON: ") + e.what());
    }
}

DensityMatrix density_matrix_from_json(const nlohmann::json& j) { return DensityMatrix(raw_matrix_from_json(j)); }

} // namespace tomolab
