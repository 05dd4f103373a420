#include "tomolab/sml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tomolab/errors.hpp"
#include "tomolab/oscillator_basis.hpp"
#include "tomolab/parallel.hpp"
#include "tomolab/pattern.hpp"

namespace tomolab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFlooredShare = 1e-3;
constexpr double kFrozenMass = 1e-300;
constexpr int kMaxHalvings = 30;

// Effect vectors of every sample: row l of U[p] is (K_p^H u_l)^T.
class Effects {
public:
    Effects(const SampleSet& data, int N) : N_(N), n_(data.size()) {
        if (N < 1) throw ParameterError("sieve dimension N must be >= 1");
        if (n_ < 1) throw ParameterError("empty sample set");
        if (!(data.eta > 0.0 && data.eta <= 1.0)) throw ParameterError("efficiency must satisfy 0 < eta <= 1");
        if (N > basis::kDefaultIndexCap) throw ParameterError("basis index overflow: " + std::to_string(N));
        ComplexMatrix u(n_, N);
        parallel_blocks(block_count(n_, kSampleBlock), [&](std::size_t b) {
            std::vector<long double> psi(N);
            auto range = block_range(b, n_, kSampleBlock);
            for (std::size_t l = range.begin; l < range.end; ++l) {
                const auto& s = data.samples[l];
                basis::detail::psi_recurrence(s.x, psi);
                for (int j = 0; j < N; ++j) u(l, j) = std::polar(static_cast<double>(psi[j]), j * s.phi);
            }
        });
        const double eta = data.eta;
        if (eta == 1.0) {
            U_.push_back(std::move(u));
            return;
        }
        for (int p = 0; p < N; ++p) {
            ComplexMatrix up = ComplexMatrix::Zero(n_, N);
            for (int m = p; m < N; ++m) {
                double log_c = std::lgamma(m + 1.0) - std::lgamma(p + 1.0) - std::lgamma(m - p + 1.0) +
                               (m - p) * std::log(eta) + p * std::log1p(-eta);
                up.col(m) = std::exp(0.5 * log_c) * u.col(m - p);
            }
            U_.push_back(std::move(up));
        }
    }

    int N() const { return N_; }
    std::size_t n() const { return n_; }

    // C[p] = U[p] conj(V); A(l, r) = sum_p |C[p](l, r)|^2 (component density times pi).
    void components(const ComplexMatrix& V, std::vector<ComplexMatrix>& C, Eigen::MatrixXd& A) const {
        C.resize(U_.size());
        A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_), V.cols());
        const ComplexMatrix Vc = V.conjugate();
        for (std::size_t p = 0; p < U_.size(); ++p) {
            C[p].noalias() = U_[p] * Vc;
            A += C[p].cwiseAbs2();
        }
    }

    // G = sum_p U[p]^T (W .* conj(C[p])), i.e. column r is sum_l W(l,r) sum_p e_lp (e_lp^H v_r).
    ComplexMatrix gradient(const std::vector<ComplexMatrix>& C, const Eigen::MatrixXd& W) const {
        ComplexMatrix G = ComplexMatrix::Zero(N_, W.cols());
        for (std::size_t p = 0; p < U_.size(); ++p)
            G.noalias() += U_[p].transpose() * ComplexMatrix(W.cast<Complex>().cwiseProduct(C[p].conjugate()));
        return G;
    }

    // pi * density of a matrix at every sample: sum_p u^H rho u.
    Eigen::VectorXd matrix_values(const ComplexMatrix& rho) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
        for (const auto& up : U_)
            out += (up.conjugate() * rho).cwiseProduct(up).rowwise().sum().real();
        return out;
    }

    // M = sum_p U[p]^T diag(w) conj(U[p]) = sum_l w_l sum_p e_lp e_lp^H.
    ComplexMatrix weighted_outer(const Eigen::VectorXd& w) const {
        ComplexMatrix M = ComplexMatrix::Zero(N_, N_);
        for (const auto& up : U_) M.noalias() += up.transpose() * (w.cast<Complex>().asDiagonal() * up.conjugate());
        return M;
    }

private:
    int N_;
    std::size_t n_;
    std::vector<ComplexMatrix> U_;
};

LogLikelihood sum_logs(const Eigen::VectorXd& pi_density) {
    LogLikelihood out;
    for (double a : pi_density) {
        double v = a / kPi;
        if (!(v >= kDensityFloor)) {
            v = kDensityFloor;
            ++out.floored;
        }
        out.value += std::log(v);
    }
    return out;
}

void check_floored(std::size_t floored, std::size_t n, bool strict, std::vector<std::string>& warnings) {
    if (static_cast<double>(floored) <= kFlooredShare * static_cast<double>(n)) return;
    std::string msg = std::to_string(floored) + " of " + std::to_string(n) +
                      " likelihood terms hit the density floor";
    if (strict) throw NumericalError(msg);
    warnings.push_back(msg);
}

// Column sums of F .* log(A), skipping F == 0; -inf if A == 0 where F > 0.
Eigen::VectorXd weighted_log(const Eigen::MatrixXd& F, const Eigen::MatrixXd& A) {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(F.cols());
    for (Eigen::Index r = 0; r < F.cols(); ++r)
        for (Eigen::Index l = 0; l < F.rows(); ++l) {
            double f = F(l, r);
            if (f == 0.0) continue;
            q(r) += A(l, r) > 0.0 ? f * std::log(A(l, r)) : -std::numeric_limits<double>::infinity();
        }
    return q;
}

struct EmState {
    MixtureParam param;
    std::vector<ComplexMatrix> C;
    Eigen::MatrixXd A;
    Eigen::VectorXd mix;  // pi * mixture density per sample
    LogLikelihood ll;
};

void evaluate(const Effects& fx, EmState& st) {
    fx.components(st.param.vectors, st.C, st.A);
    st.mix = st.A * st.param.weights;
    st.ll = sum_logs(st.mix);
}

// One GEM update from an evaluated state.
MixtureParam update(const Effects& fx, const EmState& st, int inner_steps, EmDiagnostics* diag) {
    const Eigen::Index n = static_cast<Eigen::Index>(fx.n());
    const int R = static_cast<int>(st.param.weights.size());
    // responsibilities f_{r,l} = p_r a_{r,l} / sum_s p_s a_{s,l}
    Eigen::MatrixXd F(n, R);
    for (Eigen::Index l = 0; l < n; ++l) {
        double m = st.mix(l);
        for (int r = 0; r < R; ++r)
            F(l, r) = m > 0.0 ? st.param.weights(r) * st.A(l, r) / m : st.param.weights(r);
    }
    MixtureParam next = st.param;
    Eigen::VectorXd s = F.colwise().sum().transpose();
    next.weights = s / static_cast<double>(n);
    next.weights /= next.weights.sum();

    std::vector<bool> active(R);
    for (int r = 0; r < R; ++r) {
        active[r] = s(r) > kFrozenMass;
        if (!active[r] && st.param.weights(r) > 0.0 && diag) ++diag->frozen_components;
    }

    ComplexMatrix V = st.param.vectors;
    std::vector<ComplexMatrix> C = st.C;
    Eigen::MatrixXd A = st.A;
    Eigen::VectorXd q = weighted_log(F, A);
    std::vector<ComplexMatrix> Ct;
    Eigen::MatrixXd At;
    for (int step = 0; step < inner_steps; ++step) {
        Eigen::MatrixXd W(n, R);
        for (Eigen::Index l = 0; l < n; ++l)
            for (int r = 0; r < R; ++r) W(l, r) = A(l, r) > 0.0 ? F(l, r) / A(l, r) : 0.0;
        ComplexMatrix G = fx.gradient(C, W);
        ComplexMatrix D(V.rows(), R);
        for (int r = 0; r < R; ++r) D.col(r) = active[r] ? ComplexVector(G.col(r) / s(r) - V.col(r)) : ComplexVector::Zero(V.rows());
        Eigen::VectorXd alpha = Eigen::VectorXd::Ones(R);
        std::vector<bool> pending = active;
        ComplexMatrix trial = V;
        bool moved = false;
        for (int h = 0; h <= kMaxHalvings; ++h) {
            bool any = false;
            for (int r = 0; r < R; ++r) {
                if (!pending[r]) continue;
                any = true;
                ComplexVector t = V.col(r) + alpha(r) * D.col(r);
                double norm = t.norm();
                trial.col(r) = norm > 0.0 ? ComplexVector(t / norm) : ComplexVector(V.col(r));
            }
            if (!any) break;
            fx.components(trial, Ct, At);
            Eigen::VectorXd qt = weighted_log(F, At);
            for (int r = 0; r < R; ++r) {
                if (!pending[r]) continue;
                if (qt(r) >= q(r)) {
                    pending[r] = false;
                    moved = true;
                    q(r) = qt(r);
                } else {
                    alpha(r) *= 0.5;
                    if (h == kMaxHalvings) {
                        pending[r] = false;
                        trial.col(r) = V.col(r);
                    }
                }
            }
        }
        // trial now holds the accepted vectors, or the old ones where every step was rejected
        if (!moved) break;
        V = trial;
        fx.components(V, C, A);
    }
    next.vectors = V;
    return next;
}

MixtureParam pad_mixture(const MixtureParam& start, int N) {
    if (start.N > N) throw ParameterError("starting mixture larger than the sieve");
    start.validate();
    if (start.N == N) return start;
    constexpr double kNewMass = 1e-2;
    MixtureParam out;
    out.N = N;
    out.weights = Eigen::VectorXd::Zero(N);
    out.vectors = ComplexMatrix::Zero(N, N);
    const int added = N - start.N;
    out.weights.head(start.N) = start.weights * (1.0 - kNewMass);
    out.vectors.topLeftCorner(start.N, start.N) = start.vectors;
    for (int r = start.N; r < N; ++r) {
        out.weights(r) = kNewMass / added;
        out.vectors(r, r) = 1.0;
    }
    return out;
}

MixtureParam pilot_mixture(const SampleSet& data, int N) {
    if (data.eta < 1.0) throw ParameterError("pilot_estimate init needs ideal (eta = 1) data");
    constexpr double kWeightFloor = 1e-6;
    SampleSet half = data;
    half.samples.resize((data.size() + 1) / 2);
    DensityMatrix pilot = project_physical(estimate_pfp(half, N));
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(pilot.matrix());
    MixtureParam m;
    m.N = N;
    m.weights = es.eigenvalues().cwiseMax(kWeightFloor);
    m.weights /= m.weights.sum();
    m.vectors = es.eigenvectors();
    for (int r = 0; r < N; ++r) m.vectors.col(r).normalize();
    return m;
}

MixtureParam starting_mixture(const SampleSet& data, const SieveConfig& cfg) {
    if (cfg.init == SmlInit::pilot_estimate) return pilot_mixture(data, cfg.N);
    return MixtureParam::initial(cfg.N, cfg.init);
}

void check_config(const SieveConfig& cfg) {
    if (cfg.N < 1) throw ParameterError("sieve dimension N must be >= 1");
    if (!(cfg.tol > 0.0)) throw ParameterError("tol must be > 0");
    if (cfg.max_iter < 0) throw ParameterError("max_iter must be >= 0");
    if (cfg.inner_steps < 1) throw ParameterError("inner_steps must be >= 1");
}

bool small_change(double now, double before, double tol) {
    return std::abs(now - before) <= tol * std::max(std::abs(before), 1e-300);
}

ComplexMatrix clean_factor(ComplexMatrix T) {
    const Eigen::Index N = T.rows();
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) T(i, j) = 0.0;
        // a row phase leaves T^H T unchanged; make the diagonal real non-negative
        Complex d = T(i, i);
        if (std::abs(d) > 0.0) T.row(i) *= std::conj(d) / std::abs(d);
        T(i, i) = std::abs(T(i, i));
    }
    return T / T.norm();
}

} // namespace

DensityMatrix MixtureParam::assemble() const {
    validate();
    ComplexMatrix rho = vectors * weights.cast<Complex>().asDiagonal() * vectors.adjoint();
    return DensityMatrix(ComplexMatrix((rho + rho.adjoint()) * 0.5));
}

void MixtureParam::validate() const {
    if (N < 1 || weights.size() != N || vectors.rows() != N || vectors.cols() != N)
        throw ContractViolation("MixtureParam: shapes must be N weights and N x N vectors");
    if ((weights.array() < 0.0).any()) throw ContractViolation("MixtureParam: negative weight");
    if (std::abs(weights.sum() - 1.0) > 1e-12) throw ContractViolation("MixtureParam: weights must sum to 1");
    for (int r = 0; r < N; ++r)
        if (std::abs(vectors.col(r).norm() - 1.0) > 1e-12) throw ContractViolation("MixtureParam: vectors must be unit norm");
}

MixtureParam MixtureParam::initial(int N, SmlInit init) {
    if (N < 1) throw ParameterError("sieve dimension N must be >= 1");
    MixtureParam m;
    m.N = N;
    m.vectors = ComplexMatrix::Identity(N, N);
    switch (init) {
    case SmlInit::one_photon_like:
        m.weights = Eigen::VectorXd::Zero(N);
        m.weights(0) = 1.0;
        break;
    case SmlInit::chaotic:
        m.weights = Eigen::VectorXd::Constant(N, 1.0 / N);
        break;
    case SmlInit::pilot_estimate:
        throw ParameterError("pilot_estimate init needs data");
    }
    return m;
}

DensityMatrix CholeskyFactor::assemble() const {
    ComplexMatrix rho = T.adjoint() * T;
    return DensityMatrix(ComplexMatrix((rho + rho.adjoint()) * 0.5));
}

CholeskyFactor CholeskyFactor::from_density(const DensityMatrix& rho) {
    // rho = B^H B with B = Lambda^{1/2} V^H; B = Q R gives rho = R^H R.
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho.matrix());
    Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    ComplexMatrix B = root.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
    Eigen::HouseholderQR<ComplexMatrix> qr(B);
    ComplexMatrix R = qr.matrixQR().triangularView<Eigen::Upper>();
    return {clean_factor(R)};
}

LogLikelihood loglik(const MixtureParam& param, const SampleSet& data) {
    param.validate();
    Effects fx(data, param.N);
    std::vector<ComplexMatrix> C;
    Eigen::MatrixXd A;
    fx.components(param.vectors, C, A);
    return sum_logs(A * param.weights);
}

LogLikelihood loglik(const CholeskyFactor& factor, const SampleSet& data) {
    Effects fx(data, factor.N());
    ComplexMatrix T = factor.T / factor.T.norm();
    return sum_logs(fx.matrix_values(T.adjoint() * T));
}

LogLikelihood loglik(const RawMatrix& rho, const SampleSet& data) {
    Effects fx(data, rho.dim());
    return sum_logs(fx.matrix_values(rho.matrix()));
}

MixtureParam em_step(const MixtureParam& param, const SampleSet& data, int inner_steps, EmDiagnostics* diagnostics) {
    param.validate();
    if (inner_steps < 1) throw ParameterError("inner_steps must be >= 1");
    Effects fx(data, param.N);
    EmState st{param, {}, {}, {}, {}};
    evaluate(fx, st);
    return update(fx, st, inner_steps, diagnostics);
}

SmlFit estimate_sml_from(const SampleSet& data, const SieveConfig& cfg, const MixtureParam& start) {
    check_config(cfg);
    Effects fx(data, cfg.N);
    EmState st{pad_mixture(start, cfg.N), {}, {}, {}, {}};
    evaluate(fx, st);
    SmlFit fit;
    fit.loglik_trace.push_back(st.ll.value);
    EmDiagnostics diag;
    for (int it = 0; it < cfg.max_iter; ++it) {
        EmState next{update(fx, st, cfg.inner_steps, &diag), {}, {}, {}, {}};
        evaluate(fx, next);
        fit.loglik_trace.push_back(next.ll.value);
        fit.iters = it + 1;
        bool done = small_change(next.ll.value, st.ll.value, cfg.tol);
        st = std::move(next);
        if (done) {
            fit.converged = true;
            break;
        }
    }
    fit.floored = st.ll.floored;
    fit.frozen_components = diag.frozen_components;
    if (diag.frozen_components > 0)
        fit.warnings.push_back(std::to_string(diag.frozen_components) + " component updates frozen (vanishing responsibilities)");
    check_floored(fit.floored, fx.n(), cfg.strict, fit.warnings);
    fit.mixture = st.param;
    fit.rho = st.param.assemble();
    return fit;
}

SmlFit estimate_sml(const SampleSet& data, const SieveConfig& cfg) {
    check_config(cfg);
    return estimate_sml_from(data, cfg, starting_mixture(data, cfg));
}

SmlFit estimate_sml_cholesky(const SampleSet& data, const SieveConfig& cfg) {
    check_config(cfg);
    constexpr double kMixing = 1e-3;
    Effects fx(data, cfg.N);
    const double n = static_cast<double>(fx.n());
    ComplexMatrix start = (1.0 - kMixing) * starting_mixture(data, cfg).assemble().matrix() +
                          (kMixing / cfg.N) * ComplexMatrix::Identity(cfg.N, cfg.N);
    ComplexMatrix T = CholeskyFactor::from_density(DensityMatrix(start)).T;

    auto objective = [&](const ComplexMatrix& t, Eigen::VectorXd& values) {
        values = fx.matrix_values(t.adjoint() * t);
        return sum_logs(values);
    };
    Eigen::VectorXd values;
    LogLikelihood ll = objective(T, values);
    SmlFit fit;
    fit.loglik_trace.push_back(ll.value);
    double alpha = 1.0 / n;
    for (int it = 0; it < cfg.max_iter; ++it) {
        // d/d conj(T) of sum log |T u|^2 - n log |T|_F^2 at |T|_F = 1
        Eigen::VectorXd w = values.cwiseMax(kDensityFloor).cwiseInverse();
        ComplexMatrix G = T * fx.weighted_outer(w) - n * T;
        for (Eigen::Index i = 0; i < G.rows(); ++i) {
            for (Eigen::Index j = 0; j < i; ++j) G(i, j) = 0.0;
            G(i, i) = G(i, i).real();
        }
        bool accepted = false;
        for (int h = 0; h <= kMaxHalvings; ++h) {
            ComplexMatrix trial = T + alpha * G;
            trial /= trial.norm();
            Eigen::VectorXd tv;
            LogLikelihood tl = objective(trial, tv);
            if (tl.value >= ll.value) {
                T = trial;
                values = std::move(tv);
                bool done = small_change(tl.value, ll.value, cfg.tol);
                ll = tl;
                accepted = true;
                alpha *= 2.0;
                fit.loglik_trace.push_back(ll.value);
                fit.iters = it + 1;
                if (done) fit.converged = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            fit.converged = true;  // no ascent direction left at this precision
            break;
        }
        if (fit.converged) break;
    }
    fit.floored = ll.floored;
    check_floored(fit.floored, fx.n(), cfg.strict, fit.warnings);
    fit.rho = CholeskyFactor{clean_factor(T)}.assemble();
    return fit;
}

std::string to_string(SmlInit init) {
    switch (init) {
    case SmlInit::one_photon_like: return "one_photon_like";
    case SmlInit::chaotic: return "chaotic";
    case SmlInit::pilot_estimate: return "pilot_estimate";
    }
    return "chaotic";
}

SmlInit sml_init_from_string(const std::string& name) {
    if (name == "one_photon_like") return SmlInit::one_photon_like;
    if (name == "chaotic") return SmlInit::chaotic;
    if (name == "pilot_estimate" || name == "pilot") return SmlInit::pilot_estimate;
    throw ParameterError("unknown SML init '" + name + "' (one_photon_like, chaotic, pilot_estimate)");
}

} // namespace tomolab
