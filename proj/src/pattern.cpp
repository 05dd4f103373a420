#include "tomolab/pattern.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tomolab/errors.hpp"
#include "tomolab/parallel.hpp"

namespace tomolab {

namespace {

constexpr std::size_t kReductionBlock = 1024;

int tail_power(int k, int j) { return 2 + std::abs(k - j); }

double tail_value(int k, int j, double amplitude, double x) {
    double v = amplitude * std::pow(std::abs(x), -tail_power(k, j));
    return (x < 0 && (k + j) % 2 == 1) ? -v : v;
}

// Three-term sum; lo carries psi, hi carries phi.
double three_term(int lo, int hi, double x) {
    std::vector<double> ps = basis::psi_all(lo + 2, x);
    double f_hi = basis::phi(hi, x), f_hi1 = basis::phi(hi + 1, x);
    return 2.0 * x * ps[lo] * f_hi - std::sqrt(2.0 * (lo + 1)) * ps[lo + 1] * f_hi -
           std::sqrt(2.0 * (hi + 1)) * ps[lo] * f_hi1;
}

void check_pair(int k, int j) {
    if (k < 0 || j < 0) throw ParameterError("pattern indices must be non-negative");
    if (std::max(k, j) + 1 > basis::kDefaultIndexCap)
        throw ParameterError("basis index overflow: " + std::to_string(std::max(k, j) + 1));
}

int checked_dim(int dim) {
    if (dim < 1) throw ParameterError("pattern dimension must be >= 1");
    check_pair(dim - 1, dim - 1);
    return dim;
}

struct PatternSums {
    int N = 0;
    std::size_t n = 0;
    ComplexMatrix sum;      // sum_l F_{k,j}, upper triangle filled
    Eigen::MatrixXd sum_sq;  // sum_l f_{k,j}^2
};

PatternSums accumulate(const SampleSet& data, int N, bool squares) {
    if (N < 1) throw ParameterError("truncation dimension N must be >= 1");
    if (data.eta < 1.0)
        throw ParameterError("efficiency-corrected pattern functions out of scope; use SML with noise model");
    const std::size_t n = data.size();
    if (n < 1) throw ParameterError("empty sample set");
    PatternEvaluator eval(N);
    const std::size_t blocks = block_count(n, kReductionBlock);
    std::vector<ComplexMatrix> part_sum(blocks);
    std::vector<Eigen::MatrixXd> part_sq(blocks);
    parallel_blocks(blocks, [&](std::size_t b) {
        ComplexMatrix s = ComplexMatrix::Zero(N, N);
        Eigen::MatrixXd q = Eigen::MatrixXd::Zero(squares ? N : 0, squares ? N : 0);
        Eigen::MatrixXd f;
        std::vector<Complex> phase(N);
        auto range = block_range(b, n, kReductionBlock);
        for (std::size_t l = range.begin; l < range.end; ++l) {
            const auto& smp = data.samples[l];
            eval.evaluate(smp.x, f);
            for (int d = 0; d < N; ++d) phase[d] = std::polar(1.0, -d * smp.phi);
            for (int k = 0; k < N; ++k)
                for (int j = k; j < N; ++j) s(k, j) += f(k, j) * phase[j - k];
            if (squares) q += f.cwiseAbs2();
        }
        part_sum[b] = std::move(s);
        part_sq[b] = std::move(q);
    });
    PatternSums out{N, n, ComplexMatrix::Zero(N, N), Eigen::MatrixXd::Zero(N, N)};
    for (std::size_t b = 0; b < blocks; ++b) {
        out.sum += part_sum[b];
        if (squares) out.sum_sq += part_sq[b];
    }
    return out;
}

ComplexMatrix hermitian_from_upper(const ComplexMatrix& upper, double scale) {
    const Eigen::Index N = upper.rows();
    ComplexMatrix m(N, N);
    for (Eigen::Index k = 0; k < N; ++k) {
        m(k, k) = Complex(upper(k, k).real() * scale, 0.0);
        for (Eigen::Index j = k + 1; j < N; ++j) {
            m(k, j) = upper(k, j) * scale;
            m(j, k) = std::conj(m(k, j));
        }
    }
    return m;
}

} // namespace

double pattern_window(int k, int j) { return basis::phi_window(std::max(k, j)); }

double pattern(int k, int j, double x) {
    check_pair(k, j);
    if (k > j) std::swap(k, j);
    const double w = pattern_window(k, j);
    if (std::abs(x) <= w) return three_term(k, j, x);
    double amplitude = three_term(k, j, w) * std::pow(w, tail_power(k, j));
    return tail_value(k, j, amplitude, x);
}

double pattern_swapped(int k, int j, double x) {
    check_pair(k, j);
    if (k > j) std::swap(k, j);
    return three_term(j, k, x);
}

PatternEvaluator::PatternEvaluator(int dim)
    : dim_(checked_dim(dim)), table_(dim + 1), window_(dim, dim), amplitude_(dim, dim) {
    std::vector<long double> psi(dim + 1), phi(dim + 1);
    Eigen::MatrixXd f;
    for (int m = 0; m < dim; ++m) {
        // pairs with max(k, j) == m share the window edge
        const double w = basis::phi_window(m);
        direct(w, f, psi, phi);
        for (int k = 0; k <= m; ++k) {
            window_(k, m) = window_(m, k) = w;
            amplitude_(k, m) = amplitude_(m, k) = f(k, m) * std::pow(w, tail_power(k, m));
        }
    }
}

void PatternEvaluator::direct(double x, Eigen::MatrixXd& out, std::vector<long double>& psi,
                              std::vector<long double>& phi) const {
    table_.evaluate(x, psi, phi);
    out.resize(dim_, dim_);
    const long double lx = x;
    for (int k = 0; k < dim_; ++k) {
        const long double ck = std::sqrt(2.0L * (k + 1));
        for (int j = k; j < dim_; ++j) {
            const long double cj = std::sqrt(2.0L * (j + 1));
            long double v = 2.0L * lx * psi[k] * phi[j] - ck * psi[k + 1] * phi[j] - cj * psi[k] * phi[j + 1];
            out(k, j) = out(j, k) = static_cast<double>(v);
        }
    }
}

void PatternEvaluator::evaluate(double x, Eigen::MatrixXd& out) const {
    const double ax = std::abs(x);
    if (ax <= basis::phi_window(0)) {
        std::vector<long double> psi(dim_ + 1), phi(dim_ + 1);
        direct(x, out, psi, phi);
        return;
    }
    out.resize(dim_, dim_);
    const bool any_direct = ax <= basis::phi_window(dim_ - 1);
    if (any_direct) {
        std::vector<long double> psi(dim_ + 1), phi(dim_ + 1);
        direct(x, out, psi, phi);
    }
    for (int k = 0; k < dim_; ++k)
        for (int j = k; j < dim_; ++j)
            if (ax > window_(k, j)) out(k, j) = out(j, k) = tail_value(k, j, amplitude_(k, j), x);
}

PatternTable PatternTable::build(int dim, double half_width, std::size_t nodes) {
    if (nodes < 2 || !(half_width > 0.0)) throw ParameterError("PatternTable needs >= 2 nodes and positive width");
    PatternEvaluator eval(dim);
    PatternTable t;
    t.dim = dim;
    t.grid.resize(nodes);
    t.values.resize(static_cast<std::size_t>(dim) * dim * nodes);
    const double h = 2.0 * half_width / static_cast<double>(nodes - 1);
    parallel_blocks(block_count(nodes, 64), [&](std::size_t b) {
        Eigen::MatrixXd f;
        auto range = block_range(b, nodes, 64);
        for (std::size_t i = range.begin; i < range.end; ++i) {
            double x = -half_width + static_cast<double>(i) * h;
            t.grid[i] = x;
            eval.evaluate(x, f);
            for (int k = 0; k < dim; ++k)
                for (int j = 0; j < dim; ++j) t.values[(static_cast<std::size_t>(k) * dim + j) * nodes + i] = f(k, j);
        }
    });
    t.tail_amplitudes.resize(dim, dim);
    t.tail_exponents.resize(dim, dim);
    for (int k = 0; k < dim; ++k)
        for (int j = 0; j < dim; ++j) t.tail_amplitudes(k, j) = eval.tail_amplitude(k, j);
    // least-squares slope of log|f| against log x on [0.9 W, W]
    constexpr int kFitPoints = 16;
    Eigen::MatrixXd f;
    std::vector<Eigen::MatrixXd> samples(kFitPoints);
    std::vector<double> logs(kFitPoints);
    for (int m = 0; m < dim; ++m) {
        const double w = basis::phi_window(m);
        for (int s = 0; s < kFitPoints; ++s) {
            double x = w * (0.9 + 0.1 * s / (kFitPoints - 1));
            logs[s] = std::log(x);
            eval.evaluate(x, samples[s]);
        }
        double mx = 0.0;
        for (double v : logs) mx += v / kFitPoints;
        for (int k = 0; k <= m; ++k) {
            double my = 0.0;
            for (int s = 0; s < kFitPoints; ++s) my += std::log(std::abs(samples[s](k, m))) / kFitPoints;
            double sxy = 0.0, sxx = 0.0;
            for (int s = 0; s < kFitPoints; ++s) {
                double dx = logs[s] - mx;
                sxy += dx * (std::log(std::abs(samples[s](k, m))) - my);
                sxx += dx * dx;
            }
            t.tail_exponents(k, m) = t.tail_exponents(m, k) = sxy / sxx;
        }
    }
    return t;
}

double PatternTable::operator()(int k, int j, double x) const {
    if (k < 0 || j < 0 || k >= dim || j >= dim) throw ParameterError("PatternTable index out of range");
    const std::size_t nodes = grid.size();
    if (x < grid.front() || x > grid.back()) return tail_value(k, j, tail_amplitudes(k, j), x);
    const double h = grid[1] - grid[0];
    std::size_t i = std::min(nodes - 2, static_cast<std::size_t>((x - grid.front()) / h));
    double frac = (x - grid[i]) / h;
    const double* row = &values[(static_cast<std::size_t>(k) * dim + j) * nodes];
    return row[i] + frac * (row[i + 1] - row[i]);
}

PatternNorms pattern_norms(int dim, double spacing) {
    if (!(spacing > 0.0)) throw ParameterError("spacing must be positive");
    PatternEvaluator eval(dim);
    const double end = basis::phi_window(dim - 1) + 1.0;
    const std::size_t nodes = static_cast<std::size_t>(std::ceil(end / spacing)) + 1;
    const double h = end / static_cast<double>(nodes - 1);
    const std::size_t blocks = block_count(nodes, 256);
    std::vector<Eigen::MatrixXd> sup(blocks), sq(blocks);
    parallel_blocks(blocks, [&](std::size_t b) {
        Eigen::MatrixXd f, s = Eigen::MatrixXd::Zero(dim, dim), q = Eigen::MatrixXd::Zero(dim, dim);
        auto range = block_range(b, nodes, 256);
        for (std::size_t i = range.begin; i < range.end; ++i) {
            eval.evaluate(static_cast<double>(i) * h, f);
            s = s.cwiseMax(f.cwiseAbs());
            double weight = (i == 0 || i + 1 == nodes) ? 0.5 * h : h;
            q += weight * f.cwiseAbs2();
        }
        sup[b] = std::move(s);
        sq[b] = std::move(q);
    });
    PatternNorms out{Eigen::MatrixXd::Zero(dim, dim), Eigen::MatrixXd::Zero(dim, dim)};
    for (std::size_t b = 0; b < blocks; ++b) {
        out.sup = out.sup.cwiseMax(sup[b]);
        out.l2 += sq[b];
    }
    for (int k = 0; k < dim; ++k)
        for (int j = 0; j < dim; ++j) {
            // int_end^inf (a x^{-p})^2 dx = a^2 end^{1-2p} / (2p - 1); even in x
            double a = eval.tail_amplitude(k, j);
            int p = tail_power(k, j);
            double tail = a * a * std::pow(end, 1 - 2 * p) / (2 * p - 1);
            out.l2(k, j) = std::sqrt(2.0 * (out.l2(k, j) + tail));
        }
    return out;
}

RawMatrix estimate_pfp(const SampleSet& data, int N) {
    PatternSums sums = accumulate(data, N, false);
    return RawMatrix(hermitian_from_upper(sums.sum, 1.0 / static_cast<double>(sums.n)));
}

CrossValidation cross_validate(const SampleSet& data, int N_max) {
    if (N_max < 1) throw ParameterError("N_max must be >= 1");
    if (data.size() < 2) throw ParameterError("cross-validation needs n >= 2");
    PatternSums sums = accumulate(data, N_max, true);
    const double n = static_cast<double>(sums.n);
    // contribution of pair (k, j); F_{j,k} = conj(F_{k,j}) so both halves match
    auto term = [&](int k, int j) {
        int a = std::min(k, j), b = std::max(k, j);
        double mean_sq = std::norm(sums.sum(a, b)) / (n * n);
        double unbiased = (std::norm(sums.sum(a, b)) - sums.sum_sq(a, b)) / (n * (n - 1.0));
        return mean_sq - 2.0 * unbiased;
    };
    CrossValidation out;
    out.risk_curve.resize(N_max);
    double acc = 0.0;
    for (int m = 0; m < N_max; ++m) {
        // shell max(k, j) == m
        acc += term(m, m);
        for (int k = 0; k < m; ++k) acc += 2.0 * term(k, m);
        out.risk_curve[m] = acc;
    }
    out.N_star = 1 + static_cast<int>(std::min_element(out.risk_curve.begin(), out.risk_curve.end()) -
                                      out.risk_curve.begin());
    return out;
}

MiseSplit mise_decomposition(const DensityMatrix& truth, const std::vector<RawMatrix>& estimates, int N) {
    if (estimates.size() < 2) throw ParameterError("mise_decomposition needs at least 2 estimates");
    if (N < 1) throw ParameterError("N must be >= 1");
    auto block = [N](const RawMatrix& m) {
        ComplexMatrix out = ComplexMatrix::Zero(N, N);
        int c = std::min(N, m.dim());
        out.topLeftCorner(c, c) = m.matrix().topLeftCorner(c, c);
        return out;
    };
    ComplexMatrix mean = ComplexMatrix::Zero(N, N);
    for (const auto& e : estimates) mean += block(e);
    mean /= static_cast<double>(estimates.size());
    MiseSplit out;
    for (int k = 0; k < truth.dim(); ++k)
        for (int j = 0; j < truth.dim(); ++j)
            if (std::max(k, j) >= N) out.bias2 += std::norm(truth(k, j));
    out.bias2 += (mean - block(truth)).squaredNorm();
    for (const auto& e : estimates) out.variance += (block(e) - mean).squaredNorm();
    out.variance /= static_cast<double>(estimates.size());
    return out;
}

} // namespace tomolab
