#include "tomolab/homodyne.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "tomolab/errors.hpp"
#include "tomolab/oscillator_basis.hpp"
#include "tomolab/parallel.hpp"

namespace tomolab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::size_t kCdfNodes = 4096;

void check_eta(double eta) {
    if (!(eta > 0.0 && eta <= 1.0)) throw ParameterError("efficiency must satisfy 0 < eta <= 1");
}

// p(x, phi) from the diagonals g_d(x): (1/pi)[g_0 + 2 Re sum_{d>0} e^{-i d phi} g_d].
double combine(const std::vector<Complex>& g, double phi) {
    double s = g[0].real();
    for (std::size_t d = 1; d < g.size(); ++d) {
        double a = static_cast<double>(d) * phi;
        s += 2.0 * (std::cos(a) * g[d].real() + std::sin(a) * g[d].imag());
    }
    return s / kPi;
}

// Grid inverse CDF of X given Phi for a fixed state.
class ConditionalSampler {
public:
    explicit ConditionalSampler(const DensityMatrix& rho) : dim_(rho.dim()) {
        HomodyneDensity density(rho);
        half_width_ = density.support_half_width();
        step_ = 2.0 * half_width_ / static_cast<double>(kCdfNodes - 1);
        cumulative_.assign(kCdfNodes * dim_, Complex(0.0));
        std::vector<Complex> prev(dim_), cur(dim_);
        density.diagonals(node(0), prev);
        for (std::size_t i = 1; i < kCdfNodes; ++i) {
            density.diagonals(node(i), cur);
            for (int d = 0; d < dim_; ++d)
                cumulative_[i * dim_ + d] = cumulative_[(i - 1) * dim_ + d] + 0.5 * step_ * (prev[d] + cur[d]);
            std::swap(prev, cur);
        }
    }

    double draw(double phi, double u, std::vector<Complex>& phase) const {
        for (int d = 0; d < dim_; ++d) phase[d] = std::polar(d == 0 ? 1.0 : 2.0, -d * phi);
        double target = u * cdf(kCdfNodes - 1, phase);
        std::size_t lo = 0, hi = kCdfNodes - 1;  // cdf(lo) < target <= cdf(hi)
        if (target <= cdf(0, phase)) return node(0);
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            if (cdf(mid, phase) < target) lo = mid; else hi = mid;
        }
        double c_lo = cdf(lo, phase), c_hi = cdf(hi, phase);
        double frac = c_hi > c_lo ? (target - c_lo) / (c_hi - c_lo) : 0.5;
        return node(lo) + std::clamp(frac, 0.0, 1.0) * step_;
    }

    int dim() const { return dim_; }

private:
    double node(std::size_t i) const { return -half_width_ + static_cast<double>(i) * step_; }
    double cdf(std::size_t i, const std::vector<Complex>& phase) const {
        const Complex* row = &cumulative_[i * dim_];
        double s = 0.0;
        for (int d = 0; d < dim_; ++d) s += (phase[d] * row[d]).real();
        return s;
    }

    int dim_;
    double half_width_ = 0.0;
    double step_ = 0.0;
    std::vector<Complex> cumulative_;  // [i * dim + d] -> int_{-w}^{x_i} g_d
};

} // namespace

HomodyneDensity::HomodyneDensity(const RawMatrix& rho) : rho_(rho.matrix()), mean_photons_(rho.mean_photons()) {
    if (rho.dim() < 1) throw ParameterError("density needs a matrix of dim >= 1");
}

void HomodyneDensity::diagonals(double x, std::vector<Complex>& g) const {
    const int n = dim();
    std::vector<double> psi = basis::psi_all(n, x);
    g.assign(n, Complex(0.0));
    for (int d = 0; d < n; ++d)
        for (int k = 0; k + d < n; ++k) g[d] += rho_(k + d, k) * (psi[k + d] * psi[k]);
}

double HomodyneDensity::operator()(double x, double phi) const {
    std::vector<Complex> g;
    diagonals(x, g);
    return combine(g, phi);
}

double HomodyneDensity::support_half_width() const {
    return 6.0 + 2.0 * std::sqrt(2.0 * std::max(0.0, mean_photons_) + 1.0);
}

double density(const DensityMatrix& rho, double x, double phi) {
    const int n = rho.dim();
    std::vector<double> psi = basis::psi_all(n, x);
    ComplexVector u(n);
    for (int j = 0; j < n; ++j) u(j) = std::polar(psi[j], j * phi);
    Complex s = u.dot(rho.matrix() * u);  // u^H rho u
    if (std::abs(s.imag()) > 1e-10) throw NumericalError("density: imaginary residue above 1e-10");
    double value = s.real() / kPi;
    if (value < -1e-9) throw NumericalError("unphysical state: negative density");
    return std::max(0.0, value);
}

double noisy_density(const DensityMatrix& rho, double y, double phi, double eta) {
    check_eta(eta);
    if (eta == 1.0) return density(rho, y, phi);
    return density(bernoulli_transform(rho, eta), y, phi);
}

SampleSet sample(const DensityMatrix& rho, std::size_t n, double eta, std::uint64_t seed,
                 const std::string& state_label) {
    if (n < 1) throw ParameterError("sample size must be >= 1");
    check_eta(eta);
    ConditionalSampler sampler(rho);
    SampleSet out;
    out.samples.resize(n);
    out.eta = eta;
    out.seed = seed;
    out.state_label = state_label;
    const double signal = std::sqrt(eta);
    const double noise = std::sqrt((1.0 - eta) / 2.0);
    parallel_blocks(block_count(n, kSampleBlock), [&](std::size_t b) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
        std::mt19937_64 gen(seq);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<Complex> phase(sampler.dim());
        auto range = block_range(b, n, kSampleBlock);
        for (std::size_t i = range.begin; i < range.end; ++i) {
            double phi = kPi * unit(gen);
            double x = sampler.draw(phi, unit(gen), phase);
            if (eta < 1.0) x = signal * x + noise * gauss(gen);
            out.samples[i] = {x, phi};
        }
    });
    return out;
}

GridDensity grid_density(const RawMatrix& rho) {
    auto model = std::make_shared<HomodyneDensity>(rho);
    return [model](const std::vector<double>& xs, const std::vector<double>& phis, Eigen::MatrixXd& out) {
        out.resize(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(phis.size()));
        const int dim = model->dim();
        // cos/sin(d phi) per column, shared by all rows
        Eigen::MatrixXd c(dim, phis.size()), s(dim, phis.size());
        for (std::size_t j = 0; j < phis.size(); ++j)
            for (int d = 0; d < dim; ++d) {
                c(d, j) = (d == 0 ? 1.0 : 2.0) * std::cos(d * phis[j]) / kPi;
                s(d, j) = (d == 0 ? 0.0 : 2.0) * std::sin(d * phis[j]) / kPi;
            }
        parallel_blocks(block_count(xs.size(), 64), [&](std::size_t b) {
            std::vector<Complex> g;
            Eigen::RowVectorXd re(dim), im(dim);
            auto range = block_range(b, xs.size(), 64);
            for (std::size_t i = range.begin; i < range.end; ++i) {
                model->diagonals(xs[i], g);
                for (int d = 0; d < dim; ++d) {
                    re(d) = g[d].real();
                    im(d) = g[d].imag();
                }
                out.row(static_cast<Eigen::Index>(i)) = re * c + im * s;
            }
        });
    };
}

GridDensity grid_density(std::function<double(double, double)> pointwise) {
    return [f = std::move(pointwise)](const std::vector<double>& xs, const std::vector<double>& phis,
                                      Eigen::MatrixXd& out) {
        out.resize(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(phis.size()));
        for (std::size_t i = 0; i < xs.size(); ++i)
            for (std::size_t j = 0; j < phis.size(); ++j) out(i, j) = f(xs[i], phis[j]);
    };
}

namespace {

Divergences divergences_on_grid(const GridDensity& p, const GridDensity& q, double w, int nx, int nphi) {
    std::vector<double> xs(nx), phis(nphi);
    const double hx = 2.0 * w / nx, hphi = kPi / nphi;
    for (int i = 0; i < nx; ++i) xs[i] = -w + (i + 0.5) * hx;
    for (int j = 0; j < nphi; ++j) phis[j] = (j + 0.5) * hphi;
    Eigen::MatrixXd pv, qv;
    p(xs, phis, pv);
    q(xs, phis, qv);
    double hel = 0.0, tv = 0.0, chi = 0.0, orphan = 0.0;
    for (Eigen::Index i = 0; i < pv.rows(); ++i)
        for (Eigen::Index j = 0; j < pv.cols(); ++j) {
            double a = std::max(0.0, pv(i, j)), b = std::max(0.0, qv(i, j));
            double r = std::sqrt(a) - std::sqrt(b);
            hel += r * r;
            tv += std::abs(a - b);
            if (b < 1e-300) orphan += a;
            else chi += (a - b) * (a - b) / b;
        }
    const double cell = hx * hphi;
    Divergences out;
    out.hellinger = std::sqrt(hel * cell);
    out.total_variation = 0.5 * tv * cell;
    out.chi_squared = orphan * cell > 1e-12 ? std::numeric_limits<double>::infinity() : chi * cell;
    out.grid_x = nx;
    out.grid_phi = nphi;
    return out;
}

double relative_change(double a, double b) {
    if (std::isinf(a) && std::isinf(b)) return 0.0;
    if (std::isinf(a) || std::isinf(b)) return std::numeric_limits<double>::infinity();
    return std::abs(a - b) / std::max(std::abs(a), 1e-12);
}

} // namespace

Divergences divergences(const GridDensity& p, const GridDensity& q, const DivergenceOptions& opts) {
    if (opts.start_x < 1 || opts.start_phi < 1 || opts.x_half_width <= 0.0)
        throw ParameterError("divergences: invalid grid options");
    int nx = opts.start_x, nphi = opts.start_phi;
    Divergences prev = divergences_on_grid(p, q, opts.x_half_width, nx, nphi);
    double achieved = std::numeric_limits<double>::infinity();
    while (nx * 2 <= opts.max_x) {
        nx *= 2;
        if (nphi * 2 <= opts.max_phi) nphi *= 2;
        Divergences cur = divergences_on_grid(p, q, opts.x_half_width, nx, nphi);
        achieved = std::max({relative_change(cur.hellinger, prev.hellinger),
                             relative_change(cur.total_variation, prev.total_variation),
                             relative_change(cur.chi_squared, prev.chi_squared)});
        cur.achieved_tolerance = achieved;
        prev = cur;
        if (achieved < opts.rel_tol) return cur;
    }
    std::ostringstream os;
    os << "divergence quadrature did not converge: achieved relative tolerance " << achieved;
    throw NumericalError(os.str());
}

Divergences divergences(const RawMatrix& rho, const RawMatrix& tau) {
    DivergenceOptions opts;
    opts.x_half_width = std::max(HomodyneDensity(rho).support_half_width(), HomodyneDensity(tau).support_half_width());
    return divergences(grid_density(rho), grid_density(tau), opts);
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    std::filesystem::path p = csv;
    p += ".json";
    return p;
}

void write_samples(const std::filesystem::path& csv, const SampleSet& data, const nlohmann::json& extra) {
    std::ofstream out(csv);
    if (!out) throw ParameterError("cannot write " + csv.string());
    out.precision(17);
    out << "x,phi\n";
    for (const auto& s : data.samples) out << s.x << ',' << s.phi << '\n';
    nlohmann::json meta = extra;
    meta["n"] = data.size();
    meta["eta"] = data.eta;
    meta["seed"] = data.seed;
    meta["state_label"] = data.state_label;
    std::ofstream side(sidecar_path(csv));
    if (!side) throw ParameterError("cannot write " + sidecar_path(csv).string());
    side << meta.dump(2) << '\n';
}

SampleSet read_samples(const std::filesystem::path& csv) {
    std::ifstream in(csv);
    if (!in) throw ParameterError("cannot read " + csv.string());
    std::string line;
    if (!std::getline(in, line) || line.substr(0, 5) != "x,phi")
        throw ParameterError(csv.string() + ": expected header x,phi");
    SampleSet data;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        auto comma = line.find(',');
        try {
            if (comma == std::string::npos) throw std::invalid_argument("missing comma");
            double x = std::stod(line.substr(0, comma));
            double phi = std::stod(line.substr(comma + 1));
            if (!std::isfinite(x) || !(phi >= 0.0 && phi <= kPi)) throw std::invalid_argument("out of range");
            data.samples.push_back({x, phi});
        } catch (const std::exception&) {
            throw ParameterError(csv.string() + ": bad record on line " + std::to_string(lineno));
        }
    }
    std::ifstream side(sidecar_path(csv));
    if (side) {
        try {
            nlohmann::json meta = nlohmann::json::parse(side);
            data.eta = meta.value("eta", 1.0);
            data.seed = meta.value("seed", std::uint64_t{0});
            data.state_label = meta.value("state_label", std::string());
        } catch (const nlohmann::json::exception& e) {
            throw ParameterError(sidecar_path(csv).string() + ": " + e.what());
        }
        check_eta(data.eta);
    }
    return data;
}

} // namespace tomolab
