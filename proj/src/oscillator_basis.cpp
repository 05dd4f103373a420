#include "tomolab/oscillator_basis.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tomolab/errors.hpp"

namespace tomolab::basis {

namespace {

void check_index(int k, int index_cap) {
    if (k < 0) throw ParameterError("basis index must be non-negative");
    if (k > index_cap) throw ParameterError("basis index overflow: " + std::to_string(k));
}

void check_window(int k, double x) {
    if (!(std::abs(x) <= phi_window(k)))
        throw NumericalError("evaluation outside stable window: phi_" + std::to_string(k) +
                             " at x = " + std::to_string(x));
}

long double step_limit(long double x0, long double energy2) {
    long double scale = std::abs(x0) + std::sqrt(energy2);
    return std::min(0.0625L, 2.0L / (1.0L + scale));
}

// phi_k at x by integrating from the origin.
long double integrate_phi(int k, double x) {
    long double u, du;
    detail::phi_origin(k, u, du);
    const long double target = std::abs(static_cast<long double>(x));
    const long double energy2 = 2.0L * k + 1.0L;
    long double x0 = 0.0L;
    while (x0 < target) {
        long double t = std::min(step_limit(x0, energy2), target - x0);
        detail::taylor_step(x0, energy2, t, u, du);
        x0 += t;
    }
    if (x < 0 && (k % 2 == 0)) u = -u;  // parity (-1)^{k+1}
    return u;
}

} // namespace

double psi0_normalization() {
    static const double value = [] {
        // Trapezoid rule for a Gaussian converges to machine precision.
        const double h = 1.0 / 64;
        const int half = 40 * 64;
        long double sum = 0.0L;
        for (int i = -half; i <= half; ++i) {
            double x = i * h;
            sum += std::exp(-static_cast<long double>(x) * x);
        }
        return static_cast<double>(1.0L / std::sqrt(sum * h));
    }();
    return value;
}

double phi_window(int k) { return 12.0 + std::sqrt(2.0 * k); }

namespace detail {

void psi_recurrence(double x, std::span<long double> out) {
    if (out.empty()) return;
    const long double lx = x;
    out[0] = psi0_normalization() * std::exp(-lx * lx / 2.0L);
    if (out.size() > 1) out[1] = std::sqrt(2.0L) * lx * out[0];
    for (std::size_t k = 1; k + 1 < out.size(); ++k) {
        long double kk = static_cast<long double>(k);
        out[k + 1] = std::sqrt(2.0L / (kk + 1)) * lx * out[k] - std::sqrt(kk / (kk + 1)) * out[k - 1];
    }
}

void phi_origin(int k, long double& value, long double& slope) {
    // phi_0(0) = 0, phi_0'(0) = 2 / psi_0(0); phi_1(0) = -phi_0'(0)/sqrt 2 from the
    // ladder relation phi_k' = x phi_k - sqrt(2(k+1)) phi_{k+1}; at x = 0 the
    // three-term recurrence reduces to phi_{k+1}(0) = -sqrt(k/(k+1)) phi_{k-1}(0).
    const long double d0 = 2.0L / psi0_normalization();
    auto at_origin = [&](int m) -> long double {
        if (m % 2 == 0) return 0.0L;
        long double v = -d0 / std::sqrt(2.0L);  // phi_1(0)
        for (int i = 2; i < m; i += 2) v *= -std::sqrt(static_cast<long double>(i) / (i + 1));
        return v;
    };
    value = at_origin(k);
    slope = -std::sqrt(2.0L * (k + 1)) * at_origin(k + 1);
}

void taylor_step(long double x0, long double energy2, long double t, long double& u,
                 long double& du) {
    // u(x0 + t) = sum c_m t^m with
    // (m+2)(m+1) c_{m+2} = a c_m + b c_{m-1} + c_{m-2},  a = x0^2 - energy2, b = 2 x0
    const long double a = x0 * x0 - energy2;
    const long double b = 2.0L * x0;
    const long double eps = std::numeric_limits<long double>::epsilon() * 0.25L;
    long double c_m2 = 0.0L, c_m1 = 0.0L, c_m = u, c_p1 = du;  // c_{m-2}, c_{m-1}, c_m, c_{m+1}
    long double value = u + du * t;
    long double slope = du;
    long double tp = t;  // t^{m+1}
    int quiet = 0;
    for (int m = 0; m < 400; ++m) {
        long double c_p2 = (a * c_m + b * c_m1 + c_m2) / (static_cast<long double>(m + 2) * (m + 1));
        long double dterm = (m + 2) * c_p2 * tp;
        tp *= t;
        long double vterm = c_p2 * tp;
        value += vterm;
        slope += dterm;
        c_m2 = c_m1;
        c_m1 = c_m;
        c_m = c_p1;
        c_p1 = c_p2;
        bool small = std::abs(vterm) <= eps * std::abs(value) && std::abs(dterm) <= eps * std::abs(slope);
        quiet = small ? quiet + 1 : 0;
        if (quiet >= 3) break;
    }
    u = value;
    du = slope;
}

} // namespace detail

double psi(int k, double x, int index_cap) {
    check_index(k, index_cap);
    std::vector<long double> buf(static_cast<std::size_t>(k) + 1);
    detail::psi_recurrence(x, buf);
    return static_cast<double>(buf.back());
}

std::vector<double> psi_all(int k_max, double x, int index_cap) {
    if (k_max <= 0) return {};
    check_index(k_max - 1, index_cap);
    std::vector<long double> buf(static_cast<std::size_t>(k_max));
    detail::psi_recurrence(x, buf);
    return {buf.begin(), buf.end()};
}

double phi(int k, double x, int index_cap) {
    check_index(k, index_cap);
    check_window(k, x);
    return static_cast<double>(integrate_phi(k, x));
}

std::vector<double> phi_all(int k_max, double x, int index_cap) {
    std::vector<double> out;
    if (k_max <= 0) return out;
    check_index(k_max - 1, index_cap);
    check_window(0, x);  // the narrowest window of the batch
    out.reserve(static_cast<std::size_t>(k_max));
    for (int k = 0; k < k_max; ++k) out.push_back(static_cast<double>(integrate_phi(k, x)));
    return out;
}

BasisEvaluation evaluate(int k_max, double x, int index_cap) {
    return {k_max, x, psi_all(k_max, x, index_cap), phi_all(k_max, x, index_cap)};
}

BasisTable::BasisTable(int k_max, double spacing, int index_cap)
    : k_max_(k_max), spacing_(spacing) {
    if (k_max < 1) throw ParameterError("BasisTable needs k_max >= 1");
    check_index(k_max - 1, index_cap);
    if (!(spacing > 0.0 && spacing <= 0.25)) throw ParameterError("BasisTable spacing must be in (0, 1/4]");
    reach_ = phi_window(k_max) + 1.0;
    n_nodes_ = static_cast<std::size_t>(std::ceil(reach_ / spacing_)) + 2;
    value_.resize(static_cast<std::size_t>(k_max) * n_nodes_);
    slope_.resize(value_.size());
    for (int k = 0; k < k_max; ++k) {
        long double u, du;
        detail::phi_origin(k, u, du);
        const long double energy2 = 2.0L * k + 1.0L;
        std::size_t base = static_cast<std::size_t>(k) * n_nodes_;
        value_[base] = u;
        slope_[base] = du;
        for (std::size_t i = 1; i < n_nodes_; ++i) {
            long double x0 = static_cast<long double>(i - 1) * spacing_;
            // sub-steps keep the series short where |x| is large
            int sub = static_cast<int>(std::ceil(spacing_ / step_limit(x0 + spacing_, energy2)));
            long double t = static_cast<long double>(spacing_) / sub;
            for (int s = 0; s < sub; ++s) detail::taylor_step(x0 + s * t, energy2, t, u, du);
            value_[base + i] = u;
            slope_[base + i] = du;
        }
    }
}

void BasisTable::evaluate(double x, std::span<long double> psi_out,
                          std::span<long double> phi_out) const {
    const double ax = std::abs(x);
    if (!(ax <= reach_)) throw NumericalError("BasisTable: x outside tabulated reach");
    detail::psi_recurrence(x, psi_out.first(static_cast<std::size_t>(k_max_)));
    const std::size_t node = static_cast<std::size_t>(std::lround(ax / spacing_));
    const long double x0 = static_cast<long double>(node) * spacing_;
    const long double t = static_cast<long double>(ax) - x0;
    for (int k = 0; k < k_max_; ++k) {
        std::size_t idx = static_cast<std::size_t>(k) * n_nodes_ + node;
        long double u = value_[idx], du = slope_[idx];
        if (t != 0.0L) detail::taylor_step(x0, 2.0L * k + 1.0L, t, u, du);
        phi_out[static_cast<std::size_t>(k)] = (x < 0 && k % 2 == 0) ? -u : u;
    }
}

BasisEvaluation BasisTable::evaluate(double x) const {
    std::vector<long double> p(static_cast<std::size_t>(k_max_)), f(p.size());
    evaluate(x, p, f);
    BasisEvaluation out{k_max_, x, {}, {}};
    out.psi.assign(p.begin(), p.end());
    out.phi.assign(f.begin(), f.end());
    return out;
}

} // namespace tomolab::basis
