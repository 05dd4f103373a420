#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "test_support.hpp"
#include "tomolab/errors.hpp"
#include "tomolab/homodyne.hpp"
#include "tomolab/wigner.hpp"

using namespace tomolab;

namespace {

constexpr double kPi = std::numbers::pi;

double grid_l2_sq(const WignerGrid& a, const WignerGrid& b) {
    return (a.values - b.values).squaredNorm() * a.geometry.dq() * a.geometry.dp();
}

} // namespace

TEST_CASE("basis values at the origin") {
    CHECK(wigner_basis(0, 0, 0.0, 0.0).real() == doctest::Approx(1.0 / kPi).epsilon(1e-15));
    CHECK(wigner_basis(1, 1, 0.0, 0.0).real() == doctest::Approx(-1.0 / kPi).epsilon(1e-15));
    CHECK(wigner_basis(4, 4, 0.0, 0.0).real() == doctest::Approx(1.0 / kPi).epsilon(1e-14));
    CHECK(std::abs(wigner_basis(2, 0, 0.0, 0.0)) < 1e-15);
}

TEST_CASE("basis functions integrate to the trace of |a><b|") {
    auto g = GridGeometry::square(8.0, 256);
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b) {
            Complex s = 0.0;
            for (int i = 0; i < g.nq; ++i)
                for (int j = 0; j < g.np; ++j) s += wigner_basis(a, b, g.q(i), g.p(j));
            s *= g.dq() * g.dp();
            CHECK(std::abs(s - (a == b ? 1.0 : 0.0)) < 1e-6);
        }
    CHECK(wigner_basis(3, 1, 0.4, -0.9) == std::conj(wigner_basis(1, 3, 0.4, -0.9)));
    CHECK_THROWS_AS(wigner_basis(-1, 0, 0.0, 0.0), ParameterError);
}

TEST_CASE("closed forms for reference states") {
    auto g = GridGeometry::square(5.0, 64);
    auto check = [&](const StateSpec& spec, int dim, auto closed) {
        auto w = wigner_of_state(make_state(spec, dim).rho, g);
        double worst = 0.0;
        for (int i = 0; i < g.nq; ++i)
            for (int j = 0; j < g.np; ++j) worst = std::max(worst, std::abs(w.values(i, j) - closed(g.q(i), g.p(j))));
        CHECK(worst < 1e-6);
    };
    check(StateSpec::vacuum(), 1, [](double q, double p) { return std::exp(-q * q - p * p) / kPi; });
    check(StateSpec::fock(1), 2,
          [](double q, double p) { return (2 * q * q + 2 * p * p - 1) * std::exp(-q * q - p * p) / kPi; });
    const double beta = 0.9, t = std::tanh(beta / 2);
    check(StateSpec::thermal(beta), 80, [t](double q, double p) { return t * std::exp(-t * (q * q + p * p)) / kPi; });
    const double N = 1.0;
    check(StateSpec::coherent(N), 40, [N](double q, double p) {
        double d = q - std::sqrt(2 * N);
        return std::exp(-d * d - p * p) / kPi;
    });
    const double Ns = 1.2, xi = 0.4, a = std::sqrt(Ns - std::sinh(xi) * std::sinh(xi));
    check(StateSpec::squeezed(Ns, xi), 60, [a, xi](double q, double p) {
        double d = q - std::sqrt(2.0) * a;
        return std::exp(-std::exp(2 * xi) * d * d - std::exp(-2 * xi) * p * p) / kPi;
    });
}

TEST_CASE("coherent peak and squeezed aspect ratio") {
    GridGeometry g;
    auto w = wigner_of_state(make_state(StateSpec::coherent(1.0), 30).rho, g);
    Eigen::Index i, j;
    w.values.maxCoeff(&i, &j);
    CHECK(std::abs(g.q(static_cast<int>(i)) - std::sqrt(2.0)) <= g.dq());
    CHECK(std::abs(g.p(static_cast<int>(j))) <= g.dp());

    const double xi = 0.4;
    auto s = wigner_of_state(make_state(StateSpec::squeezed(std::sinh(xi) * std::sinh(xi), xi), 40).rho, g);
    // half-maximum widths along q and p through the centre
    const double peak = s.values.maxCoeff();
    auto width = [&](bool along_q) {
        int count = 0;
        for (int k = 0; k < g.nq; ++k) {
            double v = along_q ? s.values(k, g.np / 2) : s.values(g.nq / 2, k);
            if (v > peak / 2) ++count;
        }
        return count * g.dq();
    };
    CHECK(width(false) / width(true) == doctest::Approx(std::exp(2 * xi)).epsilon(0.1));
}

TEST_CASE("normalization and uniform bound") {
    std::mt19937_64 gen(3);
    GridGeometry g = GridGeometry::square(7.0, 200);
    for (int k = 0; k < 5; ++k) {
        auto rho = test_support::random_state(6, gen);
        auto w = wigner_of_state(rho, g);
        CHECK(w.integral() == doctest::Approx(1.0).epsilon(0.01));
        CHECK(w.max_abs() <= 1.0 / kPi + 0.01);
    }
    CHECK(wigner_of_state(make_state(StateSpec::fock(5), 6).rho, g).max_abs() <= 1.0 / kPi + 0.01);
}

TEST_CASE("plug-in estimate is wigner_of_state of the matrix") {
    std::mt19937_64 gen(4);
    auto rho = test_support::random_state(4, gen);
    GridGeometry g = GridGeometry::square(5.0, 32);
    CHECK((plugin_estimate(rho, g).values - wigner_of_state(rho, g).values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("isometry and sup-norm bound") {
    std::mt19937_64 gen(5);
    GridGeometry g = GridGeometry::square(8.0, 256);
    for (int k = 0; k < 5; ++k) {
        auto a = test_support::random_state(5, gen), b = test_support::random_state(5, gen);
        auto wa = wigner_of_state(a, g), wb = wigner_of_state(b, g);
        double fro = distance(a, b, Norm::frobenius);
        CHECK(grid_l2_sq(wa, wb) == doctest::Approx(fro * fro / (2 * kPi)).epsilon(1e-3));
        CHECK((wa.values - wb.values).cwiseAbs().maxCoeff() <= distance(a, b, Norm::trace) / kPi + 1e-12);
    }
}

TEST_CASE("Radon transform of the vacuum") {
    auto w = wigner_of_state(make_state(StateSpec::vacuum(), 1).rho);
    for (double phi : {0.0, 0.7, 2.0})
        for (double x : {-1.5, 0.0, 0.8}) CHECK(radon(w, x, phi) == doctest::Approx(std::exp(-x * x) / std::sqrt(kPi)).epsilon(1e-3));
    double total = 0.0;
    for (double x = -6.0; x < 6.0; x += 0.01) total += radon(w, x, 1.1) * 0.01;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("Radon link: line integrals are pi times the joint density") {
    std::mt19937_64 gen(6);
    auto rho = test_support::random_concentrated_state(6, 0.5, gen);
    auto w = wigner_of_state(rho, GridGeometry::square(7.0, 256));
    for (double phi : {0.2, 1.3, 2.9})
        for (double x : {-1.2, 0.0, 0.9, 2.1}) {
            double r = radon(w, x, phi);
            CHECK(std::abs(r - kPi * density(rho, x, phi)) < 1e-3);
            CHECK(std::abs(r / kPi - density(rho, x, phi)) < 1e-3 / kPi);
        }
    auto f = wigner_of_state(make_state(StateSpec::fock(2), 3).rho);
    for (double x : {0.3, 1.4}) CHECK(std::abs(radon(f, x, 0.1) - radon(f, x, 1.9)) < 1e-4);
}

TEST_CASE("Radon warns when the grid border carries mass") {
    auto w = wigner_of_state(make_state(StateSpec::coherent(9.0), 40).rho, GridGeometry::square(4.0, 64));
    std::optional<std::string> warning;
    radon(w, 0.0, 0.0, &warning);
    CHECK(warning.has_value());
    auto v = wigner_of_state(make_state(StateSpec::vacuum(), 1).rho);
    radon(v, 0.0, 0.0, &warning);
    CHECK_FALSE(warning.has_value());
}

TEST_CASE("kernel matches a quadrature of its defining integral") {
    for (double c : {1.0, 4.0})
        for (double x : {0.0, 0.1, 0.249, 0.251, 1.0, 3.7}) {
            // (1/2) int_{-c}^{c} |xi| cos(xi x) d xi by Simpson's rule
            const int m = 20000;
            const double h = c / m;
            double s = 0.0;
            for (int i = 0; i <= m; ++i) {
                double xi = i * h;
                double wgt = (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0);
                s += wgt * xi * std::cos(xi * x);
            }
            s *= h / 3.0;
            CHECK(kernel(c, x) == doctest::Approx(s).epsilon(1e-9).scale(1e-6));
            CHECK(kernel(c, -x) == kernel(c, x));
        }
    CHECK(kernel(4.0, 0.0) == 8.0);
    CHECK_THROWS_AS(kernel(0.0, 1.0), ParameterError);
}

TEST_CASE("kernel estimate equals the direct average of kernels") {
    auto data = sample(make_state(StateSpec::coherent(0.7), 20).rho, 300, 1.0, 7);
    GridGeometry g = GridGeometry::square(4.0, 24);
    auto est = kernel_estimate(data, 3.0, g);
    for (int i = 0; i < g.nq; i += 5)
        for (int j = 0; j < g.np; j += 3) {
            double s = 0.0;
            for (auto smp : data.samples) s += kernel(3.0, g.q(i) * std::cos(smp.phi) + g.p(j) * std::sin(smp.phi) - smp.x);
            CHECK(est.values(i, j) == doctest::Approx(s / (2 * kPi * data.size())).epsilon(1e-10).scale(1e-8));
        }
    auto lossy = sample(make_state(StateSpec::vacuum(), 1).rho, 10, 0.9, 1);
    CHECK_THROWS_AS(kernel_estimate(lossy, 3.0, g), ParameterError);
    CHECK_THROWS_AS(kernel_estimate(data, -1.0, g), ParameterError);
}

TEST_CASE("kernel estimate of the vacuum from 1e5 samples") {
    auto vac = make_state(StateSpec::vacuum(), 1).rho;
    auto data = sample(vac, 100000, 1.0, 8);
    GridGeometry g = GridGeometry::square(5.0, 100);
    auto est = kernel_estimate(data, 4.0, g);
    CHECK(std::sqrt(grid_l2_sq(est, wigner_of_state(vac, g))) < 0.05);
}

TEST_CASE("grid files round trip") {
    auto dir = std::filesystem::temp_directory_path() / ("tomolab_wigner_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(dir);
    GridGeometry g{-3.0, 3.5, -2.0, 2.0, 12, 9};
    auto w = wigner_of_state(make_state(StateSpec::fock(1), 2).rho, g);
    write_wigner_csv(dir / "w.csv", w);
    auto back = read_wigner_csv(dir / "w.csv");
    CHECK(back.geometry.nq == 12);
    CHECK(back.geometry.np == 9);
    CHECK(back.geometry.q_max == 3.5);
    CHECK((back.values - w.values).cwiseAbs().maxCoeff() == 0.0);
    auto j = wigner_grid_from_json(to_json(w));
    CHECK((j.values - w.values).cwiseAbs().maxCoeff() == 0.0);
    CHECK(j.geometry.p_min == -2.0);
    {
        std::ofstream out(dir / "bad.csv");
        out << "# -1 1 2\n# -1 1 2\n0.1,0.2\n";
    }
    CHECK_THROWS_AS(read_wigner_csv(dir / "bad.csv"), ParameterError);
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS((GridGeometry{1.0, -1.0, -1.0, 1.0, 4, 4}.validate()), ParameterError);
}
