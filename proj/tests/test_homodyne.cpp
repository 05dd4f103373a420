#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "test_support.hpp"
#include "tomolab/errors.hpp"
#include "tomolab/homodyne.hpp"
#include "tomolab/oscillator_basis.hpp"

using namespace tomolab;

namespace {

constexpr double kPi = std::numbers::pi;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// P(X <= x) for a single photon: Phi(x sqrt 2) - x e^{-x^2} / sqrt(pi).
double fock1_cdf(double x) { return normal_cdf(x * std::sqrt(2.0)) - x * std::exp(-x * x) / std::sqrt(kPi); }

double ks_statistic(std::vector<double> xs, double (*cdf)(double)) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double f = cdf(xs[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

double integrate_joint(const RawMatrix& rho, double w = 12.0) {
    HomodyneDensity p(rho);
    const int nx = 1200, nphi = 64;
    const double hx = 2 * w / nx, hphi = kPi / nphi;
    double s = 0.0;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < nphi; ++j) s += p(-w + (i + 0.5) * hx, (j + 0.5) * hphi);
    return s * hx * hphi;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() / ("tomolab_test_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

} // namespace

TEST_CASE("vacuum density at the origin is pi^(-3/2)") {
    auto v = make_state(StateSpec::vacuum(), 1).rho;
    CHECK(density(v, 0.0, 0.3) == doctest::Approx(std::pow(kPi, -1.5)).epsilon(1e-14));
}

TEST_CASE("density equals (1/pi) u^H rho u with u_j = psi_j e^{i j phi}") {
    std::mt19937_64 gen(1);
    auto rho = test_support::random_state(6, gen);
    for (double x : {-1.7, 0.2, 2.4})
        for (double phi : {0.0, 0.9, 2.8}) {
            ComplexVector u(6);
            for (int j = 0; j < 6; ++j) u(j) = basis::psi(j, x) * std::polar(1.0, j * phi);
            double expected = (u.adjoint() * rho.matrix() * u)(0, 0).real() / kPi;
            CHECK(density(rho, x, phi) == doctest::Approx(expected).epsilon(1e-12));
        }
}

TEST_CASE("joint density integrates to one") {
    std::mt19937_64 gen(2);
    for (int i = 0; i < 3; ++i) CHECK(integrate_joint(test_support::random_state(8, gen)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(integrate_joint(make_state(StateSpec::squeezed(1.2, 0.4), 40).rho) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("phase-diagonal states have phase-independent densities") {
    auto th = make_state(StateSpec::thermal(0.8), 40).rho;
    for (double x : {-2.0, 0.0, 0.7, 3.0})
        for (double phi : {0.4, 1.9, 3.0}) CHECK(density(th, x, phi) == doctest::Approx(density(th, x, 0.0)).epsilon(1e-12));
}

TEST_CASE("coherent-state quadrature is Gaussian with mean sqrt(2N) cos phi") {
    const double N = 1.3;
    auto c = make_state(StateSpec::coherent(N), 40).rho;
    for (double phi : {0.0, 1.0, 2.5}) {
        double m = std::sqrt(2 * N) * std::cos(phi);
        for (double x : {-1.0, 0.5, 2.0})
            CHECK(density(c, x, phi) == doctest::Approx(std::exp(-(x - m) * (x - m)) / (kPi * std::sqrt(kPi))).epsilon(1e-10));
    }
}

TEST_CASE("raw matrices with negative densities are rejected by density()") {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m << 1.2, 0.0, 0.0, -0.2;
    RawMatrix raw(m);
    HomodyneDensity h(raw);
    CHECK(h(2.0, 0.0) < 0.0);
}

TEST_CASE("noisy density equals the Gaussian convolution of the ideal density") {
    auto rho = make_state(StateSpec::fock(2), 3).rho;
    std::mt19937_64 gen(4);
    auto mixed = test_support::random_state(4, gen);
    for (const auto* state : {&rho, &mixed})
        for (double eta : {0.9, 0.6}) {
            const double s = std::sqrt((1 - eta) / 2);
            for (double y : {-1.4, 0.1, 1.8})
                for (double phi : {0.3, 2.0}) {
                    double conv = 0.0;
                    const double h = 0.002;
                    for (double x = -12.0; x <= 12.0; x += h) {
                        double z = (y - std::sqrt(eta) * x) / s;
                        conv += density(*state, x, phi) * std::exp(-z * z / 2) / (s * std::sqrt(2 * kPi)) * h;
                    }
                    CHECK(noisy_density(*state, y, phi, eta) == doctest::Approx(conv).epsilon(1e-6));
                }
        }
}

TEST_CASE("sampler moments") {
    auto vac = make_state(StateSpec::vacuum(), 1).rho;
    for (double eta : {1.0, 0.7}) {
        auto data = sample(vac, 40000, eta, 9);
        double m = 0.0, v = 0.0;
        for (auto s : data.samples) m += s.x / data.size();
        for (auto s : data.samples) v += (s.x - m) * (s.x - m) / data.size();
        CHECK(std::abs(m) < 4 * std::sqrt(0.5 / 40000));
        CHECK(v == doctest::Approx(0.5).epsilon(0.03));
    }
    auto f1 = make_state(StateSpec::fock(1), 2).rho;
    for (auto [eta, second] : {std::pair{1.0, 1.5}, {0.5, 1.0}}) {
        auto data = sample(f1, 40000, eta, 10);
        double m2 = 0.0;
        for (auto s : data.samples) m2 += s.x * s.x / data.size();
        CHECK(m2 == doctest::Approx(second).epsilon(0.03));
    }
    const double N = 2.0;
    auto c = make_state(StateSpec::coherent(N), 30).rho;
    auto data = sample(c, 40000, 1.0, 11);
    double xc = 0.0;
    for (auto s : data.samples) {
        xc += s.x * std::cos(s.phi) / data.size();
        CHECK(s.phi >= 0.0);
        CHECK(s.phi <= kPi);
    }
    CHECK(xc == doctest::Approx(std::sqrt(N / 2)).epsilon(0.03));
}

TEST_CASE("single-photon samples pass a KS test against the exact CDF") {
    auto f1 = make_state(StateSpec::fock(1), 2).rho;
    auto data = sample(f1, 20000, 1.0, 21);
    std::vector<double> xs;
    for (auto s : data.samples) xs.push_back(s.x);
    // 1% critical value of the KS distribution
    CHECK(ks_statistic(xs, fock1_cdf) < 1.63 / std::sqrt(20000.0));
}

TEST_CASE("sampler output depends only on the seed") {
    auto rho = make_state(StateSpec::coherent(1.0), 15).rho;
    auto a = sample(rho, 5000, 0.8, 77);
    auto b = sample(rho, 5000, 0.8, 77);
    auto c = sample(rho, 5000, 0.8, 78);
    bool same = true, differ = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        same = same && a.samples[i].x == b.samples[i].x && a.samples[i].phi == b.samples[i].phi;
        differ = differ || a.samples[i].x != c.samples[i].x;
    }
    CHECK(same);
    CHECK(differ);
    // whole blocks are shared between sample sizes
    auto prefix = sample(rho, 2 * kSampleBlock, 0.8, 77);
    for (std::size_t i = 0; i < prefix.size(); ++i) CHECK(prefix.samples[i].x == a.samples[i].x);

    setenv("TOMOLAB_THREADS", "1", 1);
    auto one = sample(rho, 5000, 0.8, 77);
    setenv("TOMOLAB_THREADS", "4", 1);
    auto four = sample(rho, 5000, 0.8, 77);
    unsetenv("TOMOLAB_THREADS");
    bool threads_same = true;
    for (std::size_t i = 0; i < one.size(); ++i) threads_same = threads_same && one.samples[i].x == four.samples[i].x;
    CHECK(threads_same);
}

TEST_CASE("sampler parameter checks") {
    auto rho = make_state(StateSpec::vacuum(), 1).rho;
    CHECK_THROWS_AS(sample(rho, 0, 1.0, 1), ParameterError);
    CHECK_THROWS_AS(sample(rho, 10, 0.0, 1), ParameterError);
    CHECK_THROWS_AS(sample(rho, 10, 1.2, 1), ParameterError);
}

TEST_CASE("divergences between vacuum and one photon match closed forms") {
    auto v = make_state(StateSpec::vacuum(), 2).rho;
    auto f = make_state(StateSpec::fock(1), 2).rho;
    Divergences d = divergences(f, v);
    CHECK(d.hellinger * d.hellinger == doctest::Approx(2.0 - 2.0 * std::sqrt(2.0 / kPi)).epsilon(1e-5));
    CHECK(d.total_variation == doctest::Approx(2.0 * std::exp(-0.5) / std::sqrt(2 * kPi)).epsilon(1e-5));
    CHECK(d.chi_squared == doctest::Approx(2.0).epsilon(1e-5));
    CHECK(d.achieved_tolerance < 1e-6);
    Divergences self = divergences(v, v);
    CHECK(self.hellinger == 0.0);
    CHECK(self.total_variation == 0.0);
}

TEST_CASE("chi-squared is infinite when p has mass where q vanishes") {
    auto p = grid_density([](double x, double) { return std::exp(-x * x) / (kPi * std::sqrt(kPi)); });
    auto q = grid_density([](double x, double) { return x > 0 ? 2.0 * std::exp(-x * x) / (kPi * std::sqrt(kPi)) : 0.0; });
    DivergenceOptions opts;
    opts.x_half_width = 8.0;
    opts.rel_tol = 1e-3;
    CHECK(std::isinf(divergences(p, q, opts).chi_squared));
}

TEST_CASE("divergence quadrature reports non-convergence") {
    auto p = grid_density([](double x, double phi) { return std::abs(std::sin(40 * x * phi)) / 4.0; });
    auto q = grid_density([](double, double) { return 1.0 / (8 * kPi); });
    DivergenceOptions opts;
    opts.x_half_width = 4.0;
    opts.start_x = 16;
    opts.start_phi = 8;
    opts.max_x = 64;
    opts.max_phi = 32;
    CHECK_THROWS_WITH_AS(divergences(p, q, opts), doctest::Contains("achieved relative tolerance"), NumericalError);
}

TEST_CASE("divergence ordering, state bound and contraction under loss") {
    std::mt19937_64 gen(31);
    for (int i = 0; i < 4; ++i) {
        auto a = test_support::random_concentrated_state(5, 0.5, gen);
        auto b = test_support::random_concentrated_state(5, 0.5, gen);
        Divergences d = divergences(a, b);
        CHECK(d.total_variation <= d.hellinger + 1e-9);
        CHECK(d.hellinger <= std::sqrt(2 * d.total_variation) + 1e-9);
        CHECK(d.hellinger * d.hellinger <= d.chi_squared + 1e-9);
        CHECK(d.hellinger <= std::sqrt(distance(a, b, Norm::trace)) + 1e-9);
        Divergences lossy = divergences(bernoulli_transform(a, 0.6), bernoulli_transform(b, 0.6));
        CHECK(lossy.total_variation <= d.total_variation + 1e-9);
        CHECK(lossy.hellinger <= d.hellinger + 1e-9);
    }
}

TEST_CASE("sample files round trip with sidecar metadata") {
    TempDir dir;
    auto rho = make_state(StateSpec::coherent(1.0), 15).rho;
    auto data = sample(rho, 300, 0.85, 5, "coherent:N=1");
    auto csv = dir.path / "s.csv";
    write_samples(csv, data, {{"note", "x"}});
    auto back = read_samples(csv);
    REQUIRE(back.size() == data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(back.samples[i].x == data.samples[i].x);
        CHECK(back.samples[i].phi == data.samples[i].phi);
    }
    CHECK(back.eta == 0.85);
    CHECK(back.seed == 5);
    CHECK(back.state_label == "coherent:N=1");
    std::ifstream side(sidecar_path(csv));
    auto meta = nlohmann::json::parse(side);
    CHECK(meta.at("note") == "x");
    CHECK(meta.at("n") == 300);

    std::filesystem::remove(sidecar_path(csv));
    auto bare = read_samples(csv);
    CHECK(bare.eta == 1.0);
    CHECK(bare.size() == 300);
}

TEST_CASE("malformed sample files are rejected") {
    TempDir dir;
    auto csv = dir.path / "bad.csv";
    {
        std::ofstream out(csv);
        out << "x,phi\n0.5,0.1\n0.2,4.0\n";
    }
    CHECK_THROWS_WITH_AS(read_samples(csv), doctest::Contains("line 3"), ParameterError);
    {
        std::ofstream out(csv);
        out << "a,b\n";
    }
    CHECK_THROWS_AS(read_samples(csv), ParameterError);
    CHECK_THROWS_AS(read_samples(dir.path / "missing.csv"), ParameterError);
    {
        std::ofstream out(csv);
        out << "x,phi\n0.5,0.1\n";
        std::ofstream side(sidecar_path(csv));
        side << R"({"eta": 1.5})";
    }
    CHECK_THROWS_AS(read_samples(csv), ParameterError);
}
