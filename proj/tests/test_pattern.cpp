#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "test_support.hpp"
#include "tomolab/errors.hpp"
#include "tomolab/homodyne.hpp"
#include "tomolab/oscillator_basis.hpp"
#include "tomolab/pattern.hpp"

using namespace tomolab;

namespace {

// int f_{k,j}(x) psi_a(x) psi_b(x) dx by the trapezoid rule on [-13, 13].
double overlap(double (*f)(int, int, double), int k, int j, int a, int b) {
    const double h = 0.004;
    double s = 0.0;
    for (double x = -13.0; x <= 13.0; x += h) s += f(k, j, x) * basis::psi(a, x) * basis::psi(b, x);
    return s * h;
}

// All overlaps int f_{k,j} psi_a psi_b for k, j < dim and a, b < 2 dim at once.
std::vector<Eigen::MatrixXd> overlaps(int dim) {
    PatternEvaluator eval(dim);
    const double h = 0.004;
    std::vector<Eigen::MatrixXd> out(dim * dim, Eigen::MatrixXd::Zero(2 * dim, 2 * dim));
    Eigen::MatrixXd f;
    for (double x = -13.0; x <= 13.0; x += h) {
        eval.evaluate(x, f);
        auto ps = basis::psi_all(2 * dim, x);
        Eigen::Map<Eigen::VectorXd> v(ps.data(), 2 * dim);
        Eigen::MatrixXd outer = v * v.transpose() * h;
        for (int k = 0; k < dim; ++k)
            for (int j = 0; j < dim; ++j) out[k * dim + j] += f(k, j) * outer;
    }
    return out;
}

// Direct O(n^2) evaluation of the cross-validation risk surrogate:
// sum |rho_hat|^2 - 2/(n(n-1)) sum_{l != m} Re sum_{k,j<N} F_l conj(F_m).
double brute_force_risk(const SampleSet& data, int N) {
    const std::size_t n = data.size();
    std::vector<ComplexMatrix> F(n, ComplexMatrix(N, N));
    for (std::size_t l = 0; l < n; ++l)
        for (int k = 0; k < N; ++k)
            for (int j = 0; j < N; ++j)
                F[l](k, j) = pattern(k, j, data.samples[l].x) * std::polar(1.0, -(j - k) * data.samples[l].phi);
    ComplexMatrix mean = ComplexMatrix::Zero(N, N);
    for (const auto& f : F) mean += f / static_cast<double>(n);
    double cross = 0.0;
    for (std::size_t l = 0; l < n; ++l)
        for (std::size_t m = 0; m < n; ++m)
            if (l != m) cross += (F[l].array() * F[m].array().conjugate()).sum().real();
    return mean.squaredNorm() - 2.0 * cross / (static_cast<double>(n) * (n - 1.0));
}

} // namespace

TEST_CASE("f_00 reproduces the vacuum and annihilates psi_1^2") {
    CHECK(overlap(pattern, 0, 0, 0, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(std::abs(overlap(pattern, 0, 0, 1, 1)) < 1e-6);
}

TEST_CASE("pattern functions are biorthogonal to psi_a psi_{a+j-k}") {
    const int dim = 6;
    auto ov = overlaps(dim);
    for (int k = 0; k < dim; ++k)
        for (int j = k; j < dim; ++j)
            for (int a = 0; a < dim; ++a) {
                int b = a + (j - k);
                double expected = a == k ? 1.0 : 0.0;
                CHECK(std::abs(ov[k * dim + j](a, b) - expected) < 1e-5);
            }
}

TEST_CASE("pattern functions are derivatives of psi_k phi_j") {
    const double h = 1e-4;
    for (auto [k, j] : {std::pair{0, 0}, {0, 2}, {1, 4}, {3, 3}})
        for (double x : {-2.2, 0.35, 1.6, 4.0}) {
            auto g = [&](double t) { return basis::psi(k, t) * basis::phi(j, t); };
            double d = (g(x - 2 * h) - 8 * g(x - h) + 8 * g(x + h) - g(x + 2 * h)) / (12 * h);
            CHECK(pattern(k, j, x) == doctest::Approx(d).epsilon(1e-7).scale(1e-3));
        }
}

TEST_CASE("pattern symmetry and parity") {
    for (int k = 0; k < 5; ++k)
        for (int j = 0; j < 5; ++j)
            for (double x : {0.4, 2.7, 30.0}) {
                CHECK(pattern(k, j, x) == pattern(j, k, x));
                CHECK(pattern(k, j, -x) == doctest::Approx(((k + j) % 2 ? -1.0 : 1.0) * pattern(k, j, x)));
            }
}

TEST_CASE("swapped arrangement reconstructs but differs pointwise and does not decay") {
    CHECK(overlap(pattern_swapped, 1, 3, 1, 3) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(std::abs(overlap(pattern_swapped, 1, 3, 0, 2)) < 1e-5);
    CHECK(pattern_swapped(2, 2, 1.3) == doctest::Approx(pattern(2, 2, 1.3)));
    CHECK(std::abs(pattern_swapped(1, 3, 1.3) - pattern(1, 3, 1.3)) > 1e-3);
    CHECK(std::abs(pattern_swapped(0, 2, 11.0)) > 1e3 * std::abs(pattern(0, 2, 11.0)));
}

TEST_CASE("tail decays as |x|^(-2-|k-j|) and is continuous at the window") {
    auto table = PatternTable::build(8, 16.0, 4097);
    for (int k = 0; k < 8; ++k)
        for (int j = 0; j < 8; ++j) CHECK(std::abs(table.tail_exponents(k, j) + 2.0 + std::abs(k - j)) < 0.25);
    for (auto [k, j] : {std::pair{0, 0}, {1, 4}, {2, 7}}) {
        double w = pattern_window(k, j);
        CHECK(pattern(k, j, w * (1 + 1e-9)) == doctest::Approx(pattern(k, j, w)).epsilon(1e-6));
        double far = pattern(k, j, 2 * w), near = pattern(k, j, w);
        CHECK(far / near == doctest::Approx(std::pow(2.0, -2 - std::abs(k - j))).epsilon(1e-9));
    }
}

TEST_CASE("evaluator and table agree with direct evaluation") {
    PatternEvaluator eval(6);
    Eigen::MatrixXd f;
    for (double x : {-13.5, -3.3, 0.0, 0.77, 12.2, 20.0}) {
        eval.evaluate(x, f);
        for (int k = 0; k < 6; ++k)
            for (int j = 0; j < 6; ++j) CHECK(f(k, j) == doctest::Approx(pattern(k, j, x)).epsilon(1e-10).scale(1e-12));
    }
    auto table = PatternTable::build(6, 14.0, 131073);
    for (double x : {-13.21, -2.718, 0.05, 1.414, 9.99, 25.0})
        for (int k = 0; k < 6; ++k)
            for (int j = 0; j < 6; ++j) CHECK(std::abs(table(k, j, x) - pattern(k, j, x)) < 1e-6);
    CHECK_THROWS_AS(table(6, 0, 0.0), ParameterError);
    CHECK_THROWS_AS(PatternEvaluator(0), ParameterError);
}

TEST_CASE("pattern norms") {
    auto norms = pattern_norms(5);
    PatternEvaluator eval(5);
    Eigen::MatrixXd f, sup = Eigen::MatrixXd::Zero(5, 5), sq = Eigen::MatrixXd::Zero(5, 5);
    const double h = 0.002;
    for (double x = -200; x <= 200; x += h) {
        eval.evaluate(x, f);
        sup = sup.cwiseMax(f.cwiseAbs());
        sq += h * f.cwiseAbs2();
    }
    for (int k = 0; k < 5; ++k)
        for (int j = 0; j < 5; ++j) {
            CHECK(norms.sup(k, j) == doctest::Approx(sup(k, j)).epsilon(1e-3));
            CHECK(norms.l2(k, j) == doctest::Approx(std::sqrt(sq(k, j))).epsilon(1e-3));
        }
}

TEST_CASE("single-sample estimate is F(x, phi)") {
    SampleSet data;
    data.samples = {{0.8, 1.1}};
    auto est = estimate_pfp(data, 4);
    for (int k = 0; k < 4; ++k)
        for (int j = k; j < 4; ++j) {
            Complex expected = pattern(k, j, 0.8) * std::polar(1.0, -(j - k) * 1.1);
            CHECK(std::abs(est(k, j) - expected) < 1e-12);
        }
}

TEST_CASE("PFP estimate is exactly Hermitian, linear in the data, and nested in N") {
    auto rho = make_state(StateSpec::coherent(1.0), 20).rho;
    auto a = sample(rho, 1500, 1.0, 3), b = sample(rho, 500, 1.0, 4);
    auto est = estimate_pfp(a, 8);
    for (int k = 0; k < 8; ++k) {
        CHECK(est(k, k).imag() == 0.0);
        for (int j = 0; j < 8; ++j) CHECK(est(k, j) == std::conj(est(j, k)));
    }
    SampleSet joined = a;
    joined.samples.insert(joined.samples.end(), b.samples.begin(), b.samples.end());
    ComplexMatrix expected = (1500.0 * est.matrix() + 500.0 * estimate_pfp(b, 8).matrix()) / 2000.0;
    CHECK((estimate_pfp(joined, 8).matrix() - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((estimate_pfp(a, 5).matrix() - est.matrix().topLeftCorner(5, 5)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("PFP estimate is consistent") {
    auto rho = make_state(StateSpec::squeezed(1.0, 0.3), 30).rho;
    auto est = estimate_pfp(sample(rho, 100000, 1.0, 8), 4);
    for (int k = 0; k < 4; ++k)
        for (int j = 0; j < 4; ++j) CHECK(std::abs(est(k, j) - rho(k, j)) < 0.03);
}

TEST_CASE("PFP rejects lossy data") {
    auto data = sample(make_state(StateSpec::vacuum(), 1).rho, 10, 0.9, 1);
    CHECK_THROWS_WITH_AS(estimate_pfp(data, 3), doctest::Contains("out of scope"), ParameterError);
    CHECK_THROWS_AS(cross_validate(data, 3), ParameterError);
}

TEST_CASE("cross-validation risk matches the brute-force U-statistic") {
    auto rho = make_state(StateSpec::coherent(0.8), 15).rho;
    auto data = sample(rho, 60, 1.0, 12);
    auto cv = cross_validate(data, 5);
    REQUIRE(cv.risk_curve.size() == 5);
    for (int N = 1; N <= 5; ++N) CHECK(cv.risk_curve[N - 1] == doctest::Approx(brute_force_risk(data, N)).epsilon(1e-9));
    int first_min = 1;
    for (int N = 2; N <= 5; ++N)
        if (cv.risk_curve[N - 1] < cv.risk_curve[first_min - 1]) first_min = N;
    CHECK(cv.N_star == first_min);
}

TEST_CASE("cross-validation risk is unbiased for the L2 risk up to a constant") {
    // E J_hat(N) = E |rho_hat_N - rho_N|^2 - |rho_N|^2
    auto rho = make_state(StateSpec::coherent(1.0), 20).rho;
    const int N = 4, reps = 300;
    const double rho_sq = rho.matrix().topLeftCorner(N, N).squaredNorm();
    double mean_j = 0.0, mean_err = 0.0, sq = 0.0;
    for (int r = 0; r < reps; ++r) {
        auto data = sample(rho, 200, 1.0, 1000 + r);
        double j = cross_validate(data, N).risk_curve[N - 1];
        double e = (estimate_pfp(data, N).matrix() - rho.matrix().topLeftCorner(N, N)).squaredNorm() - rho_sq;
        mean_j += j / reps;
        mean_err += e / reps;
        sq += (j - e) * (j - e) / reps;
    }
    CHECK(std::abs(mean_j - mean_err) < 4.0 * std::sqrt(sq / reps));
}

TEST_CASE("MISE split adds up to the mean squared error") {
    std::mt19937_64 gen(9);
    auto truth = test_support::random_state(6, gen);
    std::vector<RawMatrix> estimates;
    for (int i = 0; i < 5; ++i) estimates.push_back(test_support::random_state(4, gen));
    auto split = mise_decomposition(truth, estimates, 4);
    double mse = 0.0;
    for (const auto& e : estimates) mse += std::pow(distance(e, truth, Norm::frobenius), 2) / 5.0;
    CHECK(split.bias2 + split.variance == doctest::Approx(mse).epsilon(1e-12));
    CHECK(split.variance >= 0.0);
    std::vector<RawMatrix> same(3, estimates.front());
    CHECK(mise_decomposition(truth, same, 4).variance == doctest::Approx(0.0).scale(1.0));
    CHECK_THROWS_AS(mise_decomposition(truth, {estimates.front()}, 4), ParameterError);
}
