#include "tomolab/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "tomolab/errors.hpp"
#include "tomolab/homodyne.hpp"
#include "tomolab/parallel.hpp"
#include "tomolab/pattern.hpp"

namespace tomolab {

namespace {

RawMatrix leading_block(const RawMatrix& m, int N) { return m.resized(N); }

DimCurve curve_from(const std::vector<int>& dims, const std::vector<std::vector<double>>& errors) {
    DimCurve c;
    c.dims = dims;
    const double reps = static_cast<double>(errors.size());
    for (std::size_t d = 0; d < dims.size(); ++d) {
        double mean = 0.0, sq = 0.0;
        for (const auto& e : errors) mean += e[d] / reps;
        for (const auto& e : errors) sq += (e[d] - mean) * (e[d] - mean);
        c.mean_error.push_back(mean);
        c.se.push_back(reps > 1 ? std::sqrt(sq / (reps - 1) / reps) : 0.0);
    }
    // ties go to the smallest dimension
    auto best = std::min_element(c.mean_error.begin(), c.mean_error.end()) - c.mean_error.begin();
    c.N_star = dims[best];
    c.risk = c.mean_error[best];
    for (const auto& e : errors) c.rep_errors.push_back(e[best]);
    return c;
}

} // namespace

std::uint64_t cell_seed(std::uint64_t base, std::size_t n, int rep) {
    std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                      static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(static_cast<std::uint64_t>(n) >> 32),
                      static_cast<std::uint32_t>(rep)};
    std::mt19937_64 gen(seq);
    return gen();
}

std::vector<int> default_sml_dims(int n_max) {
    std::vector<int> dims;
    for (int N = 1; N <= std::min(12, n_max); ++N) dims.push_back(N);
    for (int N = 14; N <= n_max; N += 2) dims.push_back(N);
    return dims;
}

RepResult run_rep(const DensityMatrix& truth, std::size_t n, int rep, std::uint64_t base_seed,
                  const BenchOptions& opts) {
    if (opts.pfp_N_max < 1) throw ParameterError("pfp_N_max must be >= 1");
    RepResult r;
    r.n = n;
    r.rep = rep;
    r.seed = cell_seed(base_seed, n, rep);
    SampleSet data = sample(truth, n, 1.0, r.seed);
    RawMatrix full = estimate_pfp(data, opts.pfp_N_max);
    for (int N = 1; N <= opts.pfp_N_max; ++N)
        r.pfp_error.push_back(distance(leading_block(full, N), truth, Norm::frobenius));
    CrossValidation cv = cross_validate(data, opts.pfp_N_max);
    r.cv_curve = cv.risk_curve;
    r.cv_N_star = cv.N_star;
    if (opts.run_sml) {
        r.sml_dims = opts.sml_dims.empty() ? default_sml_dims(opts.pfp_N_max) : opts.sml_dims;
        for (int N : r.sml_dims) {
            SieveConfig cfg = opts.sml;
            cfg.N = N;
            SmlFit fit = estimate_sml(data, cfg);
            r.sml_error.push_back(distance(fit.rho, truth, Norm::frobenius));
            r.sml_converged.push_back(fit.converged);
        }
    }
    return r;
}

std::vector<RepResult> run_reps(const DensityMatrix& truth, const std::vector<std::size_t>& ns, int reps,
                                std::uint64_t base_seed, const BenchOptions& opts) {
    if (reps < 1) throw ParameterError("reps must be >= 1");
    std::vector<RepResult> out(ns.size() * static_cast<std::size_t>(reps));
    parallel_blocks(out.size(), [&](std::size_t cell) {
        std::size_t i = cell / static_cast<std::size_t>(reps);
        int rep = static_cast<int>(cell % static_cast<std::size_t>(reps));
        out[cell] = run_rep(truth, ns[i], rep, base_seed, opts);
    });
    return out;
}

DimCurve pfp_curve(const std::vector<RepResult>& reps) {
    if (reps.empty()) throw ParameterError("no repetitions");
    std::vector<int> dims;
    for (std::size_t N = 1; N <= reps.front().pfp_error.size(); ++N) dims.push_back(static_cast<int>(N));
    std::vector<std::vector<double>> errors;
    for (const auto& r : reps) errors.push_back(r.pfp_error);
    return curve_from(dims, errors);
}

DimCurve sml_curve(const std::vector<RepResult>& reps) {
    if (reps.empty() || reps.front().sml_dims.empty()) throw ParameterError("no SML results");
    std::vector<std::vector<double>> errors;
    for (const auto& r : reps) errors.push_back(r.sml_error);
    return curve_from(reps.front().sml_dims, errors);
}

double mean_cv_N_star(const std::vector<RepResult>& reps) {
    double s = 0.0;
    for (const auto& r : reps) s += r.cv_N_star;
    return s / static_cast<double>(reps.size());
}

SlopeFit fit_decay(const std::vector<double>& ns, const std::vector<double>& risks) {
    if (ns.size() != risks.size() || ns.size() < 2) throw ParameterError("fit_decay needs >= 2 points");
    const double m = static_cast<double>(ns.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        mx += std::log(ns[i]) / m;
        my += std::log(risks[i]) / m;
    }
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        double dx = std::log(ns[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(risks[i]) - my);
    }
    double slope = sxy / sxx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        double res = std::log(risks[i]) - (my + slope * (std::log(ns[i]) - mx));
        ssr += res * res;
    }
    SlopeFit fit;
    fit.tau = -slope;
    fit.se = ns.size() > 2 ? std::sqrt(ssr / (m - 2.0) / sxx) : 0.0;
    return fit;
}

RiskScaling bench_risk_scaling(const DensityMatrix& truth, const std::vector<std::size_t>& ns, int reps,
                               std::uint64_t base_seed, const BenchOptions& opts) {
    if (ns.size() < 2) throw ParameterError("risk scaling needs at least two sample sizes");
    std::vector<RepResult> all = run_reps(truth, ns, reps, base_seed, opts);
    RiskScaling out;
    std::vector<double> xs, pfp_risk, sml_risk;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        std::vector<RepResult> cell(all.begin() + i * reps, all.begin() + (i + 1) * reps);
        DimCurve p = pfp_curve(cell);
        out.rows.push_back({ns[i], "pfp", p.N_star, p.risk, mean_cv_N_star(cell), p.rep_errors});
        xs.push_back(static_cast<double>(ns[i]));
        pfp_risk.push_back(p.risk);
        if (opts.run_sml) {
            DimCurve s = sml_curve(cell);
            out.rows.push_back({ns[i], "sml", s.N_star, s.risk, 0.0, s.rep_errors});
            sml_risk.push_back(s.risk);
        }
    }
    out.pfp = fit_decay(xs, pfp_risk);
    if (opts.run_sml) out.sml = fit_decay(xs, sml_risk);
    return out;
}

void write_risk_csv(const std::string& path, const RiskScaling& result) {
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path);
    out.precision(10);
    out << "n,estimator,N_star,l2_risk,tau,tau_se,N_cv\n";
    for (const auto& r : result.rows) {
        const SlopeFit& f = r.estimator == "pfp" ? result.pfp : result.sml;
        out << r.n << ',' << r.estimator << ',' << r.N_star << ',' << r.l2_risk << ',' << f.tau << ',' << f.se << ',';
        if (r.estimator == "pfp") out << r.N_cv;
        out << '\n';
    }
}

void write_dim_csv(const std::string& path, std::size_t n, const DimCurve& pfp, const DimCurve& sml) {
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path);
    out.precision(10);
    out << "n,N,estimator,mean_error,se\n";
    auto rows = [&](const DimCurve& c, const char* name) {
        for (std::size_t i = 0; i < c.dims.size(); ++i)
            out << n << ',' << c.dims[i] << ',' << name << ',' << c.mean_error[i] << ',' << c.se[i] << '\n';
    };
    rows(pfp, "pfp");
    if (!sml.dims.empty()) rows(sml, "sml");
}

void write_cv_csv(const std::string& path, const std::vector<RepResult>& reps) {
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path);
    out.precision(10);
    out << "n,rep,N,J_hat,N_star\n";
    for (const auto& r : reps)
        for (std::size_t i = 0; i < r.cv_curve.size(); ++i)
            out << r.n << ',' << r.rep << ',' << i + 1 << ',' << r.cv_curve[i] << ',' << r.cv_N_star << '\n';
}

} // namespace tomolab
