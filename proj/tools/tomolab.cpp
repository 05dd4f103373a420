// tomolab: simulate homodyne data, reconstruct states, and run the risk benchmarks.
//
// Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tomolab/bench.hpp"
#include "tomolab/errors.hpp"
#include "tomolab/homodyne.hpp"
#include "tomolab/pattern.hpp"
#include "tomolab/run_config.hpp"
#include "tomolab/sml.hpp"
#include "tomolab/wigner.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tomolab;

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ParameterError("cannot write " + path);
    out << j.dump(2) << '\n';
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot read " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParameterError(path + ": " + e.what());
    }
}

json provenance(const RunConfig& cfg, std::uint64_t seed) { return {{"config", cfg.to_json()}, {"seed", seed}}; }

DensityMatrix prepare(const StateRequest& req, bool strict) {
    PreparedState st = make_state(req.spec, req.resolved_dim(), strict);
    if (st.warning) std::cerr << "warning: " << *st.warning << '\n';
    return st.rho;
}

void write_grid(const std::string& path, const WignerGrid& grid, const json& meta) {
    if (ends_with(path, ".json")) {
        json j = to_json(grid);
        j.update(meta);
        write_json(path, j);
        return;
    }
    write_wigner_csv(path, grid);
    write_json(sidecar_path(path).string(), meta);
}

SmlFit fit_sml(const SampleSet& data, const RunConfig& cfg) {
    SieveConfig sc;
    sc.N = *cfg.N;
    sc.init = cfg.init;
    sc.max_iter = cfg.max_iter;
    sc.tol = cfg.tol;
    sc.strict = cfg.strict;
    SmlFit fit = estimate_sml(data, sc);
    for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
    if (!fit.converged) std::cerr << "warning: SML stopped after " << fit.iters << " iterations without converging\n";
    return fit;
}

// Matrix from a matrix JSON, an estimate file or a fit report.
RawMatrix matrix_from_file(const std::string& path) {
    json j = read_json(path);
    if (j.contains("rho")) return raw_matrix_from_json(j.at("rho"));
    return raw_matrix_from_json(j);
}

void run_simulate(const RunConfig& cfg) {
    DensityMatrix rho = prepare(*cfg.state, cfg.strict);
    SampleSet data = sample(rho, cfg.n, cfg.eta, cfg.seed, cfg.state->to_string());
    write_samples(cfg.output, data, provenance(cfg, cfg.seed));
}

void run_estimate(const RunConfig& cfg) {
    SampleSet data = read_samples(cfg.input);
    json meta = provenance(cfg, data.seed);
    switch (cfg.estimator) {
    case EstimatorKind::pfp: {
        json j = to_json(estimate_pfp(data, *cfg.N), false);
        j.update(meta);
        write_json(cfg.output, j);
        break;
    }
    case EstimatorKind::sml: {
        SmlFit fit = fit_sml(data, cfg);
        json j = {{"rho", to_json(fit.rho, true)},
                  {"loglik_trace", fit.loglik_trace},
                  {"iters", fit.iters},
                  {"converged", fit.converged},
                  {"floored_terms", fit.floored},
                  {"warnings", fit.warnings}};
        j.update(meta);
        write_json(cfg.output, j);
        break;
    }
    case EstimatorKind::kernel: {
        GridGeometry g = GridGeometry::square(cfg.grid_half_width, cfg.grid_cells);
        write_grid(cfg.output, kernel_estimate(data, *cfg.c, g), meta);
        break;
    }
    }
}

void run_cross_validate(const RunConfig& cfg) {
    SampleSet data = read_samples(cfg.input);
    CrossValidation cv = cross_validate(data, *cfg.N_max);
    std::ofstream out(cfg.output);
    if (!out) throw ParameterError("cannot write " + cfg.output);
    out.precision(17);
    out << "N,J_hat\n";
    for (std::size_t i = 0; i < cv.risk_curve.size(); ++i) out << i + 1 << ',' << cv.risk_curve[i] << '\n';
    json meta = provenance(cfg, data.seed);
    meta["N_star"] = cv.N_star;
    write_json(sidecar_path(cfg.output).string(), meta);
    std::cout << "N_star " << cv.N_star << '\n';
}

void run_wigner(const RunConfig& cfg) {
    GridGeometry g = GridGeometry::square(cfg.grid_half_width, cfg.grid_cells);
    if (cfg.state) {
        write_grid(cfg.output, wigner_of_state(prepare(*cfg.state, cfg.strict), g), provenance(cfg, cfg.seed));
        return;
    }
    if (ends_with(cfg.input, ".json")) {
        write_grid(cfg.output, plugin_estimate(matrix_from_file(cfg.input), g), provenance(cfg, cfg.seed));
        return;
    }
    SampleSet data = read_samples(cfg.input);
    json meta = provenance(cfg, data.seed);
    switch (cfg.estimator) {
    case EstimatorKind::kernel:
        write_grid(cfg.output, kernel_estimate(data, *cfg.c, g), meta);
        break;
    case EstimatorKind::pfp:
        if (!cfg.N) throw ParameterError("plug-in Wigner from samples needs --N");
        write_grid(cfg.output, plugin_estimate(estimate_pfp(data, *cfg.N), g), meta);
        break;
    case EstimatorKind::sml:
        if (!cfg.N) throw ParameterError("plug-in Wigner from samples needs --N");
        write_grid(cfg.output, plugin_estimate(fit_sml(data, cfg).rho, g), meta);
        break;
    }
}

void run_bench(const RunConfig& cfg) {
    DensityMatrix truth = prepare(*cfg.state, cfg.strict);
    BenchOptions opts;
    opts.pfp_N_max = cfg.N_max.value_or(30);
    opts.sml.init = cfg.init;
    opts.sml.max_iter = cfg.max_iter;
    opts.sml.tol = cfg.tol;
    json meta = provenance(cfg, cfg.seed);
    if (cfg.figure == "risk-vs-n") {
        std::vector<std::size_t> ns = cfg.ns;
        if (ns.empty()) ns = {100, 200, 400, 800, 1600, 3200, 6400, 12800};
        RiskScaling res = bench_risk_scaling(truth, ns, cfg.reps, cfg.seed, opts);
        write_risk_csv(cfg.output, res);
        meta["tau_pfp"] = res.pfp.tau;
        meta["tau_pfp_se"] = res.pfp.se;
        meta["tau_sml"] = res.sml.tau;
        meta["tau_sml_se"] = res.sml.se;
        std::cout << "tau pfp " << res.pfp.tau << " +- " << res.pfp.se << ", sml " << res.sml.tau << " +- "
                  << res.sml.se << '\n';
    } else {
        std::vector<std::size_t> ns = cfg.ns.empty() ? std::vector<std::size_t>{cfg.n} : cfg.ns;
        if (cfg.figure == "cv-curve") opts.run_sml = false;
        std::vector<RepResult> reps = run_reps(truth, ns, cfg.reps, cfg.seed, opts);
        if (cfg.figure == "cv-curve") {
            write_cv_csv(cfg.output, reps);
            meta["mean_N_star"] = mean_cv_N_star(reps);
        } else {
            if (ns.size() != 1) throw ParameterError("error-vs-dim takes a single sample size");
            DimCurve p = pfp_curve(reps), s = sml_curve(reps);
            write_dim_csv(cfg.output, ns.front(), p, s);
            meta["pfp_N_star"] = p.N_star;
            meta["pfp_cv_mean_N_star"] = mean_cv_N_star(reps);
            meta["sml_N_star"] = s.N_star;
        }
    }
    write_json(sidecar_path(cfg.output).string(), meta);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Homodyne quantum tomography: simulation, PFP/SML reconstruction, Wigner functions"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string state_text, estimator_text = "pfp", init_text = "chaotic";
    int N = 0, N_max = 0;
    double c = 0.0;

    auto add_state = [&](CLI::App* sub, bool required) {
        auto* opt = sub->add_option("--state", state_text, "kind[:key=val,...], e.g. coherent:N=1 or squeezed:N=1.2,xi=0.4");
        if (required) opt->required();
    };
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-o,--out", cfg.output, "output path")->required();
        sub->add_flag("--strict", cfg.strict, "escalate truncation and floor warnings to errors");
    };
    auto add_sml = [&](CLI::App* sub) {
        sub->add_option("--init", init_text, "SML start: one_photon_like, chaotic, pilot_estimate");
        sub->add_option("--max-iter", cfg.max_iter, "SML iteration cap");
        sub->add_option("--tol", cfg.tol, "SML relative log-likelihood tolerance");
    };
    auto add_grid = [&](CLI::App* sub) {
        sub->add_option("--grid-half-width", cfg.grid_half_width, "Wigner grid covers [-w, w]^2");
        sub->add_option("--grid-cells", cfg.grid_cells, "cells per axis");
    };

    auto* sim = app.add_subcommand("simulate", "draw homodyne samples from a reference state");
    add_state(sim, true);
    sim->add_option("--n", cfg.n, "sample size");
    sim->add_option("--eta", cfg.eta, "detector efficiency in (0, 1]");
    sim->add_option("--seed", cfg.seed, "random seed");
    add_common(sim);

    auto* est = app.add_subcommand("estimate", "reconstruct from a sample file");
    est->add_option("--in", cfg.input, "sample CSV")->required();
    est->add_option("--estimator", estimator_text, "pfp, sml or kernel");
    est->add_option("--N", N, "truncation / sieve dimension");
    est->add_option("--c", c, "kernel cut-off");
    add_sml(est);
    add_grid(est);
    add_common(est);

    auto* cv = app.add_subcommand("cross-validate", "select the PFP dimension by the unbiased risk estimate");
    cv->add_option("--in", cfg.input, "sample CSV")->required();
    cv->add_option("--N-max", N_max, "largest dimension considered")->required();
    add_common(cv);

    auto* wig = app.add_subcommand("wigner", "Wigner function of a state, a fitted matrix or sample data");
    add_state(wig, false);
    wig->add_option("--in", cfg.input, "matrix/fit JSON or sample CSV");
    wig->add_option("--estimator", estimator_text, "for sample input: pfp, sml or kernel");
    wig->add_option("--N", N, "dimension for pfp/sml plug-in");
    wig->add_option("--c", c, "kernel cut-off");
    add_sml(wig);
    add_grid(wig);
    add_common(wig);

    auto* bench = app.add_subcommand("bench", "Monte Carlo risk experiments");
    bench->add_option("--figure", cfg.figure, "risk-vs-n, error-vs-dim or cv-curve")->required();
    add_state(bench, true);
    bench->add_option("--reps", cfg.reps, "repetitions per sample size");
    bench->add_option("--ns", cfg.ns, "comma-separated sample sizes")->delimiter(',');
    bench->add_option("--n", cfg.n, "sample size for error-vs-dim / cv-curve");
    bench->add_option("--N-max", N_max, "largest dimension (default 30)");
    bench->add_option("--seed", cfg.seed, "base seed");
    add_sml(bench);
    add_common(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        cfg.command = command_from_string(sub->get_name());
        if (!state_text.empty()) cfg.state = parse_state(state_text);
        cfg.estimator = estimator_from_string(estimator_text);
        cfg.init = sml_init_from_string(init_text);
        auto given = [sub](const std::string& name) {
            const CLI::Option* opt = sub->get_option_no_throw(name);
            return opt != nullptr && opt->count() > 0;
        };
        if (given("--N")) cfg.N = N;
        if (given("--N-max")) cfg.N_max = N_max;
        if (given("--c")) cfg.c = c;
        cfg.validate();
        switch (cfg.command) {
        case Command::simulate: run_simulate(cfg); break;
        case Command::estimate: run_estimate(cfg); break;
        case Command::cross_validate: run_cross_validate(cfg); break;
        case Command::wigner: run_wigner(cfg); break;
        case Command::bench: run_bench(cfg); break;
        }
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const ContractViolation& e) {
        std::cerr << "error: invalid input: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
