#include "tomolab/run_config.hpp"

#include <charconv>
#include <cmath>
#include <map>

#include "tomolab/errors.hpp"

namespace tomolab {

namespace {

double parse_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(v))
        throw ParameterError("state spec: '" + key + "' expects a number, got '" + text + "'");
    return v;
}

int parse_int(const std::string& key, const std::string& text) {
    int v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ParameterError("state spec: '" + key + "' expects an integer, got '" + text + "'");
    return v;
}

template <class T>
nlohmann::json optional_json(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <class T>
std::optional<T> optional_from(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

} // namespace

bool operator==(const StateSpec& a, const StateSpec& b) {
    return a.kind == b.kind && a.photons == b.photons && a.beta == b.beta && a.mean_photons == b.mean_photons &&
           a.xi == b.xi;
}

int StateRequest::resolved_dim() const { return dim ? *dim : minimal_dim(spec); }

std::string StateRequest::to_string() const {
    std::string s = spec.label();
    if (dim) s += (spec.kind == StateKind::vacuum ? ":dim=" : ",dim=") + std::to_string(*dim);
    return s;
}

StateRequest parse_state(const std::string& text) {
    auto colon = text.find(':');
    std::string kind = text.substr(0, colon);
    std::map<std::string, std::string> params;
    if (colon != std::string::npos) {
        std::string rest = text.substr(colon + 1);
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            auto comma = rest.find(',', pos);
            std::string item = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            auto eq = item.find('=');
            if (eq == std::string::npos || eq == 0) throw ParameterError("state spec: expected key=value, got '" + item + "'");
            if (!params.emplace(item.substr(0, eq), item.substr(eq + 1)).second)
                throw ParameterError("state spec: repeated key '" + item.substr(0, eq) + "'");
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
    }
    auto take = [&](const std::string& key) -> std::optional<std::string> {
        auto it = params.find(key);
        if (it == params.end()) return std::nullopt;
        std::string v = it->second;
        params.erase(it);
        return v;
    };
    auto need = [&](const std::string& key) {
        auto v = take(key);
        if (!v) throw ParameterError("state spec: " + kind + " requires " + key + "=");
        return *v;
    };
    StateRequest req;
    if (auto d = take("dim")) {
        req.dim = parse_int("dim", *d);
        if (*req.dim < 1) throw ParameterError("state spec: dim must be >= 1");
    }
    if (kind == "vacuum") {
        req.spec = StateSpec::vacuum();
    } else if (kind == "fock") {
        req.spec = StateSpec::fock(parse_int("k", need("k")));
    } else if (kind == "thermal") {
        req.spec = StateSpec::thermal(parse_double("beta", need("beta")));
    } else if (kind == "coherent") {
        req.spec = StateSpec::coherent(parse_double("N", need("N")));
    } else if (kind == "squeezed") {
        double n = parse_double("N", need("N"));
        req.spec = StateSpec::squeezed(n, parse_double("xi", need("xi")));
    } else {
        throw ParameterError("state spec: unknown kind '" + kind + "' (vacuum, fock, thermal, coherent, squeezed)");
    }
    if (!params.empty()) throw ParameterError("state spec: unknown key '" + params.begin()->first + "' for " + kind);
    // parameter ranges
    minimal_dim(req.spec);
    return req;
}

std::string to_string(Command c) {
    switch (c) {
    case Command::simulate: return "simulate";
    case Command::estimate: return "estimate";
    case Command::cross_validate: return "cross-validate";
    case Command::wigner: return "wigner";
    case Command::bench: return "bench";
    }
    return "simulate";
}

std::string to_string(EstimatorKind e) {
    switch (e) {
    case EstimatorKind::pfp: return "pfp";
    case EstimatorKind::sml: return "sml";
    case EstimatorKind::kernel: return "kernel";
    }
    return "pfp";
}

Command command_from_string(const std::string& s) {
    for (Command c : {Command::simulate, Command::estimate, Command::cross_validate, Command::wigner, Command::bench})
        if (to_string(c) == s) return c;
    throw ParameterError("unknown command '" + s + "'");
}

EstimatorKind estimator_from_string(const std::string& s) {
    for (EstimatorKind e : {EstimatorKind::pfp, EstimatorKind::sml, EstimatorKind::kernel})
        if (to_string(e) == s) return e;
    throw ParameterError("unknown estimator '" + s + "' (pfp, sml, kernel)");
}

void RunConfig::validate() const {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw ParameterError(msg);
    };
    require(eta > 0.0 && eta <= 1.0, "--eta must satisfy 0 < eta <= 1");
    require(max_iter >= 0, "--max-iter must be >= 0");
    require(tol > 0.0, "--tol must be > 0");
    require(grid_half_width > 0.0 && grid_cells >= 2, "grid needs positive half-width and >= 2 cells");
    switch (command) {
    case Command::simulate:
        require(state.has_value(), "simulate needs --state");
        require(n >= 1, "--n must be >= 1");
        require(!output.empty(), "simulate needs -o");
        break;
    case Command::estimate:
        require(!input.empty(), "estimate needs --in");
        require(!output.empty(), "estimate needs -o");
        if (estimator == EstimatorKind::kernel) {
            require(c.has_value() && *c > 0.0, "kernel estimator needs --c > 0");
        } else {
            require(N.has_value() && *N >= 1, "estimator " + tomolab::to_string(estimator) + " needs --N >= 1");
        }
        break;
    case Command::cross_validate:
        require(!input.empty(), "cross-validate needs --in");
        require(N_max.has_value() && *N_max >= 1, "cross-validate needs --N-max >= 1");
        require(!output.empty(), "cross-validate needs -o");
        break;
    case Command::wigner:
        require(state.has_value() != !input.empty(), "wigner needs exactly one of --state or --in");
        require(!output.empty(), "wigner needs -o");
        if (!input.empty() && estimator == EstimatorKind::kernel)
            require(c.has_value() && *c > 0.0, "kernel estimator needs --c > 0");
        break;
    case Command::bench:
        require(figure == "risk-vs-n" || figure == "error-vs-dim" || figure == "cv-curve",
                "--figure must be risk-vs-n, error-vs-dim or cv-curve");
        require(state.has_value(), "bench needs --state");
        require(reps >= 5, "--reps must be >= 5");
        require(!output.empty(), "bench needs -o");
        for (std::size_t v : ns) require(v >= 2, "sample sizes must be >= 2");
        break;
    }
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json ns_json = nlohmann::json::array();
    for (std::size_t v : ns) ns_json.push_back(v);
    return {
        {"command", tomolab::to_string(command)},
        {"state", state ? nlohmann::json(state->to_string()) : nlohmann::json(nullptr)},
        {"n", n},
        {"eta", eta},
        {"seed", seed},
        {"estimator", tomolab::to_string(estimator)},
        {"N", optional_json(N)},
        {"N_max", optional_json(N_max)},
        {"c", optional_json(c)},
        {"input", input},
        {"output", output},
        {"strict", strict},
        {"init", tomolab::to_string(init)},
        {"max_iter", max_iter},
        {"tol", tol},
        {"grid_half_width", grid_half_width},
        {"grid_cells", grid_cells},
        {"figure", figure},
        {"reps", reps},
        {"ns", ns_json},
    };
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    try {
        RunConfig cfg;
        cfg.command = command_from_string(j.at("command").get<std::string>());
        if (auto s = optional_from<std::string>(j, "state")) cfg.state = parse_state(*s);
        cfg.n = j.at("n").get<std::size_t>();
        cfg.eta = j.at("eta").get<double>();
        cfg.seed = j.at("seed").get<std::uint64_t>();
        cfg.estimator = estimator_from_string(j.at("estimator").get<std::string>());
        cfg.N = optional_from<int>(j, "N");
        cfg.N_max = optional_from<int>(j, "N_max");
        cfg.c = optional_from<double>(j, "c");
        cfg.input = j.value("input", std::string());
        cfg.output = j.value("output", std::string());
        cfg.strict = j.value("strict", false);
        cfg.init = sml_init_from_string(j.value("init", std::string("chaotic")));
        cfg.max_iter = j.value("max_iter", 500);
        cfg.tol = j.value("tol", 1e-8);
        cfg.grid_half_width = j.value("grid_half_width", 6.0);
        cfg.grid_cells = j.value("grid_cells", 256);
        cfg.figure = j.value("figure", std::string());
        cfg.reps = j.value("reps", 15);
        cfg.ns = j.value("ns", std::vector<std::size_t>{});
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ParameterError(std::string("run config JSON: ") + e.what());
    }
}

} // namespace tomolab
