#pragma once

// Command-line run configuration, state-spec grammar and JSON provenance.
//
// State grammar: kind[:key=val[,key=val...]]
//   vacuum | fock:k=1 | thermal:beta=1 | coherent:N=1 | squeezed:N=1.2,xi=0.4
// each optionally with dim=<int>; without it the dimension is the smallest
// holding 1 - 1e-6 of the probability mass.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tomolab/quantum_states.hpp"
#include "tomolab/sml.hpp"

namespace tomolab {

struct StateRequest {
    StateSpec spec;
    std::optional<int> dim;

    int resolved_dim() const;
    std::string to_string() const;
    bool operator==(const StateRequest&) const = default;
};

StateRequest parse_state(const std::string& text);

bool operator==(const StateSpec& a, const StateSpec& b);

enum class Command { simulate, estimate, cross_validate, wigner, bench };
enum class EstimatorKind { pfp, sml, kernel };

std::string to_string(Command c);
std::string to_string(EstimatorKind e);
Command command_from_string(const std::string& s);
EstimatorKind estimator_from_string(const std::string& s);

struct RunConfig {
    Command command = Command::simulate;
    std::optional<StateRequest> state;
    std::size_t n = 1600;
    double eta = 1.0;
    std::uint64_t seed = 1;
    EstimatorKind estimator = EstimatorKind::pfp;
    std::optional<int> N;
    std::optional<int> N_max;
    std::optional<double> c;  // kernel cut-off
    std::string input;
    std::string output;
    bool strict = false;

    // SML
    SmlInit init = SmlInit::chaotic;
    int max_iter = 500;
    double tol = 1e-8;

    // Wigner grids
    double grid_half_width = 6.0;
    int grid_cells = 256;

    // bench
    std::string figure;
    int reps = 15;
    std::vector<std::size_t> ns;

    // Throws ParameterError on inconsistent settings.
    void validate() const;
    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    bool operator==(const RunConfig&) const = default;
};

} // namespace tomolab
