#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rrisk/prob_core.hpp"
#include "rrisk/risk_measures.hpp"
#include "rrisk/robustify.hpp"
#include "rrisk/uncertainty.hpp"

namespace rrisk::cli {

using json = nlohmann::json;

// Bad input; the message starts with the offending field path.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Scenario {
    SpacePtr space;
    std::map<std::string, Position> positions;
    std::map<std::string, ScenarioMeasure> measures;
};

struct RunConfig {
    std::optional<json> rho;
    std::optional<json> family;
    SolverOptions solver;
    double tol_analytic = 1e-9;
    double tol_grid = 1e-5;
    double simplex_step = 0.01;
    double box_bound = 20.0;
    double lattice_step = 0.1;
    std::uint64_t seed = 42;
    std::size_t trials = 200;

    // subcommand inputs
    std::vector<std::string> positions;  // empty: every position
    std::optional<double> level;
    std::string aggregate = "Y";
    std::vector<std::string> partition;
    std::vector<std::string> representations{"primal"};
    std::vector<std::string> properties;
    std::string target;  // "family", "rho" or "robust"; empty picks family when one is configured
};

// Parses JSON text; duplicate keys inside one object are rejected.
json parse_json_text(const std::string& text, const std::string& what);
json read_json_file(const std::string& path, const std::string& what);

Scenario parse_scenario(const std::string& path);
Scenario scenario_from_json(const json& j);

RunConfig parse_config(const std::string& path);
RunConfig config_from_json(const json& j);

RiskFunctional make_rho(const json& j, const std::string& path);
UncertaintyFamily make_family(const json& j, const std::string& path);

Axiom axiom_from_string(const std::string& s);

}  // namespace rrisk::cli
