#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "rrisk/ext_real.hpp"
#include "rrisk/prob_core.hpp"
#include "rrisk/verdict.hpp"

namespace rrisk::cli {

using json = nlohmann::json;

struct Report {
    std::string command;
    json body = json::object();          // subcommand results
    std::vector<std::string> columns;    // summary table
    std::vector<std::vector<json>> rows;
    json warnings = json::array();
    bool counterexample = false;  // some property check produced a counterexample

    void warn(const std::string& where, const std::string& message);
};

// Infinities become the strings "+inf" / "-inf".
json to_json(const ExtReal& v);
json to_json(double v);
json to_json(const std::vector<double>& v);
json to_json(const Witness& w);
json to_json(const PropertyVerdict& v);

ExtReal ext_from_json(const json& j);
Witness witness_from_json(const json& j);

// Sorted keys, two-space indent, doubles with 17 significant digits.
std::string dump(const json& j);

std::string render_json(const Report& r);
std::string render_csv(const Report& r);
std::string render_table(const Report& r);

}  // namespace rrisk::cli
