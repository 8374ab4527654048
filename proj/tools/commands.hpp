#pragma once

#include <string>
#include <vector>

#include "report.hpp"
#include "scenario_io.hpp"

namespace rrisk::cli {

const std::vector<std::string>& subcommands();

// Throws InputError on unknown subcommands and on missing or inconsistent
// inputs. Hypothesis violations land in Report::warnings.
Report run(const std::string& subcommand, const RunConfig& config, const Scenario& scenario);

}  // namespace rrisk::cli
