#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "rrisk/ext_real.hpp"
#include "rrisk/risk_measures.hpp"
#include "rrisk/uncertainty.hpp"
#include "rrisk/verdict.hpp"

namespace rrisk {

enum class SolverKind { Auto, Analytic, VertexEnum, Grid, ProjectedAscent };
enum class Guarantee { Exact, LowerBound };

std::string to_string(SolverKind s);
std::string to_string(Guarantee g);
SolverKind solver_kind_from_string(const std::string& s);

struct SolverOptions {
    SolverKind kind = SolverKind::Auto;
    double resolution = 0.05;  // lattice step for discretize
    std::size_t budget = 400;  // points requested from discretize
    std::size_t restarts = 32;
    std::size_t max_iterations = 500;
    double min_step = 1e-7;
    std::uint64_t seed = 0;
};

struct RobustValue {
    ExtReal value = ExtReal::neg_inf();
    std::optional<Position> witness;
    SolverKind solver = SolverKind::Auto;
    Guarantee guarantee = Guarantee::LowerBound;
    std::string detail;  // which closed form or search produced the value
};

// What the maximizer may assume about the objective.
struct ObjectiveTraits {
    bool monotone = false;  // decreasing in the position, like a risk measure
    bool quasi_convex = false;
    bool law_invariant = false;

    static ObjectiveTraits of(const RiskFunctional& rho);
};

using Objective = std::function<ExtReal(const Position&)>;

// sup over U_X of an arbitrary objective. Shared by robust_value, support
// functions and robust allocations.
RobustValue maximize_over(const UncertaintyFamily& family, const Position& x, const Objective& f,
                          const ObjectiveTraits& traits, const SolverOptions& opts = {});

// rho~(X) = sup_{Z in U_X} rho(Z). Auto picks Analytic, then VertexEnum, then
// ProjectedAscent. An explicitly requested solver that does not apply throws
// std::invalid_argument.
RobustValue robust_value(const RiskFunctional& rho, const UncertaintyFamily& family, const Position& x,
                         const SolverOptions& opts = {});

// Membership in the largest family inducing rho~: rho(Z) <= rho~(X).
bool largest_family_member(const RiskFunctional& rho, const ExtReal& robust, const Position& z, double tol = 0.0);

// Properties of rho~ carried over from rho and the family.
PropertyVerdict verify_preservation(const RiskFunctional& rho, const UncertaintyFamily& family, Axiom property,
                                    std::size_t trials, std::uint64_t seed, const SolverOptions& opts = {});

struct LargestFamilyVerdicts {
    PropertyVerdict solid;
    PropertyVerdict monotone;
    PropertyVerdict quasi_convex;
};

LargestFamilyVerdicts largest_family_properties(const RiskFunctional& rho, const UncertaintyFamily& family,
                                                std::size_t trials, std::uint64_t seed,
                                                const SolverOptions& opts = {});

// Slack for comparisons whose larger side is only a lower bound.
inline constexpr double kAnalyticTol = 1e-9;
inline constexpr double kGridTol = 1e-5;

}  // namespace rrisk
