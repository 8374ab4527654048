#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rrisk/duality.hpp"
#include "rrisk/ext_real.hpp"
#include "rrisk/prob_core.hpp"
#include "rrisk/risk_measures.hpp"
#include "rrisk/robustify.hpp"
#include "rrisk/uncertainty.hpp"
#include "rrisk/verdict.hpp"

namespace rrisk {

// Lambda(., Y) = E_Q[-.] - constant.
struct LinearSlice {
    ScenarioMeasure q;
    double constant = 0.0;
    bool attained = false;  // E_Q[-Y] - constant reached rho(Y) within 1e-9
};

// A capital allocation rule Lambda(X, Y) for base_rho: Y is the aggregate
// portfolio, X the sub-portfolio.
class AllocationRule {
public:
    using Fn = std::function<ExtReal(const Position& x, const Position& y)>;
    using SliceFn = std::function<LinearSlice(const Position& y)>;

    // An arbitrary rule; traits describe X -> Lambda(X, Y) to the maximizer.
    AllocationRule(std::string name, RiskFunctional base, Fn fn, ObjectiveTraits traits = {});
    // A rule that is affine in X for each Y.
    AllocationRule(std::string name, RiskFunctional base, SliceFn slice);

    ExtReal operator()(const Position& x, const Position& y) const;
    std::optional<LinearSlice> linear(const Position& y) const;
    // X -> Lambda(X, Y) with the Y-dependent work done once.
    Objective at(const Position& y) const;

    const std::string& name() const { return name_; }
    const RiskFunctional& base() const { return base_; }
    const ObjectiveTraits& traits() const { return traits_; }

private:
    std::string name_;
    RiskFunctional base_;
    Fn fn_;
    SliceFn slice_;
    ObjectiveTraits traits_;
};

// Lambda(X, Y) = E_{Q*}[-X] - c(Q*) with Q* the dual argmax for rho(Y) over
// the grid (ties as in dual_argmax). Needs convex cash-additive rho with a
// closed-form penalty.
AllocationRule gradient_car(const RiskFunctional& rho, const SimplexGrid& grid);

// Lambda~(X, Y) = sup over U_X of Lambda(., Y). Affine rules go through the
// support function of the family.
RobustValue robust_car(const AllocationRule& rule, const UncertaintyFamily& family, const Position& x,
                       const Position& y, const SolverOptions& opts = {});

// |Lambda(Y, Y) - rho(Y)| <= tol on sampled Y.
PropertyVerdict check_car_identity(const AllocationRule& rule, const SpacePtr& space, std::size_t samples,
                                   std::uint64_t seed, double tol = kGridTol);

// Lambda~(X, Y) <= rho~(X) on sampled pairs, after checking Lambda(X, Y) <= rho(X)
// on the same pairs.
PropertyVerdict check_no_undercut(const AllocationRule& rule, const UncertaintyFamily& family,
                                  const SpacePtr& space, std::size_t samples, std::uint64_t seed,
                                  const SolverOptions& opts = {});

// rho(Y) <= Lambda~(Y, Y) <= rho~(Y) on sampled Y.
PropertyVerdict check_sandwich(const AllocationRule& rule, const UncertaintyFamily& family, const SpacePtr& space,
                               std::size_t samples, std::uint64_t seed, const SolverOptions& opts = {});

struct Partition {
    Position y;
    std::vector<Position> parts;  // sums to y
};

// Lambda~(Y, Y) <= max_i Lambda~(Y_i, Y) when the U_{Y_i} cover U_Y, and
// <= sum_i Lambda~(Y_i, Y) when also 0 is in every U_{Y_i} and Lambda(0, Y) >= 0.
// Instances failing the covering hypothesis are skipped; the verdict is
// Unknown when all of them are.
PropertyVerdict check_subadditive_allocation(const AllocationRule& rule, const UncertaintyFamily& family,
                                             const std::vector<Partition>& instances,
                                             const SolverOptions& opts = {}, std::uint64_t seed = 0);

}  // namespace rrisk
