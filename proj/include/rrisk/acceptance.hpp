#pragma once

#include <optional>
#include <stdexcept>

#include "rrisk/ext_real.hpp"
#include "rrisk/prob_core.hpp"
#include "rrisk/risk_measures.hpp"
#include "rrisk/robustify.hpp"
#include "rrisk/uncertainty.hpp"
#include "rrisk/verdict.hpp"

namespace rrisk {

// The level is not inside the bracket (after expansion, for the default one).
class BracketError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Bracket {
    double lo;
    double hi;
};

// X in A^m = {rho <= m}.
bool is_acceptable(const RiskFunctional& rho, const Position& x, const ExtReal& m);

// inf { m : X in A^m } by bisection. Without a bracket the search starts on
// [-||X||_inf - 10, ||X||_inf + 10] and widens geometrically; an explicit
// bracket is used as given.
double acceptance_level(const RiskFunctional& rho, const Position& x, std::optional<Bracket> bracket = std::nullopt);

struct RobustAcceptance {
    bool x_in_robust = false;  // rho~(X) <= m
    bool U_subset_A = false;   // sup of rho over U_X <= m, from the generic maximizer
    bool agree = false;
    ExtReal robust;
    ExtReal sup_over_family;
    // Exact when both sides were computed exactly; otherwise only
    // x_in_robust => U_subset_A is meaningful.
    Guarantee guarantee = Guarantee::Exact;
};

struct AcceptanceOptions {
    SolverOptions solver;
    std::size_t hypothesis_trials = 200;
    std::uint64_t seed = 0;
};

// X in A^m(rho~) against U_X inside A^m(rho). Requires quasi-convex rho and a
// family whose convexity check finds no counterexample.
RobustAcceptance robust_acceptance_check(const RiskFunctional& rho, const UncertaintyFamily& family,
                                         const Position& x, const ExtReal& m, const AcceptanceOptions& opts = {});

enum class LevelForm {
    Subsets,           // inf { m : U_X inside A^m }
    ShiftedZeroLevel,  // inf { m : U_X + m inside A^0 }, cash-additive rho only
};

double robust_level_by_sets(const RiskFunctional& rho, const UncertaintyFamily& family, const Position& x,
                            std::optional<Bracket> bracket = std::nullopt, const AcceptanceOptions& opts = {},
                            LevelForm form = LevelForm::Subsets);

}  // namespace rrisk
