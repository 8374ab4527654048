#include "rrisk/acceptance.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace rrisk {

namespace {

using Predicate = std::function<bool(double)>;

double sup_norm(const Position& x) {
    double m = 0.0;
    for (std::size_t i = 0; i < x.n(); ++i) m = std::max(m, std::fabs(x[i]));
    return m;
}

// Smallest m with pred(m), for pred false below the level and true above.
// Bisects down to adjacent doubles.
double bisect_level(const Predicate& pred, const Position& x, std::optional<Bracket> bracket) {
    double lo, hi;
    if (bracket) {
        lo = bracket->lo;
        hi = bracket->hi;
        if (!(lo < hi)) throw std::invalid_argument("bracket: need lo < hi");
        if (pred(lo)) throw BracketError("bracket: level is at or below " + std::to_string(lo));
        if (!pred(hi)) throw BracketError("bracket: level is above " + std::to_string(hi));
    } else {
        const double r = sup_norm(x) + 10.0;
        lo = -r;
        hi = r;
        double width = 2.0 * r;
        int grow = 0;
        while (pred(lo)) {
            if (++grow > 1000 || !std::isfinite(lo)) throw BracketError("bracket: level is -inf or out of range");
            hi = lo;
            lo -= width;
            width *= 2.0;
        }
        width = hi - lo;
        while (!pred(hi)) {
            if (++grow > 1000 || !std::isfinite(hi)) throw BracketError("bracket: level is +inf or out of range");
            lo = hi;
            hi += width;
            width *= 2.0;
        }
    }
    for (int it = 0; it < 2000; ++it) {
        double mid = lo + 0.5 * (hi - lo);
        if (!(mid > lo && mid < hi)) break;
        (pred(mid) ? hi : lo) = mid;
    }
    return hi;
}

void require_hypotheses(const RiskFunctional& rho, const UncertaintyFamily& family, const AcceptanceOptions& o) {
    if (!rho.flags().quasi_convex) throw HypothesisError("hypothesis violation: " + rho.name() + " is not quasi-convex");
    auto v = check_property(family, FamilyProperty::Convex, o.hypothesis_trials, o.seed);
    if (v.is_counterexample())
        throw HypothesisError("hypothesis violation: " + family.name() + " is not convex (" + v.note + ")");
}

}  // namespace

bool is_acceptable(const RiskFunctional& rho, const Position& x, const ExtReal& m) { return rho(x) <= m; }

double acceptance_level(const RiskFunctional& rho, const Position& x, std::optional<Bracket> bracket) {
    const ExtReal v = rho(x);
    return bisect_level([&](double m) { return v <= ExtReal(m); }, x, bracket);
}

RobustAcceptance robust_acceptance_check(const RiskFunctional& rho, const UncertaintyFamily& family,
                                         const Position& x, const ExtReal& m, const AcceptanceOptions& opts) {
    require_hypotheses(rho, family, opts);
    RobustAcceptance r;
    auto robust = robust_value(rho, family, x, opts.solver);
    // the subset side goes through the generic maximizer, without the
    // closed forms robust_value may have used
    auto sup = maximize_over(family, x, [&](const Position& z) { return rho(z); }, ObjectiveTraits::of(rho),
                             opts.solver);
    r.robust = robust.value;
    r.sup_over_family = sup.value;
    r.x_in_robust = robust.value <= m;
    r.U_subset_A = sup.value <= m;
    r.agree = r.x_in_robust == r.U_subset_A;
    r.guarantee = robust.guarantee == Guarantee::Exact && sup.guarantee == Guarantee::Exact ? Guarantee::Exact
                                                                                            : Guarantee::LowerBound;
    return r;
}

double robust_level_by_sets(const RiskFunctional& rho, const UncertaintyFamily& family, const Position& x,
                            std::optional<Bracket> bracket, const AcceptanceOptions& opts, LevelForm form) {
    require_hypotheses(rho, family, opts);
    if (form == LevelForm::Subsets) {
        // U_X inside A^m iff sup over U_X of rho is at most m; the sup does not depend on m
        const ExtReal sup = robust_value(rho, family, x, opts.solver).value;
        return bisect_level([&](double m) { return sup <= ExtReal(m); }, x, bracket);
    }
    if (!rho.flags().cash_additive)
        throw HypothesisError("hypothesis violation: the shifted form needs a cash-additive rho, got " + rho.name());
    const auto traits = ObjectiveTraits::of(rho);
    auto inside_zero_level = [&](double m) {
        auto sup = maximize_over(family, x, [&](const Position& z) { return rho(z + m); }, traits, opts.solver);
        return sup.value <= ExtReal(0.0);
    };
    return bisect_level(inside_zero_level, x, bracket);
}

}  // namespace rrisk
