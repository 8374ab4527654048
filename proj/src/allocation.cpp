#include "rrisk/allocation.hpp"

#include <cmath>
#include <stdexcept>

#include "rrisk/sampling.hpp"

namespace rrisk {

AllocationRule::AllocationRule(std::string name, RiskFunctional base, Fn fn, ObjectiveTraits traits)
    : name_(std::move(name)), base_(std::move(base)), fn_(std::move(fn)), traits_(traits) {}

AllocationRule::AllocationRule(std::string name, RiskFunctional base, SliceFn slice)
    : name_(std::move(name)), base_(std::move(base)), slice_(std::move(slice)) {
    // E_Q[-X] - c is decreasing and affine in X
    traits_.monotone = true;
    traits_.quasi_convex = true;
}

ExtReal AllocationRule::operator()(const Position& x, const Position& y) const {
    if (fn_) return fn_(x, y);
    auto s = slice_(y);
    return ExtReal(-expectation_under(s.q, x) - s.constant);
}

std::optional<LinearSlice> AllocationRule::linear(const Position& y) const {
    if (!slice_) return std::nullopt;
    return slice_(y);
}

Objective AllocationRule::at(const Position& y) const {
    if (fn_) return [fn = fn_, y](const Position& x) { return fn(x, y); };
    auto s = slice_(y);
    return [s](const Position& x) { return ExtReal(-expectation_under(s.q, x) - s.constant); };
}

AllocationRule gradient_car(const RiskFunctional& rho, const SimplexGrid& grid) {
    const auto& f = rho.flags();
    if (!f.convex || !f.cash_additive)
        throw HypothesisError("hypothesis violation: gradient_car needs convex cash-additive rho, got " + rho.name());
    if (!closed_form_penalty(rho, ScenarioMeasure::reference(grid.space())))
        throw HypothesisError("hypothesis violation: no closed-form penalty for " + rho.name());
    auto slice = [rho, grid](const Position& y) {
        auto am = dual_argmax(rho, y, grid);
        ExtReal c = *closed_form_penalty(rho, am.q);
        // the argmax has finite value, so its penalty is finite
        return LinearSlice{am.q, c.value(), am.attained};
    };
    return AllocationRule("gradient_car(" + rho.name() + ")", rho, slice);
}

RobustValue robust_car(const AllocationRule& rule, const UncertaintyFamily& family, const Position& x,
                       const Position& y, const SolverOptions& opts) {
    if (auto s = rule.linear(y)) {
        auto r = support_function(family, s->q, x, opts);
        r.value = r.value - ExtReal(s->constant);
        r.detail = "support function minus penalty: " + r.detail;
        return r;
    }
    return maximize_over(family, x, rule.at(y), rule.traits(), opts);
}

namespace {

Witness pair_witness(const Position& x, const Position& y, double lhs, double rhs) {
    Witness w;
    w.probs = x.space()->probs();
    w.vectors["X"] = x.values();
    w.vectors["Y"] = y.values();
    w.scalars["lhs"] = lhs;
    w.scalars["rhs"] = rhs;
    return w;
}

// a <= b + tol on the extended line
bool le_tol(const ExtReal& a, const ExtReal& b, double tol) {
    if (a.is_neg_inf() || b.is_pos_inf()) return true;
    if (a.is_pos_inf() || b.is_neg_inf()) return false;
    return a.value() <= b.value() + tol;
}

double fin(const ExtReal& v) { return v.is_finite() ? v.value() : (v.is_pos_inf() ? HUGE_VAL : -HUGE_VAL); }

// rho~(X) from the solver, raised to rho(Z) for any further member Z of U_X
// (each such value is a lower bound on the sup).
struct RobustRho {
    ExtReal value;
    double slack;
};

RobustRho robust_rho(const RiskFunctional& rho, const UncertaintyFamily& family, const Position& x,
                     const std::optional<Position>& extra, const SolverOptions& opts) {
    auto r = robust_value(rho, family, x, opts);
    ExtReal v = r.value;
    if (r.guarantee == Guarantee::LowerBound && extra && family.contains(x, *extra)) v = max(v, rho(*extra));
    return {v, kAnalyticTol + (r.guarantee == Guarantee::LowerBound ? kGridTol : 0.0)};
}

}  // namespace

PropertyVerdict check_car_identity(const AllocationRule& rule, const SpacePtr& space, std::size_t samples,
                                   std::uint64_t seed, double tol) {
    Rng rng(seed);
    const auto& rho = rule.base();
    for (std::size_t t = 0; t < samples; ++t) {
        auto y = rng.position(space, -3.0, 3.0);
        ExtReal a = rule(y, y), b = rho(y);
        bool ok = a == b || (a.is_finite() && b.is_finite() && std::fabs(a.value() - b.value()) <= tol);
        if (!ok)
            return PropertyVerdict::counterexample(pair_witness(y, y, fin(a), fin(b)),
                                                   "Lambda(Y, Y) != rho(Y) for " + rule.name());
    }
    return PropertyVerdict::sampled(samples, "|Lambda(Y, Y) - rho(Y)| <= " + std::to_string(tol));
}

PropertyVerdict check_no_undercut(const AllocationRule& rule, const UncertaintyFamily& family,
                                  const SpacePtr& space, std::size_t samples, std::uint64_t seed,
                                  const SolverOptions& opts) {
    Rng rng(seed);
    const auto& rho = rule.base();
    std::vector<std::pair<Position, Position>> pairs;
    for (std::size_t t = 0; t < samples; ++t) {
        auto y = rng.position(space, -3.0, 3.0);
        auto x = t % 5 == 0 ? y : rng.position(space, -3.0, 3.0);
        pairs.emplace_back(x, y);
    }
    // the base rule first: a violation there is reported as such
    for (const auto& [x, y] : pairs) {
        ExtReal l = rule(x, y), r = rho(x);
        if (!le_tol(l, r, kAnalyticTol))
            return PropertyVerdict::counterexample(pair_witness(x, y, fin(l), fin(r)),
                                                   "base rule undercuts: Lambda(X, Y) > rho(X)");
    }
    for (const auto& [x, y] : pairs) {
        auto l = robust_car(rule, family, x, y, opts);
        auto r = robust_rho(rho, family, x, l.witness, opts);
        if (!le_tol(l.value, r.value, r.slack))
            return PropertyVerdict::counterexample(pair_witness(x, y, fin(l.value), fin(r.value)),
                                                   "Lambda~(X, Y) > rho~(X)");
    }
    return PropertyVerdict::sampled(samples, "base and robust no-undercut on every pair");
}

PropertyVerdict check_sandwich(const AllocationRule& rule, const UncertaintyFamily& family, const SpacePtr& space,
                               std::size_t samples, std::uint64_t seed, const SolverOptions& opts) {
    Rng rng(seed);
    const auto& rho = rule.base();
    std::vector<Position> ys;
    for (std::size_t t = 0; t < samples; ++t) {
        auto y = rng.position(space, -3.0, 3.0);
        if (!family.contains(y, y)) return PropertyVerdict::unknown("hypothesis failure: Y is not in U_Y");
        auto x = rng.position(space, -3.0, 3.0);
        if (!le_tol(rule(x, y), rho(x), kAnalyticTol) || !le_tol(rule(y, y), rho(y), kAnalyticTol))
            return PropertyVerdict::unknown("hypothesis failure: the base rule undercuts");
        ys.push_back(y);
    }
    for (const auto& y : ys) {
        ExtReal base = rho(y);
        auto mid = robust_car(rule, family, y, y, opts);
        if (!le_tol(base, mid.value, kAnalyticTol))
            return PropertyVerdict::counterexample(pair_witness(y, y, fin(base), fin(mid.value)),
                                                   "rho(Y) > Lambda~(Y, Y)");
        auto top = robust_rho(rho, family, y, mid.witness, opts);
        if (!le_tol(mid.value, top.value, top.slack))
            return PropertyVerdict::counterexample(pair_witness(y, y, fin(mid.value), fin(top.value)),
                                                   "Lambda~(Y, Y) > rho~(Y)");
    }
    return PropertyVerdict::sampled(samples, "rho(Y) <= Lambda~(Y, Y) <= rho~(Y) on every sample");
}

PropertyVerdict check_subadditive_allocation(const AllocationRule& rule, const UncertaintyFamily& family,
                                             const std::vector<Partition>& instances, const SolverOptions& opts,
                                             std::uint64_t seed) {
    std::size_t checked = 0, skipped = 0, with_sum = 0;
    for (std::size_t k = 0; k < instances.size(); ++k) {
        const auto& inst = instances[k];
        const auto& y = inst.y;
        if (inst.parts.empty()) throw std::invalid_argument("sub-allocation: empty partition");
        Position total = Position::constant(y.space(), 0.0);
        for (const auto& p : inst.parts) total += p;
        for (std::size_t i = 0; i < y.n(); ++i)
            if (std::fabs(total[i] - y[i]) > 1e-9 * (1.0 + std::fabs(y[i])))
                throw std::invalid_argument("sub-allocation: parts do not sum to Y");

        // covering hypothesis on sampled members of U_Y
        auto members = family.discretize(y, 0.05, 200, derive_seed(seed, k));
        members.push_back(y);
        bool covered = true;
        for (const auto& z : members) {
            bool in_some = false;
            for (const auto& p : inst.parts) in_some = in_some || family.contains(p, z);
            if (!in_some) {
                covered = false;
                break;
            }
        }
        if (!covered) {
            ++skipped;
            continue;
        }
        ++checked;

        auto lhs = robust_car(rule, family, y, y, opts);
        ExtReal mx = ExtReal::neg_inf(), sum(0.0);
        double slack = kAnalyticTol;
        bool zero_in_all = true;
        const auto zero = Position::constant(y.space(), 0.0);
        for (const auto& p : inst.parts) {
            auto r = robust_car(rule, family, p, y, opts);
            if (r.guarantee == Guarantee::LowerBound) slack = kAnalyticTol + kGridTol;
            mx = max(mx, r.value);
            sum = sum + r.value;
            zero_in_all = zero_in_all && family.contains(p, zero);
        }
        if (!le_tol(lhs.value, mx, slack)) {
            auto w = pair_witness(y, y, fin(lhs.value), fin(mx));
            for (std::size_t i = 0; i < inst.parts.size(); ++i)
                w.vectors["Y" + std::to_string(i + 1)] = inst.parts[i].values();
            return PropertyVerdict::counterexample(w, "Lambda~(Y, Y) > max_i Lambda~(Y_i, Y)");
        }
        ExtReal at_zero = rule(zero, y);
        if (zero_in_all && le_tol(ExtReal(0.0), at_zero, 1e-12)) {
            ++with_sum;
            if (!le_tol(lhs.value, sum, slack * static_cast<double>(inst.parts.size()))) {
                auto w = pair_witness(y, y, fin(lhs.value), fin(sum));
                for (std::size_t i = 0; i < inst.parts.size(); ++i)
                    w.vectors["Y" + std::to_string(i + 1)] = inst.parts[i].values();
                return PropertyVerdict::counterexample(w, "Lambda~(Y, Y) > sum_i Lambda~(Y_i, Y)");
            }
        }
    }
    const std::string tally = std::to_string(checked) + " checked (" + std::to_string(with_sum) +
                              " with the sum form), " + std::to_string(skipped) + " skipped";
    if (checked == 0)
        return PropertyVerdict::unknown("hypothesis failure: the U_{Y_i} do not cover U_Y; " + tally);
    return PropertyVerdict::sampled(checked, tally);
}

}  // namespace rrisk
