#include "rrisk/robustify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rrisk/sampling.hpp"

namespace rrisk {

std::string to_string(SolverKind s) {
    switch (s) {
        case SolverKind::Auto: return "auto";
        case SolverKind::Analytic: return "analytic";
        case SolverKind::VertexEnum: return "vertex_enum";
        case SolverKind::Grid: return "grid";
        case SolverKind::ProjectedAscent: return "projected_ascent";
    }
    return "?";
}

std::string to_string(Guarantee g) { return g == Guarantee::Exact ? "exact" : "lower_bound"; }

SolverKind solver_kind_from_string(const std::string& s) {
    for (auto k : {SolverKind::Auto, SolverKind::Analytic, SolverKind::VertexEnum, SolverKind::Grid,
                   SolverKind::ProjectedAscent})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown solver: " + s);
}

ObjectiveTraits ObjectiveTraits::of(const RiskFunctional& rho) {
    ObjectiveTraits t;
    t.monotone = rho.flags().monotone;
    t.quasi_convex = rho.flags().quasi_convex || rho.flags().convex;
    t.law_invariant = rho.flags().law_invariant;
    return t;
}

namespace {

constexpr std::size_t kMaxVertexDim = 20;

bool uniform(const ProbSpace& s) {
    return std::all_of(s.probs().begin(), s.probs().end(), [&](double p) { return p == s.prob(0); });
}

bool is_sup_ball(const UncertaintyFamily& f) {
    return f.kind() == FamilyKind::SupNormBall || (f.kind() == FamilyKind::PNormBall && std::isinf(f.p()));
}

bool is_ball(const UncertaintyFamily& f) {
    return f.kind() == FamilyKind::SupNormBall || f.kind() == FamilyKind::PNormBall ||
           f.kind() == FamilyKind::WassersteinBall;
}

// Value-then-lexicographic ordering of candidates.
struct Best {
    ExtReal value = ExtReal::neg_inf();
    std::optional<Position> z;

    bool offer(const Position& cand, const ExtReal& v) {
        if (!z || v > value || (v == value && lex_less(cand, *z))) {
            value = v;
            z = cand;
            return true;
        }
        return false;
    }
};

RobustValue make(const ExtReal& v, std::optional<Position> z, SolverKind s, Guarantee g, std::string detail) {
    RobustValue r;
    r.value = v;
    r.witness = std::move(z);
    r.solver = s;
    r.guarantee = g;
    r.detail = std::move(detail);
    return r;
}

// Vertices of a bounded polytope family, or nullopt when U_X is not one.
std::optional<std::vector<Position>> polytope_vertices(const UncertaintyFamily& f, const Position& x) {
    if (f.solidified()) return std::nullopt;
    const std::size_t n = x.n();
    const double e = f.eps();
    if (is_sup_ball(f)) {
        if (n > kMaxVertexDim) return std::nullopt;
        std::vector<Position> out;
        out.reserve(std::size_t{1} << n);
        for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
            std::vector<double> v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = x[i] + ((mask >> i) & 1 ? e : -e);
            out.emplace_back(x.space(), v);
        }
        return out;
    }
    if (f.kind() == FamilyKind::PNormBall && f.p() == 1.0) {
        std::vector<Position> out;
        for (std::size_t i = 0; i < n; ++i)
            for (double sg : {-1.0, 1.0}) {
                auto v = x.values();
                v[i] += sg * e / x.space()->prob(i);
                out.emplace_back(x.space(), v);
            }
        return out;
    }
    return std::nullopt;
}

RobustValue ascent(const UncertaintyFamily& f, const Position& x, const Objective& obj, const SolverOptions& o,
                   bool refine) {
    Best best;
    auto pts = f.discretize(x, o.resolution, o.budget, o.seed);
    std::vector<ExtReal> vals;
    vals.reserve(pts.size());
    for (const auto& z : pts) {
        ExtReal v = obj(z);
        vals.push_back(v);
        best.offer(z, v);
    }
    if (best.value.is_pos_inf() || !refine)
        return make(best.value, best.z, refine ? SolverKind::ProjectedAscent : SolverKind::Grid, Guarantee::LowerBound,
                    "discretize(" + std::to_string(pts.size()) + " points)");

    // restarts: the best grid point plus random grid points
    Rng rng(derive_seed(o.seed, 1));
    std::vector<Position> starts{*best.z};
    for (std::size_t r = 1; r < o.restarts && pts.size() > 1; ++r) starts.push_back(pts[rng.index(pts.size())]);

    const std::size_t n = x.n();
    const double step0 = std::max(o.resolution, 0.25 * f.eps());
    for (const auto& s : starts) {
        Position z = s;
        ExtReal v = obj(z);
        if (!v.is_finite()) continue;
        double step = step0;
        for (std::size_t it = 0; it < o.max_iterations && step >= o.min_step; ++it) {
            std::vector<double> g(n);
            double gmax = 0.0;
            bool ok = true;
            for (std::size_t i = 0; i < n; ++i) {
                double h = 1e-6 * (1.0 + std::fabs(z[i]));
                auto up = z.values(), dn = z.values();
                up[i] += h;
                dn[i] -= h;
                ExtReal a = obj(Position(x.space(), up)), b = obj(Position(x.space(), dn));
                if (!a.is_finite() || !b.is_finite()) {
                    ok = false;
                    break;
                }
                g[i] = (a.value() - b.value()) / (2.0 * h);
                gmax = std::max(gmax, std::fabs(g[i]));
            }
            if (!ok || gmax == 0.0 || !std::isfinite(gmax)) break;
            std::vector<double> t(n);
            for (std::size_t i = 0; i < n; ++i) t[i] = z[i] + step * g[i] / gmax;
            // negligible gains count as failures so the step keeps shrinking
            auto gains = [&](const ExtReal& vc) {
                return vc > v && (vc.is_pos_inf() || vc.value() - v.value() > 1e-13 * (1.0 + std::fabs(v.value())));
            };
            Position cand = f.project(x, x, Position(x.space(), t));
            ExtReal vc = obj(cand);
            bool moved = gains(vc);
            // Projection pulls back towards x, so on a non-round boundary the
            // gradient step can stall away from the optimum; axis moves do not.
            for (std::size_t i = 0; !moved && i < 2 * n; ++i) {
                auto w = z.values();
                w[i / 2] += i % 2 ? -step : step;
                cand = f.project(x, x, Position(x.space(), w));
                vc = obj(cand);
                moved = gains(vc);
            }
            if (moved) {
                z = cand;
                v = vc;
                if (v.is_pos_inf()) break;
                step = std::min(2.0 * step, step0);
            } else {
                step *= 0.5;
            }
        }
        best.offer(z, v);
        if (best.value.is_pos_inf()) break;
    }
    return make(best.value, best.z, SolverKind::ProjectedAscent, Guarantee::LowerBound,
                "discretize(" + std::to_string(pts.size()) + " points) + ascent(" + std::to_string(starts.size()) +
                    " restarts)");
}

}  // namespace

RobustValue maximize_over(const UncertaintyFamily& family, const Position& x, const Objective& f,
                          const ObjectiveTraits& traits, const SolverOptions& opts) {
    // On uniform spaces W_p(Z, X) = min over permutations of ||Z - X o sigma||_p,
    // so a law-invariant objective sees the same sup over the L^p ball.
    UncertaintyFamily eff = family;
    std::string via;
    if (family.kind() == FamilyKind::WassersteinBall && !family.solidified() && traits.law_invariant &&
        uniform(*x.space())) {
        eff = p_norm_ball(family.p(), family.eps());
        via = " via L^p ball (law invariance on a uniform space)";
    }
    const SolverKind k = opts.kind;

    if (k == SolverKind::Auto || k == SolverKind::Analytic) {
        if (is_ball(eff) && !eff.solidified() && eff.eps() == 0.0)
            return make(f(x), x, SolverKind::Analytic, Guarantee::Exact, "degenerate ball: U_X = {X}");
        if (traits.monotone && is_sup_ball(eff)) {
            Position z = x - eff.eps();
            return make(f(z), z, SolverKind::Analytic, Guarantee::Exact, "monotone objective: Z* = X - eps" + via);
        }
        if (k == SolverKind::Analytic) throw std::invalid_argument("no applicable solver: analytic");
    }

    if (k == SolverKind::Auto || k == SolverKind::VertexEnum) {
        auto verts = traits.quasi_convex ? polytope_vertices(eff, x) : std::nullopt;
        if (verts) {
            Best best;
            for (const auto& z : *verts) best.offer(z, f(z));
            return make(best.value, best.z, SolverKind::VertexEnum, Guarantee::Exact,
                        "max over " + std::to_string(verts->size()) + " vertices" + via);
        }
        if (k == SolverKind::VertexEnum) {
            if (is_sup_ball(eff) && x.n() > kMaxVertexDim)
                throw std::invalid_argument("vertex enumeration: n > 20");
            throw std::invalid_argument("no applicable solver: vertex enumeration needs a quasi-convex objective "
                                        "over a polytope family");
        }
    }

    auto r = ascent(eff, x, f, opts, k != SolverKind::Grid);
    r.detail += via;
    return r;
}

namespace {

std::optional<RobustValue> robust_closed_form(const RiskFunctional& rho, const UncertaintyFamily& f,
                                              const Position& x) {
    const double e = f.eps();
    const RiskKind rk = rho.kind();
    if (rk == RiskKind::ExpectationFloor && is_sup_ball(f)) {
        double K = rho.params().K;
        return make(ExtReal(std::max(-expectation(x) + e, K)), x - e, SolverKind::Analytic, Guarantee::Exact,
                    "expectation floor over a sup ball: max(E[-X] + eps, K)");
    }
    if (rk == RiskKind::NegExpectation && f.kind() == FamilyKind::WassersteinBall && !f.solidified())
        return make(ExtReal(-expectation(x) + e), x - e, SolverKind::Analytic, Guarantee::Exact,
                    "E[-Z] <= E[-X] + W_1 <= E[-X] + W_p, attained at X - eps");
    if (f.kind() != FamilyKind::LevelUpperSet || f.solidified()) return std::nullopt;

    const RiskFunctional& r1 = *f.rho1();
    ExtReal level = r1(x);
    if (!level.is_finite()) return std::nullopt;
    const double c = level.value() + e;
    if (r1.signature() == rho.signature()) {
        if (rho.flags().cash_additive)
            return make(ExtReal(c), x - e, SolverKind::Analytic, Guarantee::Exact,
                        "cash-additive rho with its own upper level set: rho(X) + eps");
        if (rk == RiskKind::ExpectationFloor) {
            // max(E[-X] + k, K) reaches c at k = c - E[-X] >= 0
            double k = c + expectation(x);
            return make(ExtReal(c), x - std::max(k, 0.0), SolverKind::Analytic, Guarantee::Exact,
                        "expectation floor with its own upper level set: rho(X) + eps");
        }
    }
    if (r1.kind() == RiskKind::Entropic) {
        // Jensen: every listed rho is at most entropic(gamma), with equality on constants
        const double gamma = r1.params().gamma;
        auto z = Position::constant(x.space(), -c);
        std::string why = "entropic upper level set, rho <= entropic(gamma) with equality on constants";
        switch (rk) {
            case RiskKind::NegExpectation: return make(ExtReal(c), z, SolverKind::Analytic, Guarantee::Exact, why);
            case RiskKind::Entropic:
                if (rho.params().gamma <= gamma)
                    return make(ExtReal(c), z, SolverKind::Analytic, Guarantee::Exact, why);
                break;
            case RiskKind::ExpectationFloor:
                return make(ExtReal(std::max(c, rho.params().K)), z, SolverKind::Analytic, Guarantee::Exact, why);
            case RiskKind::CertaintyEquivalent:
                if (rho.loss() && rho.loss()->family == LossFunction::Family::Exponential && rho.loss()->rate <= gamma)
                    return make(ExtReal(c), z, SolverKind::Analytic, Guarantee::Exact, why);
                break;
            default: break;
        }
    }
    return std::nullopt;
}

}  // namespace

RobustValue robust_value(const RiskFunctional& rho, const UncertaintyFamily& family, const Position& x,
                         const SolverOptions& opts) {
    if (opts.kind == SolverKind::Auto || opts.kind == SolverKind::Analytic)
        if (auto r = robust_closed_form(rho, family, x)) return *r;
    return maximize_over(family, x, [&](const Position& z) { return rho(z); }, ObjectiveTraits::of(rho), opts);
}

bool largest_family_member(const RiskFunctional& rho, const ExtReal& robust, const Position& z, double tol) {
    ExtReal v = rho(z);
    if (robust.is_pos_inf() || v.is_neg_inf()) return true;
    if (!robust.is_finite() || !v.is_finite()) return false;
    return v.value() <= robust.value() + tol;
}

namespace {

double slack(const RobustValue& larger) {
    return kAnalyticTol + (larger.guarantee == Guarantee::LowerBound ? kGridTol : 0.0);
}

// a <= b + tol on the extended line
bool le_tol(const ExtReal& a, const ExtReal& b, double tol) {
    if (a.is_neg_inf() || b.is_pos_inf()) return true;
    if (a.is_pos_inf() || b.is_neg_inf()) return false;
    return a.value() <= b.value() + tol;
}

Witness witness_on(const SpacePtr& s) {
    Witness w;
    w.probs = s->probs();
    return w;
}

struct Hypothesis {
    bool ok = false;
    std::string item;
    std::string why;
};

Hypothesis preservation_hypothesis(const RiskFunctional& rho, const UncertaintyFamily& f, Axiom a, std::size_t trials,
                                   std::uint64_t seed) {
    const std::size_t ht = std::min<std::size_t>(trials, 200);
    auto holds = [&](FamilyProperty p) { return check_property(f, p, ht, seed).holds(); };
    const auto& fl = rho.flags();
    switch (a) {
        case Axiom::Monotone:
            if (holds(FamilyProperty::Monotone)) return {true, "a) monotone family", ""};
            if (fl.monotone && holds(FamilyProperty::OrderPreserving))
                return {true, "a) order preserving family, monotone rho", ""};
            return {false, "a)", "family neither monotone nor order preserving with a monotone rho"};
        case Axiom::Convex:
            if (fl.convex && holds(FamilyProperty::Convex)) return {true, "b) convex rho, convex family", ""};
            return {false, "b)", "needs convex rho and a convex family"};
        case Axiom::QuasiConvex:
            if (holds(FamilyProperty::CQuasiConvex)) return {true, "c) c-quasi-convex family", ""};
            if (holds(FamilyProperty::QuasiConvex)) return {true, "c) quasi-convex family", ""};
            if ((fl.quasi_convex || fl.convex) && holds(FamilyProperty::Convex))
                return {true, "d) quasi-convex rho, convex family", ""};
            return {false, "c)/d)", "family not (c-)quasi-convex, and not convex with a quasi-convex rho"};
        case Axiom::ContinuousFromAbove:
            if (holds(FamilyProperty::Monotone) && holds(FamilyProperty::ContinuousFromAbove))
                return {true, "e) monotone family continuous from above", ""};
            return {false, "e)", "family not monotone and continuous from above"};
        case Axiom::LawInvariant:
            if (holds(FamilyProperty::LawInvariant)) return {true, "f) law invariant family", ""};
            return {false, "f)", "family not law invariant"};
        default: return {false, "", "property not covered by the preservation results"};
    }
}

}  // namespace

PropertyVerdict verify_preservation(const RiskFunctional& rho, const UncertaintyFamily& family, Axiom property,
                                    std::size_t trials, std::uint64_t seed, const SolverOptions& opts) {
    if (trials == 0) throw std::invalid_argument("verify_preservation: trials must be >= 1");
    auto hyp = preservation_hypothesis(rho, family, property, trials, seed);
    if (!hyp.ok) return PropertyVerdict::unknown("hypothesis violation " + hyp.item + ": " + hyp.why);

    Rng rng(derive_seed(seed, 77));
    const bool uni = family.kind() == FamilyKind::WassersteinBall || property == Axiom::LawInvariant;
    auto rt = [&](const Position& p) { return robust_value(rho, family, p, opts); };
    for (std::size_t t = 0; t < trials; ++t) {
        std::size_t n = 2 + rng.index(2);
        auto s = uni ? uniform_space(n) : make_space(rng.probs(n));
        auto x = rng.position(s, -2.0, 2.0);
        Witness w = witness_on(s);
        w.vectors["X"] = x.values();
        bool bad = false;
        switch (property) {
            case Axiom::Monotone: {
                auto y = x + rng.nonneg(s, 1.0);
                auto rx = rt(x), ry = rt(y);
                bad = !le_tol(ry.value, rx.value, slack(rx));
                w.vectors["Y"] = y.values();
                break;
            }
            case Axiom::Convex:
            case Axiom::QuasiConvex: {
                auto y = rng.position(s, -2.0, 2.0);
                double lam = rng.uniform(0.0, 1.0);
                auto rx = rt(x), ry = rt(y), rm = rt(mix(lam, x, y));
                double tol = std::max(slack(rx), slack(ry));
                if (property == Axiom::Convex) {
                    ExtReal rhs = rx.value.is_finite() && ry.value.is_finite()
                                      ? ExtReal(lam * rx.value.value() + (1 - lam) * ry.value.value())
                                      : max(rx.value, ry.value);
                    bad = !le_tol(rm.value, rhs, tol);
                } else {
                    bad = !le_tol(rm.value, max(rx.value, ry.value), tol);
                }
                w.vectors["Y"] = y.values();
                w.scalars["lambda"] = lam;
                break;
            }
            case Axiom::ContinuousFromAbove: {
                auto d = rng.nonneg(s, 1.0);
                auto rx = rt(x), rn = rt(x + std::ldexp(1.0, -40) * d);
                bad = !le_tol(rx.value, rn.value, slack(rn)) || !le_tol(rn.value, rx.value, slack(rx));
                w.vectors["Delta"] = d.values();
                break;
            }
            case Axiom::LawInvariant: {
                auto perm = rng.law_preserving_permutation(*s);
                auto xp = permute(x, perm);
                auto rx = rt(x), rp = rt(xp);
                bad = !le_tol(rx.value, rp.value, slack(rp)) || !le_tol(rp.value, rx.value, slack(rx));
                w.vectors["Xp"] = xp.values();
                break;
            }
            default: break;
        }
        if (bad) return PropertyVerdict::counterexample(w, "conclusion of " + hyp.item + " fails for rho~");
    }
    return PropertyVerdict::sampled(trials, hyp.item);
}

LargestFamilyVerdicts largest_family_properties(const RiskFunctional& rho, const UncertaintyFamily& family,
                                                std::size_t trials, std::uint64_t seed, const SolverOptions& opts) {
    Rng rng(derive_seed(seed, 91));
    const bool uni = family.kind() == FamilyKind::WassersteinBall;
    auto space = [&] {
        std::size_t n = 2 + rng.index(2);
        return uni ? uniform_space(n) : make_space(rng.probs(n));
    };
    auto rt = [&](const Position& p) { return robust_value(rho, family, p, opts); };
    // members of U_P (hence of the largest family at P) plus random nearby positions
    auto candidates = [&](const Position& p, const RobustValue& rv) {
        auto c = family.discretize(p, 0.1, 12, rng.engine()());
        if (rv.witness) c.push_back(*rv.witness);
        for (int k = 0; k < 8; ++k) c.push_back(p + rng.position(p.space(), -1.0, 1.0));
        return c;
    };
    const std::size_t max_draws = 50 * trials;
    LargestFamilyVerdicts out;

    // solidity
    {
        std::size_t tested = 0;
        std::optional<PropertyVerdict> bad;
        for (std::size_t d = 0; d < max_draws && tested < trials && !bad; ++d) {
            auto s = space();
            auto x = rng.position(s, -2.0, 2.0);
            auto rv = rt(x);
            for (const auto& z : candidates(x, rv)) {
                if (!largest_family_member(rho, rv.value, z)) continue;
                ++tested;
                auto k = rng.nonneg(s, 2.0);
                if (!largest_family_member(rho, rv.value, z + k, kAnalyticTol)) {
                    Witness w = witness_on(s);
                    w.vectors = {{"X", x.values()}, {"Z", z.values()}, {"K", k.values()}};
                    bad = PropertyVerdict::counterexample(w, "Z in the largest family, Z + K is not");
                    break;
                }
            }
        }
        out.solid = bad ? *bad : PropertyVerdict::sampled(tested);
    }
    // monotonicity: X <= Y gives the family at Y inside the family at X
    {
        std::size_t tested = 0;
        std::optional<PropertyVerdict> bad;
        for (std::size_t d = 0; d < max_draws && tested < trials && !bad; ++d) {
            auto s = space();
            auto x = rng.position(s, -2.0, 2.0);
            auto y = x + rng.nonneg(s, 1.0);
            auto rx = rt(x), ry = rt(y);
            for (const auto& z : candidates(y, ry)) {
                if (!largest_family_member(rho, ry.value, z)) continue;
                ++tested;
                if (!largest_family_member(rho, rx.value, z, slack(rx))) {
                    Witness w = witness_on(s);
                    w.vectors = {{"X", x.values()}, {"Y", y.values()}, {"Z", z.values()}};
                    bad = PropertyVerdict::counterexample(w, "Z in the family at Y but not at X although X <= Y");
                    break;
                }
            }
        }
        out.monotone = bad ? *bad : PropertyVerdict::sampled(tested);
    }
    // quasi-convexity, when rho~ is known to be quasi-convex
    {
        auto hyp = preservation_hypothesis(rho, family, Axiom::QuasiConvex, trials, seed);
        if (!hyp.ok) {
            out.quasi_convex = PropertyVerdict::unknown("rho~ not known to be quasi-convex: " + hyp.why);
        } else {
            std::size_t tested = 0;
            std::optional<PropertyVerdict> bad;
            for (std::size_t d = 0; d < max_draws && tested < trials && !bad; ++d) {
                auto s = space();
                auto x = rng.position(s, -2.0, 2.0), y = rng.position(s, -2.0, 2.0);
                double lam = rng.uniform(0.0, 1.0);
                auto m = mix(lam, x, y);
                auto rx = rt(x), ry = rt(y), rm = rt(m);
                ExtReal top = max(rx.value, ry.value);
                double tol = std::max(slack(rx), slack(ry));
                for (const auto& z : candidates(m, rm)) {
                    if (!largest_family_member(rho, rm.value, z)) continue;
                    ++tested;
                    if (!largest_family_member(rho, top, z, tol)) {
                        Witness w = witness_on(s);
                        w.vectors = {{"X", x.values()}, {"Y", y.values()}, {"Z", z.values()}};
                        w.scalars["lambda"] = lam;
                        bad = PropertyVerdict::counterexample(w, "Z in the family at M outside both end families");
                        break;
                    }
                }
            }
            out.quasi_convex = bad ? *bad : PropertyVerdict::sampled(tested, hyp.item);
        }
    }
    return out;
}

}  // namespace rrisk
