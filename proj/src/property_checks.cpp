#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include "rrisk/sampling.hpp"
#include "rrisk/uncertainty.hpp"

namespace rrisk {

namespace {

constexpr std::size_t kCandidates = 24;
constexpr int kChainLength = 48;

bool ball_like(const UncertaintyFamily& f) {
    return f.kind() == FamilyKind::SupNormBall || f.kind() == FamilyKind::PNormBall ||
           f.kind() == FamilyKind::WassersteinBall;
}

bool norm_ball(const UncertaintyFamily& f) {
    return f.kind() == FamilyKind::SupNormBall || f.kind() == FamilyKind::PNormBall;
}

bool level(const UncertaintyFamily& f) {
    return f.kind() == FamilyKind::LevelBand || f.kind() == FamilyKind::LevelUpperSet;
}

// Decided non-membership. On solidified families an undecided solid test is
// not evidence against membership.
bool excludes(const UncertaintyFamily& f, const Position& x, const Position& z) {
    if (f.solidified()) return f.solid_contains(x, z) == std::optional<bool>(false);
    return !f.contains(x, z);
}

Witness witness_of(const SpacePtr& s, std::initializer_list<std::pair<const char*, const Position*>> vecs,
                   std::initializer_list<std::pair<const char*, double>> scalars = {}) {
    Witness w;
    w.probs = s->probs();
    for (auto& [k, v] : vecs) w.vectors[k] = v->values();
    for (auto& [k, v] : scalars) w.scalars[k] = v;
    return w;
}

class Sampler {
public:
    Sampler(const UncertaintyFamily& f, std::uint64_t seed, bool uniform)
        : f_(f), rng_(seed), uniform_(uniform), range_(2.0 + 10.0 * f.eps()) {}

    SpacePtr space() {
        std::size_t n = 2 + rng_.index(2);
        return uniform_ ? uniform_space(n) : make_space(rng_.probs(n));
    }
    Position position(const SpacePtr& s) { return rng_.position(s, -range_, range_); }
    Position nonneg(const SpacePtr& s) { return rng_.nonneg(s, 1.0 + 2.0 * f_.eps()); }
    double uniform(double a, double b) { return rng_.uniform(a, b); }
    Rng& rng() { return rng_; }

    std::vector<Position> members(const Position& x) {
        double res = f_.eps() > 0.0 ? f_.eps() / 2.0 : 0.5;
        return f_.discretize(x, res, kCandidates, derive_seed(rng_.engine()(), 0));
    }

private:
    const UncertaintyFamily& f_;
    Rng rng_;
    bool uniform_;
    double range_;
};

bool wants_uniform(const UncertaintyFamily& f, FamilyProperty p) {
    return f.kind() == FamilyKind::WassersteinBall || p == FamilyProperty::LawInvariant;
}

// Classic two-point witness on a uniform 2-atom space: X = 0, Y = 10 eps,
// the midpoint raised by eps/2.
std::optional<Witness> classic_qc_witness(const UncertaintyFamily& f) {
    if (!ball_like(f) || f.eps() == 0.0) return std::nullopt;
    auto s = uniform_space(2);
    double e = f.eps();
    auto x = Position::constant(s, 0.0), y = Position::constant(s, 10.0 * e);
    auto m = mix(0.5, x, y);
    auto z = m + 0.5 * e;
    if (f.contains(m, z) && excludes(f, x, z) && excludes(f, y, z))
        return witness_of(s, {{"X", &x}, {"Y", &y}, {"Z", &z}}, {{"lambda", 0.5}});
    return std::nullopt;
}

// Crossed witness: X = (0, s), Y = (s, 0) are not ordered, so lowering the
// midpoint by eps/2 leaves it outside both solid hulls.
std::optional<Witness> crossed_witness(const UncertaintyFamily& f, bool solid) {
    if (!ball_like(f)) return std::nullopt;
    auto sp = uniform_space(2);
    double e = f.eps(), s = e > 0.0 ? 10.0 * e : 1.0;
    Position x(sp, {0.0, s}), y(sp, {s, 0.0});
    auto m = mix(0.5, x, y);
    auto z = m - 0.5 * e;
    if (!f.contains(m, z)) return std::nullopt;
    bool out = solid ? f.solid_contains(x, z) == std::optional<bool>(false) &&
                           f.solid_contains(y, z) == std::optional<bool>(false)
                     : excludes(f, x, z) && excludes(f, y, z);
    if (!out) return std::nullopt;
    return witness_of(sp, {{"X", &x}, {"Y", &y}, {"Z", &z}}, {{"lambda", 0.5}});
}

// Shared (X, Y, lambda, Z in U_M) stream, so quasi-convexity and
// c-quasi-convexity see identical samples for a seed.
template <class Visit>
void mix_stream(const UncertaintyFamily& f, std::size_t trials, std::uint64_t seed, Visit visit) {
    Sampler smp(f, seed, f.kind() == FamilyKind::WassersteinBall);
    for (std::size_t t = 0; t < trials; ++t) {
        auto s = smp.space();
        auto x = smp.position(s), y = smp.position(s);
        double lam = smp.uniform(0.0, 1.0);
        auto m = mix(lam, x, y);
        for (const auto& z : smp.members(m))
            if (!visit(x, y, lam, m, z)) return;
    }
}

PropertyVerdict check_monotone(const UncertaintyFamily& f, std::size_t trials, std::uint64_t seed) {
    if (f.kind() == FamilyKind::LevelUpperSet && f.rho1()->flags().monotone)
        return PropertyVerdict::certified("X <= Y gives rho1(X) >= rho1(Y), so U_Y sits inside U_X");
    Sampler smp(f, seed, wants_uniform(f, FamilyProperty::Monotone));
    for (std::size_t t = 0; t < trials; ++t) {
        auto s = smp.space();
        auto x = smp.position(s);
        auto y = x + smp.nonneg(s);
        for (const auto& z : smp.members(y))
            if (excludes(f, x, z))
                return PropertyVerdict::counterexample(witness_of(s, {{"X", &x}, {"Y", &y}, {"Z", &z}}),
                                                       "Z in U_Y but not in U_X although X <= Y");
    }
    return PropertyVerdict::sampled(trials);
}

// X' <= Y' with X' in U_X, built explicitly.
std::optional<Position> dominated_witness(const UncertaintyFamily& f, const Position& x, const Position& y,
                                          const Position& yp) {
    std::vector<Position> cands{yp - (y - x)};
    const auto& s = x.space();
    bool uniform = std::all_of(s->probs().begin(), s->probs().end(), [&](double p) { return p == s->prob(0); });
    if (uniform) {
        // comonotone shift: lower Y' by the quantile gap of (Y, X) at its own rank
        auto rank_order = [](const Position& v) {
            std::vector<std::size_t> o(v.n());
            std::iota(o.begin(), o.end(), 0);
            std::stable_sort(o.begin(), o.end(), [&](auto a, auto b) { return v[a] < v[b]; });
            return o;
        };
        auto oy = rank_order(y), ox = rank_order(x), op = rank_order(yp);
        std::vector<double> v(x.n());
        for (std::size_t r = 0; r < x.n(); ++r) v[op[r]] = yp[op[r]] - (y[oy[r]] - x[ox[r]]);
        cands.emplace_back(s, v);
    }
    if (auto k = f.level_shift(x, yp)) cands.push_back(yp - *k);
    for (const auto& c : cands)
        if (leq(c, yp) && f.contains(x, c)) return c;
    return std::nullopt;
}

PropertyVerdict check_order_preserving(const UncertaintyFamily& f, std::size_t trials, std::uint64_t seed) {
    if (norm_ball(f))
        return PropertyVerdict::certified("X' = Y' - (Y - X) is a translate of Y' inside U_X and X' <= Y'");
    if (f.kind() == FamilyKind::LevelUpperSet && f.rho1()->flags().monotone)
        return PropertyVerdict::certified("monotone family: X' = Y' lies in U_X");
    Sampler smp(f, seed, wants_uniform(f, FamilyProperty::OrderPreserving));
    std::size_t missing = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        auto s = smp.space();
        auto x = smp.position(s);
        auto y = x + smp.nonneg(s);
        for (const auto& yp : smp.members(y))
            if (!dominated_witness(f, x, y, yp)) ++missing;
    }
    if (missing > 0)
        return PropertyVerdict::unknown(std::to_string(missing) + " sampled Y' without a constructed dominated witness");
    return PropertyVerdict::sampled(trials, "dominated witness constructed for every sample");
}

PropertyVerdict check_convex(const UncertaintyFamily& f, std::size_t trials, std::uint64_t seed) {
    if (norm_ball(f))
        return PropertyVerdict::certified("Z = M + D splits as lambda (X + D) + (1 - lambda) (Y + D)");
    if (f.kind() != FamilyKind::WassersteinBall || f.solidified())
        return PropertyVerdict::unknown("no decomposition certificate for " + f.name());
    // W_p on uniform spaces: match ranks of Z and M, then split the offset
    std::size_t failed = 0;
    mix_stream(f, trials, seed, [&](const Position& x, const Position& y, double lam, const Position& m,
                                    const Position& z) {
        std::vector<std::size_t> oz(z.n()), om(z.n()), sigma(z.n());
        std::iota(oz.begin(), oz.end(), 0);
        std::iota(om.begin(), om.end(), 0);
        std::stable_sort(oz.begin(), oz.end(), [&](auto a, auto b) { return z[a] < z[b]; });
        std::stable_sort(om.begin(), om.end(), [&](auto a, auto b) { return m[a] < m[b]; });
        for (std::size_t r = 0; r < z.n(); ++r) sigma[oz[r]] = om[r];
        auto d = z - permute(m, sigma);
        auto z1 = permute(x, sigma) + d, z2 = permute(y, sigma) + d;
        auto back = lam * z1 + (1.0 - lam) * z2;
        if (!f.contains(x, z1) || !f.contains(y, z2) || lp_norm(back - z, HUGE_VAL) > 1e-9) ++failed;
        return true;
    });
    if (failed > 0) return PropertyVerdict::unknown(std::to_string(failed) + " samples without a decomposition");
    return PropertyVerdict::sampled(trials, "rank-matched decomposition found for every sample");
}

PropertyVerdict check_qc(const UncertaintyFamily& f, std::size_t trials, std::uint64_t seed) {
    if (f.kind() == FamilyKind::LevelUpperSet && f.rho1()->flags().quasi_convex)
        return PropertyVerdict::certified("rho1(Z) <= rho1(M) + eps <= max(rho1(X), rho1(Y)) + eps");
    if (auto w = classic_qc_witness(f)) return PropertyVerdict::counterexample(*w, "midpoint raised by eps/2");
    if (auto w = crossed_witness(f, false)) return PropertyVerdict::counterexample(*w, "crossed pair");
    std::optional<PropertyVerdict> found;
    mix_stream(f, trials, seed, [&](const Position& x, const Position& y, double lam, const Position&,
                                    const Position& z) {
        if (excludes(f, x, z) && excludes(f, y, z)) {
            found = PropertyVerdict::counterexample(
                witness_of(x.space(), {{"X", &x}, {"Y", &y}, {"Z", &z}}, {{"lambda", lam}}),
                "Z in U_M outside U_X and U_Y");
            return false;
        }
        return true;
    });
    return found ? *found : PropertyVerdict::sampled(trials);
}

PropertyVerdict check_cqc(const UncertaintyFamily& f, std::size_t trials, std::uint64_t seed) {
    if (f.kind() == FamilyKind::LevelUpperSet && f.rho1()->flags().quasi_convex)
        return PropertyVerdict::certified("quasi-convex family; K = 0 already lands in U_X or U_Y");
    if (auto w = crossed_witness(f, true)) return PropertyVerdict::counterexample(*w, "crossed pair");
    std::optional<PropertyVerdict> found;
    std::size_t undecided = 0;
    mix_stream(f, trials, seed, [&](const Position& x, const Position& y, double lam, const Position&,
                                    const Position& z) {
        auto a = f.solid_contains(x, z), b = f.solid_contains(y, z);
        if (a == std::optional<bool>(true) || b == std::optional<bool>(true)) return true;
        if (a && b) {
            found = PropertyVerdict::counterexample(
                witness_of(x.space(), {{"X", &x}, {"Y", &y}, {"Z", &z}}, {{"lambda", lam}}),
                "no K >= 0 moves Z into U_X or U_Y");
            return false;
        }
        ++undecided;
        return true;
    });
    if (found) return *found;
    if (undecided > 0) return PropertyVerdict::unknown(std::to_string(undecided) + " samples left undecided");
    if (f.kind() == FamilyKind::LevelBand && f.rho1()->flags().monotone)
        return PropertyVerdict::certified(
            "scan over k >= 0: rho1(Z) <= max + eps, and Z - k* enters the band of X or Y; confirmed on " +
            std::to_string(trials) + " sampled triples");
    return PropertyVerdict::sampled(trials);
}

PropertyVerdict check_solid(const UncertaintyFamily& f, std::size_t trials, std::uint64_t seed) {
    if (f.solidified()) return PropertyVerdict::certified("solid hull by construction");
    if (f.kind() == FamilyKind::LevelUpperSet && f.rho1()->flags().monotone)
        return PropertyVerdict::certified("rho1(Z + K) <= rho1(Z) for K >= 0");
    Sampler smp(f, seed, wants_uniform(f, FamilyProperty::Solid));
    for (std::size_t t = 0; t < trials; ++t) {
        auto s = smp.space();
        auto x = smp.position(s);
        for (const auto& z : smp.members(x)) {
            auto k = smp.nonneg(s);
            if (!f.contains(x, z + k))
                return PropertyVerdict::counterexample(witness_of(s, {{"X", &x}, {"Z", &z}, {"K", &k}}),
                                                       "Z in U_X but Z + K is not");
        }
    }
    return PropertyVerdict::sampled(trials);
}

PropertyVerdict check_law_invariant(const UncertaintyFamily& f, std::size_t trials, std::uint64_t seed) {
    if (f.kind() == FamilyKind::WassersteinBall)
        return PropertyVerdict::certified("membership depends on X only through its quantile function");
    if (level(f) && f.rho1()->flags().law_invariant)
        return PropertyVerdict::certified("rho1 is law invariant");
    Sampler smp(f, seed, true);
    for (std::size_t t = 0; t < trials; ++t) {
        auto s = smp.space();
        auto x = smp.position(s);
        // all atoms have equal mass; avoid the identity
        auto perm = smp.rng().law_preserving_permutation(*s);
        if (std::is_sorted(perm.begin(), perm.end())) std::rotate(perm.begin(), perm.begin() + 1, perm.end());
        auto xp = permute(x, perm);
        for (const auto& z : smp.members(x))
            if (f.contains(x, z) != f.contains(xp, z))
                return PropertyVerdict::counterexample(witness_of(s, {{"X", &x}, {"Xp", &xp}, {"Z", &z}}),
                                                       "equal laws, different membership");
    }
    return PropertyVerdict::sampled(trials);
}

PropertyVerdict check_cash_invariant(const UncertaintyFamily& f, std::size_t trials, std::uint64_t seed) {
    if (ball_like(f)) return PropertyVerdict::certified("membership depends on Z - X only up to law");
    if (level(f) && f.rho1()->flags().cash_additive)
        return PropertyVerdict::certified("rho1(Z + c) - rho1(X + c) = rho1(Z) - rho1(X)");
    Sampler smp(f, seed, false);
    for (std::size_t t = 0; t < trials; ++t) {
        auto s = smp.space();
        auto x = smp.position(s);
        double c = smp.uniform(-3.0, 3.0);
        auto check = [&](const Position& z, bool shifted) -> std::optional<PropertyVerdict> {
            auto zz = shifted ? z - c : z;
            if (f.contains(x, zz) != f.contains(x + c, zz + c))
                return PropertyVerdict::counterexample(witness_of(s, {{"X", &x}, {"Z", &zz}}, {{"c", c}}),
                                                       "membership changes under a common cash shift");
            return std::nullopt;
        };
        for (const auto& z : smp.members(x))
            if (auto v = check(z, false)) return *v;
        for (const auto& z : smp.members(x + c))
            if (auto v = check(z, true)) return *v;
    }
    return PropertyVerdict::sampled(trials);
}

PropertyVerdict check_cfa(const UncertaintyFamily& f, std::size_t trials, std::uint64_t seed) {
    Sampler smp(f, seed, wants_uniform(f, FamilyProperty::ContinuousFromAbove));
    for (std::size_t t = 0; t < trials; ++t) {
        auto s = smp.space();
        auto x = smp.position(s);
        auto d = smp.nonneg(s) + 0.05;
        // each U_{X_n} must sit inside U_X
        auto x1 = x + 0.5 * d;
        for (const auto& z : smp.members(x1))
            if (excludes(f, x, z))
                return PropertyVerdict::counterexample(
                    witness_of(s, {{"X", &x}, {"Delta", &d}, {"Z", &z}}, {{"n", 1.0}, {"direction", 0.0}}),
                    "Z in U_{X_1} but not in U_X");
        // and every member of U_X must show up in some U_{X_n}
        for (const auto& z : smp.members(x)) {
            bool hit = false;
            for (int n = 1; n <= kChainLength && !hit; ++n) hit = f.contains(x + std::ldexp(1.0, -n) * d, z);
            if (!hit)
                return PropertyVerdict::counterexample(
                    witness_of(s, {{"X", &x}, {"Delta", &d}, {"Z", &z}},
                               {{"n", static_cast<double>(kChainLength)}, {"direction", 1.0}}),
                    "Z in U_X but in no U_{X_n}");
        }
    }
    return PropertyVerdict::sampled(trials, "chains X + 2^-n Delta up to n = " + std::to_string(kChainLength));
}

}  // namespace

PropertyVerdict check_property(const UncertaintyFamily& f, FamilyProperty property, std::size_t trials,
                               std::uint64_t seed) {
    if (trials == 0) throw std::invalid_argument("check_property: trials must be >= 1");
    PropertyVerdict v;
    switch (property) {
        case FamilyProperty::Monotone: v = check_monotone(f, trials, seed); break;
        case FamilyProperty::OrderPreserving: v = check_order_preserving(f, trials, seed); break;
        case FamilyProperty::Convex: v = check_convex(f, trials, seed); break;
        case FamilyProperty::QuasiConvex: v = check_qc(f, trials, seed); break;
        case FamilyProperty::CQuasiConvex: v = check_cqc(f, trials, seed); break;
        case FamilyProperty::Solid: v = check_solid(f, trials, seed); break;
        case FamilyProperty::LawInvariant: v = check_law_invariant(f, trials, seed); break;
        case FamilyProperty::CashInvariant: v = check_cash_invariant(f, trials, seed); break;
        case FamilyProperty::ContinuousFromAbove: v = check_cfa(f, trials, seed); break;
    }
    if (v.tag == PropertyVerdict::Tag::Counterexample && v.trials == 0) v.trials = trials;
    return v;
}

bool replay_counterexample(const UncertaintyFamily& f, FamilyProperty property, const Witness& w) {
    auto s = make_space(w.probs);
    auto pos = [&](const char* k) { return Position(s, w.vectors.at(k)); };
    auto num = [&](const char* k) { return w.scalars.at(k); };
    try {
        switch (property) {
            case FamilyProperty::Monotone: {
                auto x = pos("X"), y = pos("Y"), z = pos("Z");
                return leq(x, y) && f.contains(y, z) && excludes(f, x, z);
            }
            case FamilyProperty::QuasiConvex: {
                auto x = pos("X"), y = pos("Y"), z = pos("Z");
                return f.contains(mix(num("lambda"), x, y), z) && excludes(f, x, z) && excludes(f, y, z);
            }
            case FamilyProperty::CQuasiConvex: {
                auto x = pos("X"), y = pos("Y"), z = pos("Z");
                return f.contains(mix(num("lambda"), x, y), z) &&
                       f.solid_contains(x, z) == std::optional<bool>(false) &&
                       f.solid_contains(y, z) == std::optional<bool>(false);
            }
            case FamilyProperty::Solid: {
                auto x = pos("X"), z = pos("Z"), k = pos("K");
                return f.contains(x, z) && std::all_of(k.values().begin(), k.values().end(),
                                                       [](double v) { return v >= 0.0; }) &&
                       !f.contains(x, z + k);
            }
            case FamilyProperty::LawInvariant: {
                auto x = pos("X"), xp = pos("Xp"), z = pos("Z");
                return same_distribution(x, xp) && f.contains(x, z) != f.contains(xp, z);
            }
            case FamilyProperty::CashInvariant: {
                auto x = pos("X"), z = pos("Z");
                double c = num("c");
                return f.contains(x, z) != f.contains(x + c, z + c);
            }
            case FamilyProperty::ContinuousFromAbove: {
                auto x = pos("X"), d = pos("Delta"), z = pos("Z");
                int n = static_cast<int>(num("n"));
                if (!leq(Position::constant(s, 0.0), d)) return false;
                if (num("direction") == 0.0) return f.contains(x + std::ldexp(1.0, -n) * d, z) && excludes(f, x, z);
                if (!f.contains(x, z)) return false;
                for (int k = 1; k <= n; ++k)
                    if (f.contains(x + std::ldexp(1.0, -k) * d, z)) return false;
                return true;
            }
            case FamilyProperty::OrderPreserving:
            case FamilyProperty::Convex:
                // these checks never emit counterexamples
                return false;
        }
    } catch (const std::out_of_range&) {
        return false;
    }
    return false;
}

}  // namespace rrisk
