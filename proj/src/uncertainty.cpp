#include "rrisk/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <stdexcept>

#include "rrisk/sampling.hpp"

namespace rrisk {

namespace {

void check_eps(double eps) {
    if (!(eps >= 0.0) || std::isinf(eps)) throw std::invalid_argument("uncertainty family: eps must be finite and >= 0");
}

void check_p(double p) {
    if (!(p >= 1.0)) throw std::invalid_argument("uncertainty family: p must be in [1, inf]");
}

std::string fmt(double v) {
    if (std::isinf(v)) return "inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// Best constant approximation of the step function (len_k, val_k) in L^p.
double best_constant(const std::vector<std::pair<double, double>>& pieces, double p) {
    double lo = HUGE_VAL, hi = -HUGE_VAL;
    for (auto& [len, v] : pieces) lo = std::min(lo, v), hi = std::max(hi, v);
    if (std::isinf(p)) return 0.5 * (lo + hi);
    if (p == 2.0) {
        double m = 0.0, w = 0.0;
        for (auto& [len, v] : pieces) m += len * v, w += len;
        return w > 0.0 ? m / w : lo;
    }
    auto cost = [&](double c) {
        double s = 0.0;
        for (auto& [len, v] : pieces) s += len * std::pow(std::fabs(c - v), p);
        return s;
    };
    // convex in c: golden section
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::fabs(a)); ++it) {
        double c1 = b - g * (b - a), c2 = a + g * (b - a);
        if (cost(c1) <= cost(c2))
            b = c2;
        else
            a = c1;
    }
    return 0.5 * (a + b);
}

}  // namespace

std::string to_string(FamilyKind k) {
    switch (k) {
        case FamilyKind::SupNormBall: return "sup_norm_ball";
        case FamilyKind::PNormBall: return "p_norm_ball";
        case FamilyKind::WassersteinBall: return "wasserstein_ball";
        case FamilyKind::LevelBand: return "level_band";
        case FamilyKind::LevelUpperSet: return "level_upper_set";
    }
    return "?";
}

std::string to_string(FamilyProperty p) {
    switch (p) {
        case FamilyProperty::Monotone: return "monotone";
        case FamilyProperty::OrderPreserving: return "order_preserving";
        case FamilyProperty::Convex: return "convex";
        case FamilyProperty::QuasiConvex: return "quasi_convex";
        case FamilyProperty::CQuasiConvex: return "c_quasi_convex";
        case FamilyProperty::Solid: return "solid";
        case FamilyProperty::LawInvariant: return "law_invariant";
        case FamilyProperty::CashInvariant: return "cash_invariant";
        case FamilyProperty::ContinuousFromAbove: return "continuous_from_above";
    }
    return "?";
}

FamilyProperty family_property_from_string(const std::string& s) {
    for (auto p : {FamilyProperty::Monotone, FamilyProperty::OrderPreserving, FamilyProperty::Convex,
                   FamilyProperty::QuasiConvex, FamilyProperty::CQuasiConvex, FamilyProperty::Solid,
                   FamilyProperty::LawInvariant, FamilyProperty::CashInvariant, FamilyProperty::ContinuousFromAbove})
        if (to_string(p) == s) return p;
    throw std::invalid_argument("unknown family property: " + s);
}

UncertaintyFamily sup_norm_ball(double eps) {
    check_eps(eps);
    UncertaintyFamily f;
    f.kind_ = FamilyKind::SupNormBall;
    f.eps_ = eps;
    return f;
}

UncertaintyFamily p_norm_ball(double p, double eps) {
    check_p(p);
    check_eps(eps);
    UncertaintyFamily f;
    f.kind_ = FamilyKind::PNormBall;
    f.p_ = p;
    f.eps_ = eps;
    return f;
}

UncertaintyFamily wasserstein_ball(double p, double eps) {
    check_p(p);
    check_eps(eps);
    UncertaintyFamily f;
    f.kind_ = FamilyKind::WassersteinBall;
    f.p_ = p;
    f.eps_ = eps;
    return f;
}

static void check_level(const RiskFunctional& rho1, double eps) {
    check_eps(eps);
    if (!rho1.flags().quasi_convex || !rho1.flags().cash_subadditive)
        throw std::invalid_argument("level family: rho1 must be quasi-convex and cash-subadditive");
}

UncertaintyFamily level_band(const RiskFunctional& rho1, double eps) {
    check_level(rho1, eps);
    UncertaintyFamily f;
    f.kind_ = FamilyKind::LevelBand;
    f.eps_ = eps;
    f.rho1_ = std::make_shared<const RiskFunctional>(rho1);
    return f;
}

UncertaintyFamily level_upper_set(const RiskFunctional& rho1, double eps) {
    check_level(rho1, eps);
    UncertaintyFamily f;
    f.kind_ = FamilyKind::LevelUpperSet;
    f.eps_ = eps;
    f.rho1_ = std::make_shared<const RiskFunctional>(rho1);
    return f;
}

UncertaintyFamily solidify(const UncertaintyFamily& f) {
    // upper level sets of a monotone functional are solid already
    if (f.kind_ == FamilyKind::LevelUpperSet && f.rho1_->flags().monotone) return f;
    UncertaintyFamily g = f;
    g.solidified_ = true;
    return g;
}

std::string UncertaintyFamily::name() const {
    std::string s = to_string(kind_) + "(";
    switch (kind_) {
        case FamilyKind::SupNormBall: s += "eps=" + fmt(eps_); break;
        case FamilyKind::PNormBall:
        case FamilyKind::WassersteinBall: s += "p=" + fmt(p_) + ",eps=" + fmt(eps_); break;
        case FamilyKind::LevelBand:
        case FamilyKind::LevelUpperSet: s += rho1_->name() + ",eps=" + fmt(eps_); break;
    }
    s += ")";
    return solidified_ ? "solid(" + s + ")" : s;
}

double UncertaintyFamily::level_tol(const ExtReal& level) const {
    double a = level.is_finite() ? std::fabs(level.value()) : 0.0;
    return kMembershipTol * std::max(1.0, a);
}

bool UncertaintyFamily::base_contains(const Position& x, const Position& z, bool slack) const {
    const double tol = slack ? kMembershipTol : 0.0;
    switch (kind_) {
        case FamilyKind::SupNormBall:
            for (std::size_t i = 0; i < x.n(); ++i)
                if (std::fabs(z[i] - x[i]) > eps_ + tol) return false;
            return true;
        case FamilyKind::PNormBall: return lp_norm(z - x, p_) <= eps_ + tol;
        case FamilyKind::WassersteinBall: return wasserstein_distance(x, z, p_) <= eps_ + tol;
        case FamilyKind::LevelBand: {
            ExtReal a = (*rho1_)(x), b = (*rho1_)(z);
            if (!a.is_finite() || !b.is_finite()) return a == b;
            return std::fabs(b.value() - a.value()) <= eps_ + (slack ? level_tol(a) : 0.0);
        }
        case FamilyKind::LevelUpperSet: {
            ExtReal a = (*rho1_)(x), b = (*rho1_)(z);
            if (!a.is_finite()) return a == ExtReal::pos_inf() || b == a;
            return b <= ExtReal(a.value() + eps_ + (slack ? level_tol(a) : 0.0));
        }
    }
    return false;
}

bool UncertaintyFamily::contains(const Position& x, const Position& z) const {
    if (!same_space(x.space(), z.space())) throw std::invalid_argument("contains: positions live on different spaces");
    if (!solidified_) return base_contains(x, z);
    return solid_contains(x, z).value_or(false);
}

std::optional<double> UncertaintyFamily::level_shift(const Position& x, const Position& z) const {
    if (kind_ != FamilyKind::LevelBand && kind_ != FamilyKind::LevelUpperSet) return std::nullopt;
    if (base_contains(x, z)) return 0.0;
    ExtReal a = (*rho1_)(x);
    if (!a.is_finite()) return std::nullopt;
    const double tol = level_tol(a);
    const double lower = a.value() - eps_, upper = a.value() + eps_;
    auto g = [&](double k) { return (*rho1_)(z - k); };
    ExtReal g0 = g(0.0);
    // shifting down only raises a monotone rho1, so a value above the band is final
    if (kind_ == FamilyKind::LevelUpperSet || !(g0 < ExtReal(lower))) return std::nullopt;
    double klo = 0.0, khi = 1.0;
    while (g(khi) < ExtReal(lower)) {
        klo = khi;
        khi *= 2.0;
        if (khi > 0x1p60) return std::nullopt;
    }
    if (g(khi) <= ExtReal(upper + tol)) return khi;
    // g(klo) < lower and g(khi) > upper: bisect for a point inside the band
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (klo + khi);
        ExtReal v = g(mid);
        if (v < ExtReal(lower - tol))
            klo = mid;
        else if (v > ExtReal(upper + tol))
            khi = mid;
        else
            return mid;
        if (khi - klo <= 0.0) break;
    }
    return std::nullopt;
}

std::pair<double, double> wasserstein_solid_gap(const Position& x, const Position& z, double p) {
    check_p(p);
    const bool sup = std::isinf(p);
    auto qx = quantile_function(x);
    auto qz = quantile_function(z);

    // lower: any W <= Z has q_W <= q_Z, so |q_W - q_X| >= (q_X - q_Z)^+
    double acc = 0.0, lo = 0.0;
    for (std::size_t i = 0, j = 0; i < qx.size() && j < qz.size();) {
        double hi = std::min(qx[i].upper, qz[j].upper);
        double gap = std::max(qx[i].value - qz[j].value, 0.0);
        if (hi - lo > 1e-12) acc = sup ? std::max(acc, gap) : acc + (hi - lo) * std::pow(gap, p);
        if (qx[i].upper <= hi + 1e-12) ++i;
        if (qz[j].upper <= hi + 1e-12) ++j;
        lo = std::max(lo, hi);
    }
    double lower = sup ? acc : std::pow(acc, 1.0 / p);

    // upper: lower each atom of Z towards the best constant fit of q_X on its quantile interval
    const auto& pr = z.space()->probs();
    std::vector<std::size_t> order(z.n());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return z[a] < z[b]; });
    std::vector<double> w = z.values();
    double a = 0.0;
    for (std::size_t idx : order) {
        double b = a + pr[idx];
        std::vector<std::pair<double, double>> pieces;
        double u = 0.0;
        for (const auto& st : qx) {
            double l = std::max(u, a), r = std::min(st.upper, b);
            if (r - l > 1e-15) pieces.emplace_back(r - l, st.value);
            u = st.upper;
        }
        if (!pieces.empty()) w[idx] = std::min(z[idx], best_constant(pieces, p));
        a = b;
    }
    double upper = std::min(wasserstein_distance(Position(z.space(), w), x, p), wasserstein_distance(z, x, p));
    return {lower, std::max(upper, lower)};
}

std::optional<bool> UncertaintyFamily::solid_contains(const Position& x, const Position& z) const {
    if (!same_space(x.space(), z.space()))
        throw std::invalid_argument("solid_contains: positions live on different spaces");
    return solid_decide(x, z, true);
}

std::optional<bool> UncertaintyFamily::solid_decide(const Position& x, const Position& z, bool slack) const {
    const double tol = slack ? kMembershipTol : 0.0;
    switch (kind_) {
        case FamilyKind::SupNormBall:
            for (std::size_t i = 0; i < x.n(); ++i)
                if (z[i] < x[i] - eps_ - tol) return false;
            return true;
        case FamilyKind::PNormBall: {
            std::vector<double> neg(x.n());
            for (std::size_t i = 0; i < x.n(); ++i) neg[i] = std::max(x[i] - z[i], 0.0);
            return lp_norm(Position(x.space(), neg), p_) <= eps_ + tol;
        }
        case FamilyKind::WassersteinBall: {
            auto [lo, hi] = wasserstein_solid_gap(x, z, p_);
            if (hi <= eps_ + tol) return true;
            if (lo > eps_ + tol) return false;
            return std::nullopt;
        }
        case FamilyKind::LevelUpperSet:
            if (base_contains(x, z, slack)) return true;
            if (rho1_->flags().monotone) return false;
            return std::nullopt;
        case FamilyKind::LevelBand: {
            if (base_contains(x, z, slack)) return true;
            // rho1(Z - K) >= rho1(Z) for monotone rho1: nothing helps once Z is above the band
            ExtReal a = (*rho1_)(x), b = (*rho1_)(z);
            if (rho1_->flags().monotone && a.is_finite() && b > ExtReal(a.value() + eps_ + (slack ? level_tol(a) : 0.0)))
                return false;
            if (level_shift(x, z)) return true;
            return std::nullopt;
        }
    }
    return std::nullopt;
}

double UncertaintyFamily::boundary_along(const Position& x, const Position& d, double cap) const {
    auto inside = [&](double t, bool slack) {
        auto z = x + t * d;
        return solidified_ ? solid_decide(x, z, slack).value_or(false) : base_contains(x, z, slack);
    };
    double lo = 0.0, hi = 1.0;
    while (inside(hi, false)) {
        lo = hi;
        hi *= 2.0;
        if (hi > cap) return lo;
    }
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        if (inside(mid, false))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

Position UncertaintyFamily::project(const Position& x, const Position& anchor, const Position& z) const {
    if (contains(x, z)) return z;
    const std::size_t n = x.n();
    if (kind_ == FamilyKind::SupNormBall || (kind_ == FamilyKind::PNormBall && std::isinf(p_))) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = solidified_ ? std::max(z[i], x[i] - eps_) : std::clamp(z[i], x[i] - eps_, x[i] + eps_);
        return Position(x.space(), v);
    }
    if (kind_ == FamilyKind::PNormBall) {
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = solidified_ ? std::min(z[i] - x[i], 0.0) : z[i] - x[i];
        double norm = lp_norm(Position(x.space(), d), p_);
        double scale = norm > 0.0 ? eps_ / norm : 0.0;
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) {
            double up = solidified_ ? std::max(z[i] - x[i], 0.0) : 0.0;
            v[i] = x[i] + up + d[i] * scale;
        }
        Position out(x.space(), v);
        if (contains(x, out)) return out;
    }
    if ((kind_ == FamilyKind::LevelBand || kind_ == FamilyKind::LevelUpperSet) && !solidified_ &&
        rho1_->flags().cash_additive) {
        // rho1(Z + m) = rho1(Z) - m: one shift lands on the nearest level
        ExtReal a = (*rho1_)(x), b = (*rho1_)(z);
        if (a.is_finite() && b.is_finite()) {
            double target = b.value() > a.value() ? a.value() + eps_ : a.value() - eps_;
            Position out = z + (b.value() - target);
            if (contains(x, out)) return out;
        }
    }
    if (!contains(x, anchor)) throw std::invalid_argument("project: anchor is not a member");
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 50; ++it) {
        double mid = 0.5 * (lo + hi);
        if (contains(x, anchor + mid * (z - anchor)))
            lo = mid;
        else
            hi = mid;
    }
    return lo == 0.0 ? anchor : anchor + lo * (z - anchor);
}

namespace {

// Collects distinct members up to a budget.
class PointSet {
public:
    PointSet(const UncertaintyFamily& f, const Position& x, std::size_t budget) : f_(f), x_(x), budget_(budget) {
        push(x, true);
    }
    bool full() const { return pts_.size() >= budget_; }
    // structural points bypass the budget
    void push(const Position& z, bool structural = false) {
        if (!structural && full()) return;
        if (seen_.count(z.values())) return;
        if (!f_.contains(x_, z)) return;
        seen_.insert(z.values());
        pts_.push_back(z);
    }
    std::vector<Position> take() { return std::move(pts_); }
    const std::vector<Position>& points() const { return pts_; }

private:
    const UncertaintyFamily& f_;
    const Position& x_;
    std::size_t budget_;
    std::set<std::vector<double>> seen_;
    std::vector<Position> pts_;
};

void ball_points(PointSet& out, const Position& x, double p, double eps, double h, Rng& rng) {
    const std::size_t n = x.n();
    const auto& s = x.space();
    if (eps == 0.0) return;
    out.push(x + eps, true);
    out.push(x - eps, true);
    if (n <= 16) {
        for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
            std::vector<double> v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = x[i] + ((mask >> i) & 1 ? eps : -eps);
            out.push(Position(s, v), true);
        }
    }
    if (!std::isinf(p)) {
        for (std::size_t i = 0; i < n; ++i) {
            double r = eps * std::pow(s->prob(i), -1.0 / p);
            for (double sg : {1.0, -1.0}) {
                auto v = x.values();
                v[i] += sg * r;
                out.push(Position(s, v), true);
            }
        }
    }
    // lattice of step h over the box, enumerated when small and sampled otherwise
    const long m = static_cast<long>(std::floor(eps / h + 1e-9));
    if (m < 1) return;
    const double side = static_cast<double>(2 * m + 1);
    const double total = std::pow(side, static_cast<double>(n));
    if (total <= 4096.0) {
        std::vector<long> k(n, -m);
        while (!out.full()) {
            std::vector<double> v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = x[i] + static_cast<double>(k[i]) * h;
            out.push(Position(s, v));
            std::size_t i = 0;
            while (i < n && ++k[i] > m) k[i++] = -m;
            if (i == n) break;
        }
    } else {
        for (int attempt = 0; attempt < 4096 && !out.full(); ++attempt) {
            std::vector<double> v(n);
            for (std::size_t i = 0; i < n; ++i)
                v[i] = x[i] + static_cast<double>(static_cast<long>(rng.index(2 * m + 1)) - m) * h;
            out.push(Position(s, v));
        }
    }
}

void level_points(PointSet& out, const UncertaintyFamily& f, const Position& x, double h, Rng& rng) {
    const auto& s = x.space();
    const double cap = 1e6 * (1.0 + lp_norm(x, HUGE_VAL));
    auto one = Position::constant(s, 1.0);
    // line search along X - k
    for (double sg : {-1.0, 1.0}) {
        double t = f.boundary_along(x, sg * one, cap);
        out.push(x + sg * t * one, true);
        int steps = static_cast<int>(std::min(t / h, 16.0));
        for (int k = 1; k < steps && !out.full(); ++k) out.push(x + (sg * t * k / steps) * one);
    }
    // random directions rescaled to the level boundary
    for (int attempt = 0; attempt < 256 && !out.full(); ++attempt) {
        auto d = rng.direction(s);
        double m = lp_norm(d, HUGE_VAL);
        if (m == 0.0) continue;
        d *= 1.0 / m;
        double t = f.boundary_along(x, d, cap);
        out.push(x + t * d);
        out.push(x + rng.uniform(0.0, t) * d);
    }
}

}  // namespace

std::vector<Position> UncertaintyFamily::discretize(const Position& x, double resolution, std::size_t budget,
                                                    std::uint64_t seed) const {
    if (!(resolution > 0.0)) throw std::invalid_argument("discretize: resolution must be positive");
    if (budget == 0) throw std::invalid_argument("discretize: budget must be positive");
    Rng rng(seed);
    PointSet out(*this, x, budget);
    switch (kind_) {
        case FamilyKind::SupNormBall: ball_points(out, x, HUGE_VAL, eps_, resolution, rng); break;
        case FamilyKind::PNormBall: ball_points(out, x, p_, eps_, resolution, rng); break;
        case FamilyKind::WassersteinBall: {
            // L^p perturbations of X are within W_p distance eps; rearrangements keep the law
            PointSet shifts(p_norm_ball(p_, eps_), x, std::max<std::size_t>(budget / 2, 1));
            ball_points(shifts, x, p_, eps_, resolution, rng);
            for (const auto& z : shifts.points()) out.push(z, true);
            for (int attempt = 0; attempt < 512 && !out.full(); ++attempt) {
                const auto& base = shifts.points()[rng.index(shifts.points().size())];
                out.push(permute(base, rng.law_preserving_permutation(*x.space())));
            }
            break;
        }
        case FamilyKind::LevelBand:
        case FamilyKind::LevelUpperSet: {
            ExtReal a = (*rho1_)(x);
            if (a.is_finite()) level_points(out, *this, x, resolution, rng);
            break;
        }
    }
    if (solidified_) {
        // raise some members by nonnegative amounts
        auto base = out.points();
        for (std::size_t i = 0; i < base.size() && !out.full(); ++i)
            out.push(base[i] + rng.nonneg(x.space(), 1.0 + 2.0 * eps_));
    }
    return out.take();
}

}  // namespace rrisk
