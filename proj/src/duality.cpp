#include "rrisk/duality.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rrisk/sampling.hpp"

namespace rrisk {

namespace {

constexpr double kSameMeasureTol = 1e-12;

bool uniform(const ProbSpace& s) {
    return std::all_of(s.probs().begin(), s.probs().end(), [&](double p) { return p == s.prob(0); });
}

bool same_measure(const ScenarioMeasure& a, const ScenarioMeasure& b) {
    for (std::size_t i = 0; i < a.n(); ++i)
        if (std::fabs(a[i] - b[i]) > kSameMeasureTol) return false;
    return true;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double sup_norm(const Position& x) {
    double m = 0.0;
    for (double v : x.values()) m = std::max(m, std::fabs(v));
    return m;
}

bool is_exp_ce(const RiskFunctional& rho) {
    return rho.kind() == RiskKind::CertaintyEquivalent && rho.loss() &&
           rho.loss()->family == LossFunction::Family::Exponential;
}

// Golden-section maximum of a unimodal function on [a, b]; returns (argmax, value).
template <class F>
std::pair<double, double> golden_max(F f, double a, double b, int iterations = 200) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < iterations && b - a > 1e-15 * (1.0 + std::fabs(a) + std::fabs(b)); ++it) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    return fc >= fd ? std::make_pair(c, fc) : std::make_pair(d, fd);
}

}  // namespace

// ---------------------------------------------------------------- SimplexGrid

SimplexGrid SimplexGrid::make(SpacePtr space, double step, std::size_t sample_size, std::uint64_t seed) {
    if (!space) throw std::invalid_argument("SimplexGrid: null space");
    if (!(step > 0.0 && step <= 1.0)) throw std::invalid_argument("SimplexGrid: step must lie in (0, 1]");
    SimplexGrid g(space, step);
    const std::size_t n = space->n();
    if (n <= 3) {
        const int m = std::max(1, static_cast<int>(std::lround(1.0 / step)));
        std::vector<int> k(n, 0);
        // compositions of m into n nonnegative parts
        std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
            if (i + 1 == n) {
                k[i] = left;
                std::vector<double> q(n);
                for (std::size_t j = 0; j < n; ++j) q[j] = static_cast<double>(k[j]) / m;
                g.points_.push_back(ScenarioMeasure::from_probabilities(space, q));
                return;
            }
            for (int v = left; v >= 0; --v) {
                k[i] = v;
                rec(i + 1, left - v);
            }
        };
        rec(0, m);
        g.add(ScenarioMeasure::reference(space));
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> q(n, 0.0);
            q[i] = 1.0;
            g.points_.push_back(ScenarioMeasure::from_probabilities(space, q));
        }
        g.add(ScenarioMeasure::reference(space));
        Rng rng(seed);
        for (std::size_t i = 0; i < sample_size; ++i)
            g.add(ScenarioMeasure::from_probabilities(space, rng.simplex_point(n)));
    }
    return g;
}

bool SimplexGrid::add(const ScenarioMeasure& q) {
    if (!same_space(q.space(), space_)) throw std::invalid_argument("SimplexGrid::add: measure on another space");
    auto pq = q.probabilities();
    for (const auto& r : points_) {
        auto pr = r.probabilities();
        bool eq = true;
        for (std::size_t i = 0; i < pq.size() && eq; ++i) eq = std::fabs(pq[i] - pr[i]) <= 1e-12;
        if (eq) return false;
    }
    points_.push_back(q);
    return true;
}

// ---------------------------------------------------------------- penalties

std::optional<ExtReal> closed_form_penalty(const RiskFunctional& rho, const ScenarioMeasure& q) {
    switch (rho.kind()) {
        case RiskKind::NegExpectation:
            return q.is_reference(kSameMeasureTol) ? ExtReal(0.0) : ExtReal::pos_inf();
        case RiskKind::Entropic: return ExtReal(relative_entropy(q) / rho.params().gamma);
        case RiskKind::ExpectedShortfall: {
            double dmax = *std::max_element(q.density().begin(), q.density().end());
            return dmax <= 1.0 / rho.params().alpha + 1e-12 ? ExtReal(0.0) : ExtReal::pos_inf();
        }
        case RiskKind::WorstCase: return ExtReal(0.0);
        case RiskKind::CertaintyEquivalent:
            if (!rho.loss()) return std::nullopt;
            if (rho.loss()->family == LossFunction::Family::Exponential)
                return ExtReal(relative_entropy(q) / rho.loss()->rate);
            if (rho.loss()->family == LossFunction::Family::Identity)
                return q.is_reference(kSameMeasureTol) ? ExtReal(0.0) : ExtReal::pos_inf();
            return std::nullopt;
        default: return std::nullopt;
    }
}

namespace {

// Visits the lattice {-B + k h}^n, or {0} x {-B + k h}^(n-1) when the
// objective ignores constant shifts.
template <class V>
void visit_box(std::size_t n, bool shift_free, double B, double h, V&& visit) {
    const int M = static_cast<int>(std::lround(2.0 * B / h));
    const std::size_t first = shift_free ? 1 : 0;
    std::vector<int> k(n, 0);
    std::vector<double> y(n, shift_free ? 0.0 : -B);
    for (std::size_t i = first; i < n; ++i) y[i] = -B;
    while (true) {
        visit(y);
        std::size_t i = first;
        for (; i < n; ++i) {
            if (k[i] < M) {
                ++k[i];
                y[i] = -B + k[i] * h;
                break;
            }
            k[i] = 0;
            y[i] = -B;
        }
        if (i == n) return;
    }
}

double lattice_size(std::size_t dim, double B, double h) {
    return std::pow(std::round(2.0 * B / h) + 1.0, static_cast<double>(dim));
}

// max over the lattice of g, coarsening until the point budget fits
double lattice_max(const std::function<double(const std::vector<double>&)>& g, std::size_t n, bool shift_free,
                   double B, double& h, std::size_t budget, std::vector<double>* arg) {
    const std::size_t dim = shift_free ? n - 1 : n;
    while (lattice_size(dim, B, h) > static_cast<double>(budget)) h *= 2.0;
    double best = -HUGE_VAL;
    visit_box(n, shift_free, B, h, [&](const std::vector<double>& y) {
        double v = g(y);
        if (v > best) {
            best = v;
            if (arg) *arg = y;
        }
    });
    return best;
}

}  // namespace

PenaltyEstimate minimal_penalty(const Objective& f, bool cash_additive, const ScenarioMeasure& q,
                                const PenaltyOptions& opts) {
    const auto& space = q.space();
    const std::size_t n = space->n();
    const bool shift_free = cash_additive && n > 1;
    const double B = opts.bound;
    // E_Q[-Y] - f(Y); +inf risk never attains the sup, -inf risk makes it infinite
    bool unbounded = false;
    auto g = [&](const std::vector<double>& y) {
        Position z(space, y);
        ExtReal r = f(z);
        if (r.is_neg_inf()) unbounded = true;
        if (!r.is_finite()) return -HUGE_VAL;
        return -expectation_under(q, z) - r.value();
    };

    // growth test: a linear sup in the box radius means c(Q) = +inf
    auto coarse = [&](double radius) {
        double hh = radius / 10.0;
        return lattice_max(g, n, shift_free, radius, hh, opts.max_lattice, nullptr);
    };
    double c1 = coarse(B), c2 = coarse(2 * B), c4 = coarse(4 * B);
    if (unbounded) return {ExtReal::pos_inf(), Guarantee::Exact, "rho takes the value -inf"};
    const double d1 = c2 - c1, d2 = c4 - c2;
    if (d1 > 1e-6 * (1.0 + std::fabs(c1)) && d2 >= 1.5 * d1)
        return {ExtReal::pos_inf(), Guarantee::LowerBound,
                "growth test: sup over [-B,B]^n grows linearly (" + fmt(c1) + ", " + fmt(c2) + ", " + fmt(c4) + ")"};

    double h = opts.step;
    std::vector<double> y;
    double best = lattice_max(g, n, shift_free, B, h, opts.max_lattice, &y);
    if (best == -HUGE_VAL) return {ExtReal::neg_inf(), Guarantee::LowerBound, "rho is +inf on the whole lattice"};

    // compass refinement inside the box; the objective is concave for convex rho
    const std::size_t first = shift_free ? 1 : 0;
    std::vector<std::vector<double>> dirs;
    for (std::size_t i = first; i < n; ++i)
        for (double sg : {1.0, -1.0}) {
            std::vector<double> d(n, 0.0);
            d[i] = sg;
            dirs.push_back(d);
        }
    if (!shift_free)
        for (double sg : {1.0, -1.0}) dirs.emplace_back(n, sg);
    std::size_t evals = 0;
    for (double s = h; s >= 1e-10 && evals < 400000; s *= 0.5) {
        bool moved = true;
        while (moved && evals < 400000) {
            moved = false;
            for (const auto& d : dirs) {
                std::vector<double> c = y;
                for (std::size_t i = 0; i < n; ++i) c[i] = std::clamp(c[i] + s * d[i], -B, B);
                double v = g(c);
                ++evals;
                if (v > best) {
                    best = v;
                    y = std::move(c);
                    moved = true;
                }
            }
        }
    }
    return {ExtReal(best), Guarantee::LowerBound,
            "lattice on [-" + fmt(B) + "," + fmt(B) + "]^n, step " + fmt(h) + ", compass refinement"};
}

PenaltyEstimate minimal_penalty(const RiskFunctional& rho, const ScenarioMeasure& q, const PenaltyOptions& opts) {
    if (!opts.numeric)
        if (auto c = closed_form_penalty(rho, q)) return {*c, Guarantee::Exact, "closed form"};
    return minimal_penalty([&](const Position& z) { return rho(z); }, rho.flags().cash_additive || is_exp_ce(rho), q,
                           opts);
}

ExtReal loss_penalty(const LossFunction& loss, double t, const ScenarioMeasure& q, bool numeric) {
    if (!numeric) {
        if (loss.family == LossFunction::Family::Exponential) return ExtReal(t - relative_entropy(q) / loss.rate);
        if (loss.family == LossFunction::Family::Identity)
            return q.is_reference(kSameMeasureTol) ? ExtReal(t) : ExtReal::neg_inf();
    }
    const auto& p = q.space()->probs();
    // g(x) = x t - E[l*(x D)], concave on its domain
    auto g = [&](double x) {
        double s = 0.0;
        for (std::size_t i = 0; i < q.n(); ++i) {
            if (p[i] == 0.0) continue;
            ExtReal c = loss.ell_conj(x * q[i]);
            if (!c.is_finite()) return c.is_pos_inf() ? -HUGE_VAL : HUGE_VAL;
            s += p[i] * c.value();
        }
        return x * t - s;
    };
    // a point of the domain: 1, 2, 1/2, 4, 1/4, ...
    double x0 = -1.0;
    for (int k = 0; k <= 80 && x0 < 0.0; ++k) {
        double cand = std::ldexp(1.0, (k % 2 ? 1 : -1) * ((k + 1) / 2));
        if (g(cand) > -HUGE_VAL) x0 = cand;
    }
    if (x0 < 0.0) {
        if (g(0.0) > -HUGE_VAL) x0 = 0.0;
        else return ExtReal::neg_inf();
    }
    double hi = std::max(x0, 1.0);
    while (g(2.0 * hi) > g(hi)) {
        hi *= 2.0;
        if (hi > 1e12) return ExtReal::pos_inf();
    }
    double lo = x0;
    while (lo > 1e-300 && g(0.5 * lo) > g(lo)) lo *= 0.5;
    auto [xs, v] = golden_max(g, lo * 0.5, 2.0 * hi, 400);
    (void)xs;
    v = std::max({v, g(x0), g(0.0)});
    if (v == HUGE_VAL) return ExtReal::pos_inf();
    if (v == -HUGE_VAL) return ExtReal::neg_inf();
    double r = loss.ell_inv(v);
    if (std::isnan(r)) return ExtReal::neg_inf();
    return ExtReal(r);
}

// ---------------------------------------------------------------- surfaces

std::string to_string(PenaltyKind k) {
    switch (k) {
        case PenaltyKind::BruteForce: return "brute_force";
        case PenaltyKind::CashAdditiveClosedForm: return "cash_additive_closed_form";
        case PenaltyKind::LossClosedForm: return "loss_closed_form";
    }
    return "?";
}

PenaltySurface::PenaltySurface(std::string name, PenaltyKind kind, AxiomFlags source, Eval eval)
    : name_(std::move(name)), kind_(kind), source_(source), eval_(std::move(eval)) {}

std::optional<ExtReal> PenaltySurface::at(const ExtReal& t, const ScenarioMeasure& q) const {
    if (t.is_finite()) return eval_(t.value(), q);
    if (kind_ == PenaltyKind::BruteForce) return std::nullopt;
    if (t.is_neg_inf()) return ExtReal::neg_inf();
    // R(., Q) is either identically -inf or unbounded above for closed forms
    ExtReal r0 = eval_(0.0, q);
    return r0.is_neg_inf() ? ExtReal::neg_inf() : ExtReal::pos_inf();
}

PenaltySurface brute_force_surface(std::string name, Objective f, AxiomFlags source, SpacePtr space,
                                   const BruteForceOptions& opts) {
    (void)space;
    auto eval = [f = std::move(f), opts](double t, const ScenarioMeasure& q) -> ExtReal {
        const auto& s = q.space();
        const std::size_t n = s->n();
        double anchor_scale = 0.0;
        for (const auto& a : opts.anchors) anchor_scale = std::max(anchor_scale, sup_norm(a));
        const double B = opts.bound > 0.0 ? opts.bound : 10.0 * (anchor_scale + std::fabs(t) + 1.0);
        double h = opts.step > 0.0 ? opts.step : B / 50.0;
        // the shift projection only sees differences to atom 0: Y = (0, d) with d in [-2B, 2B]
        while (lattice_size(n - 1, 2.0 * B, h) > static_cast<double>(opts.max_lattice)) h *= 2.0;
        std::vector<bool> null_atom(n);
        bool any_null = false;
        for (std::size_t i = 0; i < n; ++i) any_null |= (null_atom[i] = q[i] == 0.0);

        ExtReal best = ExtReal::pos_inf();
        // shift onto E_Q[-Y] = t; coordinates Q does not see go to the top of the box
        auto project_eval = [&](std::vector<double> y, bool raise) {
            double c = 0.0;
            for (std::size_t i = 0; i < n; ++i) c -= s->prob(i) * q[i] * y[i];
            c -= t;
            double top = B;
            for (std::size_t i = 0; i < n; ++i) {
                y[i] += c;
                if (!null_atom[i]) top = std::max(top, y[i]);
            }
            if (raise)
                for (std::size_t i = 0; i < n; ++i)
                    if (null_atom[i]) y[i] = top;
            ExtReal v = f(Position(s, std::move(y)));
            if (v < best) best = v;
        };
        visit_box(n, true, 2.0 * B, h, [&](const std::vector<double>& y) {
            // realizable inside [-B, B]^n: the spread of (0, d) is at most 2B
            double lo = 0.0, hi = 0.0;
            for (double v : y) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (hi - lo > 2.0 * B + 1e-9) return;
            project_eval(y, true);
        });
        for (const auto& a : opts.anchors) {
            if (!same_space(a.space(), s)) throw std::invalid_argument("brute force surface: anchor on another space");
            project_eval(a.values(), false);
            if (any_null) project_eval(a.values(), true);
        }
        return best;
    };
    return PenaltySurface(std::move(name), PenaltyKind::BruteForce, source, std::move(eval));
}

PenaltySurface penalty_type(const RiskFunctional& rho, PenaltyKind kind, const BruteForceOptions& opts) {
    switch (kind) {
        case PenaltyKind::CashAdditiveClosedForm: {
            const RiskKind k = rho.kind();
            bool coded = k == RiskKind::NegExpectation || k == RiskKind::Entropic || k == RiskKind::ExpectedShortfall ||
                         k == RiskKind::WorstCase;
            if (!rho.flags().cash_additive || !coded)
                throw std::invalid_argument("penalty_type: no closed-form cash-additive penalty for " + rho.name());
            return PenaltySurface(rho.name() + ":t-c(Q)", kind, rho.flags(),
                                  [rho](double t, const ScenarioMeasure& q) {
                                      return ExtReal(t) - *closed_form_penalty(rho, q);
                                  });
        }
        case PenaltyKind::LossClosedForm: {
            if (rho.kind() != RiskKind::CertaintyEquivalent || !rho.loss())
                throw std::invalid_argument("penalty_type: R_l needs a certainty equivalent, got " + rho.name());
            LossFunction l = *rho.loss();
            return PenaltySurface(rho.name() + ":R_l(" + l.name() + ")", kind, rho.flags(),
                                  [l](double t, const ScenarioMeasure& q) { return loss_penalty(l, t, q); });
        }
        case PenaltyKind::BruteForce:
            return brute_force_surface(rho.name() + ":brute_force", [rho](const Position& z) { return rho(z); },
                                       rho.flags(), nullptr, opts);
    }
    throw std::invalid_argument("penalty_type: unknown kind");
}

PenaltySurface penalty_type(const RiskFunctional& rho, const BruteForceOptions& opts) {
    for (PenaltyKind k : {PenaltyKind::CashAdditiveClosedForm, PenaltyKind::LossClosedForm}) {
        try {
            return penalty_type(rho, k, opts);
        } catch (const std::invalid_argument&) {
        }
    }
    return penalty_type(rho, PenaltyKind::BruteForce, opts);
}

// ---------------------------------------------------------------- support functions

namespace {

// Hoelder extremal direction: E[w^p] = 1 and E[D w] = ||D||_q.
std::vector<double> hoelder_direction(const ScenarioMeasure& q, double p) {
    const std::size_t n = q.n();
    const auto& pr = q.space()->probs();
    std::vector<double> w(n, 0.0);
    const double qe = conjugate_exponent(p);
    if (std::isinf(qe)) {
        std::size_t i = static_cast<std::size_t>(std::max_element(q.density().begin(), q.density().end()) -
                                                 q.density().begin());
        w[i] = 1.0 / std::pow(pr[i], 1.0 / p);
        return w;
    }
    if (qe == 1.0) return std::vector<double>(n, 1.0);
    const double norm = density_norm(q, qe);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::pow(q[i] / norm, qe - 1.0);
    return w;
}

// X rearranged so that -X is comonotone with the density: the smallest payoff
// goes where Q puts the most weight per unit of P.
Position comonotone_rearrangement(const ScenarioMeasure& q, const Position& x) {
    const std::size_t n = x.n();
    std::vector<std::size_t> by_d(n);
    std::iota(by_d.begin(), by_d.end(), 0);
    std::stable_sort(by_d.begin(), by_d.end(), [&](auto a, auto b) { return q[a] > q[b]; });
    auto xs = x.values();
    std::sort(xs.begin(), xs.end());
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) out[by_d[k]] = xs[k];
    return Position(x.space(), out);
}

bool is_sup(const UncertaintyFamily& f) {
    return f.kind() == FamilyKind::SupNormBall || (f.kind() == FamilyKind::PNormBall && std::isinf(f.p()));
}

bool level_closed(const UncertaintyFamily& f) {
    if (f.kind() != FamilyKind::LevelBand && f.kind() != FamilyKind::LevelUpperSet) return false;
    const RiskFunctional& r1 = *f.rho1();
    return (r1.flags().cash_additive || is_exp_ce(r1)) &&
           closed_form_penalty(r1, ScenarioMeasure::reference(uniform_space(1))).has_value();
}

double level_gamma(const RiskFunctional& r1) {
    if (r1.kind() == RiskKind::Entropic) return r1.params().gamma;
    if (is_exp_ce(r1)) return r1.loss()->rate;
    return 0.0;
}

RobustValue exact(ExtReal v, std::optional<Position> z, std::string detail) {
    RobustValue r;
    r.value = v;
    r.witness = std::move(z);
    r.solver = SolverKind::Analytic;
    r.guarantee = Guarantee::Exact;
    r.detail = std::move(detail);
    return r;
}

// Closed form of phi_Q at X, or nullopt when only numerics apply.
std::optional<RobustValue> support_closed(const UncertaintyFamily& f, const ScenarioMeasure& q, const Position& x) {
    const double e = f.eps();
    // adding a nonnegative K only lowers E_Q[-Z], so solid hulls share phi_Q
    if (is_sup(f)) return exact(ExtReal(-expectation_under(q, x) + e), x - e, "E_Q[-X] + eps");
    if (f.kind() == FamilyKind::PNormBall) {
        auto w = hoelder_direction(q, f.p());
        return exact(ExtReal(-expectation_under(q, x) + e * density_norm(q, conjugate_exponent(f.p()))),
                     x - e * Position(x.space(), w), "E_Q[-X] + eps ||dQ/dP||_q");
    }
    if (f.kind() == FamilyKind::WassersteinBall) {
        if (!uniform(*x.space())) return std::nullopt;
        Position r = comonotone_rearrangement(q, x);
        auto w = hoelder_direction(q, f.p());
        return exact(ExtReal(-expectation_under(q, r) + e * density_norm(q, conjugate_exponent(f.p()))),
                     r - e * Position(x.space(), w), "f_Q(-X) + eps ||dQ/dP||_q");
    }
    if (!level_closed(f)) return std::nullopt;
    const RiskFunctional& r1 = *f.rho1();
    ExtReal m = r1(x);
    if (!m.is_finite()) return std::nullopt;
    const double level = m.value() + e;
    ExtReal c = *closed_form_penalty(r1, q);
    if (c.is_pos_inf()) return exact(ExtReal::pos_inf(), std::nullopt, "rho1(X) + eps + c1(Q), c1(Q) = +inf");
    std::optional<Position> z;
    if (c.value() == 0.0) {
        z = Position::constant(x.space(), -level);
    } else if (double g = level_gamma(r1); g > 0.0 &&
                                           std::all_of(q.density().begin(), q.density().end(),
                                                       [](double d) { return d > 0.0; })) {
        // Z = -ln(dQ/dP)/gamma has rho1(Z) = 0; shift it onto the level
        std::vector<double> v(x.n());
        for (std::size_t i = 0; i < x.n(); ++i) v[i] = -std::log(q[i]) / g - level;
        z = Position(x.space(), v);
    }
    return exact(ExtReal(level) + c, z, "rho1(X) + eps + c1(Q)");
}

RobustValue support_numeric(const UncertaintyFamily& f, const ScenarioMeasure& q, const Position& x,
                            const SolverOptions& opts) {
    return maximize_over(f, x, [&q](const Position& z) { return ExtReal(-expectation_under(q, z)); },
                         ObjectiveTraits{true, true, false}, opts);
}

}  // namespace

RobustValue support_function(const UncertaintyFamily& family, const ScenarioMeasure& q, const Position& x,
                             const SolverOptions& opts) {
    if (!same_space(q.space(), x.space())) throw std::invalid_argument("support_function: Q and X on different spaces");
    if (opts.kind == SolverKind::Auto || opts.kind == SolverKind::Analytic)
        if (auto r = support_closed(family, q, x)) return *r;
    return support_numeric(family, q, x, opts);
}

Objective support_functional(const UncertaintyFamily& family, const ScenarioMeasure& q, const SolverOptions& opts) {
    const double e = family.eps();
    if (is_sup(family))
        return [q, e](const Position& y) { return ExtReal(-expectation_under(q, y) + e); };
    if (family.kind() == FamilyKind::PNormBall) {
        const double add = e * density_norm(q, conjugate_exponent(family.p()));
        return [q, add](const Position& y) { return ExtReal(-expectation_under(q, y) + add); };
    }
    if (level_closed(family)) {
        const ExtReal c = *closed_form_penalty(*family.rho1(), q);
        const RiskFunctional r1 = *family.rho1();
        return [r1, c, e](const Position& y) {
            ExtReal m = r1(y);
            if (!m.is_finite() || c.is_pos_inf()) return c.is_pos_inf() ? ExtReal::pos_inf() : m;
            return ExtReal(m.value() + e) + c;
        };
    }
    return [family, q, opts](const Position& y) { return support_function(family, q, y, opts).value; };
}

std::optional<ExtReal> support_penalty(const UncertaintyFamily& family, const ScenarioMeasure& q,
                                       const ScenarioMeasure& qt) {
    const double e = family.eps();
    if (is_sup(family)) return same_measure(q, qt) ? ExtReal(-e) : ExtReal::pos_inf();
    if (family.kind() == FamilyKind::PNormBall)
        return same_measure(q, qt) ? ExtReal(-e * density_norm(q, conjugate_exponent(family.p())))
                                   : ExtReal::pos_inf();
    if (family.kind() == FamilyKind::WassersteinBall) {
        if (!uniform(*q.space())) return std::nullopt;
        // phi_Q is the sup of E_{Q'}[-X] over rearrangements Q' of Q, shifted
        auto a = q.density(), b = qt.density();
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        for (std::size_t i = 0; i < a.size(); ++i)
            if (std::fabs(a[i] - b[i]) > kSameMeasureTol) return ExtReal::pos_inf();
        return ExtReal(-e * density_norm(q, conjugate_exponent(family.p())));
    }
    if (level_closed(family)) {
        const RiskFunctional& r1 = *family.rho1();
        ExtReal cq = *closed_form_penalty(r1, q), cqt = *closed_form_penalty(r1, qt);
        if (cq.is_pos_inf()) return ExtReal::neg_inf();  // phi_Q is identically +inf
        if (cqt.is_pos_inf()) return ExtReal::pos_inf();
        return ExtReal(cqt.value() - e - cq.value());
    }
    return std::nullopt;
}

// ---------------------------------------------------------------- verifiers

double GapReport::tolerance() const { return (closed_form ? 1e-5 : 1e-3) + slack(); }

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw HypothesisError("hypothesis violation: " + what);
}

void require_family(const UncertaintyFamily& f, FamilyProperty prop, const DualOptions& o) {
    auto v = check_property(f, prop, o.hypothesis_trials, o.seed);
    require(!v.is_counterexample(), f.name() + " is not " + to_string(prop) + " (" + v.note + ")");
}

void require_grid(const SimplexGrid& grid, const Position& x) {
    if (!same_space(grid.space(), x.space())) throw std::invalid_argument("dual check: grid and X on different spaces");
}

double signed_gap(const ExtReal& primal, const ExtReal& dual) {
    if (primal == dual) return 0.0;
    if (primal.is_finite() && dual.is_finite()) return primal.value() - dual.value();
    return primal > dual ? HUGE_VAL : -HUGE_VAL;
}

struct Sup {
    ExtReal value = ExtReal::neg_inf();
    std::optional<ScenarioMeasure> arg;

    void offer(const ExtReal& v, const ScenarioMeasure& q) {
        if (!arg || v > value) {
            value = v;
            arg = q;
        }
    }
};

GapReport finish(std::string rep, const ExtReal& primal, Guarantee g, const Sup& sup, const SimplexGrid& grid,
                 bool closed, std::string note) {
    GapReport r;
    r.representation = std::move(rep);
    r.primal = primal;
    r.dual = sup.value;
    r.gap = signed_gap(primal, sup.value);
    r.step = grid.step();
    r.grid_points = grid.size();
    r.argmax = sup.arg;
    r.closed_form = closed;
    r.primal_guarantee = g;
    r.note = std::move(note);
    return r;
}

BruteForceOptions with_anchors(const BruteForceOptions& b, std::initializer_list<Position> extra) {
    BruteForceOptions o = b;
    for (const auto& a : extra) o.anchors.push_back(a);
    return o;
}

void require_dual_rho(const RiskFunctional& rho) {
    const auto& f = rho.flags();
    require(f.monotone, rho.name() + " is not declared monotone");
    require(f.quasi_convex || f.convex, rho.name() + " is not declared quasi-convex");
    require(f.continuous_from_above, rho.name() + " is not declared continuous from above");
}

void require_convex_cash_additive(const RiskFunctional& rho) {
    const auto& f = rho.flags();
    require(f.monotone && f.convex && f.cash_additive, rho.name() + " is not declared convex and cash-additive");
    require(f.continuous_from_above, rho.name() + " is not declared continuous from above");
}

// c(Q) for every grid point, closed form when coded.
std::vector<PenaltyEstimate> penalties_on(const RiskFunctional& rho, const SimplexGrid& grid,
                                          const PenaltyOptions& o) {
    std::vector<PenaltyEstimate> out;
    out.reserve(grid.size());
    for (const auto& q : grid.points()) out.push_back(minimal_penalty(rho, q, o));
    return out;
}

}  // namespace

GapReport verify_primal_dual(const RiskFunctional& rho, const Position& x, const SimplexGrid& grid,
                             const DualOptions& opts) {
    require_grid(grid, x);
    require_dual_rho(rho);
    auto surf = penalty_type(rho, with_anchors(opts.brute, {x}));
    Sup sup;
    for (const auto& q : grid.points()) sup.offer(surf(-expectation_under(q, x), q), q);
    return finish("primal_dual", rho(x), Guarantee::Exact, sup, grid, surf.closed_form(), surf.name());
}

GapReport verify_robust_dual(const RiskFunctional& rho, const UncertaintyFamily& family, const Position& x,
                             const SimplexGrid& grid, const DualOptions& opts) {
    require_grid(grid, x);
    const bool ce = rho.kind() == RiskKind::CertaintyEquivalent && rho.loss();
    if (ce) {
        require(rho.flags().monotone && rho.flags().continuous_from_above,
                rho.name() + " is not declared monotone and continuous from above");
    } else {
        require_dual_rho(rho);
        require(rho.flags().cash_subadditive || rho.flags().cash_additive,
                rho.name() + " is not declared cash-subadditive");
    }
    require_family(family, FamilyProperty::Convex, opts);

    RobustValue primal = robust_value(rho, family, x, opts.solver);
    BruteForceOptions b = with_anchors(opts.brute, {x});
    if (primal.witness) b.anchors.push_back(*primal.witness);
    auto surf = ce ? penalty_type(rho, PenaltyKind::LossClosedForm) : penalty_type(rho, b);
    bool closed = surf.closed_form();
    std::size_t skipped = 0;
    Sup sup;
    for (const auto& q : grid.points()) {
        RobustValue phi = support_function(family, q, x, opts.solver);
        closed &= phi.guarantee == Guarantee::Exact;
        auto r = surf.at(phi.value, q);
        if (!r) {
            ++skipped;
            continue;
        }
        sup.offer(*r, q);
    }
    std::string note = (ce ? "certainty-equivalent form, " : "theorem form, ") + surf.name();
    if (skipped) note += ", " + std::to_string(skipped) + " measures with unbounded phi_Q skipped";
    return finish(ce ? "robust_dual_ce" : "robust_dual", primal.value, primal.guarantee, sup, grid, closed, note);
}

GapReport verify_convex_cash_additive_dual(const RiskFunctional& rho, const UncertaintyFamily& family,
                                           const Position& x, const SimplexGrid& grid, const DualOptions& opts) {
    require_grid(grid, x);
    require_convex_cash_additive(rho);
    require_family(family, FamilyProperty::Convex, opts);
    require_family(family, FamilyProperty::CashInvariant, opts);

    RobustValue primal = robust_value(rho, family, x, opts.solver);
    auto c = penalties_on(rho, grid, opts.penalty);
    bool closed = std::all_of(c.begin(), c.end(), [](const auto& e) { return e.guarantee == Guarantee::Exact; });
    const auto& pts = grid.points();
    Sup sup;
    for (const auto& qt : pts) {
        ExtReal inner = ExtReal::pos_inf();
        for (std::size_t k = 0; k < pts.size(); ++k) {
            if (c[k].value.is_pos_inf()) continue;
            std::optional<ExtReal> cphi = support_penalty(family, pts[k], qt);
            if (!cphi) {
                closed = false;
                auto phi = support_functional(family, pts[k], opts.solver);
                cphi = minimal_penalty(phi, true, qt, opts.penalty).value;
            }
            if (cphi->is_pos_inf()) continue;
            if (cphi->is_neg_inf()) {
                inner = ExtReal::neg_inf();
                break;
            }
            inner = min(inner, *cphi + c[k].value);
        }
        if (inner.is_pos_inf()) continue;
        sup.offer(ExtReal(-expectation_under(qt, x)) - inner, qt);
    }
    return finish("convex_cash_additive_dual", primal.value, primal.guarantee, sup, grid, closed,
                  "double-layer penalty inf_Q { c_phiQ(Qt) + c(Q) }");
}

GapReport verify_second_approach_dual(const RiskFunctional& rho, const UncertaintyFamily& family,
                                      const Position& x, const SimplexGrid& grid, const DualOptions& opts) {
    require_grid(grid, x);
    require_convex_cash_additive(rho);
    require_family(family, FamilyProperty::QuasiConvex, opts);
    require_family(family, FamilyProperty::ContinuousFromAbove, opts);

    RobustValue primal = robust_value(rho, family, x, opts.solver);
    auto c = penalties_on(rho, grid, opts.penalty);
    const auto& pts = grid.points();
    AxiomFlags phi_flags;
    phi_flags.monotone = phi_flags.quasi_convex = true;
    BruteForceOptions b = with_anchors(opts.brute, {x});
    Sup sup;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        if (c[k].value.is_pos_inf()) continue;
        auto surf = brute_force_surface("phi_Q", support_functional(family, pts[k], opts.solver), phi_flags,
                                        x.space(), b);
        for (const auto& qt : pts) sup.offer(surf(-expectation_under(qt, x), qt) - c[k].value, qt);
    }
    return finish("second_approach_dual", primal.value, primal.guarantee, sup, grid, false,
                  "brute-force R_phiQ anchored at X");
}

PropertyVerdict non_expansivity_check(const PenaltySurface& surface, const SpacePtr& space, std::size_t samples,
                                      std::uint64_t seed, double tol) {
    const auto& f = surface.source_flags();
    if (!f.cash_subadditive && !f.cash_additive)
        return PropertyVerdict::unknown("hypothesis: " + surface.name() + " does not come from a cash-subadditive rho");
    Rng rng(seed);
    for (std::size_t k = 0; k < samples; ++k) {
        ScenarioMeasure q = k % 5 == 0 ? ScenarioMeasure::reference(space) : rng.measure(space);
        double t = rng.uniform(-5.0, 5.0), t2 = t + rng.uniform(-2.0, 2.0);
        ExtReal a = surface(t, q), b = surface(t2, q);
        if (a == b) continue;
        bool bad = false;
        if (!a.is_finite() || !b.is_finite()) {
            bad = true;
        } else {
            double lo = std::min(t, t2) == t ? a.value() : b.value();
            double hi = std::min(t, t2) == t ? b.value() : a.value();
            bad = std::fabs(a.value() - b.value()) > std::fabs(t - t2) + tol || lo > hi + tol;
        }
        if (bad) {
            Witness w;
            w.probs = space->probs();
            w.vectors["density"] = q.density();
            w.scalars = {{"t", t}, {"t2", t2}, {"R_t", a.to_double()}, {"R_t2", b.to_double()}};
            return PropertyVerdict::counterexample(w, "|R(t,Q) - R(t',Q)| > |t - t'| or R decreasing in t");
        }
    }
    if (surface.kind() == PenaltyKind::CashAdditiveClosedForm)
        return PropertyVerdict::certified("t - c(Q) moves one-to-one with t");
    return PropertyVerdict::sampled(samples);
}

std::optional<ScenarioMeasure> dual_optimizer(const RiskFunctional& rho, const Position& x) {
    const auto& s = x.space();
    const std::size_t n = x.n();
    auto gibbs = [&](double g) {
        double lo = *std::min_element(x.values().begin(), x.values().end());
        std::vector<double> w(n);
        double mass = 0.0;
        for (std::size_t i = 0; i < n; ++i) mass += s->prob(i) * (w[i] = std::exp(-g * (x[i] - lo)));
        for (auto& v : w) v /= mass;
        return ScenarioMeasure(s, w);
    };
    switch (rho.kind()) {
        case RiskKind::NegExpectation: return ScenarioMeasure::reference(s);
        case RiskKind::Entropic: return gibbs(rho.params().gamma);
        case RiskKind::CertaintyEquivalent:
            if (is_exp_ce(rho)) return gibbs(rho.loss()->rate);
            if (rho.loss() && rho.loss()->family == LossFunction::Family::Identity)
                return ScenarioMeasure::reference(s);
            return std::nullopt;
        case RiskKind::WorstCase: {
            std::size_t i = static_cast<std::size_t>(std::min_element(x.values().begin(), x.values().end()) -
                                                     x.values().begin());
            std::vector<double> q(n, 0.0);
            q[i] = 1.0;
            return ScenarioMeasure::from_probabilities(s, q);
        }
        case RiskKind::ExpectedShortfall: {
            const double alpha = rho.params().alpha;
            std::vector<std::size_t> idx(n);
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
            std::vector<double> d(n, 0.0);
            double left = std::min(alpha, 1.0);
            for (auto i : idx) {
                double take = std::min(s->prob(i), left);
                d[i] = take / (std::min(alpha, 1.0) * s->prob(i));
                left -= take;
                if (left <= 0.0) break;
            }
            return ScenarioMeasure(s, d);
        }
        default: return std::nullopt;
    }
}

DualArgmax dual_argmax(const RiskFunctional& rho, const Position& x, const SimplexGrid& grid, double tie_q) {
    require_grid(grid, x);
    SimplexGrid g = grid;
    bool augmented = false;
    if (auto q = dual_optimizer(rho, x)) augmented = g.add(*q);
    ExtReal best = ExtReal::neg_inf();
    BruteForceOptions b;
    b.anchors = {x};
    auto surf = penalty_type(rho, b);
    std::optional<ScenarioMeasure> arg;
    double arg_norm = HUGE_VAL;
    for (const auto& q : g.points()) {
        ExtReal v = surf(-expectation_under(q, x), q);
        double nq = density_norm(q, tie_q);
        bool tie = arg && v.is_finite() && best.is_finite() &&
                   std::fabs(v.value() - best.value()) <= 1e-12 * (1.0 + std::fabs(best.value()));
        bool better = !arg || (tie ? nq < arg_norm || (nq == arg_norm && std::lexicographical_compare(
                                                                          q.density().begin(), q.density().end(),
                                                                          arg->density().begin(), arg->density().end()))
                                   : v > best);
        if (tie) best = max(best, v);
        if (better) {
            if (!tie) best = v;
            arg = q;
            arg_norm = nq;
        }
    }
    ExtReal base = rho(x);
    bool attained = best.is_finite() && base.is_finite() && std::fabs(best.value() - base.value()) <= 1e-9;
    return DualArgmax{*arg, best, attained, augmented, surf.closed_form()};
}

WassersteinBoundReport wasserstein_bound_check(const RiskFunctional& rho, double eps, double p, const Position& x,
                                               const SimplexGrid& grid, const SolverOptions& opts) {
    require_grid(grid, x);
    const auto& f = rho.flags();
    require(f.law_invariant && (f.quasi_convex || f.convex) && (f.cash_subadditive || f.cash_additive || is_exp_ce(rho)),
            rho.name() + " is not declared law-invariant, quasi-convex and cash-subadditive");
    const double qe = conjugate_exponent(p);
    auto am = dual_argmax(rho, x, grid, qe);
    WassersteinBoundReport r;
    r.attained = am.attained;
    auto lhs = robust_value(rho, wasserstein_ball(p, eps), x, opts);
    r.lhs = lhs.value;
    r.lhs_guarantee = lhs.guarantee;
    r.rhs = rho(x) + ExtReal(eps * density_norm(am.q, qe));
    r.q_star = am.q;
    r.holds = r.lhs.is_neg_inf() || r.rhs.is_pos_inf() ||
              (r.lhs.is_finite() && r.rhs.is_finite() && r.lhs.value() <= r.rhs.value() + 1e-9);
    if (am.augmented) r.note = "grid augmented with the closed-form dual optimizer";
    return r;
}

}  // namespace rrisk
