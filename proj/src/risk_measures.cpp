#include "rrisk/risk_measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "rrisk/sampling.hpp"

namespace rrisk {

std::string to_string(Axiom a) {
    switch (a) {
        case Axiom::Monotone: return "monotone";
        case Axiom::Convex: return "convex";
        case Axiom::QuasiConvex: return "quasi_convex";
        case Axiom::CashAdditive: return "cash_additive";
        case Axiom::CashSubadditive: return "cash_subadditive";
        case Axiom::LawInvariant: return "law_invariant";
        default: return "continuous_from_above";
    }
}

bool has_flag(const AxiomFlags& f, Axiom a) {
    switch (a) {
        case Axiom::Monotone: return f.monotone;
        case Axiom::Convex: return f.convex;
        case Axiom::QuasiConvex: return f.quasi_convex;
        case Axiom::CashAdditive: return f.cash_additive;
        case Axiom::CashSubadditive: return f.cash_subadditive;
        case Axiom::LawInvariant: return f.law_invariant;
        default: return f.continuous_from_above;
    }
}

// ---------------------------------------------------------------- losses

std::string LossFunction::name() const {
    switch (family) {
        case Family::Identity: return "identity";
        case Family::ExpLinear: return "exp_linear";
        default: {
            char buf[48];
            std::snprintf(buf, sizeof buf, "exp(rate=%.17g)", rate);
            return buf;
        }
    }
}

LossFunction exponential_loss(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential_loss: rate must be positive");
    LossFunction l;
    l.family = LossFunction::Family::Exponential;
    l.rate = rate;
    l.ell = [rate](double x) { return std::exp(rate * x); };
    l.ell_inv = [rate](double y) { return std::log(y) / rate; };
    // sup_x { x y - e^{a x} } = (y/a) ln(y/a) - y/a for y > 0
    l.ell_conj = [rate](double y) -> ExtReal {
        if (y < 0.0) return ExtReal::pos_inf();
        if (y == 0.0) return 0.0;
        double u = y / rate;
        return u * std::log(u) - u;
    };
    return l;
}

LossFunction identity_loss() {
    LossFunction l;
    l.family = LossFunction::Family::Identity;
    l.ell = [](double x) { return x; };
    l.ell_inv = [](double y) { return y; };
    l.ell_conj = [](double y) -> ExtReal { return y == 1.0 ? ExtReal(0.0) : ExtReal::pos_inf(); };
    return l;
}

LossFunction exp_linear_loss() {
    LossFunction l;
    l.family = LossFunction::Family::ExpLinear;
    l.ell = [](double x) { return x + std::exp(x); };
    l.ell_inv = [](double y) {
        // x + e^x = y: Newton from a start on the correct side of the root
        double x = y > 1.0 ? std::log(y) : y - std::exp(y);
        for (int it = 0; it < 100; ++it) {
            double ex = std::exp(x);
            double step = (x + ex - y) / (1.0 + ex);
            x -= step;
            if (std::fabs(step) <= 1e-15 * (1.0 + std::fabs(x))) break;
        }
        return x;
    };
    l.ell_conj = [](double y) -> ExtReal {
        if (y < 1.0) return ExtReal::pos_inf();
        if (y == 1.0) return 0.0;
        double u = y - 1.0;
        return u * std::log(u) - u;
    };
    return l;
}

// ---------------------------------------------------------------- functionals

RiskFunctional::RiskFunctional(std::string name, RiskKind kind, AxiomFlags flags, RiskParams params, Eval eval,
                               std::shared_ptr<const LossFunction> loss)
    : name_(std::move(name)), kind_(kind), flags_(flags), params_(params), eval_(std::move(eval)), loss_(std::move(loss)) {}

std::string RiskFunctional::signature() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d|%.17g|%.17g|%.17g|%.17g|%.17g|", static_cast<int>(kind_), params_.K,
                  params_.gamma, params_.q, params_.beta, params_.alpha);
    return buf + name_ + (loss_ ? "|" + loss_->name() : std::string());
}

namespace {

AxiomFlags coherent_flags() {
    AxiomFlags f;
    f.monotone = f.convex = f.quasi_convex = f.cash_additive = f.cash_subadditive = true;
    f.law_invariant = f.continuous_from_above = true;
    return f;
}

}  // namespace

RiskFunctional neg_expectation() {
    return RiskFunctional("neg_expectation", RiskKind::NegExpectation, coherent_flags(), {},
                          [](const Position& x) { return ExtReal(-expectation(x)); });
}

RiskFunctional expectation_floor(double K) {
    if (!(K > 0.0)) throw std::invalid_argument("expectation_floor: K must be positive");
    AxiomFlags f;
    f.monotone = f.quasi_convex = f.law_invariant = f.continuous_from_above = true;
    // max(E[-X] - m, K) >= max(E[-X], K) - m, so the floor is cash-subadditive
    f.cash_subadditive = true;
    RiskParams p;
    p.K = K;
    return RiskFunctional("expectation_floor", RiskKind::ExpectationFloor, f, p,
                          [K](const Position& x) { return ExtReal(std::max(-expectation(x), K)); });
}

RiskFunctional worst_case() {
    return RiskFunctional("worst_case", RiskKind::WorstCase, coherent_flags(), {}, [](const Position& x) {
        double m = -x[0];
        for (double v : x.values()) m = std::max(m, -v);
        return ExtReal(m);
    });
}

RiskFunctional entropic(double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("entropic: gamma must be positive");
    RiskParams p;
    p.gamma = gamma;
    return RiskFunctional("entropic", RiskKind::Entropic, coherent_flags(), p, [gamma](const Position& x) {
        // log-sum-exp with the largest exponent factored out
        double m = -gamma * x[0];
        for (double v : x.values()) m = std::max(m, -gamma * v);
        double s = 0.0;
        for (std::size_t i = 0; i < x.n(); ++i) s += x.space()->prob(i) * std::exp(-gamma * x[i] - m);
        return ExtReal((std::log(s) + m) / gamma);
    });
}

RiskFunctional certainty_equivalent(const LossFunction& loss) {
    AxiomFlags f;
    f.monotone = f.quasi_convex = f.law_invariant = f.continuous_from_above = true;
    auto l = std::make_shared<const LossFunction>(loss);
    return RiskFunctional(
        "certainty_equivalent", RiskKind::CertaintyEquivalent, f, {},
        [l](const Position& x) {
            double s = 0.0;
            for (std::size_t i = 0; i < x.n(); ++i) s += x.space()->prob(i) * l->ell(-x[i]);
            double r = l->ell_inv(s);
            if (std::isnan(r)) throw std::domain_error("certainty_equivalent: loss evaluated outside its domain");
            return ExtReal(r);
        },
        l);
}

double exp_q(double x, double q) {
    if (!(q > 0.0 && q < 1.0)) throw std::domain_error("exp_q: q must lie in (0,1)");
    if (x < 1.0 / (q - 1.0)) throw std::domain_error("exp_q: argument below 1/(q-1)");
    return std::pow(1.0 + (1.0 - q) * x, 1.0 / (1.0 - q));
}

double ln_q(double x, double q) {
    if (!(q > 0.0 && q < 1.0)) throw std::domain_error("ln_q: q must lie in (0,1)");
    if (x < 0.0) throw std::domain_error("ln_q: negative argument");
    return (std::pow(x, 1.0 - q) - 1.0) / (1.0 - q);
}

RiskFunctional q_entropic(double q, double beta) {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("q_entropic: q must lie in (0,1)");
    if (!(beta > 0.0)) throw std::invalid_argument("q_entropic: beta must be positive");
    AxiomFlags f;
    f.monotone = f.convex = f.quasi_convex = f.cash_subadditive = true;
    f.law_invariant = f.continuous_from_above = true;
    RiskParams p;
    p.q = q;
    p.beta = beta;
    return RiskFunctional("q_entropic", RiskKind::QEntropic, f, p, [q, beta](const Position& x) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.n(); ++i) s += x.space()->prob(i) * exp_q(std::max(-(x[i] + beta), 0.0), q);
        return ExtReal(ln_q(s, q));
    });
}

RiskFunctional expected_shortfall(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("expected_shortfall: alpha must lie in (0,1]");
    RiskParams p;
    p.alpha = alpha;
    return RiskFunctional("expected_shortfall", RiskKind::ExpectedShortfall, coherent_flags(), p,
                          [alpha](const Position& x) {
                              // average of the lower alpha-tail of the quantile function
                              double acc = 0.0, used = 0.0;
                              for (const auto& st : quantile_function(x)) {
                                  double lo = used;
                                  double hi = std::min(st.upper, alpha);
                                  if (hi > lo) acc += (hi - lo) * st.value;
                                  used = st.upper;
                                  if (used >= alpha) break;
                              }
                              return ExtReal(-acc / alpha);
                          });
}

// ---------------------------------------------------------------- sampled axiom checks

namespace {

Witness make_witness(const Position& x, const Position& y) {
    Witness w;
    w.probs = x.space()->probs();
    w.vectors["X"] = x.values();
    w.vectors["Y"] = y.values();
    return w;
}

bool exceeds(const ExtReal& lhs, const ExtReal& rhs, double tol) {
    if (lhs.is_pos_inf()) return !rhs.is_pos_inf();
    if (rhs.is_pos_inf() || lhs.is_neg_inf()) return false;
    if (rhs.is_neg_inf()) return true;
    return lhs.value() > rhs.value() + tol;
}

}  // namespace

PropertyVerdict check_axiom(const RiskFunctional& rho, Axiom axiom, std::size_t trials, std::uint64_t seed,
                            double tol) {
    Rng rng(seed);
    for (std::size_t t = 0; t < trials; ++t) {
        std::size_t n = 1 + rng.index(5);
        SpacePtr s = axiom == Axiom::LawInvariant ? uniform_space(n + 1) : make_space(rng.probs(n));
        Position x = rng.position(s, -3.0, 3.0);
        switch (axiom) {
            case Axiom::Monotone: {
                Position y = x + rng.nonneg(s, 2.0);
                ExtReal rx = rho(x), ry = rho(y);
                if (exceeds(ry, rx, tol)) {
                    auto w = make_witness(x, y);
                    return PropertyVerdict::counterexample(w, "X <= Y but rho(Y) > rho(X)");
                }
                break;
            }
            case Axiom::Convex:
            case Axiom::QuasiConvex: {
                Position y = rng.position(s, -3.0, 3.0);
                double lam = rng.uniform(0.0, 1.0);
                ExtReal lhs = rho(mix(lam, x, y)), rx = rho(x), ry = rho(y);
                ExtReal rhs = max(rx, ry);
                if (axiom == Axiom::Convex && rx.is_finite() && ry.is_finite())
                    rhs = lam * rx.value() + (1.0 - lam) * ry.value();
                if (exceeds(lhs, rhs, tol)) {
                    auto w = make_witness(x, y);
                    w.scalars["lambda"] = lam;
                    return PropertyVerdict::counterexample(w, to_string(axiom) + " inequality fails");
                }
                break;
            }
            case Axiom::CashAdditive:
            case Axiom::CashSubadditive: {
                double m = axiom == Axiom::CashAdditive ? rng.uniform(-5.0, 5.0) : rng.uniform(0.0, 5.0);
                ExtReal shifted = rho(x + m), base = rho(x) - ExtReal(m);
                bool bad = axiom == Axiom::CashAdditive ? (exceeds(shifted, base, tol) || exceeds(base, shifted, tol))
                                                        : exceeds(base, shifted, tol);
                if (bad) {
                    auto w = make_witness(x, x + m);
                    w.scalars["m"] = m;
                    return PropertyVerdict::counterexample(w, to_string(axiom) + " fails");
                }
                break;
            }
            case Axiom::LawInvariant: {
                Position y = permute(x, rng.law_preserving_permutation(*s));
                ExtReal a = rho(x), b = rho(y);
                if (exceeds(a, b, tol) || exceeds(b, a, tol))
                    return PropertyVerdict::counterexample(make_witness(x, y), "equal laws, different risk");
                break;
            }
            case Axiom::ContinuousFromAbove: {
                Position d = rng.nonneg(s, 2.0);
                // X_n = X + 2^-n d decreases to X; the tail of the chain must approach rho(X)
                Position tail = x + std::ldexp(1.0, -50) * d;
                ExtReal a = rho(tail), b = rho(x);
                if (exceeds(a, b, tol) || exceeds(b, a, tol)) {
                    auto w = make_witness(x, d);
                    return PropertyVerdict::counterexample(w, "rho(X_n) does not approach rho(X)");
                }
                break;
            }
        }
    }
    return PropertyVerdict::sampled(trials);
}

}  // namespace rrisk
