#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "rrisk/ext_real.hpp"
#include "rrisk/prob_core.hpp"
#include "rrisk/verdict.hpp"

namespace rrisk {

struct AxiomFlags {
    bool monotone = false;
    bool convex = false;
    bool quasi_convex = false;
    bool cash_additive = false;
    // rho(X + m) >= rho(X) - m for m >= 0: sure cash lowers risk at most one-to-one.
    bool cash_subadditive = false;
    bool law_invariant = false;
    bool continuous_from_above = false;
};

enum class Axiom { Monotone, Convex, QuasiConvex, CashAdditive, CashSubadditive, LawInvariant, ContinuousFromAbove };

std::string to_string(Axiom a);

// Strictly increasing convex loss with inverse and convex conjugate.
struct LossFunction {
    enum class Family { Exponential, Identity, ExpLinear };

    Family family = Family::Exponential;
    double rate = 1.0;  // Exponential: ell(x) = exp(rate * x)
    std::function<double(double)> ell;
    std::function<double(double)> ell_inv;
    std::function<ExtReal(double)> ell_conj;

    std::string name() const;
};

LossFunction exponential_loss(double rate = 1.0);
LossFunction identity_loss();
// ell(x) = x + exp(x); no closed-form penalty, exercises the numeric path.
LossFunction exp_linear_loss();

enum class RiskKind {
    NegExpectation,
    ExpectationFloor,
    WorstCase,
    Entropic,
    CertaintyEquivalent,
    QEntropic,
    ExpectedShortfall,
    Custom
};

struct RiskParams {
    double K = 0.0;      // expectation floor
    double gamma = 0.0;  // entropic
    double q = 0.0;      // q-entropic
    double beta = 0.0;   // q-entropic target
    double alpha = 0.0;  // expected shortfall level
};

class RiskFunctional {
public:
    using Eval = std::function<ExtReal(const Position&)>;

    RiskFunctional(std::string name, RiskKind kind, AxiomFlags flags, RiskParams params, Eval eval,
                   std::shared_ptr<const LossFunction> loss = nullptr);

    ExtReal operator()(const Position& x) const { return eval_(x); }
    ExtReal evaluate(const Position& x) const { return eval_(x); }

    const std::string& name() const { return name_; }
    RiskKind kind() const { return kind_; }
    const AxiomFlags& flags() const { return flags_; }
    const RiskParams& params() const { return params_; }
    const LossFunction* loss() const { return loss_.get(); }

    // Stable identifier of (kind, parameters); equal signatures denote the same functional.
    std::string signature() const;

private:
    std::string name_;
    RiskKind kind_;
    AxiomFlags flags_;
    RiskParams params_;
    Eval eval_;
    std::shared_ptr<const LossFunction> loss_;
};

RiskFunctional neg_expectation();
RiskFunctional expectation_floor(double K);
RiskFunctional worst_case();
RiskFunctional entropic(double gamma);
RiskFunctional certainty_equivalent(const LossFunction& loss);
RiskFunctional q_entropic(double q, double beta);
RiskFunctional expected_shortfall(double alpha);

// Tsallis deformations; throw std::domain_error outside their domains.
double exp_q(double x, double q);
double ln_q(double x, double q);

bool has_flag(const AxiomFlags& f, Axiom a);

// Sampled falsification of one axiom on random spaces (n <= 5) and positions
// in [-3, 3]. Counterexample witnesses carry X, Y and the scalars involved.
PropertyVerdict check_axiom(const RiskFunctional& rho, Axiom axiom, std::size_t trials, std::uint64_t seed,
                            double tol = 1e-9);

}  // namespace rrisk
