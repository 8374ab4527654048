#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rrisk/ext_real.hpp"
#include "rrisk/prob_core.hpp"
#include "rrisk/risk_measures.hpp"
#include "rrisk/robustify.hpp"
#include "rrisk/uncertainty.hpp"
#include "rrisk/verdict.hpp"

namespace rrisk {

// Finite cover of the probability simplex. For n <= 3 the lattice
// {k/m : sum k = m} with m = round(1/step); above that a Dirichlet(1) sample.
// Vertices and P are always present.
class SimplexGrid {
public:
    static SimplexGrid make(SpacePtr space, double step = 0.01, std::size_t sample_size = 2000,
                            std::uint64_t seed = 0);

    const SpacePtr& space() const { return space_; }
    double step() const { return step_; }
    const std::vector<ScenarioMeasure>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }

    // Adds q unless an equal measure (within 1e-12 on probabilities) is present.
    bool add(const ScenarioMeasure& q);

private:
    SimplexGrid(SpacePtr space, double step) : space_(std::move(space)), step_(step) {}

    SpacePtr space_;
    double step_;
    std::vector<ScenarioMeasure> points_;
};

// phi_Q(X) = sup_{Z in U_X} E_Q[-Z]. Closed forms for the balls (the
// Wasserstein one on uniform spaces) and for level families whose rho1 has a
// closed-form penalty; a numeric lower bound otherwise.
RobustValue support_function(const UncertaintyFamily& family, const ScenarioMeasure& q, const Position& x,
                             const SolverOptions& opts = {});

// Y -> phi_Q(Y) as a functional, with the Q-dependent pieces precomputed.
Objective support_functional(const UncertaintyFamily& family, const ScenarioMeasure& q,
                             const SolverOptions& opts = {});

struct PenaltyOptions {
    double bound = 20.0;  // box [-B, B]^n for the numeric sup
    double step = 0.1;    // lattice step before local refinement
    bool numeric = false; // skip closed forms
    std::size_t max_lattice = 200000;
};

struct PenaltyEstimate {
    ExtReal value;
    Guarantee guarantee = Guarantee::Exact;
    std::string method;
};

// c(Q) = sup_X { E_Q[-X] - rho(X) }.
PenaltyEstimate minimal_penalty(const RiskFunctional& rho, const ScenarioMeasure& q, const PenaltyOptions& opts = {});
// Same for an arbitrary functional on q's space; always numeric.
PenaltyEstimate minimal_penalty(const Objective& f, bool cash_additive, const ScenarioMeasure& q,
                                const PenaltyOptions& opts = {});
// Closed form when one is coded for rho.
std::optional<ExtReal> closed_form_penalty(const RiskFunctional& rho, const ScenarioMeasure& q);

// R_l(t, Q) = l^{-1}( max_{x >= 0} { x t - E[l*(x dQ/dP)] } ).
ExtReal loss_penalty(const LossFunction& loss, double t, const ScenarioMeasure& q, bool numeric = false);

enum class PenaltyKind { BruteForce, CashAdditiveClosedForm, LossClosedForm };
std::string to_string(PenaltyKind k);

struct BruteForceOptions {
    double bound = 0.0;  // 0: 10 (max anchor sup-norm + |t| + 1)
    double step = 0.0;   // 0: bound / 50
    std::vector<Position> anchors;
    std::size_t max_lattice = 200000;
};

// R(t, Q) = inf { rho(Y) : E_Q[-Y] = t }, increasing in t.
class PenaltySurface {
public:
    using Eval = std::function<ExtReal(double, const ScenarioMeasure&)>;

    PenaltySurface(std::string name, PenaltyKind kind, AxiomFlags source, Eval eval);

    ExtReal operator()(double t, const ScenarioMeasure& q) const { return eval_(t, q); }
    // t = +inf or -inf evaluates the limit; only closed forms know it.
    std::optional<ExtReal> at(const ExtReal& t, const ScenarioMeasure& q) const;

    const std::string& name() const { return name_; }
    PenaltyKind kind() const { return kind_; }
    bool closed_form() const { return kind_ != PenaltyKind::BruteForce; }
    const AxiomFlags& source_flags() const { return source_; }

private:
    std::string name_;
    PenaltyKind kind_;
    AxiomFlags source_;
    Eval eval_;
};

// Throws std::invalid_argument when the kind does not apply to rho.
PenaltySurface penalty_type(const RiskFunctional& rho, PenaltyKind kind, const BruteForceOptions& opts = {});
// Closed form when available, brute force otherwise.
PenaltySurface penalty_type(const RiskFunctional& rho, const BruteForceOptions& opts = {});
PenaltySurface brute_force_surface(std::string name, Objective f, AxiomFlags source, SpacePtr space,
                                   const BruteForceOptions& opts = {});

struct DualOptions {
    BruteForceOptions brute;     // anchors are extended by each verifier
    SolverOptions solver;        // robust values and numeric support functions
    PenaltyOptions penalty;      // numeric minimal penalties
    std::size_t hypothesis_trials = 200;
    std::uint64_t seed = 0;
};

struct GapReport {
    std::string representation;
    ExtReal primal;  // rho(X) or rho~(X)
    ExtReal dual;    // sup over the grid
    double gap = 0.0;  // primal - dual; +-inf when one side is infinite
    double step = 0.0;
    std::size_t grid_points = 0;
    std::optional<ScenarioMeasure> argmax;
    bool closed_form = true;  // every surface and penalty used was closed form
    Guarantee primal_guarantee = Guarantee::Exact;
    std::string note;

    // 1e-5 for closed-form surfaces, 1e-3 for brute force, plus kGridTol
    // when the primal side is a lower bound.
    double tolerance() const;
    bool within_tolerance() const { return gap >= -1e-9 - slack() && gap <= tolerance(); }

private:
    double slack() const { return primal_guarantee == Guarantee::LowerBound ? kGridTol : 0.0; }
};

// rho(X) = sup_Q R(E_Q[-X], Q).
GapReport verify_primal_dual(const RiskFunctional& rho, const Position& x, const SimplexGrid& grid,
                             const DualOptions& opts = {});
// rho~(X) = sup_Q R(phi_Q(X), Q); certainty equivalents use R_l.
GapReport verify_robust_dual(const RiskFunctional& rho, const UncertaintyFamily& family, const Position& x,
                             const SimplexGrid& grid, const DualOptions& opts = {});
// rho~(X) = sup_Qt { E_Qt[-X] - inf_Q { c_phiQ(Qt) + c(Q) } }.
GapReport verify_convex_cash_additive_dual(const RiskFunctional& rho, const UncertaintyFamily& family,
                                           const Position& x, const SimplexGrid& grid,
                                           const DualOptions& opts = {});
// rho~(X) = sup_{Q, Qt} { R_phiQ(E_Qt[-X], Qt) - c(Q) } with brute-force R_phiQ.
GapReport verify_second_approach_dual(const RiskFunctional& rho, const UncertaintyFamily& family,
                                      const Position& x, const SimplexGrid& grid, const DualOptions& opts = {});

// c_{phi_Q}(Qt) in closed form when the family allows it.
std::optional<ExtReal> support_penalty(const UncertaintyFamily& family, const ScenarioMeasure& q,
                                       const ScenarioMeasure& qt);

// |R(t,Q) - R(t',Q)| <= |t - t'| + tol and R increasing in t, on sampled pairs.
PropertyVerdict non_expansivity_check(const PenaltySurface& surface, const SpacePtr& space, std::size_t samples,
                                      std::uint64_t seed, double tol = 1e-6);

// Dual optimizer of rho at X when it is known in closed form.
std::optional<ScenarioMeasure> dual_optimizer(const RiskFunctional& rho, const Position& x);

struct DualArgmax {
    ScenarioMeasure q;
    ExtReal value;              // R(E_Q[-X], Q) at q
    bool attained = false;      // value reached rho(X) within 1e-9
    bool augmented = false;     // the closed-form optimizer was not already on the grid
    bool closed_form = true;    // R came from a closed-form surface
};

// argmax of Q -> R(E_Q[-X], Q) over the grid plus the closed-form dual
// optimizer. Values within 1e-12 (relative) tie; ties go to the smaller
// ||dQ/dP||_tie_q, then to the lexicographically smaller density.
DualArgmax dual_argmax(const RiskFunctional& rho, const Position& x, const SimplexGrid& grid,
                       double tie_q = HUGE_VAL);

struct WassersteinBoundReport {
    ExtReal lhs;  // rho~(X) over the W_p ball
    ExtReal rhs;  // rho(X) + eps ||dQ*/dP||_q
    bool holds = false;
    Guarantee lhs_guarantee = Guarantee::Exact;
    std::optional<ScenarioMeasure> q_star;
    bool attained = false;  // sup_Q R(E_Q[-X], Q) reached rho(X) within 1e-9
    std::string note;
};

// The grid is augmented with the closed-form dual optimizer when one exists.
WassersteinBoundReport wasserstein_bound_check(const RiskFunctional& rho, double eps, double p, const Position& x,
                                               const SimplexGrid& grid, const SolverOptions& opts = {});

}  // namespace rrisk
