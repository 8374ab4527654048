#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rrisk/prob_core.hpp"
#include "rrisk/risk_measures.hpp"
#include "rrisk/verdict.hpp"

namespace rrisk {

enum class FamilyKind { SupNormBall, PNormBall, WassersteinBall, LevelBand, LevelUpperSet };

enum class FamilyProperty {
    Monotone,
    OrderPreserving,
    Convex,
    QuasiConvex,
    CQuasiConvex,
    Solid,
    LawInvariant,
    CashInvariant,
    ContinuousFromAbove
};

std::string to_string(FamilyKind k);
std::string to_string(FamilyProperty p);
FamilyProperty family_property_from_string(const std::string& s);

inline constexpr double kMembershipTol = 1e-12;

// The map X -> U_X, described analytically.
class UncertaintyFamily {
public:
    FamilyKind kind() const { return kind_; }
    double p() const { return p_; }
    double eps() const { return eps_; }
    const RiskFunctional* rho1() const { return rho1_.get(); }
    bool solidified() const { return solidified_; }
    std::string name() const;

    bool contains(const Position& x, const Position& z) const;

    // Decides Z in U_X + L_+ (some K >= 0 with Z - K in U_X). nullopt when the
    // available bounds do not settle the question.
    std::optional<bool> solid_contains(const Position& x, const Position& z) const;

    // Finite subset of U_X for solvers; every element passes contains().
    std::vector<Position> discretize(const Position& x, double resolution, std::size_t budget,
                                     std::uint64_t seed = 0) const;

    // Maps Z into U_X. Norm balls use their closed-form projections, level
    // families of a cash-additive rho1 a constant shift; other descriptors
    // bisect along the segment from `anchor` (a member) to Z.
    Position project(const Position& x, const Position& anchor, const Position& z) const;

    // Level families: some k >= 0 with Z - k in U_X, found by a bracket
    // search over k and bisection. nullopt for other descriptors or when the
    // scan fails.
    std::optional<double> level_shift(const Position& x, const Position& z) const;

    // Largest t in [0, cap] with X + t*D inside U_X, by doubling and bisection.
    // Bisection runs on the exact test without the rounding allowance, so the
    // returned point is a member of the exact set.
    double boundary_along(const Position& x, const Position& d, double cap) const;

    friend UncertaintyFamily sup_norm_ball(double eps);
    friend UncertaintyFamily p_norm_ball(double p, double eps);
    friend UncertaintyFamily wasserstein_ball(double p, double eps);
    friend UncertaintyFamily level_band(const RiskFunctional& rho1, double eps);
    friend UncertaintyFamily level_upper_set(const RiskFunctional& rho1, double eps);
    friend UncertaintyFamily solidify(const UncertaintyFamily& f);

private:
    UncertaintyFamily() = default;

    bool base_contains(const Position& x, const Position& z, bool slack = true) const;
    std::optional<bool> solid_decide(const Position& x, const Position& z, bool slack) const;
    double level_tol(const ExtReal& level) const;

    FamilyKind kind_ = FamilyKind::SupNormBall;
    double p_ = HUGE_VAL;
    double eps_ = 0.0;
    std::shared_ptr<const RiskFunctional> rho1_;
    bool solidified_ = false;
};

UncertaintyFamily sup_norm_ball(double eps);
UncertaintyFamily p_norm_ball(double p, double eps);
UncertaintyFamily wasserstein_ball(double p, double eps);
UncertaintyFamily level_band(const RiskFunctional& rho1, double eps);
UncertaintyFamily level_upper_set(const RiskFunctional& rho1, double eps);
UncertaintyFamily solidify(const UncertaintyFamily& f);

// Lower and upper bounds on min_{K >= 0} W_p(Z - K, X).
std::pair<double, double> wasserstein_solid_gap(const Position& x, const Position& z, double p);

// CertifiedHolds when a closed-form argument is coded for the descriptor,
// otherwise seeded falsification over random spaces with n in {2, 3}.
PropertyVerdict check_property(const UncertaintyFamily& family, FamilyProperty property, std::size_t trials,
                               std::uint64_t seed);

// True iff the recorded witness still violates the property.
bool replay_counterexample(const UncertaintyFamily& family, FamilyProperty property, const Witness& w);

}  // namespace rrisk
