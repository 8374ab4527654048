#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "rrisk/duality.hpp"
#include "test_support.hpp"

using namespace rrisk;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// H(Q|P) straight from atom probabilities.
double entropy_oracle(const std::vector<double>& q, const std::vector<double>& p) {
    double h = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
        if (q[i] > 0.0) h += q[i] * std::log(q[i] / p[i]);
    return h;
}

// max over q1 = k/m of E_Q[-X] - H(Q|P)/gamma on two atoms
double entropic_grid_dual(const Position& x, double gamma, int m) {
    const auto& p = x.space()->probs();
    double best = -kInf;
    for (int k = 0; k <= m; ++k) {
        std::vector<double> q{static_cast<double>(k) / m, 1.0 - static_cast<double>(k) / m};
        best = std::max(best, -(q[0] * x[0] + q[1] * x[1]) - entropy_oracle(q, p) / gamma);
    }
    return best;
}

// Golden-section minimum of a unimodal function on [a, b].
template <class F>
double golden_min(F f, double a, double b) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int it = 0; it < 300; ++it) {
        if (fc < fd) {
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
    return std::min(fc, fd);
}

// inf { rho(Y) : E_Q[-Y] = t } on two atoms with q2 > 0, by scanning the
// line y2 = (-t - q1 y1) / q2 and refining the best bracket.
double penalty_by_line_search(const RiskFunctional& rho, double t, const ScenarioMeasure& q) {
    auto s = q.space();
    auto qp = q.probabilities();
    auto on_line = [&](double y1) {
        Position y(s, {y1, (-t - qp[0] * y1) / qp[1]});
        return rho(y).value();
    };
    double best_s = 0.0, best = kInf;
    for (double y1 = -60.0; y1 <= 60.0; y1 += 0.01) {
        double v = on_line(y1);
        if (v < best) {
            best = v;
            best_s = y1;
        }
    }
    return golden_min(on_line, best_s - 0.02, best_s + 0.02);
}

ScenarioMeasure two_atom(const SpacePtr& s, double q1) { return ScenarioMeasure::from_probabilities(s, {q1, 1 - q1}); }

}  // namespace

// ---------------------------------------------------------------- grid

TEST(SimplexGrid, LatticeSizesAndContents) {
    auto g2 = SimplexGrid::make(uniform_space(2), 0.01);
    EXPECT_EQ(g2.size(), 101u);
    auto g3 = SimplexGrid::make(uniform_space(3), 0.01);
    // 5151 lattice points plus P = (1/3, 1/3, 1/3), which is off the lattice
    EXPECT_EQ(g3.size(), 5152u);
    for (const auto& g : {g2, g3}) {
        bool has_p = false;
        std::set<std::vector<double>> seen;
        std::size_t vertices = 0;
        for (const auto& q : g.points()) {
            auto pr = q.probabilities();
            double mass = 0.0;
            for (double v : pr) {
                EXPECT_GE(v, 0.0);
                mass += v;
            }
            EXPECT_NEAR(mass, 1.0, 1e-12);
            has_p |= q.is_reference();
            if (*std::max_element(pr.begin(), pr.end()) > 1.0 - 1e-12) ++vertices;
            EXPECT_TRUE(seen.insert(pr).second);
        }
        EXPECT_TRUE(has_p);
        EXPECT_EQ(vertices, g.space()->n());
    }
}

TEST(SimplexGrid, SampledAboveThreeAtoms) {
    auto s = make_space({0.1, 0.2, 0.3, 0.15, 0.25});
    auto g = SimplexGrid::make(s, 0.01, 300, 4);
    EXPECT_EQ(g.size(), 300u + 5u + 1u);
    auto h = SimplexGrid::make(s, 0.01, 300, 4);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.points()[i].density(), h.points()[i].density());
}

TEST(SimplexGrid, HalvingTheStepRefines) {
    auto s = make_space({0.3, 0.7});
    auto coarse = SimplexGrid::make(s, 0.02), fine = SimplexGrid::make(s, 0.01);
    for (const auto& q : coarse.points()) {
        bool found = false;
        for (const auto& r : fine.points()) {
            auto a = q.probabilities(), b = r.probabilities();
            if (std::fabs(a[0] - b[0]) < 1e-12) found = true;
        }
        EXPECT_TRUE(found);
    }
}

TEST(SimplexGrid, RejectsBadStep) {
    EXPECT_THROW(SimplexGrid::make(uniform_space(2), 0.0), std::invalid_argument);
    EXPECT_THROW(SimplexGrid::make(uniform_space(2), 1.5), std::invalid_argument);
}

TEST(SimplexGrid, AddDeduplicates) {
    auto s = uniform_space(2);
    auto g = SimplexGrid::make(s, 0.1);
    auto n = g.size();
    EXPECT_FALSE(g.add(two_atom(s, 0.3)));
    EXPECT_TRUE(g.add(two_atom(s, 0.33)));
    EXPECT_EQ(g.size(), n + 1);
}

// ---------------------------------------------------------------- support function

TEST(SupportFunction, SpecExamples) {
    testsupport::Gen g(501);
    for (int t = 0; t < 50; ++t) {
        auto s = g.space(3);
        auto x = g.position(s);
        auto q = g.measure(s);
        auto rv = support_function(sup_norm_ball(0.3), q, x);
        EXPECT_NEAR(rv.value.value(), -expectation_under(q, x) + 0.3, 1e-12);
        EXPECT_EQ(rv.guarantee, Guarantee::Exact);
        EXPECT_NEAR(support_function(sup_norm_ball(0.0), q, x).value.value(), -expectation_under(q, x), 1e-12);
        auto P = ScenarioMeasure::reference(s);
        for (double p : {1.0, 2.0, 3.0, kInf})
            EXPECT_NEAR(support_function(p_norm_ball(p, 0.4), P, x).value.value(), -expectation(x) + 0.4, 1e-12);
    }
}

TEST(SupportFunction, WitnessesAttainTheValue) {
    testsupport::Gen g(502);
    for (int t = 0; t < 60; ++t) {
        auto s = t % 2 ? uniform_space(3) : g.space(3);
        auto x = g.position(s);
        auto q = g.measure(s);
        std::vector<UncertaintyFamily> fams{sup_norm_ball(0.2), p_norm_ball(1.0, 0.2), p_norm_ball(2.0, 0.2),
                                            p_norm_ball(kInf, 0.2), level_upper_set(entropic(1.0), 0.2),
                                            level_band(entropic(2.0), 0.2)};
        if (t % 2) fams.push_back(wasserstein_ball(2.0, 0.2));
        for (const auto& f : fams) {
            auto rv = support_function(f, q, x);
            ASSERT_EQ(rv.guarantee, Guarantee::Exact) << f.name();
            ASSERT_TRUE(rv.witness) << f.name();
            EXPECT_TRUE(f.contains(x, *rv.witness)) << f.name();
            EXPECT_NEAR(-expectation_under(q, *rv.witness), rv.value.value(), 1e-9) << f.name();
        }
    }
}

TEST(SupportFunction, ClosedFormsDominateLatticeOracle) {
    // sup of E_Q[-Z] over a fine lattice of Z in U_X, two uniform atoms
    testsupport::Gen g(503);
    auto s = uniform_space(2);
    for (int t = 0; t < 20; ++t) {
        auto x = g.position(s, -1, 1);
        auto q = g.measure(s);
        for (const auto& f : {p_norm_ball(2.0, 0.3), p_norm_ball(1.0, 0.3), wasserstein_ball(1.0, 0.3),
                              wasserstein_ball(3.0, 0.3), level_upper_set(entropic(1.0), 0.3)}) {
            double closed = support_function(f, q, x).value.value();
            double r = 4.0, best = -kInf;
            const int m = 240;
            for (int a = -m; a <= m; ++a)
                for (int b = -m; b <= m; ++b) {
                    Position z(s, {x[0] + r * a / m, x[1] + r * b / m});
                    bool inside = f.kind() == FamilyKind::WassersteinBall
                                      ? testsupport::wasserstein_by_permutations(z.values(), x.values(), f.p()) <=
                                            f.eps() + 1e-12
                                      : f.contains(x, z);
                    if (inside) best = std::max(best, -expectation_under(q, z));
                }
            EXPECT_LE(best, closed + 1e-9) << f.name();
            EXPECT_GE(best, closed - 2 * r / m) << f.name();
        }
    }
}

TEST(SupportFunction, NeverBelowNumericAscent) {
    testsupport::Gen g(504);
    for (int t = 0; t < 200; ++t) {
        auto s = t % 2 ? uniform_space(2) : g.space(3);
        auto x = g.position(s, -1, 1);
        auto q = g.measure(s);
        const UncertaintyFamily f = t % 3 == 0 ? p_norm_ball(2.0, 0.25)
                                    : t % 3 == 1 ? level_upper_set(entropic(1.0), 0.25)
                                                 : p_norm_ball(1.5, 0.25);
        auto closed = support_function(f, q, x);
        SolverOptions o;
        o.kind = SolverKind::ProjectedAscent;
        auto num = maximize_over(f, x, [&](const Position& z) { return ExtReal(-expectation_under(q, z)); },
                                 ObjectiveTraits{true, true, false}, o);
        EXPECT_LE(num.value.value(), closed.value.value() + 1e-9) << f.name();
        EXPECT_GE(num.value.value(), closed.value.value() - 1e-3) << f.name();
    }
}

TEST(SupportFunction, LevelFamilyWithInfinitePenaltyIsUnbounded) {
    auto s = uniform_space(2);
    Position x(s, {0.0, 1.0});
    auto q = two_atom(s, 0.7);
    EXPECT_TRUE(support_function(level_upper_set(neg_expectation(), 0.1), q, x).value.is_pos_inf());
    auto P = ScenarioMeasure::reference(s);
    EXPECT_NEAR(support_function(level_upper_set(neg_expectation(), 0.1), P, x).value.value(), -0.5 + 0.1, 1e-12);
}

TEST(SupportFunction, FunctionalMatchesPointwise) {
    testsupport::Gen g(505);
    auto s = uniform_space(3);
    auto q = g.measure(s);
    auto f = wasserstein_ball(1.0, 0.2);
    auto phi = support_functional(f, q);
    for (int t = 0; t < 20; ++t) {
        auto y = g.position(s);
        EXPECT_EQ(phi(y), support_function(f, q, y).value);
    }
}

// ---------------------------------------------------------------- penalties

TEST(MinimalPenalty, SpecExamples) {
    auto s = uniform_space(2);
    EXPECT_NEAR(minimal_penalty(entropic(1.0), ScenarioMeasure::reference(s)).value.value(), 0.0, 1e-15);
    ScenarioMeasure q(s, {1.6, 0.4});
    EXPECT_NEAR(minimal_penalty(entropic(1.0), q).value.value(), 0.19274, 1e-5);
    EXPECT_NEAR(minimal_penalty(entropic(1.0), q).value.value(), entropy_oracle({0.8, 0.2}, {0.5, 0.5}), 1e-15);
    EXPECT_TRUE(minimal_penalty(neg_expectation(), q).value.is_pos_inf());
    PenaltyOptions num;
    num.numeric = true;
    auto e = minimal_penalty(neg_expectation(), q, num);
    EXPECT_TRUE(e.value.is_pos_inf()) << e.method;
    EXPECT_NEAR(minimal_penalty(entropic(1.0), q, num).value.value(), 0.19274, 1e-5);
}

TEST(MinimalPenalty, NumericMatchesEntropyAtDefaultBox) {
    testsupport::Gen g(506);
    PenaltyOptions num;
    num.numeric = true;  // B = 20, h = 0.1
    for (int t = 0; t < 60; ++t) {
        auto s = g.space(static_cast<std::size_t>(g.integer(2, 3)));
        auto q = g.measure(s);
        double gamma = t % 2 ? 1.0 : 0.5;
        auto est = minimal_penalty(entropic(gamma), q, num);
        EXPECT_EQ(est.guarantee, Guarantee::LowerBound);
        double h = entropy_oracle(q.probabilities(), s->probs()) / gamma;
        EXPECT_LE(est.value.value(), h + 1e-12);
        EXPECT_NEAR(est.value.value(), h, 1e-6) << est.method;
    }
}

TEST(MinimalPenalty, ExpectedShortfallIndicator) {
    testsupport::Gen g(507);
    PenaltyOptions num;
    num.numeric = true;
    for (int t = 0; t < 30; ++t) {
        auto s = g.space(2);
        auto q = g.measure(s);
        double alpha = g.uniform(0.2, 0.9);
        bool inside = *std::max_element(q.density().begin(), q.density().end()) <= 1.0 / alpha;
        auto closed = minimal_penalty(expected_shortfall(alpha), q);
        auto numeric = minimal_penalty(expected_shortfall(alpha), q, num);
        if (inside) {
            EXPECT_EQ(closed.value, ExtReal(0.0));
            EXPECT_NEAR(numeric.value.value(), 0.0, 1e-6);
        } else {
            EXPECT_TRUE(closed.value.is_pos_inf());
            EXPECT_TRUE(numeric.value.is_pos_inf()) << numeric.method;
        }
    }
}

TEST(MinimalPenalty, WorstCaseIsZeroEverywhere) {
    testsupport::Gen g(508);
    auto s = g.space(3);
    PenaltyOptions num;
    num.numeric = true;
    for (int t = 0; t < 10; ++t) {
        auto q = g.measure(s);
        EXPECT_EQ(minimal_penalty(worst_case(), q).value, ExtReal(0.0));
        EXPECT_NEAR(minimal_penalty(worst_case(), q, num).value.value(), 0.0, 1e-9);
    }
}

TEST(MinimalPenalty, FloorIsInfiniteOffReference) {
    auto s = uniform_space(2);
    PenaltyOptions num;
    num.numeric = true;
    EXPECT_TRUE(minimal_penalty(expectation_floor(1.0), two_atom(s, 0.8), num).value.is_pos_inf());
    // sup_t { t - max(t, K) } = 0
    EXPECT_NEAR(minimal_penalty(expectation_floor(1.0), ScenarioMeasure::reference(s), num).value.value(), 0.0,
                1e-9);
}

TEST(LossPenalty, SpecExamples) {
    testsupport::Gen g(509);
    auto s = uniform_space(2);
    auto P = ScenarioMeasure::reference(s);
    for (double t : {-2.0, 0.0, 0.7, 3.0}) {
        EXPECT_NEAR(loss_penalty(exponential_loss(), t, P).value(), t, 1e-12);
        EXPECT_NEAR(loss_penalty(exponential_loss(), t, P, true).value(), t, 1e-8);
        EXPECT_NEAR(loss_penalty(identity_loss(), t, P).value(), t, 1e-12);
    }
    ScenarioMeasure q(s, {1.6, 0.4});
    EXPECT_NEAR(loss_penalty(exponential_loss(), 0.0, q).value(), -0.19274, 1e-5);
    EXPECT_TRUE(loss_penalty(identity_loss(), 0.0, q).is_neg_inf());
}

TEST(LossPenalty, ExponentialClosedFormAgainstGoldenSection) {
    testsupport::Gen g(510);
    for (int k = 0; k < 200; ++k) {
        auto s = g.space(static_cast<std::size_t>(g.integer(2, 4)));
        auto q = g.measure(s);
        double t = g.uniform(-3, 3), rate = k % 3 ? 1.0 : 2.0;
        double h = entropy_oracle(q.probabilities(), s->probs());
        EXPECT_NEAR(loss_penalty(exponential_loss(rate), t, q, true).value(), t - h / rate, 1e-8);
        EXPECT_NEAR(loss_penalty(exponential_loss(rate), t, q).value(), t - h / rate, 1e-12);
    }
}

TEST(LossPenalty, ExpLinearMatchesDirectInfimum) {
    // the conjugate formula against inf { CE(Y) : E_Q[-Y] = t } on a line
    testsupport::Gen g(511);
    auto ce = certainty_equivalent(exp_linear_loss());
    for (int k = 0; k < 15; ++k) {
        auto s = g.space(2);
        auto q = two_atom(s, g.uniform(0.1, 0.9));
        double t = g.uniform(-1.5, 1.5);
        double formula = loss_penalty(exp_linear_loss(), t, q).value();
        EXPECT_NEAR(formula, penalty_by_line_search(ce, t, q), 1e-6);
    }
}

TEST(LossPenalty, NullAtomsAreInfeasibleForExpLinear) {
    auto s = uniform_space(2);
    EXPECT_TRUE(loss_penalty(exp_linear_loss(), 0.3, two_atom(s, 1.0)).is_neg_inf());
}

// ---------------------------------------------------------------- surfaces

TEST(PenaltySurface, ClosedFormExamples) {
    testsupport::Gen g(512);
    auto s = g.space(3);
    auto P = ScenarioMeasure::reference(s);
    auto ent = penalty_type(entropic(1.0));
    auto ne = penalty_type(neg_expectation());
    EXPECT_EQ(ent.kind(), PenaltyKind::CashAdditiveClosedForm);
    for (int k = 0; k < 20; ++k) {
        double t = g.uniform(-3, 3);
        auto q = g.measure(s);
        EXPECT_NEAR(ent(t, P).value(), t, 1e-15);
        EXPECT_NEAR(ent(t, q).value(), t - entropy_oracle(q.probabilities(), s->probs()), 1e-12);
        EXPECT_NEAR(ne(t, P).value(), t, 1e-15);
        EXPECT_TRUE(ne(t, q).is_neg_inf());
    }
    auto ce = penalty_type(certainty_equivalent(exponential_loss()));
    EXPECT_EQ(ce.kind(), PenaltyKind::LossClosedForm);
    EXPECT_EQ(penalty_type(expectation_floor(1.0)).kind(), PenaltyKind::BruteForce);
}

TEST(PenaltySurface, KindsThatDoNotApplyThrow) {
    EXPECT_THROW(penalty_type(expectation_floor(1.0), PenaltyKind::CashAdditiveClosedForm), std::invalid_argument);
    EXPECT_THROW(penalty_type(entropic(1.0), PenaltyKind::LossClosedForm), std::invalid_argument);
    EXPECT_THROW(penalty_type(q_entropic(0.5, 1.0), PenaltyKind::CashAdditiveClosedForm), std::invalid_argument);
}

TEST(PenaltySurface, InfiniteArgumentsUseLimits) {
    auto s = uniform_space(2);
    auto q = two_atom(s, 0.7);
    auto ent = penalty_type(entropic(1.0)), ne = penalty_type(neg_expectation());
    EXPECT_TRUE(ent.at(ExtReal::pos_inf(), q)->is_pos_inf());
    EXPECT_TRUE(ne.at(ExtReal::pos_inf(), q)->is_neg_inf());
    EXPECT_TRUE(ne.at(ExtReal::pos_inf(), ScenarioMeasure::reference(s))->is_pos_inf());
    EXPECT_FALSE(penalty_type(expectation_floor(1.0)).at(ExtReal::pos_inf(), q).has_value());
    EXPECT_NEAR(ent.at(ExtReal(0.5), ScenarioMeasure::reference(s))->value(), 0.5, 1e-15);
}

TEST(PenaltySurface, BruteForceBracketsTheTruth) {
    testsupport::Gen g(513);
    for (int k = 0; k < 40; ++k) {
        auto s = g.space(static_cast<std::size_t>(g.integer(2, 3)));
        auto x = g.position(s, -2, 2);
        auto q = g.measure(s);
        BruteForceOptions o;
        o.anchors = {x};
        auto bf = penalty_type(entropic(1.0), PenaltyKind::BruteForce, o);
        auto exact = penalty_type(entropic(1.0));
        double t = -expectation_under(q, x);
        EXPECT_GE(bf(t, q).value(), exact(t, q).value() - 1e-12);
        EXPECT_LE(bf(t, q).value(), entropic(1.0)(x).value() + 1e-12);  // X itself is feasible
        double t2 = g.uniform(-3, 3);
        EXPECT_GE(bf(t2, q).value(), exact(t2, q).value() - 1e-12);
    }
}

TEST(PenaltySurface, RefiningTheLatticeNeverRaisesR) {
    testsupport::Gen g(514);
    for (int k = 0; k < 30; ++k) {
        auto s = g.space(static_cast<std::size_t>(g.integer(2, 3)));
        auto q = g.measure(s);
        double t = g.uniform(-2, 2);
        BruteForceOptions coarse, fine;
        coarse.bound = fine.bound = 8.0;
        coarse.step = 0.4;
        fine.step = 0.2;
        for (const auto& rho : {entropic(1.0), expectation_floor(0.5), q_entropic(0.5, 1.0)}) {
            auto a = penalty_type(rho, PenaltyKind::BruteForce, coarse)(t, q);
            auto b = penalty_type(rho, PenaltyKind::BruteForce, fine)(t, q);
            EXPECT_LE(b, a) << rho.name();
        }
    }
}

TEST(PenaltySurface, IncreasingInT) {
    testsupport::Gen g(515);
    for (const auto& surf : {penalty_type(entropic(1.0)), penalty_type(expectation_floor(1.0)),
                             penalty_type(certainty_equivalent(exp_linear_loss())),
                             penalty_type(q_entropic(0.5, 1.0))}) {
        for (int k = 0; k < 100; ++k) {
            auto s = uniform_space(2);
            auto q = g.measure(s);
            double a = g.uniform(-3, 3), b = a + g.uniform(0, 2);
            EXPECT_LE(surf(a, q), surf(b, q)) << surf.name();
        }
    }
}

TEST(PenaltySurface, FloorAtReferenceIsTheFloor) {
    auto s = uniform_space(2);
    auto surf = penalty_type(expectation_floor(1.0));
    auto P = ScenarioMeasure::reference(s);
    for (double t : {-1.0, 0.5, 1.0, 2.5}) EXPECT_NEAR(surf(t, P).value(), std::max(t, 1.0), 1e-12);
}

// ---------------------------------------------------------------- verifiers

TEST(PrimalDual, EntropicGapMatchesGridOracle) {
    testsupport::Gen g(516);
    auto s = uniform_space(2);
    auto grid = SimplexGrid::make(s, 0.01);
    for (int k = 0; k < 30; ++k) {
        auto x = g.position(s, -1, 1);
        auto r = verify_primal_dual(entropic(1.0), x, grid);
        EXPECT_TRUE(r.closed_form);
        EXPECT_NEAR(r.dual.value(), entropic_grid_dual(x, 1.0, 100), 1e-12);
        EXPECT_GE(r.gap, -1e-12);
        EXPECT_NEAR(r.gap, entropic(1.0)(x).value() - entropic_grid_dual(x, 1.0, 100), 1e-12);
    }
}

TEST(PrimalDual, ExactWhenTheOptimizerIsOnTheGrid) {
    auto s = uniform_space(2);
    auto grid = SimplexGrid::make(s, 0.01);
    // dQ*/dP is proportional to exp(-X); ln(0.3 / 0.7) puts Q* at (0.3, 0.7)
    Position x(s, {0.0, std::log(0.3 / 0.7)});
    EXPECT_LE(std::fabs(verify_primal_dual(entropic(1.0), x, grid).gap), 1e-12);
    EXPECT_LE(std::fabs(verify_primal_dual(entropic(1.0), Position::constant(s, 0.0), grid).gap), 1e-12);
}

TEST(PrimalDual, ConstantPositions) {
    auto s = make_space({0.2, 0.3, 0.5});
    auto grid = SimplexGrid::make(s, 0.05);
    for (double c : {-1.5, -0.2, 0.8})
        for (const auto& rho : {entropic(1.0), neg_expectation(), expected_shortfall(0.3), worst_case()}) {
            auto r = verify_primal_dual(rho, Position::constant(s, c), grid);
            EXPECT_NEAR(r.gap, 0.0, 1e-12) << rho.name();
        }
    auto r = verify_primal_dual(expectation_floor(0.3), Position::constant(s, 0.5), grid);
    EXPECT_NEAR(r.gap, 0.0, 1e-12);
}

TEST(PrimalDual, GapIsNeverNegative) {
    testsupport::Gen g(517);
    for (int k = 0; k < 20; ++k) {
        auto s = g.space(2);
        auto grid = SimplexGrid::make(s, 0.02);
        auto x = g.position(s, -2, 2);
        for (const auto& rho : {entropic(0.5), expected_shortfall(0.4), expectation_floor(0.3),
                                certainty_equivalent(exponential_loss()), q_entropic(0.5, 1.0)}) {
            auto r = verify_primal_dual(rho, x, grid);
            EXPECT_GE(r.gap, -1e-9) << rho.name();
        }
    }
}

TEST(PrimalDual, FloorBruteForceIsTight) {
    testsupport::Gen g(518);
    auto s = uniform_space(2);
    auto grid = SimplexGrid::make(s, 0.01);
    for (int k = 0; k < 10; ++k) {
        auto x = g.position(s, -2, 2);
        auto r = verify_primal_dual(expectation_floor(g.uniform(0, 1.5)), x, grid);
        EXPECT_FALSE(r.closed_form);
        EXPECT_LE(std::fabs(r.gap), 1e-6);
    }
}

TEST(PrimalDual, GapShrinksAsTheStepHalves) {
    testsupport::Gen g(519);
    auto s = uniform_space(2);
    for (int k = 0; k < 10; ++k) {
        auto x = g.position(s, -1, 1);
        double prev = kInf;
        for (double step : {0.04, 0.02, 0.01, 0.005}) {
            double gap = verify_primal_dual(entropic(1.0), x, SimplexGrid::make(s, step)).gap;
            EXPECT_LE(gap, prev + 1e-15);
            prev = gap;
        }
    }
}

TEST(PrimalDual, HypothesesAreChecked) {
    RiskFunctional bumpy("bumpy", RiskKind::Custom, AxiomFlags{}, RiskParams{},
                         [](const Position& x) { return ExtReal(std::sin(x[0])); });
    auto s = uniform_space(2);
    EXPECT_THROW(verify_primal_dual(bumpy, Position::constant(s, 0.0), SimplexGrid::make(s, 0.1)), HypothesisError);
}

TEST(RobustDual, CertaintyEquivalentOverSupBall) {
    testsupport::Gen g(520);
    auto s = uniform_space(2);
    auto grid = SimplexGrid::make(s, 0.01);
    auto rho = certainty_equivalent(exponential_loss());
    for (int k = 0; k < 10; ++k) {
        auto x = g.position(s, -1, 1);
        auto r = verify_robust_dual(rho, sup_norm_ball(0.2), x, grid);
        EXPECT_NEAR(r.primal.value(), rho(x).value() + 0.2, 1e-12);
        // both sides are closed form; what remains is the grid error of the entropic dual
        EXPECT_NEAR(r.gap, rho(x).value() - entropic_grid_dual(x, 1.0, 100), 1e-12);
        EXPECT_TRUE(r.closed_form);
    }
}

TEST(RobustDual, ZeroRadiusReducesToPrimalDual) {
    testsupport::Gen g(521);
    auto s = uniform_space(2);
    auto grid = SimplexGrid::make(s, 0.02);
    for (int k = 0; k < 10; ++k) {
        auto x = g.position(s, -1, 1);
        for (const auto& rho : {entropic(1.0), expectation_floor(0.2)}) {
            auto a = verify_robust_dual(rho, sup_norm_ball(0.0), x, grid);
            auto b = verify_primal_dual(rho, x, grid);
            EXPECT_NEAR(a.gap, b.gap, 1e-12) << rho.name();
        }
    }
}

TEST(RobustDual, FloorOverSupBall) {
    testsupport::Gen g(522);
    auto s = uniform_space(2);
    auto grid = SimplexGrid::make(s, 0.01);
    for (int k = 0; k < 10; ++k) {
        auto x = g.position(s, -2, 2);
        auto r = verify_robust_dual(expectation_floor(1.0), sup_norm_ball(0.3), x, grid);
        EXPECT_LE(std::fabs(r.gap), 1e-5);
    }
}

TEST(RobustDual, OtherBallsStayOneSided) {
    testsupport::Gen g(523);
    auto s = uniform_space(2);
    auto grid = SimplexGrid::make(s, 0.02);
    for (int k = 0; k < 10; ++k) {
        auto x = g.position(s, -1, 1);
        for (const auto& f : {p_norm_ball(1.0, 0.2), p_norm_ball(2.0, 0.2), wasserstein_ball(1.0, 0.2)}) {
            auto r = verify_robust_dual(entropic(1.0), f, x, grid);
            EXPECT_GE(r.gap, -1e-9) << f.name();
            EXPECT_LE(r.gap, 5e-3) << f.name();
        }
    }
}

TEST(RobustDual, HypothesesAreChecked) {
    auto s = uniform_space(2);
    auto grid = SimplexGrid::make(s, 0.1);
    auto x = Position::constant(s, 0.0);
    RiskFunctional bare("bare", RiskKind::Custom, AxiomFlags{}, RiskParams{},
                        [](const Position& z) { return ExtReal(-expectation(z)); });
    EXPECT_THROW(verify_robust_dual(bare, sup_norm_ball(0.1), x, grid), HypothesisError);
}

TEST(ConvexCashAdditiveDual, SpecExamples) {
    testsupport::Gen g(524);
    auto s = uniform_space(2);
    auto grid = SimplexGrid::make(s, 0.01);
    for (int k = 0; k < 10; ++k) {
        auto x = g.position(s, -1, 1);
        auto a = verify_convex_cash_additive_dual(neg_expectation(), sup_norm_ball(0.2), x, grid);
        EXPECT_LE(std::fabs(a.gap), 1e-5);
        auto b = verify_convex_cash_additive_dual(entropic(1.0), sup_norm_ball(0.2), x, grid);
        EXPECT_GE(b.gap, -1e-9);
        EXPECT_LE(b.gap, 1e-4);
        auto c = verify_convex_cash_additive_dual(entropic(1.0), sup_norm_ball(0.0), x, grid);
        auto d = verify_primal_dual(entropic(1.0), x, grid);
        EXPECT_NEAR(c.dual.value(), d.dual.value(), 1e-12);
    }
}

TEST(ConvexCashAdditiveDual, LevelAndBallFamilies) {
    testsupport::Gen g(525);
    auto s = uniform_space(2);
    auto grid = SimplexGrid::make(s, 0.02);
    for (int k = 0; k < 5; ++k) {
        auto x = g.position(s, -1, 1);
        for (const auto& f : {p_norm_ball(2.0, 0.2), wasserstein_ball(1.0, 0.2)}) {
            auto r = verify_convex_cash_additive_dual(entropic(1.0), f, x, grid);
            EXPECT_GE(r.gap, -1e-9) << f.name();
            EXPECT_LE(r.gap, 5e-3) << f.name();
        }
    }
}

TEST(ConvexCashAdditiveDual, HypothesesAreChecked) {
    auto s = uniform_space(2);
    auto grid = SimplexGrid::make(s, 0.1);
    EXPECT_THROW(verify_convex_cash_additive_dual(expectation_floor(1.0), sup_norm_ball(0.1),
                                                  Position::constant(s, 0.0), grid),
                 HypothesisError);
}

TEST(SecondApproachDual, SpecExamples) {
    testsupport::Gen g(526);
    auto s = uniform_space(2);
    auto grid = SimplexGrid::make(s, 0.02);
    auto rho = entropic(1.0);
    for (int k = 0; k < 5; ++k) {
        auto x = g.position(s, -1, 1);
        for (double eps : {0.0, 0.2}) {
            auto r = verify_second_approach_dual(rho, level_upper_set(rho, eps), x, grid);
            EXPECT_NEAR(r.primal.value(), rho(x).value() + eps, 1e-12);
            EXPECT_FALSE(r.closed_form);
            EXPECT_GE(r.gap, -1e-9);
            EXPECT_LE(r.gap, 1e-3);
        }
    }
    auto r = verify_second_approach_dual(rho, level_upper_set(rho, 0.3), Position::constant(s, 0.4), grid);
    EXPECT_NEAR(r.dual.value(), -0.4 + 0.3, 1e-3);
}

TEST(SecondApproachDual, SupBallFailsQuasiConvexity) {
    auto s = uniform_space(2);
    auto grid = SimplexGrid::make(s, 0.1);
    EXPECT_THROW(verify_second_approach_dual(entropic(1.0), sup_norm_ball(0.1), Position::constant(s, 0.0), grid),
                 HypothesisError);
}

TEST(NonExpansivity, Examples) {
    auto s = uniform_space(2);
    auto v = non_expansivity_check(penalty_type(entropic(1.0)), s, 500, 1);
    EXPECT_TRUE(v.holds()) << v.note;
    auto w = non_expansivity_check(penalty_type(expectation_floor(1.0)), s, 500, 2);
    EXPECT_EQ(w.tag, PropertyVerdict::Tag::SampledNoCounterexample) << w.note;
    auto c = non_expansivity_check(penalty_type(certainty_equivalent(exp_linear_loss())), s, 200, 3);
    EXPECT_EQ(c.tag, PropertyVerdict::Tag::Unknown);  // not declared cash-subadditive
}

TEST(NonExpansivity, FindsTheDoubledExpectation) {
    // rho = 2 E[-X] is convex and monotone but expands: R(t, P) = 2t
    AxiomFlags f;
    f.monotone = f.convex = f.quasi_convex = f.cash_subadditive = true;
    auto s = uniform_space(2);
    auto surf = brute_force_surface("double", [](const Position& x) { return ExtReal(-2.0 * expectation(x)); }, f, s);
    auto v = non_expansivity_check(surf, s, 200, 4);
    EXPECT_TRUE(v.is_counterexample());
    EXPECT_TRUE(v.witness.scalars.count("t"));
}

TEST(WassersteinBound, ZeroRadiusIsEquality) {
    testsupport::Gen g(527);
    auto s = uniform_space(2);
    auto grid = SimplexGrid::make(s, 0.05);
    for (int k = 0; k < 10; ++k) {
        auto x = g.position(s);
        auto r = wasserstein_bound_check(entropic(1.0), 0.0, 1.0, x, grid);
        EXPECT_TRUE(r.holds);
        EXPECT_NEAR(r.lhs.value(), r.rhs.value(), 1e-12);
        EXPECT_TRUE(r.attained);
    }
}

TEST(WassersteinBound, ExpectedShortfallSweepIsConsistent) {
    // only what does not depend on the bound itself: Q* attains rho(X), the
    // lower bound on rho~ dominates rho and the right side dominates rho
    testsupport::Gen g(528);
    for (int k = 0; k < 20; ++k) {
        auto s = k % 2 ? uniform_space(3) : g.space(2);
        auto grid = SimplexGrid::make(s, 0.05);
        auto x = g.position(s);
        auto rho = expected_shortfall(0.5);
        auto r = wasserstein_bound_check(rho, 0.2, 1.0, x, grid);
        EXPECT_TRUE(r.attained);
        EXPECT_GE(r.lhs.value(), rho(x).value() - 1e-12);
        EXPECT_GE(r.rhs.value(), rho(x).value() - 1e-12);
    }
}

TEST(WassersteinBound, ExpectedShortfallCounterexampleOnLightAtom) {
    // P = (0.1, 0.9), X = (0.1, 0): ES_0.5(X) = 0 with Q* = (0, 1) and
    // ||dQ*/dP||_inf = 1/0.9. Moving the light atom down by 2 costs W_1 = 0.2
    // and gives ES_0.5((-1.9, 0)) = 0.1 * 1.9 / 0.5 = 0.38 > 0.2 / 0.9.
    auto s = make_space({0.1, 0.9});
    Position x(s, {0.1, 0.0});
    auto rho = expected_shortfall(0.5);
    EXPECT_NEAR(rho(Position(s, {-1.9, 0.0})).value(), 0.38, 1e-12);
    auto r = wasserstein_bound_check(rho, 0.2, 1.0, x, SimplexGrid::make(s, 0.01));
    EXPECT_TRUE(r.attained);
    EXPECT_NEAR(r.rhs.value(), 0.2 / 0.9, 1e-12);
    EXPECT_GE(r.lhs.value(), 0.38 - 1e-9);
    EXPECT_FALSE(r.holds);
}

TEST(WassersteinBound, EntropicCounterexampleAtZero) {
    // Z = (-0.2, 0) is at W_1 distance 0.1 from X = 0 and has entropic risk
    // ln((e^0.2 + 1) / 2) > 0.1 = rho(X) + eps ||dP/dP||_inf
    auto s = uniform_space(2);
    auto r = wasserstein_bound_check(entropic(1.0), 0.1, 1.0, Position::constant(s, 0.0), SimplexGrid::make(s, 0.01));
    EXPECT_TRUE(r.attained);
    EXPECT_NEAR(r.rhs.value(), 0.1, 1e-12);
    EXPECT_NEAR(r.lhs.value(), std::log((std::exp(0.2) + 1.0) / 2.0), 1e-12);
    EXPECT_FALSE(r.holds);
}

TEST(GapReport, Tolerances) {
    GapReport r;
    r.closed_form = true;
    EXPECT_DOUBLE_EQ(r.tolerance(), 1e-5);
    r.closed_form = false;
    EXPECT_DOUBLE_EQ(r.tolerance(), 1e-3);
    r.gap = -1e-6;
    EXPECT_FALSE(r.within_tolerance());
    r.gap = 5e-4;
    EXPECT_TRUE(r.within_tolerance());
}

TEST(DualOptimizer, ClosedForms) {
    testsupport::Gen g(529);
    for (int k = 0; k < 30; ++k) {
        auto s = g.space(3);
        auto x = g.position(s);
        for (const auto& rho : {entropic(1.3), expected_shortfall(0.35), worst_case(), neg_expectation()}) {
            auto q = dual_optimizer(rho, x);
            ASSERT_TRUE(q) << rho.name();
            double c = minimal_penalty(rho, *q).value.value();
            EXPECT_NEAR(-expectation_under(*q, x) - c, rho(x).value(), 1e-10) << rho.name();
        }
    }
}
