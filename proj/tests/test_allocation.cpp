#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rrisk/allocation.hpp"
#include "test_support.hpp"

using namespace rrisk;

namespace {

double mean_loss(const Position& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.n(); ++i) s -= x.space()->prob(i) * x[i];
    return s;
}

double entropic_by_sum(const Position& x, double gamma) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.n(); ++i) s += x.space()->prob(i) * std::exp(-gamma * x[i]);
    return std::log(s) / gamma;
}

// Gibbs weights of Y under entropic(1) and the allocation E_Q[-X] - H(Q|P).
double entropic_allocation(const Position& x, const Position& y) {
    const auto& p = y.space()->probs();
    std::vector<double> w(y.n());
    double z = 0.0;
    for (std::size_t i = 0; i < y.n(); ++i) z += w[i] = p[i] * std::exp(-y[i]);
    double el = 0.0, h = 0.0;
    for (std::size_t i = 0; i < y.n(); ++i) {
        double qi = w[i] / z;
        el -= qi * x[i];
        h += qi * std::log(qi / p[i]);
    }
    return el - h;
}

// Average of the worst alpha-tail of losses -X, atoms split at the boundary.
double es_by_sorting(const Position& x, double alpha) {
    std::vector<std::size_t> idx(x.n());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    double left = alpha, acc = 0.0;
    for (auto i : idx) {
        double w = std::min(left, x.space()->prob(i));
        acc -= w * x[i];
        left -= w;
        if (left <= 0.0) break;
    }
    return acc / alpha;
}

}  // namespace

// ---------------------------------------------------------------- gradient rule

TEST(GradientCar, NegExpectationAllocatesTheMean) {
    testsupport::Gen g(701);
    auto s = g.space(3);
    auto rule = gradient_car(neg_expectation(), SimplexGrid::make(s, 0.05));
    for (int k = 0; k < 50; ++k) {
        auto x = g.position(s), y = g.position(s);
        EXPECT_NEAR(rule(x, y).value(), mean_loss(x), 1e-12);
    }
}

TEST(GradientCar, EntropicMatchesGibbsAllocation) {
    testsupport::Gen g(702);
    auto s = g.space(2);
    auto rule = gradient_car(entropic(1.0), SimplexGrid::make(s, 0.01));
    for (int k = 0; k < 100; ++k) {
        auto x = g.position(s), y = g.position(s);
        EXPECT_NEAR(rule(x, y).value(), entropic_allocation(x, y), 1e-9);
    }
}

TEST(GradientCar, IdentityOnTheDiagonal) {
    testsupport::Gen g(703);
    for (std::size_t n : {2u, 3u}) {
        auto s = g.space(n);
        auto grid = SimplexGrid::make(s, 0.02);
        auto ent = gradient_car(entropic(1.0), grid);
        auto es = gradient_car(expected_shortfall(0.3), grid);
        auto wc = gradient_car(worst_case(), grid);
        for (int k = 0; k < 100; ++k) {
            auto y = g.position(s);
            EXPECT_NEAR(ent(y, y).value(), entropic_by_sum(y, 1.0), 1e-9);
            EXPECT_NEAR(es(y, y).value(), es_by_sorting(y, 0.3), 1e-9);
            EXPECT_NEAR(wc(y, y).value(), -*std::min_element(y.values().begin(), y.values().end()), 1e-9);
        }
    }
}

TEST(GradientCar, NoUndercutByFenchel) {
    testsupport::Gen g(704);
    auto s = uniform_space(2);
    auto rule = gradient_car(entropic(1.0), SimplexGrid::make(s, 0.01));
    for (int k = 0; k < 500; ++k) {
        auto x = g.position(s), y = g.position(s);
        EXPECT_LE(rule(x, y).value(), entropic_by_sum(x, 1.0) + 1e-6);
    }
}

TEST(GradientCar, AffineInTheSubPortfolio) {
    testsupport::Gen g(705);
    auto s = g.space(3);
    auto rule = gradient_car(expected_shortfall(0.4), SimplexGrid::make(s, 0.05));
    for (int k = 0; k < 50; ++k) {
        auto x1 = g.position(s), x2 = g.position(s), y = g.position(s);
        double lam = g.uniform(0, 1), m = g.uniform(-2, 2);
        EXPECT_NEAR(rule(lam * x1 + (1 - lam) * x2, y).value(),
                    lam * rule(x1, y).value() + (1 - lam) * rule(x2, y).value(), 1e-12);
        EXPECT_NEAR(rule(x1 + m, y).value(), rule(x1, y).value() - m, 1e-12);
    }
}

TEST(GradientCar, SliceRecordsTheMeasure) {
    auto s = uniform_space(2);
    auto rule = gradient_car(worst_case(), SimplexGrid::make(s, 0.1));
    auto sl = rule.linear(Position(s, {1.0, -2.0}));
    ASSERT_TRUE(sl.has_value());
    EXPECT_NEAR(sl->q[0], 0.0, 1e-12);
    EXPECT_NEAR(sl->q[1], 2.0, 1e-12);
    EXPECT_NEAR(sl->constant, 0.0, 1e-12);
    EXPECT_TRUE(sl->attained);
}

TEST(GradientCar, NeedsConvexCashAdditiveRho) {
    auto grid = SimplexGrid::make(uniform_space(2), 0.1);
    EXPECT_THROW(gradient_car(expectation_floor(1.0), grid), HypothesisError);
    EXPECT_THROW(gradient_car(q_entropic(0.5, 1.0), grid), HypothesisError);
    EXPECT_THROW(gradient_car(certainty_equivalent(exponential_loss()), grid), HypothesisError);
}

// ---------------------------------------------------------------- robust rule

TEST(RobustCar, SupBallAddsEps) {
    testsupport::Gen g(706);
    auto s = g.space(3);
    auto rule = gradient_car(entropic(1.0), SimplexGrid::make(s, 0.05));
    for (int k = 0; k < 50; ++k) {
        auto x = g.position(s), y = g.position(s);
        double eps = g.uniform(0, 1);
        auto r = robust_car(rule, sup_norm_ball(eps), x, y);
        EXPECT_EQ(r.guarantee, Guarantee::Exact);
        EXPECT_NEAR(r.value.value(), rule(x, y).value() + eps, 1e-12);
        EXPECT_NEAR(robust_car(rule, sup_norm_ball(0.0), x, y).value.value(), rule(x, y).value(), 1e-12);
        EXPECT_NEAR(robust_car(rule, sup_norm_ball(eps), y, y).value.value(), entropic_by_sum(y, 1.0) + eps, 1e-9);
    }
}

TEST(RobustCar, EuclideanBallAddsTheDensityNorm) {
    // sup over ||Z - X||_2 <= eps of E_Q[-Z] is E_Q[-X] + eps ||dQ/dP||_2
    testsupport::Gen g(707);
    auto s = g.space(3);
    auto rule = gradient_car(entropic(1.0), SimplexGrid::make(s, 0.05));
    for (int k = 0; k < 50; ++k) {
        auto x = g.position(s), y = g.position(s);
        double eps = g.uniform(0, 1);
        auto sl = rule.linear(y);
        double norm2 = 0.0;
        for (std::size_t i = 0; i < s->n(); ++i) norm2 += s->prob(i) * sl->q[i] * sl->q[i];
        auto r = robust_car(rule, p_norm_ball(2.0, eps), x, y);
        EXPECT_NEAR(r.value.value(), rule(x, y).value() + eps * std::sqrt(norm2), 1e-12);
    }
}

TEST(RobustCar, CustomRulesUseTheNumericMaximizer) {
    testsupport::Gen g(708);
    auto s = g.space(2);
    auto rho = entropic(1.0);
    AllocationRule rule("entropic_standalone", rho, [rho](const Position& x, const Position&) { return rho(x); });
    for (int k = 0; k < 10; ++k) {
        auto x = g.position(s), y = g.position(s);
        auto r = robust_car(rule, sup_norm_ball(0.3), x, y);
        EXPECT_EQ(r.guarantee, Guarantee::LowerBound);
        EXPECT_LE(r.value.value(), entropic_by_sum(x, 1.0) + 0.3 + 1e-9);
        EXPECT_GE(r.value.value(), entropic_by_sum(x, 1.0) + 0.3 - 1e-4);
    }
}

// ---------------------------------------------------------------- property checks

TEST(CarIdentity, HoldsForShippedRules) {
    for (std::size_t n : {2u, 3u}) {
        auto s = make_space(n == 2 ? std::vector<double>{0.3, 0.7} : std::vector<double>{0.2, 0.3, 0.5});
        auto grid = SimplexGrid::make(s, 0.02);
        for (const auto& rho : {entropic(1.0), expected_shortfall(0.5), neg_expectation(), worst_case()}) {
            auto v = check_car_identity(gradient_car(rho, grid), s, 500, 11);
            EXPECT_TRUE(v.holds()) << rho.name() << " " << v.note;
            EXPECT_EQ(v.trials, 500u);
        }
    }
}

TEST(CarIdentity, CatchesABrokenRule) {
    auto s = uniform_space(2);
    auto rho = neg_expectation();
    AllocationRule rule("shifted", rho, [rho](const Position& x, const Position&) { return rho(x) - 0.5; });
    auto v = check_car_identity(rule, s, 10, 1);
    ASSERT_TRUE(v.is_counterexample());
    EXPECT_EQ(v.witness.vectors.count("Y"), 1u);
}

TEST(NoUndercut, GradientRuleOverBalls) {
    auto s = make_space({0.25, 0.75});
    auto grid = SimplexGrid::make(s, 0.02);
    EXPECT_TRUE(check_no_undercut(gradient_car(neg_expectation(), grid), sup_norm_ball(0.2), s, 500, 3).holds());
    EXPECT_TRUE(check_no_undercut(gradient_car(entropic(1.0), grid), sup_norm_ball(0.4), s, 500, 4).holds());
    EXPECT_TRUE(check_no_undercut(gradient_car(expected_shortfall(0.5), grid), p_norm_ball(1.0, 0.3), s, 200, 5)
                    .holds());
    EXPECT_TRUE(check_no_undercut(gradient_car(entropic(1.0), grid), p_norm_ball(2.0, 0.3), s, 40, 6).holds());
}

TEST(NoUndercut, SyntheticViolationPropagates) {
    auto s = uniform_space(2);
    auto rho = entropic(1.0);
    AllocationRule rule("undercutting", rho, [rho](const Position& x, const Position&) { return rho(x) + 1.0; });
    auto v = check_no_undercut(rule, sup_norm_ball(0.1), s, 50, 7);
    ASSERT_TRUE(v.is_counterexample());
    const auto& w = v.witness;
    Position x(s, w.vectors.at("X")), y(s, w.vectors.at("Y"));
    EXPECT_GT(rule(x, y).value(), rho(x).value());
}

TEST(Sandwich, EntropicSupBallIsTightOnTheRight) {
    auto s = uniform_space(3);
    auto rule = gradient_car(entropic(1.0), SimplexGrid::make(s, 0.05));
    testsupport::Gen g(709);
    for (int k = 0; k < 20; ++k) {
        auto y = g.position(s);
        double eps = g.uniform(0, 1);
        double mid = robust_car(rule, sup_norm_ball(eps), y, y).value.value();
        EXPECT_NEAR(mid, entropic_by_sum(y, 1.0) + eps, 1e-9);
        EXPECT_NEAR(robust_value(entropic(1.0), sup_norm_ball(eps), y).value.value(), mid, 1e-9);
    }
    EXPECT_TRUE(check_sandwich(rule, sup_norm_ball(0.3), s, 100, 8).holds());
}

TEST(Sandwich, RandomRadii) {
    auto s = make_space({0.4, 0.6});
    auto grid = SimplexGrid::make(s, 0.02);
    testsupport::Gen g(710);
    for (int k = 0; k < 20; ++k) {
        double eps = g.uniform(0, 1);
        for (const auto& rho : {entropic(1.0), expected_shortfall(0.5)}) {
            auto rule = gradient_car(rho, grid);
            EXPECT_TRUE(check_sandwich(rule, sup_norm_ball(eps), s, 25, k).holds()) << rho.name();
            EXPECT_TRUE(check_sandwich(rule, p_norm_ball(1.0, eps), s, 25, k).holds()) << rho.name();
        }
    }
}

TEST(Sandwich, ZeroRadiusCollapses) {
    auto s = uniform_space(2);
    auto rule = gradient_car(expected_shortfall(0.5), SimplexGrid::make(s, 0.05));
    testsupport::Gen g(711);
    for (int k = 0; k < 20; ++k) {
        auto y = g.position(s);
        EXPECT_NEAR(robust_car(rule, sup_norm_ball(0.0), y, y).value.value(), es_by_sorting(y, 0.5), 1e-9);
    }
    EXPECT_TRUE(check_sandwich(rule, sup_norm_ball(0.0), s, 50, 9).holds());
}

TEST(Sandwich, BrokenRuleIsCaught) {
    auto s = uniform_space(2);
    auto rho = neg_expectation();
    AllocationRule rule("low", rho, [rho](const Position& x, const Position&) { return rho(x) - 0.5; });
    EXPECT_TRUE(check_sandwich(rule, sup_norm_ball(0.1), s, 20, 10).is_counterexample());
}

// ---------------------------------------------------------------- sub-allocation

namespace {

// Y = Y1 + Y2 with Y1 <= 0 <= Y2 <= eps: U_{Y1} contains U_Y by monotonicity of
// rho1, and 0 lies in both sets since rho1(Y_i) >= -eps.
std::vector<Partition> level_partitions(testsupport::Gen& g, const SpacePtr& s, double eps, int count) {
    std::vector<Partition> out;
    for (int k = 0; k < count; ++k) {
        auto y1 = g.position(s, -3.0, 0.0), y2 = g.position(s, 0.0, eps);
        out.push_back(Partition{y1 + y2, {y1, y2}});
    }
    return out;
}

}  // namespace

TEST(SubAllocation, LevelUpperSetInstances) {
    testsupport::Gen g(712);
    auto s = make_space({0.3, 0.3, 0.4});
    auto rho = expected_shortfall(0.5);
    auto rule = gradient_car(rho, SimplexGrid::make(s, 0.05));
    auto parts = level_partitions(g, s, 0.2, 100);
    auto v = check_subadditive_allocation(rule, level_upper_set(rho, 0.2), parts);
    EXPECT_EQ(v.tag, PropertyVerdict::Tag::SampledNoCounterexample) << v.note;
    EXPECT_EQ(v.trials, 100u);
    EXPECT_NE(v.note.find("100 with the sum form"), std::string::npos) << v.note;
}

TEST(SubAllocation, OnePartIsEquality) {
    auto s = uniform_space(2);
    auto rule = gradient_car(expected_shortfall(0.5), SimplexGrid::make(s, 0.05));
    Position y(s, {-1.0, 0.5});
    auto v = check_subadditive_allocation(rule, level_upper_set(expected_shortfall(0.5), 0.1), {Partition{y, {y}}});
    EXPECT_TRUE(v.holds()) << v.note;
}

TEST(SubAllocation, SupBallFailsTheUnionHypothesis) {
    testsupport::Gen g(713);
    auto s = uniform_space(2);
    auto rule = gradient_car(expected_shortfall(0.5), SimplexGrid::make(s, 0.05));
    std::vector<Partition> parts;
    for (int k = 0; k < 20; ++k) {
        auto y1 = g.position(s), y2 = g.position(s);
        parts.push_back(Partition{y1 + y2, {y1, y2}});
    }
    auto v = check_subadditive_allocation(rule, sup_norm_ball(0.2), parts);
    EXPECT_EQ(v.tag, PropertyVerdict::Tag::Unknown);
    EXPECT_NE(v.note.find("hypothesis"), std::string::npos) << v.note;
}

TEST(SubAllocation, PartsMustSumToTheAggregate) {
    auto s = uniform_space(2);
    auto rule = gradient_car(neg_expectation(), SimplexGrid::make(s, 0.1));
    Position y(s, {1.0, 1.0});
    EXPECT_THROW(check_subadditive_allocation(rule, sup_norm_ball(0.1), {Partition{y, {y, y}}}),
                 std::invalid_argument);
}
