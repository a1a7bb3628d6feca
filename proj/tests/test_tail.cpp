#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "heavytail/generated.hpp"
#include "heavytail/scenarios.hpp"
#include "heavytail/special.hpp"
#include "heavytail/tail.hpp"

using namespace heavytail;

namespace {

std::vector<double> pareto_grid(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 1; i <= n; ++i) v[i - 1] = std::sqrt(static_cast<double>(n) / i);
    return v;
}

// Closed form for the grid: mean log ratio = (log(k+1) - log(k!)/k) / 2.
double pareto_grid_oracle(std::size_t k) {
    const double kd = static_cast<double>(k);
    return 1.0 / (0.5 * (std::log(kd + 1.0) - std::lgamma(kd + 1.0) / kd));
}

std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1.0);
    return v;
}

// Mean Hill estimate (k = floor(sqrt(n))) over seeds 1..10 of 1e6 draws each.
double mean_hill(const BaseDistribution& base, const TransformSpec& spec) {
    const GeneratedDistribution d(base, spec);
    double sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto draws = d.sample(1000000, seed);
        sum += hill_estimator(draws, default_hill_k(draws.size()));
    }
    return sum / 10.0;
}

// Population Hill functional at k/n = 1e-3, i.e. the value the estimator
// concentrates on at this sample size (mpmath quadrature of log Q near 1).
// Standard error of the 10-run mean is about index / sqrt(10 k).
struct TailCase {
    BaseDistribution base;
    TransformSpec spec;
    double predicted;
    double tolerance;
    double population;
};

} // namespace

TEST(HillEstimator, ParetoGridMatchesClosedForm) {
    const auto grid = pareto_grid(100000);
    for (std::size_t k : {10u, 100u, 316u, 10000u})
        EXPECT_NEAR(hill_estimator(grid, k), pareto_grid_oracle(k), 1e-10 * pareto_grid_oracle(k));
    // The closed form tends to 2.
    EXPECT_NEAR(hill_estimator(grid, 40000), 2.0, 0.01);
}

TEST(HillEstimator, ScaleInvarianceIsExact) {
    const auto draws = BaseDistribution::student_t(3.0).sample(10000, 2);
    std::vector<double> scaled;
    for (double y : draws) scaled.push_back(10.0 * y);
    for (std::size_t k : {10u, 100u, 1000u}) {
        const double a = hill_estimator(draws, k), b = hill_estimator(scaled, k);
        EXPECT_NEAR(a, b, 1e-12 * a);
    }
}

TEST(HillEstimator, StudentTThree) {
    const auto draws = BaseDistribution::student_t(3.0).sample(1000000, 7);
    const double h = hill_estimator(draws, default_hill_k(draws.size()));
    EXPECT_GE(h, 2.55);
    EXPECT_LE(h, 3.45);
}

TEST(HillEstimator, Preconditions) {
    const auto grid = pareto_grid(100);
    EXPECT_THROW(hill_estimator(grid, 9), DomainError);
    EXPECT_THROW(hill_estimator(grid, 50), DomainError);
    EXPECT_NO_THROW(hill_estimator(grid, 49));
    std::vector<double> mostly_negative(100, -1.0);
    for (int i = 0; i < 5; ++i) mostly_negative[i] = 1.0 + i;
    EXPECT_THROW(hill_estimator(mostly_negative, 10), DomainError);
    EXPECT_EQ(default_hill_k(1000000), 1000u);
    EXPECT_EQ(default_hill_k(99), 9u);
}

TEST(HillEstimator, StabilityReport) {
    const auto grid = pareto_grid(1000000);
    const auto s = hill_stability(grid);
    ASSERT_EQ(s.size(), 3u);
    EXPECT_EQ(s[0].k, 251u);
    EXPECT_EQ(s[1].k, 1000u);
    EXPECT_EQ(s[2].k, 3981u);
    for (const auto& p : s) EXPECT_NEAR(p.estimate, pareto_grid_oracle(p.k), 1e-9 * p.estimate);
    // Too few points for any k: empty.
    EXPECT_TRUE(hill_stability(pareto_grid(30)).empty());
}

TEST(PredictedIndex, Examples) {
    EXPECT_DOUBLE_EQ(*predicted_index(BaseDistribution::student_t(3.0), IndicatorPower{1.0, 4.0}),
                     1.5);
    EXPECT_DOUBLE_EQ(*predicted_index(BaseDistribution::exponential(), ExpM1OverX{0.5}), 2.0);
    EXPECT_FALSE(predicted_index(BaseDistribution::gaussian(), PgmlUp{1.5, 4.0}));
    EXPECT_DOUBLE_EQ(*predicted_index(BaseDistribution::student_t(5.0), IndicatorPower{2.0, 4.0}),
                     5.0 / 3.0);
    EXPECT_DOUBLE_EQ(*predicted_index(BaseDistribution::student_t(4.0), ZeroG{}), 4.0);
    EXPECT_FALSE(predicted_index(BaseDistribution::student_t(4.0), PgmlUp{1.5, 4.0}));
    EXPECT_FALSE(predicted_index(BaseDistribution::exponential(), PgmlUp{1.5, 4.0}));
}

TEST(PredictedIndex, HeavierTailClassification) {
    EXPECT_TRUE(predicts_heavier_right_tail(BaseDistribution::gaussian(), PgmlUp{1.5, 4.0}));
    EXPECT_FALSE(predicts_heavier_right_tail(BaseDistribution::gaussian(), PgmlUp{1.0, 4.0}));
    EXPECT_FALSE(predicts_heavier_right_tail(BaseDistribution::gaussian(), PgmlDown{1.5, 4.0}));
    const auto cls = classify_base_tail(BaseDistribution::student_t(3.0));
    ASSERT_TRUE(std::holds_alternative<RegularlyVarying>(cls));
    EXPECT_EQ(std::get<RegularlyVarying>(cls).rho, -3.0);
}

void check_tail_case(const TailCase& c) {
    EXPECT_DOUBLE_EQ(*predicted_index(c.base, c.spec.g1), c.predicted);
    const double h = mean_hill(c.base, c.spec);
    EXPECT_NEAR(h, c.population, 4.0 * c.population / std::sqrt(10.0 * 1000.0));
    EXPECT_NEAR(h, c.predicted, c.tolerance * c.predicted);
}

TEST(TailIndex, StudentTThreeIndicatorOne) {
    check_tail_case({BaseDistribution::student_t(3.0),
                     TransformSpec{0.0, 1.0, IndicatorPower{1.0, 4.0}, ZeroG{}}, 1.5, 0.15,
                     1.6662012859083817});
}

TEST(TailIndex, StudentTFiveIndicatorTwo) {
    check_tail_case({BaseDistribution::student_t(5.0),
                     TransformSpec{0.0, 1.0, IndicatorPower{2.0, 4.0}, ZeroG{}}, 5.0 / 3.0, 0.15,
                     1.6162964650841778});
}

TEST(TailIndex, ExponentialExpM1OverXHalf) {
    check_tail_case({BaseDistribution::exponential(),
                     TransformSpec{0.0, 1.0, ExpM1OverX{0.5}, ZeroG{}}, 2.0, 0.20,
                     2.1836251734428602});
}

TEST(TailIndex, ExponentialExpM1OverXPointThree) {
    check_tail_case({BaseDistribution::exponential(),
                     TransformSpec{0.0, 1.0, ExpM1OverX{0.3}, ZeroG{}}, 1.0 / 0.3, 0.20,
                     4.149351702281568});
}

TEST(SurvivalRatio, IdenticalDistributionsGiveOne) {
    const auto sf = [](double z) { return special::normal_sf(z); };
    const auto curve = survival_ratio_curve(sf, sf, 0.0, 1.0, linspace(-5, 40, 500));
    EXPECT_TRUE(curve.truncated);
    ASSERT_FALSE(curve.points.empty());
    for (const auto& p : curve.points) EXPECT_EQ(p.ratio, 1.0);
    // Last kept point is the last normal survival value.
    EXPECT_TRUE(std::isnormal(special::normal_sf(curve.points.back().x)));
}

TEST(SurvivalRatio, PgmlOverGaussianIncreasesBeyondFive) {
    // Location-scale pairs at which the divergence is checked.
    for (auto [mu, sigma] : {std::pair{0.0, 1.0}, std::pair{1.0, 2.0}}) {
        const GeneratedDistribution d(BaseDistribution::gaussian(),
                                      pgml_spec(mu, sigma, 1.5, 1.5, 4.0));
        const auto curve =
            survival_ratio_curve([&](double y) { return d.sf(y); },
                                 [](double z) { return special::normal_sf(z); }, mu,
                                 sigma * 1.5, linspace(mu, mu + sigma * 60.0, 3000));
        EXPECT_TRUE(ratio_increasing_beyond(curve, mu + 5.0 * sigma));
        EXPECT_GT(max_ratio(curve), 1e3);
    }
}

TEST(SurvivalRatio, StudentTOverGaussianExceedsThousand) {
    const auto t3 = BaseDistribution::student_t(3.0);
    const auto curve = survival_ratio_curve([&](double y) { return t3.sf(y); },
                                            [](double z) { return special::normal_sf(z); }, 0.0,
                                            1.0, linspace(0, 60, 1201));
    EXPECT_TRUE(curve.truncated);
    EXPECT_GT(max_ratio(curve), 1e3);
    EXPECT_TRUE(ratio_increasing_beyond(curve, 3.0));
}

TEST(SurvivalRatio, Preconditions) {
    const auto sf = [](double z) { return special::normal_sf(z); };
    EXPECT_THROW(survival_ratio_curve(sf, sf, 0.0, 0.0, linspace(0, 1, 3)), DomainError);
    EXPECT_THROW(survival_ratio_curve(sf, sf, 0.0, 1.0, std::vector<double>{0, 1, 1}), DomainError);
}

TEST(TailScenario, GaussianDivergenceScenario) {
    const auto out = run_scenario(make_scenario("prop6_gaussian"), std::nullopt);
    EXPECT_TRUE(out.passed);
    EXPECT_TRUE(out.ratio_increasing);
    EXPECT_GT(out.max_ratio, 1e3);
    EXPECT_TRUE(std::isnan(out.report.hill_estimate));
    EXPECT_FALSE(out.report.predicted_index);
    EXPECT_THROW(make_scenario("nope"), DomainError);
    EXPECT_THROW(run_scenario(make_scenario("prop4_t3"), std::nullopt), DomainError);
}

TEST(MatchTailTransform, GaussianToStudentT) {
    for (auto [mu, sigma] : {std::pair{0.0, 1.0}, std::pair{1.0, 2.0}}) {
        const LocationScale target{BaseDistribution::student_t(3.0), mu, sigma};
        const auto spec = match_tail_transform(BaseDistribution::gaussian(), target, 1.0,
                                               MatchOptions{mu, sigma});
        EXPECT_TRUE(validate_transform(spec).passed);
        const GeneratedDistribution d(BaseDistribution::gaussian(), spec);
        for (double lp = -2.0; lp >= -5.0; lp -= 0.05) {
            const double y = target.isf(std::pow(10.0, lp));
            const double r = d.sf(y) / target.sf(y);
            EXPECT_GE(r, 0.8) << "survival 1e" << lp;
            EXPECT_LE(r, 1.25) << "survival 1e" << lp;
        }
    }
}

TEST(MatchTailTransform, SameFamilyGivesConstantG) {
    const LocationScale target{BaseDistribution::gaussian(), 0.5, 1.5};
    const auto spec =
        match_tail_transform(BaseDistribution::gaussian(), target, 0.5, MatchOptions{0.5, 1.0});
    const auto& t = std::get<Tabulated>(spec.g1);
    for (std::size_t i = 1; i < t.x.size(); ++i) EXPECT_NEAR(t.g[i], 0.5, 1e-9) << t.x[i];
    const GeneratedDistribution d(BaseDistribution::gaussian(), spec);
    for (double y = 2.0; y < 12.0; y += 0.5) EXPECT_NEAR(d.sf(y) / target.sf(y), 1.0, 1e-6) << y;
}

TEST(MatchTailTransform, Errors) {
    const LocationScale t3{BaseDistribution::student_t(3.0), 0.0, 1.0};
    try {
        match_tail_transform(BaseDistribution::gaussian(), t3, -0.5);
        FAIL() << "expected ConstructionError";
    } catch (const ConstructionError& e) {
        EXPECT_EQ(e.witness(), -0.5);
    }
    EXPECT_THROW(match_tail_transform(BaseDistribution::gaussian(), t3, 0.0), ConstructionError);
    // Lighter target: F2^{-1}(F1(x)) / x decreases.
    const LocationScale narrow{BaseDistribution::gaussian(), 0.0, 1.0};
    try {
        match_tail_transform(BaseDistribution::student_t(3.0), LocationScale{narrow.base, 0.0, 3.0},
                             1.0);
        FAIL() << "expected ConstructionError";
    } catch (const ConstructionError& e) {
        EXPECT_GT(e.witness(), 1.0);
    }
}
