#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "heavytail/fit.hpp"
#include "heavytail/generated.hpp"
#include "heavytail/rng.hpp"

using namespace heavytail;

namespace {

const TransformSpec kReference = pgml_spec(-1.0, 0.5, 1.5, 1.8, 4.0);

double uniform_in(Xoshiro256& g, double lo, double hi) { return lo + (hi - lo) * g.uniform(); }

// True when some observation lies between the grid quantiles of the two specs
// at any level, i.e. a finite difference between them would cross a kink.
bool crosses_tie(const TransformSpec& a, const TransformSpec& b, const BaseDistribution& base,
                 const std::vector<double>& sorted, const QuantileGrid& grid) {
    for (double alpha : grid.levels()) {
        const double x = base.quantile(alpha);
        double lo = eval_f(a, x), hi = eval_f(b, x);
        if (lo > hi) std::swap(lo, hi);
        const auto it = std::lower_bound(sorted.begin(), sorted.end(), lo);
        if (it != sorted.end() && *it <= hi) return true;
    }
    return false;
}

} // namespace

TEST(PinballLoss, Examples) {
    EXPECT_DOUBLE_EQ(pinball_loss(1.0, 0.0, 0.5), 0.5);
    EXPECT_DOUBLE_EQ(pinball_loss(0.0, 1.0, 0.01), 0.99);
    EXPECT_EQ(pinball_loss(2.5, 2.5, 0.3), 0.0);
    EXPECT_THROW(pinball_loss(0.0, 0.0, 0.0), DomainError);
    EXPECT_THROW(pinball_loss(0.0, 0.0, 1.0), DomainError);
}

TEST(PinballLoss, NonnegativeAndConvexInQ) {
    Xoshiro256 gen(5);
    for (int i = 0; i < 1000; ++i) {
        const double y = uniform_in(gen, -3, 3), a = uniform_in(gen, 0.01, 0.99);
        const double q1 = uniform_in(gen, -3, 3), q2 = uniform_in(gen, -3, 3);
        const double t = gen.uniform();
        EXPECT_GE(pinball_loss(y, q1, a), 0.0);
        EXPECT_LE(pinball_loss(y, t * q1 + (1 - t) * q2, a),
                  t * pinball_loss(y, q1, a) + (1 - t) * pinball_loss(y, q2, a) + 1e-12);
    }
}

TEST(QuantileGrid, DefaultIsPercentLevels) {
    const auto g = QuantileGrid::evenly_spaced();
    ASSERT_EQ(g.size(), 99u);
    EXPECT_DOUBLE_EQ(g.levels().front(), 0.01);
    EXPECT_DOUBLE_EQ(g.levels()[49], 0.5);
    EXPECT_DOUBLE_EQ(g.levels().back(), 0.99);
}

TEST(QuantileGrid, RejectsBadLevels) {
    EXPECT_THROW(QuantileGrid({}), DomainError);
    EXPECT_THROW(QuantileGrid({0.0, 0.5}), DomainError);
    EXPECT_THROW(QuantileGrid({0.5, 1.0}), DomainError);
    EXPECT_THROW(QuantileGrid({0.5, 0.4}), DomainError);
    EXPECT_THROW(QuantileGrid({0.5, 0.5}), DomainError);
}

TEST(PinballObjective, ExactMedianGivesZero) {
    const std::vector<double> data(20, -1.0);
    EXPECT_EQ(pinball_objective(pgml_spec(-1.0, 0.5, 1.0, 1.0), BaseDistribution::gaussian(), data,
                                QuantileGrid({0.5})),
              0.0);
}

TEST(PinballObjective, OneSidedFormula) {
    const std::vector<double> data{1.0, 2.0, 4.0};
    const QuantileGrid grid({0.3});
    const auto spec = pgml_spec(0.0, 0.1, 1.0, 1.0);
    const double q = eval_f(spec, BaseDistribution::gaussian().quantile(0.3));
    const double mean = (1.0 + 2.0 + 4.0) / 3.0;
    EXPECT_NEAR(pinball_objective(spec, BaseDistribution::gaussian(), data, grid), 0.3 * (mean - q),
                1e-15);
}

TEST(PinballObjective, TrueSpecBeatsDoubledSigma) {
    const GeneratedDistribution d(BaseDistribution::gaussian(), kReference);
    const auto data = d.sample(10000, 3);
    auto wide = kReference;
    wide.sigma *= 2.0;
    const auto grid = QuantileGrid::evenly_spaced();
    EXPECT_LT(pinball_objective(kReference, d.base(), data, grid),
              pinball_objective(wide, d.base(), data, grid));
}

TEST(PinballObjective, UnimodalAlongQuantileShift) {
    // Shifting every grid quantile by t (a mu shift) traces a convex curve.
    Xoshiro256 gen(8);
    const GeneratedDistribution d(BaseDistribution::gaussian(), kReference);
    const auto grid = QuantileGrid::evenly_spaced(19);
    for (int trial = 0; trial < 20; ++trial) {
        const auto data = d.sample(300, 100 + trial);
        std::vector<double> vals;
        for (double t = -2.0; t <= 2.0; t += 0.01) {
            auto s = kReference;
            s.mu += t;
            vals.push_back(pinball_objective(s, d.base(), data, grid));
        }
        const auto imin = std::min_element(vals.begin(), vals.end()) - vals.begin();
        for (long i = 1; i <= imin; ++i) EXPECT_LE(vals[i], vals[i - 1] + 1e-12);
        for (std::size_t i = imin + 1; i < vals.size(); ++i) EXPECT_GE(vals[i], vals[i - 1] - 1e-12);
    }
}

TEST(ObjectiveGradient, AllDataAboveGrid) {
    const std::vector<double> data{100.0, 101.0, 102.0};
    const auto grid = QuantileGrid::evenly_spaced(9);
    const auto g = objective_gradient(kReference, BaseDistribution::gaussian(), data, grid);
    const auto levels = grid.levels();
    EXPECT_NEAR(g[0], -std::accumulate(levels.begin(), levels.end(), 0.0), 1e-14);
}

TEST(ObjectiveGradient, SymmetricCaseHasZeroMuDerivative) {
    std::vector<double> data;
    for (int i = 1; i <= 500; ++i) {
        const double y = BaseDistribution::gaussian().quantile((i - 0.37) / 500.0);
        data.push_back(y);
        data.push_back(-y);
    }
    const auto g = objective_gradient(pgml_spec(0.0, 1.0, 1.3, 1.3), BaseDistribution::gaussian(),
                                      data, QuantileGrid::evenly_spaced());
    EXPECT_NEAR(g[0], 0.0, 1e-12);
}

TEST(ObjectiveGradient, MatchesCentralDifferencesAwayFromTies) {
    Xoshiro256 gen(21);
    const auto grid = QuantileGrid::evenly_spaced(19);
    int checked = 0;
    for (int attempt = 0; attempt < 2000 && checked < 50; ++attempt) {
        const auto base = BaseDistribution::gaussian();
        const auto spec = pgml_spec(uniform_in(gen, -1, 1), uniform_in(gen, 0.3, 2.0),
                                    uniform_in(gen, 1.05, 2.0), uniform_in(gen, 1.05, 2.0),
                                    uniform_in(gen, 2.0, 8.0));
        auto data = GeneratedDistribution(base, pgml_spec(0.0, 1.0, 1.4, 1.4)).sample(60, attempt);
        std::sort(data.begin(), data.end());
        const auto theta = to_unconstrained(spec);
        const auto grad = objective_gradient(spec, base, data, grid);
        bool tie = false;
        std::vector<double> fd(theta.size());
        for (std::size_t k = 0; k < theta.size() && !tie; ++k) {
            const double h = 1e-6 * std::max(1.0, std::fabs(theta[k]));
            auto up = theta, dn = theta;
            up[k] += h;
            dn[k] -= h;
            const auto su = from_unconstrained(spec, up), sd = from_unconstrained(spec, dn);
            if (crosses_tie(sd, su, base, data, grid)) tie = true;
            fd[k] = (pinball_objective(su, base, data, grid) - pinball_objective(sd, base, data, grid)) /
                    (2 * h);
        }
        if (tie) continue;
        ++checked;
        for (std::size_t k = 0; k < theta.size(); ++k)
            EXPECT_NEAR(grad[k], fd[k], 1e-4 * std::max(1.0, std::fabs(fd[k])))
                << "instance " << checked << " coordinate " << k;
    }
    EXPECT_EQ(checked, 50);
}

TEST(Reparameterization, RoundTripsAndRespectsConstraints) {
    const auto theta = to_unconstrained(kReference);
    const auto back = from_unconstrained(kReference, theta);
    EXPECT_NEAR(back.mu, kReference.mu, 1e-15);
    EXPECT_NEAR(back.sigma, kReference.sigma, 1e-15);
    EXPECT_NEAR(free_parameter(back.g1), 1.5, 1e-15);
    EXPECT_NEAR(free_parameter(back.g2), 1.8, 1e-15);

    Xoshiro256 gen(3);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> t{uniform_in(gen, -50, 50), uniform_in(gen, -30, 30),
                              uniform_in(gen, -40, 3), uniform_in(gen, -40, 3)};
        const auto s = from_unconstrained(kReference, t);
        EXPECT_GT(s.sigma, 0.0);
        EXPECT_GE(free_parameter(s.g1), 1.0);
        EXPECT_GE(free_parameter(s.g2), 1.0);
        EXPECT_TRUE(validate_transform(s).passed);
    }
    EXPECT_EQ(parameter_names(kReference), (std::vector<std::string>{"mu", "sigma", "u", "v"}));
}

TEST(FitQuantileRegression, RecoversReferenceParameters) {
    const GeneratedDistribution d(BaseDistribution::gaussian(), kReference);
    const auto data = d.sample(50000, 2024);
    FitConfig cfg;
    cfg.seed = 1;
    const auto r = fit_quantile_regression(d.base(), data, cfg);
    EXPECT_TRUE(r.converged);
    EXPECT_TRUE(validate_transform(r.spec).passed);
    EXPECT_NEAR(r.spec.mu, -1.0, 0.05);
    EXPECT_NEAR(r.spec.sigma, 0.5, 0.05);
    EXPECT_NEAR(free_parameter(r.spec.g1), 1.5, 0.15);
    EXPECT_NEAR(free_parameter(r.spec.g2), 1.8, 0.18);
}

TEST(FitQuantileRegression, ObjectiveMatchesRecomputationAndTraceDescends) {
    const GeneratedDistribution d(BaseDistribution::gaussian(), kReference);
    const auto data = d.sample(5000, 77);
    FitConfig cfg;
    const auto r = fit_quantile_regression(d.base(), data, cfg);
    EXPECT_NEAR(r.objective, pinball_objective(r.spec, d.base(), data, cfg.grid), 1e-12);
    ASSERT_GE(r.trace.size(), 2u);
    for (std::size_t i = 1; i < r.trace.size(); ++i)
        EXPECT_LE(r.trace[i].objective, r.trace[i - 1].objective);
    EXPECT_LE(r.iterations, cfg.max_iters);
    EXPECT_LE(r.objective, r.trace.front().objective);
}

TEST(FitQuantileRegression, GaussianDataKeepsParametersNearOne) {
    // u = v = 1 sits on the boundary, so the estimates scatter above it;
    // 2e5 points keep every seed well inside 1.1.
    for (std::uint64_t seed = 31; seed < 39; ++seed) {
        const auto data = BaseDistribution::gaussian().sample(200000, seed);
        const auto r = fit_quantile_regression(BaseDistribution::gaussian(), data, FitConfig{});
        EXPECT_LE(free_parameter(r.spec.g1), 1.1) << "seed " << seed;
        EXPECT_LE(free_parameter(r.spec.g2), 1.1) << "seed " << seed;
    }
}

TEST(FitQuantileRegression, GridRefinementIsStable) {
    const GeneratedDistribution d(BaseDistribution::gaussian(), kReference);
    const auto data = d.sample(50000, 11);
    FitConfig fine, coarse;
    coarse.grid = QuantileGrid::evenly_spaced(49);
    const auto a = fit_quantile_regression(d.base(), data, fine);
    const auto b = fit_quantile_regression(d.base(), data, coarse);
    auto rel = [](double x, double y) { return std::fabs(x - y) / std::fabs(y); };
    EXPECT_LT(rel(b.spec.mu, a.spec.mu), 0.05);
    EXPECT_LT(rel(b.spec.sigma, a.spec.sigma), 0.05);
    EXPECT_LT(rel(free_parameter(b.spec.g1), free_parameter(a.spec.g1)), 0.05);
    EXPECT_LT(rel(free_parameter(b.spec.g2), free_parameter(a.spec.g2)), 0.05);
}

TEST(FitQuantileRegression, DeterministicForFixedSeed) {
    const auto data = GeneratedDistribution(BaseDistribution::gaussian(), kReference).sample(3000, 5);
    FitConfig cfg;
    cfg.seed = 42;
    const auto a = fit_quantile_regression(BaseDistribution::gaussian(), data, cfg);
    const auto b = fit_quantile_regression(BaseDistribution::gaussian(), data, cfg);
    EXPECT_EQ(a, b);
}

TEST(FitQuantileRegression, FitsOtherFamilies) {
    const GeneratedDistribution d(BaseDistribution::exponential(),
                                  TransformSpec{0.5, 2.0, ExpM1OverX{0.3}, ZeroG{}});
    const auto data = d.sample(20000, 6);
    FitConfig cfg;
    cfg.shape = TransformSpec{0.0, 1.0, ExpM1OverX{0.1}, ZeroG{}};
    const auto r = fit_quantile_regression(d.base(), data, cfg);
    EXPECT_NEAR(r.spec.mu, 0.5, 0.05);
    EXPECT_NEAR(r.spec.sigma, 2.0, 0.2);
    EXPECT_NEAR(free_parameter(r.spec.g1), 0.3, 0.03);
}

TEST(FitQuantileRegression, RejectsTooFewObservations) {
    const std::vector<double> data(39, 1.0);
    EXPECT_THROW(fit_quantile_regression(BaseDistribution::gaussian(), data, FitConfig{}),
                 DomainError);
}

TEST(FitQuantileRegression, ZeroSpreadIsAnInitializationError) {
    std::vector<double> data(100, 3.0);
    data[0] = 2.0;
    data[99] = 4.0;
    try {
        fit_quantile_regression(BaseDistribution::gaussian(), data, FitConfig{});
        FAIL() << "expected InitializationError";
    } catch (const InitializationError& e) {
        EXPECT_EQ(e.parameter(), "sigma");
    }
}

TEST(FitQuantileRegression, OverflowingStartNamesParameter) {
    const auto data = BaseDistribution::gaussian().sample(1000, 1);
    FitConfig cfg;
    cfg.shape = pgml_spec(0.0, 1.0, 1.05, 1e200, 4.0);
    try {
        fit_quantile_regression(BaseDistribution::gaussian(), data, cfg);
        FAIL() << "expected InitializationError";
    } catch (const InitializationError& e) {
        EXPECT_EQ(e.parameter(), "v");
    }
}

TEST(FitQuantileRegression, RejectsInvalidConfig) {
    const auto data = BaseDistribution::gaussian().sample(1000, 1);
    FitConfig cfg;
    cfg.max_iters = 0;
    EXPECT_THROW(fit_quantile_regression(BaseDistribution::gaussian(), data, cfg), DomainError);
    cfg = FitConfig{};
    cfg.tolerance = 0.0;
    EXPECT_THROW(fit_quantile_regression(BaseDistribution::gaussian(), data, cfg), DomainError);
    auto bad = data;
    bad[3] = NAN;
    EXPECT_THROW(fit_quantile_regression(BaseDistribution::gaussian(), bad, FitConfig{}),
                 DomainError);
}
