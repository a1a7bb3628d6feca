#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "heavytail/baselines.hpp"
#include "heavytail/fit.hpp"
#include "heavytail/gof.hpp"
#include "heavytail/rng.hpp"
#include "heavytail/special.hpp"
#include "oracles.hpp"

using namespace heavytail;

namespace {

// 200 points: a skewed mix with a duplicated block so some values sit on
// bin edges' neighbourhoods.
std::vector<double> fixture200() {
    auto v = BaseDistribution::student_t(4.0).sample(180, 77);
    for (int i = 0; i < 20; ++i) v.push_back(0.25 * (i % 5));
    return v;
}


} // namespace

TEST(ChiSquare, MatchesBruteForceRecountBitForBit) {
    const auto data = fixture200();
    // Deliberately miscalibrated Normal.
    const BaselineModel model(NormalModel{0.4, 0.7});
    const auto cdf = [&](double y) { return model.cdf(y); };
    for (std::size_t b : {2u, 5u, 10u, 17u}) {
        const auto r = chi_square(data, cdf, 2, 0.05, b);
        const auto o = oracle::brute_force_chi_square(data, cdf, 0.05, b);
        EXPECT_EQ(r.edges, o.edges);
        EXPECT_EQ(r.observed, o.observed);
        EXPECT_EQ(r.expected, o.expected);
        EXPECT_EQ(r.statistic, o.statistic) << "b = " << b;
        EXPECT_EQ(r.dof, static_cast<int>(b) - 2 + 1);
        EXPECT_EQ(r.observed.size(), b + 2);
        std::size_t total = 0;
        for (auto c : r.observed) total += c;
        EXPECT_EQ(total, data.size());
    }
}

TEST(ChiSquare, DofFollowsBMinusPPlusOne) {
    const auto data = fixture200();
    const auto cdf = [](double y) { return special::normal_cdf(y); };
    EXPECT_EQ(chi_square(data, cdf, 0).dof, 11);
    EXPECT_EQ(chi_square(data, cdf, 4).dof, 7);
    EXPECT_EQ(chi_square(data, cdf, 3, 0.05, 20).dof, 18);
    EXPECT_THROW(chi_square(data, cdf, 12, 0.05, 10), DomainError);
}

TEST(ChiSquare, PerfectFitLimitIsNearZero) {
    const std::size_t n = 100000;
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = special::normal_quantile((i + 0.5) / n);
    const auto r = chi_square(data, [](double y) { return special::normal_cdf(y); }, 2);
    EXPECT_GE(r.statistic, 0.0);
    EXPECT_LT(r.statistic, 1e-2);
}

TEST(ChiSquare, NullCalibration) {
    int rejected = 0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto data = BaseDistribution::gaussian().sample(10000, 1000 + seed);
        const auto r = chi_square(data, [](double y) { return special::normal_cdf(y); }, 0);
        if (r.pvalue < 0.05) ++rejected;
    }
    EXPECT_NEAR(rejected / 200.0, 0.05, 0.04);
}

TEST(ChiSquare, AffineRelabelingInvariance) {
    const auto data = fixture200();
    const BaselineModel model(NormalModel{0.1, 1.3});
    const auto base = chi_square(data, [&](double y) { return model.cdf(y); }, 2);
    std::vector<double> moved;
    for (double y : data) moved.push_back(3.0 + 2.5 * y);
    const BaselineModel moved_model(NormalModel{3.0 + 2.5 * 0.1, 2.5 * 1.3});
    const auto r = chi_square(moved, [&](double y) { return moved_model.cdf(y); }, 2);
    EXPECT_EQ(r.observed, base.observed);
    EXPECT_NEAR(r.statistic, base.statistic, 1e-9 * base.statistic);
}

TEST(ChiSquare, Errors) {
    const auto cdf = [](double y) { return special::normal_cdf(y); };
    EXPECT_THROW(chi_square(std::vector<double>(49, 0.0), cdf, 2), DomainError);
    EXPECT_THROW(chi_square(fixture200(), cdf, 2, 0.05, 1), DomainError);
    // A model with no mass beyond 3 empties the upper tail bins.
    std::vector<double> data;
    for (int i = 0; i < 200; ++i) data.push_back(10.0 + i);
    try {
        chi_square(data, cdf, 2);
        FAIL() << "expected BinDegeneracyError";
    } catch (const BinDegeneracyError& e) {
        EXPECT_NE(std::string(e.what()).find("bin"), std::string::npos);
        EXPECT_GE(e.bin(), 1u);
    }
}

TEST(ChiSquareUpperTail, WilsonHilfertyAccuracy) {
    // Exact chi-square upper tails (scipy.stats.chi2.sf).
    EXPECT_NEAR(chi_square_upper_tail(18.307038053275146, 10), 0.05, 1e-3);
    EXPECT_NEAR(chi_square_upper_tail(3.940299136119253, 10), 0.95, 1e-3);
    EXPECT_NEAR(chi_square_upper_tail(7.814727903251178, 3), 0.05, 1e-3);
    EXPECT_EQ(chi_square_upper_tail(0.0, 5), 1.0);
    EXPECT_THROW(chi_square_upper_tail(1.0, 0), DomainError);
}

TEST(KsMeasure, SinglePoint) {
    const auto r = ks_measure(std::vector<double>{0.0}, [](double) { return 0.5; });
    EXPECT_EQ(r.d_plus, 0.5);
    EXPECT_EQ(r.d_minus, 0.5);
    EXPECT_EQ(r.m_ks, 0.5);
    EXPECT_EQ(kuiper_measure(std::vector<double>{0.0}, [](double) { return 0.5; }), 1.0);
    EXPECT_THROW(ks_measure(std::vector<double>{}, [](double) { return 0.5; }), DomainError);
}

TEST(KsMeasure, EvenlySpacedQuantilesBound) {
    for (std::size_t n : {5u, 50u, 999u}) {
        std::vector<double> data;
        for (std::size_t i = 1; i <= n; ++i) data.push_back(special::normal_quantile(i / (n + 1.0)));
        const auto r = ks_measure(data, [](double y) { return special::normal_cdf(y); });
        EXPECT_LE(r.m_ks, 1.0 / (n + 1.0) + 1e-12);
    }
}

TEST(KsMeasure, DetectsMismatchAndMatchesIndexConventions) {
    // F(y) = y on [0, 1]; data {0.1, 0.2, 0.9}.
    const std::vector<double> data{0.9, 0.1, 0.2};
    const auto r = ks_measure(data, [](double y) { return y; });
    EXPECT_DOUBLE_EQ(r.d_plus, 2.0 / 3.0 - 0.2);
    EXPECT_DOUBLE_EQ(r.d_minus, 0.9 - 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.m_ks, 2.0 / 3.0 - 0.2);
}

TEST(KsMeasure, SamplesFromModelMostlyBelowCriticalValue) {
    const GeneratedDistribution d(BaseDistribution::gaussian(), pgml_spec(-1, 0.5, 1.5, 1.8, 4));
    int below = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto data = d.sample(5000, 500 + seed);
        if (ks_measure(data, [&](double y) { return d.cdf(y); }).m_ks < 1.63 / std::sqrt(5000.0))
            ++below;
    }
    EXPECT_GE(below, 95);
}

TEST(KuiperMeasure, AtLeastKsOnRandomData) {
    Xoshiro256 gen(3);
    for (int t = 0; t < 200; ++t) {
        const auto data = BaseDistribution::student_t(3.0).sample(1 + t, 900 + t);
        const double shift = gen.uniform() - 0.5;
        const auto cdf = [&](double y) { return special::normal_cdf(y - shift); };
        const auto ks = ks_measure(data, cdf);
        EXPECT_GE(ks.m_ks, 0.0);
        EXPECT_GE(kuiper_measure(data, cdf), ks.m_ks);
    }
}

TEST(KuiperMeasure, ReflectionSymmetry) {
    const double c = 0.7;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto data = BaseDistribution::student_t(5.0).sample(400, seed);
        std::vector<double> shifted, reflected;
        for (double y : data) {
            shifted.push_back(y + c + 0.1);
            reflected.push_back(2 * c - (y + c + 0.1));
        }
        // Symmetric model about c; reflecting about c maps it to itself.
        const BaselineModel model(LaplaceModel{c, 1.2});
        const auto cdf = [&](double y) { return model.cdf(y); };
        EXPECT_NEAR(kuiper_measure(shifted, cdf), kuiper_measure(reflected, cdf), 1e-12);
        // D+ and D- swap under reflection.
        const auto a = ks_measure(shifted, cdf), b = ks_measure(reflected, cdf);
        EXPECT_NEAR(a.d_plus, b.d_minus, 1e-12);
        EXPECT_NEAR(a.d_minus, b.d_plus, 1e-12);
    }
}

TEST(KsMeasure, LocationScaleInvariance) {
    const auto data = BaseDistribution::student_t(3.0).sample(2000, 41);
    const BaselineModel m(StudentTModel{0.2, 0.9, 3.5});
    const auto r = ks_measure(data, [&](double y) { return m.cdf(y); });
    const double k = kuiper_measure(data, [&](double y) { return m.cdf(y); });
    std::vector<double> moved;
    for (double y : data) moved.push_back(-4.0 + 0.3 * y);
    const BaselineModel mm(StudentTModel{-4.0 + 0.3 * 0.2, 0.3 * 0.9, 3.5});
    EXPECT_NEAR(ks_measure(moved, [&](double y) { return mm.cdf(y); }).m_ks, r.m_ks, 1e-12);
    EXPECT_NEAR(kuiper_measure(moved, [&](double y) { return mm.cdf(y); }), k, 1e-12);
}

TEST(GofCompare, IdenticalModelsTieByName) {
    const auto data = BaseDistribution::gaussian().sample(1000, 5);
    auto a = make_candidate(BaselineModel(NormalModel{0, 1}));
    auto b = a;
    a.name = "beta";
    b.name = "alpha";
    const auto reports = gof_compare(data, {a, b});
    ASSERT_EQ(reports.size(), 2u);
    EXPECT_EQ(reports[0].model_name, "alpha");
    EXPECT_EQ(reports[1].model_name, "beta");
    for (const auto& r : reports) {
        EXPECT_EQ(r.chi2, reports[0].chi2);
        EXPECT_EQ(r.m_ks, reports[0].m_ks);
        EXPECT_EQ(r.m_kuiper, reports[0].m_kuiper);
        EXPECT_EQ(r.nll, reports[0].nll);
    }
    EXPECT_EQ(reports[0].rank_ks, 1u);
    EXPECT_EQ(reports[1].rank_ks, 2u);
    EXPECT_EQ(reports[0].rank_nll, 1u);
    EXPECT_EQ(reports, gof_compare(data, {a, b}));
}

TEST(GofCompare, FailingModelBecomesEntry) {
    const auto data = BaseDistribution::gaussian().sample(500, 6);
    auto broken = make_candidate(BaselineModel(NormalModel{0, 1}));
    broken.name = "broken";
    broken.cdf = [](double) -> double { throw DomainError("no cdf here"); };
    const auto reports =
        gof_compare(data, {broken, make_candidate(BaselineModel(NormalModel{0, 1}))});
    ASSERT_EQ(reports.size(), 2u);
    EXPECT_TRUE(reports[0].ok);
    EXPECT_FALSE(reports[1].ok);
    EXPECT_EQ(reports[1].model_name, "broken");
    EXPECT_EQ(reports[1].error, "no cdf here");
    EXPECT_EQ(reports[1].rank_ks, 0u);
    EXPECT_EQ(reports[0].rank_ks, 1u);
    EXPECT_THROW(gof_compare(data, {broken}), DomainError);
}

TEST(GofCompare, ReportInvariants) {
    const auto data = BaseDistribution::student_t(3.0).sample(3000, 8);
    std::vector<CandidateModel> models;
    for (auto k : {BaselineKind::Normal, BaselineKind::Laplace, BaselineKind::StudentT})
        models.push_back(make_candidate(mle_fit(k, data)));
    for (const auto& r : gof_compare(data, models)) {
        EXPECT_GE(r.chi2, 0.0);
        EXPECT_GE(r.m_ks, 0.0);
        EXPECT_GE(r.m_kuiper, r.m_ks);
        EXPECT_EQ(r.chi2_dof, 10 - static_cast<int>(r.parameters) + 1);
        EXPECT_EQ(r.n, data.size());
    }
}

TEST(GofCompare, PgmlBeatsNormalOnHeavyTails) {
    const auto data = BaseDistribution::student_t(3.0).sample(5000, 12);
    const auto fit = fit_quantile_regression(BaseDistribution::gaussian(), data, FitConfig{});
    const GeneratedDistribution pgml(BaseDistribution::gaussian(), fit.spec);
    const auto reports = gof_compare(
        data, {make_candidate(pgml), make_candidate(mle_fit(BaselineKind::Normal, data))});
    for (const auto& r : reports)
        EXPECT_EQ(r.rank_ks, r.model_name == "pgml" ? 1u : 2u) << r.model_name;
}

TEST(GofCompare, NormalHoldsUpOnGaussianData) {
    FitConfig cfg;
    cfg.restarts = 1;
    int normal_at_least_as_good = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto data = BaseDistribution::gaussian().sample(2000, 3000 + seed);
        const auto fit = fit_quantile_regression(BaseDistribution::gaussian(), data, cfg);
        const GeneratedDistribution pgml(BaseDistribution::gaussian(), fit.spec);
        const auto reports = gof_compare(
            data, {make_candidate(pgml), make_candidate(mle_fit(BaselineKind::Normal, data))});
        for (const auto& r : reports)
            if (r.model_name == "normal" && r.rank_chi2 == 1) ++normal_at_least_as_good;
    }
    EXPECT_GT(normal_at_least_as_good, 50);
}
