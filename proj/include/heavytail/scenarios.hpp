#pragma once

// Built-in tail verification scenarios behind `heavytail tailcheck`.
//
//   prop4_t3        t(3) base, g1 = 1{x>=0} x / 4: Hill index vs 3 / (1 + 1)
//   prop5_exp       exponential base, g1 = (e^{x/2} - 1) / x: Hill index vs 2
//   prop6_gaussian  Gaussian base, u = v = 1.5, A = 4: survival ratio against
//                   N(mu, sigma^2 (2/A + 1)^2), deterministic

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "base_dist.hpp"
#include "errors.hpp"
#include "generated.hpp"
#include "special.hpp"
#include "tail.hpp"
#include "transform.hpp"

namespace heavytail {

struct TailScenario {
    std::string name;
    BaseDistribution base = BaseDistribution::gaussian();
    TransformSpec spec;
    /// Hill sample size; 0 for deterministic scenarios.
    std::size_t samples = 0;
    /// Allowed relative error of the Hill estimate.
    double hill_tolerance = 0.0;
};

inline constexpr std::array<std::string_view, 3> kScenarioNames = {"prop4_t3", "prop5_exp",
                                                                   "prop6_gaussian"};

inline std::string scenario_list() {
    std::string s;
    for (auto n : kScenarioNames) {
        if (!s.empty()) s += ", ";
        s += n;
    }
    return s;
}

inline TailScenario make_scenario(std::string_view name) {
    if (name == "prop4_t3")
        return {"prop4_t3", BaseDistribution::student_t(3.0),
                TransformSpec{0.0, 1.0, IndicatorPower{1.0, 4.0}, ZeroG{}}, 1000000, 0.15};
    if (name == "prop5_exp")
        return {"prop5_exp", BaseDistribution::exponential(),
                TransformSpec{0.0, 1.0, ExpM1OverX{0.5}, ZeroG{}}, 1000000, 0.20};
    if (name == "prop6_gaussian")
        return {"prop6_gaussian", BaseDistribution::gaussian(), pgml_spec(0.0, 1.0, 1.5, 1.5, 4.0),
                0, 0.0};
    throw DomainError("unknown scenario '" + std::string(name) + "' (valid: " + scenario_list() +
                      ")");
}

inline bool scenario_needs_seed(const TailScenario& s) { return s.samples > 0; }

struct ScenarioOutcome {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::size_t samples = 0;
    TailReport report;
    /// Hill estimate relative to the predicted index; NaN when no Hill run.
    double relative_error = std::numeric_limits<double>::quiet_NaN();
    bool hill_within_tolerance = false;
    /// The x from which the ratio curve must increase (the 99th percentile).
    double monotone_from = 0.0;
    bool ratio_increasing = false;
    double max_ratio = 0.0;
    bool passed = false;
};

/// Survival ratio of the generated distribution over the scale-matched
/// reference: F2 = generated, F1 = Gaussian N(mu, (sigma (g1(0) + g2(0) + 1))^2)
/// for a Gaussian base, the base itself otherwise. The grid runs from the
/// median to `x_max` in `points` steps and stops where F1's survival underflows.
inline RatioCurve generated_ratio_curve(const GeneratedDistribution& d, double x_max,
                                        std::size_t points) {
    const auto& s = d.spec();
    const double x0 = d.quantile(0.5);
    std::vector<double> xs(points);
    for (std::size_t i = 0; i < points; ++i)
        xs[i] = x0 + (x_max - x0) * static_cast<double>(i) / static_cast<double>(points - 1);
    const auto heavy = [&d](double y) { return d.sf(y); };
    if (d.base().is_gaussian()) {
        const double width = g_value(s.g1, 0.0) + g_value(s.g2, 0.0) + 1.0;
        return survival_ratio_curve(heavy, [](double z) { return special::normal_sf(z); }, s.mu,
                                    s.sigma * width, xs);
    }
    const auto& base = d.base();
    return survival_ratio_curve(heavy, [&base](double z) { return base.sf(z); }, s.mu, s.sigma, xs);
}

/// Runs a scenario. Randomized scenarios need a seed.
inline ScenarioOutcome run_scenario(const TailScenario& sc, std::optional<std::uint64_t> seed) {
    if (scenario_needs_seed(sc) && !seed)
        throw DomainError("scenario '" + sc.name + "' is randomized and needs a seed");
    const GeneratedDistribution d(sc.base, sc.spec);

    ScenarioOutcome out;
    out.scenario = sc.name;
    out.samples = sc.samples;
    out.report.predicted_index = predicted_index(sc.base, sc.spec.g1);
    out.monotone_from = d.quantile(0.99);

    if (sc.samples > 0) {
        out.seed = seed;
        const auto draws = d.sample(sc.samples, *seed);
        out.report.k_used = default_hill_k(draws.size());
        out.report.hill_estimate = hill_estimator(draws, out.report.k_used);
        out.report.hill_stability = hill_stability(draws);
        if (out.report.predicted_index) {
            const double p = *out.report.predicted_index;
            out.relative_error = std::fabs(out.report.hill_estimate - p) / p;
            out.hill_within_tolerance = out.relative_error <= sc.hill_tolerance;
        }
    } else {
        out.report.hill_estimate = std::numeric_limits<double>::quiet_NaN();
    }

    // Ratio grid out to the 1 - 1e-15 quantile (far enough for underflow of
    // the Gaussian reference in the deterministic scenario).
    const double x_max = sc.samples > 0 ? d.quantile(1.0 - 1e-12) : 4.0 * d.quantile(1.0 - 1e-15);
    out.report.ratio_curve = generated_ratio_curve(d, x_max, 2000);
    out.ratio_increasing = ratio_increasing_beyond(out.report.ratio_curve, out.monotone_from);
    out.max_ratio = max_ratio(out.report.ratio_curve);

    out.passed = sc.samples > 0 ? out.hill_within_tolerance
                                : out.ratio_increasing && out.max_ratio > 1e3;
    return out;
}

} // namespace heavytail
