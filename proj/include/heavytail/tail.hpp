#pragma once

// Tail-heaviness machinery: Hill estimation, closed-form predicted tail
// indices for covered (base, g1) pairs, survival-ratio curves, and the
// constructive transform that gives a base distribution the right tail of a
// heavier target.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "base_dist.hpp"
#include "errors.hpp"
#include "generated.hpp"
#include "transform.hpp"

namespace heavytail {

// ---------------------------------------------------------------------------
// Hill estimator

/// 1 / mean(log(X_(i) / X_(k+1))), i = 1..k, over the k largest order
/// statistics. Requires 10 <= k < n/2 and X_(k+1) > 0.
inline double hill_estimator(std::span<const double> samples, std::size_t k) {
    const std::size_t n = samples.size();
    if (k < 10) throw DomainError("hill_estimator: k must be at least 10");
    if (2 * k >= n) throw DomainError("hill_estimator: k must be below n/2");
    std::vector<double> v(samples.begin(), samples.end());
    // Top k+1 in descending order.
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(),
                     std::greater<>());
    std::sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), std::greater<>());
    const double threshold = v[k];
    if (!(threshold > 0.0))
        throw DomainError("hill_estimator: top order statistics must be strictly positive");
    const double log_threshold = std::log(threshold);
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += std::log(v[i]) - log_threshold;
    return static_cast<double>(k) / s;
}

/// floor(sqrt(n)).
inline std::size_t default_hill_k(std::size_t n) {
    return static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
}

struct HillPoint {
    std::size_t k;
    double estimate;
    bool operator==(const HillPoint&) const = default;
};

/// Estimates at k = floor(n^0.4), floor(n^0.5), floor(n^0.6); k values that
/// violate the estimator's preconditions are skipped.
inline std::vector<HillPoint> hill_stability(std::span<const double> samples) {
    std::vector<HillPoint> out;
    const double n = static_cast<double>(samples.size());
    for (double e : {0.4, 0.5, 0.6}) {
        const auto k = static_cast<std::size_t>(std::floor(std::pow(n, e)));
        try {
            out.push_back({k, hill_estimator(samples, k)});
        } catch (const DomainError&) {
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tail classes and predicted indices

struct RegularlyVarying {
    /// Index of regular variation of the survival function, rho < 0.
    double rho;
};
struct RapidlyDecaying {};
struct UnknownTail {};

using TailClass = std::variant<RegularlyVarying, RapidlyDecaying, UnknownTail>;

/// Student's t is regularly varying with rho = -dof; Gaussian and
/// exponential survivals satisfy sf(t x)/sf(x) -> 0 for t > 1.
inline TailClass classify_base_tail(const BaseDistribution& base) {
    if (base.is_student_t()) return RegularlyVarying{-base.dof()};
    return RapidlyDecaying{};
}

/// True when g1 grows without bound.
inline bool g_unbounded(const GFamily& g) {
    struct Visitor {
        bool operator()(const PgmlUp& f) const { return f.u > 1.0; }
        bool operator()(const ExpM1OverX& f) const { return f.u > 0.0; }
        bool operator()(const IndicatorPower&) const { return true; }
        bool operator()(const Tabulated& t) const { return t.dg.back() > 0.0; }
        bool operator()(const PgmlDown&) const { return false; }
        bool operator()(const ZeroG&) const { return false; }
    };
    return std::visit(Visitor{}, g);
}

/// Whether the generated right tail is predicted strictly heavier than the
/// base's: g1 unbounded and the base tail regularly varying or rapidly
/// decaying.
inline bool predicts_heavier_right_tail(const BaseDistribution& base, const GFamily& g1) {
    return g_unbounded(g1) && !std::holds_alternative<UnknownTail>(classify_base_tail(base));
}

/// Right-tail index of f(F^{-1}(alpha)) where a closed form covers the pair:
///   t(nu) with g1 ~ x^{nu'}              -> nu / (1 + nu')
///   t(nu) with bounded g1                -> nu
///   exponential with g1 ~ x^{-1} e^{u x} -> 1 / u
/// Empty otherwise.
inline std::optional<double> predicted_index(const BaseDistribution& base, const GFamily& g1) {
    if (base.is_student_t()) {
        const double nu = base.dof();
        if (auto* p = std::get_if<IndicatorPower>(&g1)) return nu / (1.0 + p->u);
        if (!g_unbounded(g1) && !std::holds_alternative<Tabulated>(g1)) return nu;
        return std::nullopt;
    }
    if (base.is_exponential()) {
        if (auto* e = std::get_if<ExpM1OverX>(&g1); e && e->u > 0.0) return 1.0 / e->u;
        return std::nullopt;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Survival ratio curves

struct RatioPoint {
    double x;
    double ratio;
    bool operator==(const RatioPoint&) const = default;
};

struct RatioCurve {
    std::vector<RatioPoint> points;
    /// Set when the light survival underflowed before the end of the grid;
    /// points stop at the last representable one.
    bool truncated = false;
    bool operator==(const RatioCurve&) const = default;
};

/// heavy_sf(x) / light_sf((x - mu) / sigma) along an increasing grid.
inline RatioCurve survival_ratio_curve(const std::function<double(double)>& heavy_sf,
                                       const std::function<double(double)>& light_sf, double mu,
                                       double sigma, std::span<const double> xs) {
    if (!(sigma > 0.0)) throw DomainError("survival_ratio_curve: sigma must be positive");
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i] > xs[i - 1])) throw DomainError("survival_ratio_curve: grid must increase");
    RatioCurve curve;
    curve.points.reserve(xs.size());
    for (double x : xs) {
        const double light = light_sf((x - mu) / sigma);
        if (!(light > 0.0) || !std::isnormal(light)) {
            curve.truncated = true;
            break;
        }
        const double heavy = heavy_sf(x);
        curve.points.push_back({x, heavy / light});
    }
    return curve;
}

/// True when the ratio strictly increases over all points with x >= from.
inline bool ratio_increasing_beyond(const RatioCurve& curve, double from) {
    std::optional<double> prev;
    for (const auto& p : curve.points) {
        if (p.x < from) continue;
        if (prev && !(p.ratio > *prev)) return false;
        prev = p.ratio;
    }
    return true;
}

inline double max_ratio(const RatioCurve& curve) {
    double m = 0.0;
    for (const auto& p : curve.points) m = std::max(m, p.ratio);
    return m;
}

// ---------------------------------------------------------------------------
// Tail-matching construction

/// loc + scale * X with X ~ base; the target F2 of match_tail_transform.
struct LocationScale {
    BaseDistribution base = BaseDistribution::gaussian();
    double loc = 0.0;
    double scale = 1.0;

    double cdf(double y) const { return base.cdf((y - loc) / scale); }
    double sf(double y) const { return base.sf((y - loc) / scale); }
    double pdf(double y) const { return base.pdf((y - loc) / scale) / scale; }
    double quantile(double a) const { return loc + scale * base.quantile(a); }
    double isf(double p) const { return loc + scale * base.isf(p); }
};

struct MatchOptions {
    double mu = 0.0;
    double sigma = 1.0;
    /// Knots are spaced evenly in log F1-survival between the splice point
    /// and this survival level.
    double min_survival = 1e-17;
    std::size_t knots = 600;
};

/// Builds g1 = (h(x) - mu) / (sigma x) - 1 with h = F2^{-1}(F1(x)) for
/// x >= splice, joined to 0 by a monotone cubic over [splice - 1, splice],
/// and g2 = 0. h is tabulated with exact slopes h' = p1(x) / p2(h(x)) and
/// interpolated by cubic Hermite segments. Throws ConstructionError (with
/// the offending x) when splice <= 0, g1(splice) < 0, g1 decreases on the
/// grid, or the result fails validation.
inline TransformSpec match_tail_transform(const BaseDistribution& f1, const LocationScale& f2,
                                          double splice, const MatchOptions& opt = {}) {
    if (!(splice > 0.0))
        throw ConstructionError("match_tail_transform: splice point must be positive", splice);
    if (!(opt.sigma > 0.0)) throw DomainError("match_tail_transform: sigma must be positive");
    if (opt.knots < 2) throw DomainError("match_tail_transform: need at least 2 knots");

    const double log_p_lo = std::log(f1.sf(splice));
    const double log_p_hi = std::log(opt.min_survival);
    if (!(log_p_hi < log_p_lo))
        throw ConstructionError("match_tail_transform: splice point beyond the knot range", splice);

    Tabulated t;
    t.x.reserve(opt.knots + 1);
    t.g.reserve(opt.knots + 1);
    t.dg.reserve(opt.knots + 1);

    double prev_x = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < opt.knots; ++i) {
        double x;
        if (i == 0) {
            x = splice;
        } else {
            const double lp = log_p_lo + (log_p_hi - log_p_lo) * static_cast<double>(i) /
                                             static_cast<double>(opt.knots - 1);
            x = f1.isf(std::exp(lp));
        }
        if (!(x > prev_x)) continue;
        prev_x = x;
        const double h = f2.isf(f1.sf(x));
        const double dh = std::exp(f1.log_pdf(x) - std::log(f2.pdf(h)));
        const double g = (h - opt.mu) / (opt.sigma * x) - 1.0;
        const double dg = (dh * x - (h - opt.mu)) / (opt.sigma * x * x);
        if (!std::isfinite(g) || !std::isfinite(dg))
            throw ConstructionError("match_tail_transform: non-finite g at knot", x);
        t.x.push_back(x);
        t.g.push_back(g);
        t.dg.push_back(dg);
    }

    if (t.g.front() < 0.0)
        throw ConstructionError(
            "match_tail_transform: target quantiles fall below the line at the splice point",
            t.x.front());
    for (std::size_t i = 1; i < t.g.size(); ++i) {
        const double tol = 1e-12 * std::max(1.0, std::fabs(t.g[i]));
        if (t.g[i] < t.g[i - 1] - tol || t.dg[i] < -tol)
            throw ConstructionError(
                "match_tail_transform: F2^{-1}(F1(x))/x is not nondecreasing", t.x[i]);
    }
    // Clean round-off in the slopes of an (effectively) constant g.
    for (double& d : t.dg) d = std::max(d, 0.0);

    // Monotone cubic from (splice - 1, 0, 0) up to (splice, g_s, m_s); the
    // end slope is capped at 3 g_s so the segment cannot overshoot.
    const double g_s = t.g.front();
    t.dg.front() = std::min(t.dg.front(), 3.0 * g_s);
    t.x.insert(t.x.begin(), splice - 1.0);
    t.g.insert(t.g.begin(), 0.0);
    t.dg.insert(t.dg.begin(), 0.0);

    TransformSpec spec{opt.mu, opt.sigma, std::move(t), ZeroG{}};
    const auto report = validate_transform(spec);
    if (!report.passed)
        throw ConstructionError("match_tail_transform: " + report.message,
                                report.witness.value_or(splice));
    return spec;
}

// ---------------------------------------------------------------------------
// Reports

struct TailReport {
    double hill_estimate = 0.0;
    std::size_t k_used = 0;
    std::optional<double> predicted_index;
    RatioCurve ratio_curve;
    std::vector<HillPoint> hill_stability;
    bool operator==(const TailReport&) const = default;
};

} // namespace heavytail
