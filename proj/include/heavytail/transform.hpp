#pragma once

// The monotone transform f(x) = mu + sigma * x * (g1(x) + g2(x) + 1).
//
// g1 bends the right side of the line mu + sigma*x upward, g2 bends the left
// side downward. Both are drawn from a closed set of built-in families so
// that validity can be certified in closed form and parameter gradients are
// analytic.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"

namespace heavytail {

/// g = 0.
struct ZeroG {
    bool operator==(const ZeroG&) const = default;
};

/// g(x) = u^x / A, right side. u >= 1, A > 0.
struct PgmlUp {
    double u = 1.0;
    double A = 4.0;
    bool operator==(const PgmlUp&) const = default;
};

/// g(x) = v^{-x} / A, left side. v >= 1, A > 0.
struct PgmlDown {
    double v = 1.0;
    double A = 4.0;
    bool operator==(const PgmlDown&) const = default;
};

/// g(x) = (e^{ux} - 1) / x with g(0) = u, right side. u >= 0.
struct ExpM1OverX {
    double u = 0.0;
    bool operator==(const ExpM1OverX&) const = default;
};

/// g(x) = 1{x >= 0} x^u / A, right side. u >= 1, A > 0.
struct IndicatorPower {
    double u = 1.0;
    double A = 4.0;
    bool operator==(const IndicatorPower&) const = default;
};

/// Piecewise cubic Hermite g through knots (x, g, dg). Constant g.front()
/// to the left of the first knot, linear with slope dg.back() to the right
/// of the last one. No free parameters.
struct Tabulated {
    std::vector<double> x;
    std::vector<double> g;
    std::vector<double> dg;
    bool operator==(const Tabulated&) const = default;
};

using GFamily = std::variant<ZeroG, PgmlUp, PgmlDown, ExpM1OverX, IndicatorPower, Tabulated>;

struct TransformSpec {
    double mu = 0.0;
    double sigma = 1.0;
    GFamily g1 = ZeroG{};
    GFamily g2 = ZeroG{};
    bool operator==(const TransformSpec&) const = default;
};

/// Four-parameter instance: g1 = u^x/A, g2 = v^{-x}/A.
inline TransformSpec pgml_spec(double mu, double sigma, double u, double v, double A = 4.0) {
    return TransformSpec{mu, sigma, PgmlUp{u, A}, PgmlDown{v, A}};
}

inline std::string family_name(const GFamily& g) {
    struct Visitor {
        std::string operator()(const ZeroG&) const { return "zero"; }
        std::string operator()(const PgmlUp&) const { return "pgml_up"; }
        std::string operator()(const PgmlDown&) const { return "pgml_down"; }
        std::string operator()(const ExpM1OverX&) const { return "expm1_over_x"; }
        std::string operator()(const IndicatorPower&) const { return "indicator_power"; }
        std::string operator()(const Tabulated&) const { return "tabulated"; }
    };
    return std::visit(Visitor{}, g);
}

namespace detail {

inline constexpr double kMaxExponent = 700.0;

[[noreturn]] inline void throw_overflow(const char* family, double x) {
    throw OverflowError(std::string(family) + ": exponent out of range at x = " +
                            std::to_string(x),
                        x);
}

// e^{x log(base)} with a range check on the exponent.
inline double guarded_pow(double base, double x, const char* family) {
    const double e = x * std::log(base);
    if (std::fabs(e) > kMaxExponent) throw_overflow(family, x);
    return std::exp(e);
}

inline std::size_t hermite_interval(const Tabulated& t, double x) {
    auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
    return static_cast<std::size_t>(std::distance(t.x.begin(), it)) - 1;
}

struct HermiteEval {
    double value;
    double slope;
};

inline HermiteEval hermite(const Tabulated& t, double x) {
    const std::size_t n = t.x.size();
    if (x <= t.x.front()) return {t.g.front(), 0.0};
    if (x >= t.x.back()) return {t.g.back() + t.dg.back() * (x - t.x.back()), t.dg.back()};
    const std::size_t i = hermite_interval(t, x);
    const std::size_t j = std::min(i + 1, n - 1);
    const double h = t.x[j] - t.x[i];
    const double s = (x - t.x[i]) / h;
    const double s2 = s * s;
    const double s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    const double value = h00 * t.g[i] + h10 * h * t.dg[i] + h01 * t.g[j] + h11 * h * t.dg[j];
    const double d00 = (6 * s2 - 6 * s) / h;
    const double d10 = 3 * s2 - 4 * s + 1;
    const double d01 = (-6 * s2 + 6 * s) / h;
    const double d11 = 3 * s2 - 2 * s;
    const double slope = d00 * t.g[i] + d10 * t.dg[i] + d01 * t.g[j] + d11 * t.dg[j];
    return {value, slope};
}

// Values and x-derivatives of each family.
struct GValue {
    double value;
    double slope;
};

inline GValue g_eval(const ZeroG&, double) { return {0.0, 0.0}; }

inline GValue g_eval(const PgmlUp& g, double x) {
    const double p = guarded_pow(g.u, x, "pgml_up") / g.A;
    return {p, p * std::log(g.u)};
}

inline GValue g_eval(const PgmlDown& g, double x) {
    const double p = guarded_pow(g.v, -x, "pgml_down") / g.A;
    return {p, -p * std::log(g.v)};
}

inline GValue g_eval(const ExpM1OverX& g, double x) {
    const double ux = g.u * x;
    if (ux > kMaxExponent) throw_overflow("expm1_over_x", x);
    if (std::fabs(ux) < 1e-4) {
        const double u = g.u;
        // Removable singularity at 0: series in x.
        const double value = u * (1.0 + ux / 2.0 + ux * ux / 6.0 + ux * ux * ux / 24.0);
        const double slope = u * u * (0.5 + ux / 3.0 + ux * ux / 8.0 + ux * ux * ux / 30.0);
        return {value, slope};
    }
    const double em1 = std::expm1(ux);
    const double value = em1 / x;
    const double slope = (g.u * x * (em1 + 1.0) - em1) / (x * x);
    return {value, slope};
}

inline GValue g_eval(const IndicatorPower& g, double x) {
    if (x <= 0.0) return {0.0, 0.0};
    const double lx = std::log(x);
    if (g.u * lx > kMaxExponent) throw_overflow("indicator_power", x);
    const double p = std::exp(g.u * lx) / g.A;
    return {p, g.u * p / x};
}

inline GValue g_eval(const Tabulated& g, double x) {
    const auto h = hermite(g, x);
    return {h.value, h.slope};
}

inline GValue g_eval(const GFamily& g, double x) {
    return std::visit([x](const auto& fam) { return g_eval(fam, x); }, g);
}

} // namespace detail

inline double g_value(const GFamily& g, double x) { return detail::g_eval(g, x).value; }
inline double g_slope(const GFamily& g, double x) { return detail::g_eval(g, x).slope; }

/// f(x). Throws OverflowError when a family exponent leaves range.
inline double eval_f(const TransformSpec& spec, double x) {
    const double g = detail::g_eval(spec.g1, x).value + detail::g_eval(spec.g2, x).value;
    return spec.mu + spec.sigma * x * (g + 1.0);
}

/// f'(x) = sigma (g1 + g2 + 1) + sigma x (g1' + g2').
inline double eval_f_prime(const TransformSpec& spec, double x) {
    const auto a = detail::g_eval(spec.g1, x);
    const auto b = detail::g_eval(spec.g2, x);
    return spec.sigma * (a.value + b.value + 1.0) + spec.sigma * x * (a.slope + b.slope);
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
    bool passed = true;
    std::string message;
    /// Abscissa where a condition fails, if one was found.
    std::optional<double> witness;
    /// Infimum of g + x g' over x != 0 for each side (certified in closed
    /// form for the parametric families, sampled for tabulated ones).
    double g1_minimum = 0.0;
    double g2_minimum = 0.0;
};

namespace detail {

enum class Side { Right, Left };

struct SideCheck {
    bool ok = true;
    std::string message;
    std::optional<double> witness;
    double minimum = 0.0;
};

inline SideCheck fail(std::string msg, std::optional<double> witness = std::nullopt) {
    SideCheck c;
    c.ok = false;
    c.message = std::move(msg);
    c.witness = witness;
    return c;
}

inline bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

inline SideCheck check_family(const ZeroG&, Side) { return {}; }

inline SideCheck check_family(const PgmlUp& g, Side side) {
    if (!finite_positive(g.A)) return fail("pgml_up: A must be positive");
    if (!(std::isfinite(g.u) && g.u >= 1.0)) return fail("pgml_up: u must be >= 1");
    if (side == Side::Left && g.u > 1.0)
        return fail("pgml_up is nondecreasing and cannot be used as g2");
    SideCheck c;
    if (g.u == 1.0) {
        c.minimum = 1.0 / g.A;
        return c;
    }
    // min over x of u^x (1 + x ln u) / A, attained at x = -2 / ln u.
    c.minimum = -std::exp(-2.0) / g.A;
    if (!(c.minimum > -0.5))
        return fail("pgml_up: g + x g' <= -1/2", -2.0 / std::log(g.u));
    return c;
}

inline SideCheck check_family(const PgmlDown& g, Side side) {
    if (!finite_positive(g.A)) return fail("pgml_down: A must be positive");
    if (!(std::isfinite(g.v) && g.v >= 1.0)) return fail("pgml_down: v must be >= 1");
    if (side == Side::Right && g.v > 1.0)
        return fail("pgml_down is nonincreasing and cannot be used as g1");
    SideCheck c;
    if (g.v == 1.0) {
        c.minimum = 1.0 / g.A;
        return c;
    }
    c.minimum = -std::exp(-2.0) / g.A;
    if (!(c.minimum > -0.5))
        return fail("pgml_down: g + x g' <= -1/2", 2.0 / std::log(g.v));
    return c;
}

inline SideCheck check_family(const ExpM1OverX& g, Side side) {
    if (!(std::isfinite(g.u) && g.u >= 0.0)) return fail("expm1_over_x: u must be >= 0");
    if (side == Side::Left && g.u > 0.0)
        return fail("expm1_over_x is nondecreasing and cannot be used as g2");
    // g + x g' = u e^{ux} > 0; infimum 0 as x -> -inf.
    return {};
}

inline SideCheck check_family(const IndicatorPower& g, Side side) {
    if (!finite_positive(g.A)) return fail("indicator_power: A must be positive");
    if (!(std::isfinite(g.u) && g.u >= 1.0)) return fail("indicator_power: u must be >= 1");
    if (side == Side::Left) return fail("indicator_power is nondecreasing and cannot be used as g2");
    // g + x g' = (1 + u) x^u / A >= 0, and 0 for x < 0.
    return {};
}

inline SideCheck check_family(const Tabulated& t, Side side) {
    const std::size_t n = t.x.size();
    if (n < 2 || t.g.size() != n || t.dg.size() != n)
        return fail("tabulated: need at least two knots with matching g and dg");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(t.x[i]) || !std::isfinite(t.g[i]) || !std::isfinite(t.dg[i]))
            return fail("tabulated: non-finite knot data", t.x[i]);
        if (i > 0 && !(t.x[i] > t.x[i - 1])) return fail("tabulated: knots not increasing", t.x[i]);
    }
    const double sign = side == Side::Right ? 1.0 : -1.0;
    // Limit at the far side must be zero.
    if (side == Side::Right && t.g.front() != 0.0)
        return fail("tabulated g1 must vanish left of the first knot", t.x.front());
    if (side == Side::Left && (t.g.back() != 0.0 || t.dg.back() != 0.0))
        return fail("tabulated g2 must vanish right of the last knot", t.x.back());

    SideCheck c;
    c.minimum = std::numeric_limits<double>::infinity();
    constexpr int sub = 16;
    auto probe = [&](double x) -> std::optional<SideCheck> {
        const auto h = hermite(t, x);
        if (sign * h.slope < -1e-12 * std::max(1.0, std::fabs(h.value)))
            return fail(side == Side::Right ? "tabulated g1 decreases" : "tabulated g2 increases", x);
        if (h.value < -1e-12) return fail("tabulated g is negative", x);
        if (x != 0.0) {
            const double m = h.value + x * h.slope;
            c.minimum = std::min(c.minimum, m);
            if (!(m > -0.5)) return fail("tabulated: g + x g' <= -1/2", x);
        }
        return std::nullopt;
    };
    for (std::size_t i = 0; i + 1 < n; ++i) {
        for (int k = 0; k < sub; ++k) {
            const double x = t.x[i] + (t.x[i + 1] - t.x[i]) * k / sub;
            if (auto bad = probe(x)) return *bad;
        }
    }
    if (auto bad = probe(t.x.back())) return *bad;
    // Linear extension on the right.
    if (side == Side::Right && t.dg.back() < 0.0)
        return fail("tabulated g1 decreases right of the last knot", t.x.back());
    return c;
}

} // namespace detail

/// Checks sigma > 0, the family parameter domains, monotone direction of
/// each side, and g + x g' > -1/2 away from 0 (strict monotonicity of f).
inline ValidationReport validate_transform(const TransformSpec& spec) {
    ValidationReport report;
    if (!std::isfinite(spec.mu)) {
        report.passed = false;
        report.message = "mu must be finite";
        return report;
    }
    if (!(std::isfinite(spec.sigma) && spec.sigma > 0.0)) {
        report.passed = false;
        report.message = "sigma must be positive";
        return report;
    }
    auto right = std::visit(
        [](const auto& g) { return detail::check_family(g, detail::Side::Right); }, spec.g1);
    if (!right.ok) {
        report.passed = false;
        report.message = "g1: " + right.message;
        report.witness = right.witness;
        return report;
    }
    auto left = std::visit(
        [](const auto& g) { return detail::check_family(g, detail::Side::Left); }, spec.g2);
    if (!left.ok) {
        report.passed = false;
        report.message = "g2: " + left.message;
        report.witness = left.witness;
        return report;
    }
    report.g1_minimum = right.minimum;
    report.g2_minimum = left.minimum;
    return report;
}

inline void require_valid(const TransformSpec& spec) {
    const auto report = validate_transform(spec);
    if (!report.passed) throw DomainError("invalid transform: " + report.message);
}

// ---------------------------------------------------------------------------
// Inverse

namespace detail {

// f with exponent overflow mapped to the sign-correct infinity; f is
// monotone so saturation keeps bracketing valid.
inline double eval_f_saturating(const TransformSpec& spec, double x) {
    try {
        return eval_f(spec, x);
    } catch (const OverflowError&) {
        return x > 0.0 ? std::numeric_limits<double>::infinity()
                       : -std::numeric_limits<double>::infinity();
    }
}

} // namespace detail

/// f^{-1}(y): geometric bracket expansion from (y - mu)/sigma, bisection to
/// width 1e-13, then two Newton polish steps kept inside the bracket.
inline double invert_f(const TransformSpec& spec, double y) {
    if (std::isnan(y)) return y;
    if (std::isinf(y)) return y;

    double x0 = (y - spec.mu) / spec.sigma;
    if (!std::isfinite(x0)) x0 = std::copysign(std::numeric_limits<double>::max() / 4, x0);
    const double f0 = detail::eval_f_saturating(spec, x0);
    if (f0 == y) return x0;

    double lo, hi;
    double step = std::max(1.0, std::fabs(x0));
    if (f0 < y) {
        lo = x0;
        hi = x0 + step;
        while (detail::eval_f_saturating(spec, hi) < y) {
            lo = hi;
            step *= 2.0;
            hi = x0 + step;
        }
    } else {
        hi = x0;
        lo = x0 - step;
        while (detail::eval_f_saturating(spec, lo) > y) {
            hi = lo;
            step *= 2.0;
            lo = x0 - step;
        }
    }

    while (hi - lo > 1e-13 * std::max(1.0, std::fabs(lo) + std::fabs(hi))) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (detail::eval_f_saturating(spec, mid) < y) lo = mid; else hi = mid;
    }

    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 2; ++i) {
        const double fx = detail::eval_f_saturating(spec, x);
        if (!std::isfinite(fx)) break;
        const double d = eval_f_prime(spec, x);
        if (!(d > 0.0) || !std::isfinite(d)) break;
        const double next = x - (fx - y) / d;
        if (!(next >= lo && next <= hi)) break;
        x = next;
    }
    return x;
}

// ---------------------------------------------------------------------------
// Parameter gradients

/// Number of free (optimizable) parameters of a family.
inline std::size_t free_parameter_count(const GFamily& g) {
    return std::holds_alternative<ZeroG>(g) || std::holds_alternative<Tabulated>(g) ? 0 : 1;
}

/// Name of the family's free parameter ("u" or "v"), empty when none.
inline std::string free_parameter_name(const GFamily& g) {
    if (std::holds_alternative<PgmlDown>(g)) return "v";
    return free_parameter_count(g) ? "u" : "";
}

inline double free_parameter(const GFamily& g) {
    struct Visitor {
        double operator()(const PgmlUp& f) const { return f.u; }
        double operator()(const PgmlDown& f) const { return f.v; }
        double operator()(const ExpM1OverX& f) const { return f.u; }
        double operator()(const IndicatorPower& f) const { return f.u; }
        double operator()(const Tabulated&) const { return std::numeric_limits<double>::quiet_NaN(); }
        double operator()(const ZeroG&) const { return std::numeric_limits<double>::quiet_NaN(); }
    };
    return std::visit(Visitor{}, g);
}

inline GFamily with_free_parameter(GFamily g, double value) {
    struct Visitor {
        double v;
        void operator()(PgmlUp& f) const { f.u = v; }
        void operator()(PgmlDown& f) const { f.v = v; }
        void operator()(ExpM1OverX& f) const { f.u = v; }
        void operator()(IndicatorPower& f) const { f.u = v; }
        void operator()(Tabulated&) const {}
        void operator()(ZeroG&) const {}
    };
    std::visit(Visitor{value}, g);
    return g;
}

namespace detail {

// dg/d(theta) for the family's single free parameter.
inline double g_param_derivative(const GFamily& g, double x) {
    struct Visitor {
        double x;
        double operator()(const PgmlUp& f) const {
            return x * guarded_pow(f.u, x - 1.0, "pgml_up") / f.A;
        }
        double operator()(const PgmlDown& f) const {
            return -x * guarded_pow(f.v, -x - 1.0, "pgml_down") / f.A;
        }
        double operator()(const ExpM1OverX& f) const {
            if (f.u * x > kMaxExponent) throw_overflow("expm1_over_x", x);
            return std::exp(f.u * x);
        }
        double operator()(const IndicatorPower& f) const {
            if (x <= 0.0) return 0.0;
            const double lx = std::log(x);
            if (f.u * lx > kMaxExponent) throw_overflow("indicator_power", x);
            return std::exp(f.u * lx) * lx / f.A;
        }
        double operator()(const ZeroG&) const { return 0.0; }
        double operator()(const Tabulated&) const {
            throw CapabilityError("tabulated g has no parameter gradient");
        }
    };
    return std::visit(Visitor{x}, g);
}

} // namespace detail

/// Analytic df/dtheta at x, ordered (mu, sigma, g1 parameter?, g2 parameter?)
/// where each family parameter appears only if the family has one.
inline std::vector<double> param_gradient(const TransformSpec& spec, double x) {
    if (std::holds_alternative<Tabulated>(spec.g1) || std::holds_alternative<Tabulated>(spec.g2))
        throw CapabilityError("param_gradient: tabulated families have no parameter gradient");
    std::vector<double> grad;
    grad.reserve(4);
    const double g1 = g_value(spec.g1, x);
    const double g2 = g_value(spec.g2, x);
    grad.push_back(1.0);
    grad.push_back(x * (g1 + g2 + 1.0));
    if (free_parameter_count(spec.g1))
        grad.push_back(spec.sigma * x * detail::g_param_derivative(spec.g1, x));
    if (free_parameter_count(spec.g2))
        grad.push_back(spec.sigma * x * detail::g_param_derivative(spec.g2, x));
    return grad;
}

} // namespace heavytail
