#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"
#include "special.hpp"

namespace heavytail {

struct GaussianKind {
    bool operator==(const GaussianKind&) const = default;
};

struct ExponentialKind {
    bool operator==(const ExponentialKind&) const = default;
};

struct StudentTKind {
    double dof;
    bool operator==(const StudentTKind&) const = default;
};

/// Standard base distribution F: N(0,1), Exp(1) or Student's t with `dof`
/// degrees of freedom. Immutable; every member is a pure function.
class BaseDistribution {
public:
    using Kind = std::variant<GaussianKind, ExponentialKind, StudentTKind>;

    static BaseDistribution gaussian() { return BaseDistribution(GaussianKind{}); }
    static BaseDistribution exponential() { return BaseDistribution(ExponentialKind{}); }
    static BaseDistribution student_t(double dof) {
        if (!(dof > 0.0) || !std::isfinite(dof))
            throw DomainError("student_t: dof must be a positive finite number");
        return BaseDistribution(StudentTKind{dof});
    }

    const Kind& kind() const noexcept { return kind_; }
    bool is_gaussian() const noexcept { return std::holds_alternative<GaussianKind>(kind_); }
    bool is_exponential() const noexcept { return std::holds_alternative<ExponentialKind>(kind_); }
    bool is_student_t() const noexcept { return std::holds_alternative<StudentTKind>(kind_); }
    double dof() const noexcept {
        auto* t = std::get_if<StudentTKind>(&kind_);
        return t ? t->dof : std::numeric_limits<double>::infinity();
    }

    /// "gaussian", "exponential" or "t:<dof>".
    std::string name() const {
        if (is_gaussian()) return "gaussian";
        if (is_exponential()) return "exponential";
        char buf[64];
        std::snprintf(buf, sizeof buf, "t:%.17g", dof());
        return buf;
    }

    double cdf(double x) const noexcept {
        return std::visit([x](const auto& k) { return cdf_impl(k, x); }, kind_);
    }

    /// Survival 1 - F(x), accurate deep into the upper tail.
    double sf(double x) const noexcept {
        return std::visit([x](const auto& k) { return sf_impl(k, x); }, kind_);
    }

    double pdf(double x) const noexcept {
        return std::visit([x](const auto& k) { return pdf_impl(k, x); }, kind_);
    }

    double log_pdf(double x) const noexcept {
        return std::visit([x](const auto& k) { return log_pdf_impl(k, x); }, kind_);
    }

    /// F^{-1}(alpha) for alpha in (0,1).
    double quantile(double alpha) const {
        check_probability(alpha, "base quantile");
        return std::visit([alpha](const auto& k) { return quantile_impl(k, alpha); }, kind_);
    }

    /// Inverse survival: the x with sf(x) = p, keeping full relative
    /// precision for tiny upper-tail probabilities.
    double isf(double p) const {
        check_probability(p, "base isf");
        return std::visit([p](const auto& k) { return isf_impl(k, p); }, kind_);
    }

    /// Inverse-transform sample: quantile applied to Xoshiro256 uniforms.
    std::vector<double> sample(std::size_t n, std::uint64_t seed) const {
        if (n == 0) throw DomainError("sample: n must be at least 1");
        Xoshiro256 gen(seed);
        std::vector<double> out(n);
        for (auto& v : out) v = quantile(gen.uniform());
        return out;
    }

    bool operator==(const BaseDistribution&) const = default;

private:
    explicit BaseDistribution(Kind k) : kind_(k) {}

    static void check_probability(double p, const char* what) {
        if (!(p > 0.0 && p < 1.0))
            throw DomainError(std::string(what) + ": probability must lie in (0,1)");
    }

    // Gaussian
    static double cdf_impl(const GaussianKind&, double x) noexcept { return special::normal_cdf(x); }
    static double sf_impl(const GaussianKind&, double x) noexcept { return special::normal_sf(x); }
    static double pdf_impl(const GaussianKind&, double x) noexcept { return special::normal_pdf(x); }
    static double log_pdf_impl(const GaussianKind&, double x) noexcept {
        return special::normal_log_pdf(x);
    }
    static double quantile_impl(const GaussianKind&, double a) noexcept {
        return special::normal_quantile(a);
    }
    static double isf_impl(const GaussianKind&, double p) noexcept {
        return -special::normal_quantile(p);
    }

    // Exponential
    static double cdf_impl(const ExponentialKind&, double x) noexcept {
        return x <= 0.0 ? 0.0 : -std::expm1(-x);
    }
    static double sf_impl(const ExponentialKind&, double x) noexcept {
        return x <= 0.0 ? 1.0 : std::exp(-x);
    }
    static double pdf_impl(const ExponentialKind&, double x) noexcept {
        return x < 0.0 ? 0.0 : std::exp(-x);
    }
    static double log_pdf_impl(const ExponentialKind&, double x) noexcept {
        return x < 0.0 ? -std::numeric_limits<double>::infinity() : -x;
    }
    static double quantile_impl(const ExponentialKind&, double a) noexcept {
        return -std::log1p(-a);
    }
    static double isf_impl(const ExponentialKind&, double p) noexcept { return -std::log(p); }

    // Student's t. Tail mass 0.5 * I_{nu/(nu+x^2)}(nu/2, 1/2).
    static std::pair<double, double> t_tail(const StudentTKind& k, double x) noexcept {
        const double x2 = x * x;
        const double denom = k.dof + x2;
        auto [i, ic] = special::incomplete_beta(0.5 * k.dof, 0.5, k.dof / denom, x2 / denom);
        return {0.5 * i, 0.5 + 0.5 * ic};  // {P(T > |x|), P(T <= |x|)}
    }
    static double cdf_impl(const StudentTKind& k, double x) noexcept {
        if (x == 0.0) return 0.5;
        auto [tail, body] = t_tail(k, x);
        return x < 0.0 ? tail : body;
    }
    static double sf_impl(const StudentTKind& k, double x) noexcept { return cdf_impl(k, -x); }
    static double log_pdf_impl(const StudentTKind& k, double x) noexcept {
        const double nu = k.dof;
        return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
               0.5 * std::log(nu * std::numbers::pi) - 0.5 * (nu + 1.0) * std::log1p(x * x / nu);
    }
    static double pdf_impl(const StudentTKind& k, double x) noexcept {
        return std::exp(log_pdf_impl(k, x));
    }

    // Solves sf(x) = p for p <= 0.5 by safeguarded Newton on log sf inside a
    // maintained bracket [lo, hi] with sf(lo) >= p > sf(hi).
    static double t_upper(const StudentTKind& k, double p) noexcept {
        if (p == 0.5) return 0.0;
        const double nu = k.dof;
        const double log_p = std::log(p);
        const double log_k = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                             0.5 * std::log(nu * std::numbers::pi);

        double x;
        if (p < 0.05) {
            // sf(x) ~ K nu^{(nu-1)/2} x^{-nu}
            x = std::exp((log_k + 0.5 * (nu - 1.0) * std::log(nu) - log_p) / nu);
        } else {
            const double z = -special::normal_quantile(p);
            x = z + (z * z * z + z) / (4.0 * nu);
        }
        if (!(x > 0.0) || !std::isfinite(x)) x = 1.0;

        double lo = 0.0;
        double hi = x;
        while (sf_impl(k, hi) >= p) {
            lo = hi;
            hi *= 2.0;
            if (!std::isfinite(hi)) return std::numeric_limits<double>::infinity();
        }
        x = std::min(std::max(x, lo), hi);
        if (x == hi) x = 0.5 * (lo + hi);

        for (int iter = 0; iter < 200; ++iter) {
            const double s = sf_impl(k, x);
            if (s >= p) lo = x; else hi = x;
            const double log_s = std::log(s);
            const double slope = -std::exp(log_pdf_impl(k, x) - log_s);  // d log sf / dx
            double next = x - (log_s - log_p) / slope;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            const double step = std::fabs(next - x);
            x = next;
            if (step <= 4.0 * std::numeric_limits<double>::epsilon() * x || hi - lo <= 0.0) break;
        }
        return x;
    }
    static double quantile_impl(const StudentTKind& k, double a) noexcept {
        if (a == 0.5) return 0.0;
        return a < 0.5 ? -t_upper(k, a) : t_upper(k, 1.0 - a);
    }
    static double isf_impl(const StudentTKind& k, double p) noexcept {
        return p <= 0.5 ? t_upper(k, p) : -t_upper(k, 1.0 - p);
    }

    Kind kind_;
};

} // namespace heavytail
