#pragma once

// Scalar special functions shared by the distribution code: the standard
// normal CDF/quantile and the regularized incomplete beta function.

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

namespace heavytail::special {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
inline constexpr double kLogSqrt2Pi = 0.918938533204672741780329736406;

inline double normal_pdf(double x) noexcept {
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline double normal_log_pdf(double x) noexcept {
    return -kLogSqrt2Pi - 0.5 * x * x;
}

inline double normal_cdf(double x) noexcept {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double normal_sf(double x) noexcept {
    return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

namespace detail {

// Acklam's rational approximation, relative error below 1.15e-9; p <= 0.5.
inline double acklam_lower(double p) noexcept {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

} // namespace detail

/// Standard normal quantile for p in (0, 0.5]; one Newton step on the CDF
/// after the rational approximation.
inline double normal_quantile_lower(double p) noexcept {
    double x = detail::acklam_lower(p);
    const double density = normal_pdf(x);
    if (density > 0.0) x -= (normal_cdf(x) - p) / density;
    return x;
}

/// Standard normal quantile on (0,1). Upper half is reflected so the
/// residual is always taken against an exact lower-tail probability.
inline double normal_quantile(double p) noexcept {
    if (p == 0.5) return 0.0;
    if (p < 0.5) return normal_quantile_lower(p);
    return -normal_quantile_lower(1.0 - p);
}

namespace detail {

// Modified Lentz evaluation of the continued fraction for I_x(a,b).
inline double beta_continued_fraction(double a, double b, double x) noexcept {
    constexpr int max_iter = 500;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

} // namespace detail

/// Regularized incomplete beta I_x(a,b) together with its complement
/// 1 - I_x(a,b). The caller passes both x and xc = 1 - x so that neither
/// side suffers cancellation.
inline std::pair<double, double> incomplete_beta(double a, double b, double x,
                                                 double xc) noexcept {
    if (x <= 0.0) return {0.0, 1.0};
    if (xc <= 0.0) return {1.0, 0.0};
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                             a * std::log(x) + b * std::log(xc);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        const double value = front * detail::beta_continued_fraction(a, b, x) / a;
        return {value, 1.0 - value};
    }
    const double complement = front * detail::beta_continued_fraction(b, a, xc) / b;
    return {1.0 - complement, complement};
}

} // namespace heavytail::special
