#pragma once

// Maximum-likelihood comparators: Normal, Laplace and location-scale
// Student's t.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "base_dist.hpp"
#include "errors.hpp"
#include "special.hpp"

namespace heavytail {

struct NormalModel {
    double mu = 0.0;
    double sigma = 1.0;
    bool operator==(const NormalModel&) const = default;
};

struct LaplaceModel {
    double mu = 0.0;
    double b = 1.0;
    bool operator==(const LaplaceModel&) const = default;
};

/// dof == +inf is the Gaussian limit.
struct StudentTModel {
    double mu = 0.0;
    double scale = 1.0;
    double dof = 5.0;
    bool operator==(const StudentTModel&) const = default;
};

enum class BaselineKind { Normal, Laplace, StudentT };

inline std::string baseline_kind_name(BaselineKind k) {
    switch (k) {
        case BaselineKind::Normal: return "normal";
        case BaselineKind::Laplace: return "laplace";
        case BaselineKind::StudentT: return "t";
    }
    return "?";
}

class BaselineModel {
public:
    using Params = std::variant<NormalModel, LaplaceModel, StudentTModel>;

    BaselineModel(Params p) : params_(p) {  // NOLINT(google-explicit-constructor)
        std::visit([](const auto& m) { check(m); }, params_);
    }
    BaselineModel(NormalModel m) : BaselineModel(Params{m}) {}    // NOLINT
    BaselineModel(LaplaceModel m) : BaselineModel(Params{m}) {}   // NOLINT
    BaselineModel(StudentTModel m) : BaselineModel(Params{m}) {}  // NOLINT

    const Params& params() const noexcept { return params_; }

    BaselineKind kind() const noexcept {
        if (std::holds_alternative<NormalModel>(params_)) return BaselineKind::Normal;
        if (std::holds_alternative<LaplaceModel>(params_)) return BaselineKind::Laplace;
        return BaselineKind::StudentT;
    }

    std::string name() const { return baseline_kind_name(kind()); }

    std::size_t parameter_count() const noexcept {
        return kind() == BaselineKind::StudentT ? 3 : 2;
    }

    double log_pdf(double y) const {
        return std::visit([y](const auto& m) { return log_pdf_impl(m, y); }, params_);
    }
    double pdf(double y) const { return std::exp(log_pdf(y)); }
    double cdf(double y) const {
        return std::visit([y](const auto& m) { return cdf_impl(m, y); }, params_);
    }
    double sf(double y) const {
        return std::visit([y](const auto& m) { return sf_impl(m, y); }, params_);
    }
    double quantile(double p) const {
        if (!(p > 0.0 && p < 1.0)) throw DomainError("baseline quantile: p must lie in (0,1)");
        return std::visit([p](const auto& m) { return quantile_impl(m, p); }, params_);
    }

    /// Mean negative log density.
    double nll(std::span<const double> data) const {
        if (data.empty()) throw DomainError("baseline nll: data must be nonempty");
        double s = 0.0;
        for (double y : data) s -= log_pdf(y);
        return s / static_cast<double>(data.size());
    }

    bool operator==(const BaselineModel&) const = default;

private:
    static void positive(double v, const char* what) {
        if (!(v > 0.0)) throw DomainError(std::string(what) + " must be positive");
    }
    static void check(const NormalModel& m) { positive(m.sigma, "normal sigma"); }
    static void check(const LaplaceModel& m) { positive(m.b, "laplace b"); }
    static void check(const StudentTModel& m) {
        positive(m.scale, "t scale");
        positive(m.dof, "t dof");
    }

    static double log_pdf_impl(const NormalModel& m, double y) {
        const double z = (y - m.mu) / m.sigma;
        return special::normal_log_pdf(z) - std::log(m.sigma);
    }
    static double cdf_impl(const NormalModel& m, double y) {
        return special::normal_cdf((y - m.mu) / m.sigma);
    }
    static double sf_impl(const NormalModel& m, double y) {
        return special::normal_sf((y - m.mu) / m.sigma);
    }
    static double quantile_impl(const NormalModel& m, double p) {
        return m.mu + m.sigma * special::normal_quantile(p);
    }

    static double log_pdf_impl(const LaplaceModel& m, double y) {
        return -std::log(2.0 * m.b) - std::fabs(y - m.mu) / m.b;
    }
    static double cdf_impl(const LaplaceModel& m, double y) {
        const double z = (y - m.mu) / m.b;
        return z < 0.0 ? 0.5 * std::exp(z) : 1.0 - 0.5 * std::exp(-z);
    }
    static double sf_impl(const LaplaceModel& m, double y) { return cdf_impl(m, 2.0 * m.mu - y); }
    static double quantile_impl(const LaplaceModel& m, double p) {
        return p < 0.5 ? m.mu + m.b * std::log(2.0 * p) : m.mu - m.b * std::log(2.0 * (1.0 - p));
    }

    static NormalModel gaussian_limit(const StudentTModel& m) { return {m.mu, m.scale}; }
    static double log_pdf_impl(const StudentTModel& m, double y) {
        if (std::isinf(m.dof)) return log_pdf_impl(gaussian_limit(m), y);
        const double z = (y - m.mu) / m.scale;
        return BaseDistribution::student_t(m.dof).log_pdf(z) - std::log(m.scale);
    }
    static double cdf_impl(const StudentTModel& m, double y) {
        if (std::isinf(m.dof)) return cdf_impl(gaussian_limit(m), y);
        return BaseDistribution::student_t(m.dof).cdf((y - m.mu) / m.scale);
    }
    static double sf_impl(const StudentTModel& m, double y) {
        if (std::isinf(m.dof)) return sf_impl(gaussian_limit(m), y);
        return BaseDistribution::student_t(m.dof).sf((y - m.mu) / m.scale);
    }
    static double quantile_impl(const StudentTModel& m, double p) {
        if (std::isinf(m.dof)) return quantile_impl(gaussian_limit(m), p);
        return m.mu + m.scale * BaseDistribution::student_t(m.dof).quantile(p);
    }

    Params params_;
};

namespace detail {

// Nelder-Mead simplex minimizer, standard coefficients.
template <std::size_t D, class F>
std::array<double, D> nelder_mead(F&& f, std::array<double, D> x0, std::array<double, D> step,
                                  std::size_t max_evals = 4000, double ftol = 1e-13) {
    using Point = std::array<double, D>;
    std::array<Point, D + 1> simplex;
    std::array<double, D + 1> values;
    simplex[0] = x0;
    for (std::size_t i = 0; i < D; ++i) {
        simplex[i + 1] = x0;
        simplex[i + 1][i] += step[i];
    }
    std::size_t evals = 0;
    auto eval = [&](const Point& p) {
        ++evals;
        const double v = f(p);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };
    for (std::size_t i = 0; i <= D; ++i) values[i] = eval(simplex[i]);

    std::array<std::size_t, D + 1> order;
    while (evals < max_evals) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front(), worst = order.back(), second = order[D - 1];
        if (std::fabs(values[worst] - values[best]) <=
            ftol * (std::fabs(values[best]) + std::fabs(values[worst])) + 1e-300)
            break;

        Point centroid{};
        for (std::size_t i = 0; i <= D; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < D; ++k) centroid[k] += simplex[i][k] / D;
        }
        auto along = [&](double t) {
            Point p;
            for (std::size_t k = 0; k < D; ++k)
                p[k] = centroid[k] + t * (simplex[worst][k] - centroid[k]);
            return p;
        };
        const Point reflected = along(-1.0);
        const double fr = eval(reflected);
        if (fr < values[best]) {
            const Point expanded = along(-2.0);
            const double fe = eval(expanded);
            if (fe < fr) { simplex[worst] = expanded; values[worst] = fe; }
            else { simplex[worst] = reflected; values[worst] = fr; }
            continue;
        }
        if (fr < values[second]) {
            simplex[worst] = reflected;
            values[worst] = fr;
            continue;
        }
        const bool outside = fr < values[worst];
        const Point contracted = along(outside ? -0.5 : 0.5);
        const double fc = eval(contracted);
        if (fc < (outside ? fr : values[worst])) {
            simplex[worst] = contracted;
            values[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= D; ++i) {
            if (i == best) continue;
            for (std::size_t k = 0; k < D; ++k)
                simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
            values[i] = eval(simplex[i]);
        }
    }
    const auto it = std::min_element(values.begin(), values.end());
    return simplex[static_cast<std::size_t>(it - values.begin())];
}

inline double sorted_median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline constexpr double kMinDof = 0.5;
inline constexpr double kMaxDof = 200.0;

inline double t_nll(std::span<const double> data, double mu, double scale, double dof) {
    const double c = std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
                     0.5 * std::log(dof * std::numbers::pi) - std::log(scale);
    const double k = 0.5 * (dof + 1.0);
    double s = 0.0;
    for (double y : data) {
        const double z = (y - mu) / scale;
        s += k * std::log1p(z * z / dof);
    }
    return s / static_cast<double>(data.size()) - c;
}

} // namespace detail

/// Maximum-likelihood fit. Normal and Laplace are closed form; Student's t
/// minimizes the NLL over (mu, log scale, log dof) from dof starts {2, 8, 50}
/// with dof kept in [0.5, 200], and also considers the Gaussian limit
/// (dof = inf) so its NLL never exceeds the Normal fit's.
inline BaselineModel mle_fit(BaselineKind kind, std::span<const double> data) {
    if (data.size() < 10) throw DomainError("mle_fit: need at least 10 observations");
    const double n = static_cast<double>(data.size());
    const double mean = std::accumulate(data.begin(), data.end(), 0.0) / n;
    double ss = 0.0;
    for (double y : data) ss += (y - mean) * (y - mean);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 0.0) || !std::isfinite(sd))
        throw DegenerateDataError("mle_fit: data has zero variance");

    switch (kind) {
        case BaselineKind::Normal: return NormalModel{mean, sd};
        case BaselineKind::Laplace: {
            const double med = detail::sorted_median({data.begin(), data.end()});
            double mad = 0.0;
            for (double y : data) mad += std::fabs(y - med);
            mad /= n;
            if (!(mad > 0.0)) throw DegenerateDataError("mle_fit: zero mean absolute deviation");
            return LaplaceModel{med, mad};
        }
        case BaselineKind::StudentT: break;
    }

    std::vector<double> sorted(data.begin(), data.end());
    std::sort(sorted.begin(), sorted.end());
    auto q = [&](double p) {
        const double h = (n - 1.0) * p;
        const auto lo = static_cast<std::size_t>(h);
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    const double med = q(0.5);
    const double iqr = q(0.75) - q(0.25);

    const double log_min = std::log(detail::kMinDof), log_max = std::log(detail::kMaxDof);
    auto objective = [&](const std::array<double, 3>& p) {
        if (p[2] < log_min || p[2] > log_max) return std::numeric_limits<double>::infinity();
        return detail::t_nll(data, p[0], std::exp(p[1]), std::exp(p[2]));
    };

    StudentTModel best{mean, sd, std::numeric_limits<double>::infinity()};
    double best_nll = BaselineModel(best).nll(data);
    for (double dof0 : {2.0, 8.0, 50.0}) {
        double s0 = iqr / (2.0 * BaseDistribution::student_t(dof0).quantile(0.75));
        if (!(s0 > 0.0)) s0 = sd;
        std::array<double, 3> x{med, std::log(s0), std::log(dof0)};
        for (int pass = 0; pass < 2; ++pass)
            x = detail::nelder_mead<3>(objective, x, {0.1 * s0, 0.1, 0.3});
        const double v = objective(x);
        if (v < best_nll) {
            best_nll = v;
            best = StudentTModel{x[0], std::exp(x[1]), std::exp(x[2])};
        }
    }
    return best;
}

} // namespace heavytail
