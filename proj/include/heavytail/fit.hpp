#pragma once

// Unconditional quantile-regression estimation of a TransformSpec:
//
//   min_theta  sum_{a in A} (1/N) sum_i L_a(y_i, f_theta(F^{-1}(a)))
//
// with the pinball loss L_a(y, q) = (a - 1{y < q}) (y - q). Constrained
// parameters are optimized through smooth maps (sigma = e^s, u = 1 + e^a,
// ...) with an Adam-style first-order method whose steps are only accepted
// when they do not increase the objective.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "base_dist.hpp"
#include "errors.hpp"
#include "rng.hpp"
#include "special.hpp"
#include "transform.hpp"

namespace heavytail {

/// Strictly increasing probability levels in (0,1).
class QuantileGrid {
public:
    explicit QuantileGrid(std::vector<double> levels) : levels_(std::move(levels)) {
        if (levels_.empty()) throw DomainError("quantile grid must be nonempty");
        for (std::size_t i = 0; i < levels_.size(); ++i) {
            if (!(levels_[i] > 0.0 && levels_[i] < 1.0))
                throw DomainError("quantile grid levels must lie in (0,1)");
            if (i > 0 && !(levels_[i] > levels_[i - 1]))
                throw DomainError("quantile grid levels must be strictly increasing");
        }
    }

    /// {1/(n+1), ..., n/(n+1)}; n = 99 gives {0.01, ..., 0.99}.
    static QuantileGrid evenly_spaced(std::size_t n = 99) {
        if (n == 0) throw DomainError("quantile grid size must be at least 1");
        std::vector<double> levels(n);
        for (std::size_t i = 0; i < n; ++i)
            levels[i] = static_cast<double>(i + 1) / static_cast<double>(n + 1);
        return QuantileGrid(std::move(levels));
    }

    std::span<const double> levels() const noexcept { return levels_; }
    std::size_t size() const noexcept { return levels_.size(); }

private:
    std::vector<double> levels_;
};

inline double pinball_loss(double y, double q, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("pinball_loss: alpha must lie in (0,1)");
    return (alpha - (y < q ? 1.0 : 0.0)) * (y - q);
}

/// Sum over grid levels of the mean pinball loss at q = f(F^{-1}(alpha)).
/// Direct O(N |A|) evaluation.
inline double pinball_objective(const TransformSpec& spec, const BaseDistribution& base,
                                std::span<const double> data, const QuantileGrid& grid) {
    if (data.empty()) throw DomainError("pinball_objective: data must be nonempty");
    const double n = static_cast<double>(data.size());
    double total = 0.0;
    for (double alpha : grid.levels()) {
        const double q = eval_f(spec, base.quantile(alpha));
        double sum = 0.0;
        for (double y : data) sum += (alpha - (y < q ? 1.0 : 0.0)) * (y - q);
        total += sum / n;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Unconstrained parameterization

namespace detail {

// Lower bound of the family's free parameter, and whether it is mapped as
// lower + e^a (all built-in families are).
inline double free_parameter_floor(const GFamily& g) {
    return std::holds_alternative<ExpM1OverX>(g) ? 0.0 : 1.0;
}

inline constexpr double kMinExcess = 1e-12;

} // namespace detail

/// Unconstrained coordinates (mu, log sigma, log(p1 - floor1)?, log(p2 - floor2)?).
inline std::vector<double> to_unconstrained(const TransformSpec& spec) {
    std::vector<double> theta{spec.mu, std::log(spec.sigma)};
    for (const GFamily* g : {&spec.g1, &spec.g2}) {
        if (!free_parameter_count(*g)) continue;
        const double excess = free_parameter(*g) - detail::free_parameter_floor(*g);
        theta.push_back(std::log(std::max(excess, detail::kMinExcess)));
    }
    return theta;
}

/// Inverse of to_unconstrained; family shapes and hyperparameters (A) come
/// from `shape`.
inline TransformSpec from_unconstrained(const TransformSpec& shape, std::span<const double> theta) {
    TransformSpec spec = shape;
    spec.mu = theta[0];
    spec.sigma = std::exp(theta[1]);
    std::size_t k = 2;
    for (GFamily* g : {&spec.g1, &spec.g2}) {
        if (!free_parameter_count(*g)) continue;
        *g = with_free_parameter(*g, detail::free_parameter_floor(*g) + std::exp(theta[k++]));
    }
    return spec;
}

/// d(constrained)/d(unconstrained) for each coordinate.
inline std::vector<double> unconstrained_jacobian(const TransformSpec& spec) {
    std::vector<double> j{1.0, spec.sigma};
    for (const GFamily* g : {&spec.g1, &spec.g2}) {
        if (!free_parameter_count(*g)) continue;
        j.push_back(free_parameter(*g) - detail::free_parameter_floor(*g));
    }
    return j;
}

inline std::vector<std::string> parameter_names(const TransformSpec& spec) {
    std::vector<std::string> names{"mu", "sigma"};
    if (free_parameter_count(spec.g1)) names.push_back(free_parameter_name(spec.g1));
    if (free_parameter_count(spec.g2)) names.push_back(free_parameter_name(spec.g2));
    return names;
}

// ---------------------------------------------------------------------------
// Sorted-data evaluator: each level costs one binary search.

namespace detail {

class PinballEvaluator {
public:
    PinballEvaluator(const BaseDistribution& base, std::span<const double> data,
                     const QuantileGrid& grid)
        : sorted_(data.begin(), data.end()), levels_(grid.levels().begin(), grid.levels().end()) {
        std::sort(sorted_.begin(), sorted_.end());
        prefix_.resize(sorted_.size() + 1, 0.0);
        for (std::size_t i = 0; i < sorted_.size(); ++i) prefix_[i + 1] = prefix_[i] + sorted_[i];
        base_points_.reserve(levels_.size());
        for (double a : levels_) base_points_.push_back(base.quantile(a));
    }

    std::size_t size() const noexcept { return sorted_.size(); }
    std::span<const double> sorted() const noexcept { return sorted_; }

    // Number of observations strictly below q (ties count as not below).
    std::size_t below(double q) const {
        return static_cast<std::size_t>(
            std::lower_bound(sorted_.begin(), sorted_.end(), q) - sorted_.begin());
    }

    double objective(const TransformSpec& spec) const {
        const double n = static_cast<double>(sorted_.size());
        const double total = prefix_.back();
        double obj = 0.0;
        for (std::size_t j = 0; j < levels_.size(); ++j) {
            const double q = eval_f(spec, base_points_[j]);
            if (!std::isfinite(q)) return std::numeric_limits<double>::infinity();
            const std::size_t k = below(q);
            const double kd = static_cast<double>(k);
            const double s_lo = prefix_[k];
            const double s_hi = total - s_lo;
            const double a = levels_[j];
            obj += (a * (s_hi - (n - kd) * q) + (1.0 - a) * (kd * q - s_lo)) / n;
        }
        return obj;
    }

    // Subgradient in the unconstrained coordinates.
    std::vector<double> gradient(const TransformSpec& spec) const {
        const double n = static_cast<double>(sorted_.size());
        const auto jac = unconstrained_jacobian(spec);
        std::vector<double> grad(jac.size(), 0.0);
        for (std::size_t j = 0; j < levels_.size(); ++j) {
            const double x = base_points_[j];
            const double q = eval_f(spec, x);
            const double dq = -(levels_[j] - static_cast<double>(below(q)) / n);
            const auto pg = param_gradient(spec, x);
            for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += dq * pg[k];
        }
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] *= jac[k];
        return grad;
    }

private:
    std::vector<double> sorted_;
    std::vector<double> prefix_;
    std::vector<double> levels_;
    std::vector<double> base_points_;
};

} // namespace detail

/// Gradient of pinball_objective with respect to to_unconstrained(spec),
/// using the subgradient -(alpha - 1{y < q}) in q (ties: 1{y < q} = 0).
inline std::vector<double> objective_gradient(const TransformSpec& spec,
                                              const BaseDistribution& base,
                                              std::span<const double> data,
                                              const QuantileGrid& grid) {
    if (data.empty()) throw DomainError("objective_gradient: data must be nonempty");
    return detail::PinballEvaluator(base, data, grid).gradient(spec);
}

// ---------------------------------------------------------------------------
// Fitting

struct FitConfig {
    QuantileGrid grid = QuantileGrid::evenly_spaced(99);
    std::size_t max_iters = 5000;
    double step_size = 0.01;
    /// Relative objective decrease regarded as no progress.
    double tolerance = 1e-9;
    std::uint64_t seed = 0;
    std::size_t restarts = 3;
    /// Families and hyperparameters to fit; its family parameters are the
    /// starting values (mu and sigma are initialized from the data).
    TransformSpec shape = pgml_spec(0.0, 1.0, 1.05, 1.05, 4.0);
};

struct TracePoint {
    std::size_t iteration;
    double objective;
    bool operator==(const TracePoint&) const = default;
};

struct FitResult {
    TransformSpec spec;
    double objective = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<TracePoint> trace;
    bool operator==(const FitResult&) const = default;
};

namespace detail {

// Type-7 (linear interpolation) empirical quantile of sorted data.
inline double sorted_quantile(std::span<const double> sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline constexpr std::size_t kStallWindow = 20;

struct RunOutcome {
    std::vector<double> theta;
    double objective;
    std::size_t iterations;
    bool converged;
    std::vector<TracePoint> trace;
};

inline double safe_objective(const PinballEvaluator& eval, const TransformSpec& shape,
                             std::span<const double> theta) {
    try {
        const double v = eval.objective(from_unconstrained(shape, theta));
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const OverflowError&) {
        return std::numeric_limits<double>::infinity();
    }
}

inline RunOutcome adam_descent(const PinballEvaluator& eval, const TransformSpec& shape,
                               std::vector<double> theta, const FitConfig& cfg) {
    constexpr double beta1 = 0.9;
    constexpr double beta2 = 0.999;
    constexpr double eps = 1e-8;
    constexpr int max_backtracks = 30;

    RunOutcome out;
    double obj = safe_objective(eval, shape, theta);
    const std::size_t dim = theta.size();
    std::vector<double> m(dim, 0.0), v(dim, 0.0), trial(dim);
    std::size_t stall = 0;
    std::size_t it = 0;
    out.trace.push_back({0, obj});
    out.converged = false;

    for (it = 1; it <= cfg.max_iters; ++it) {
        std::vector<double> g;
        try {
            g = eval.gradient(from_unconstrained(shape, theta));
        } catch (const OverflowError&) {
            break;
        }
        const double t = static_cast<double>(it);
        const double c1 = 1.0 - std::pow(beta1, t);
        const double c2 = 1.0 - std::pow(beta2, t);
        for (std::size_t k = 0; k < dim; ++k) {
            m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
        }

        // Every iteration starts from the full step; a momentum direction
        // that fails all the way down is dropped.
        double scale = 1.0;
        double decrease = 0.0;
        bool accepted = false;
        for (int b = 0; b < max_backtracks; ++b) {
            for (std::size_t k = 0; k < dim; ++k)
                trial[k] = theta[k] - cfg.step_size * scale * (m[k] / c1) /
                                          (std::sqrt(v[k] / c2) + eps);
            const double f_trial = safe_objective(eval, shape, trial);
            if (f_trial <= obj) {
                decrease = (obj - f_trial) / std::max(std::fabs(obj), 1e-300);
                theta = trial;
                obj = f_trial;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) std::fill(m.begin(), m.end(), 0.0);
        out.trace.push_back({it, obj});

        stall = decrease < cfg.tolerance ? stall + 1 : 0;
        if (stall >= kStallWindow) {
            out.converged = true;
            break;
        }
    }
    out.iterations = std::min(it, cfg.max_iters);
    out.theta = std::move(theta);
    out.objective = obj;
    return out;
}

} // namespace detail

/// Fits cfg.shape to data. Requires at least 10 observations per free
/// parameter. Best of cfg.restarts runs (the first from the data-driven
/// start, the rest jittered with cfg.seed) is returned.
inline FitResult fit_quantile_regression(const BaseDistribution& base,
                                         std::span<const double> data, const FitConfig& cfg) {
    require_valid(cfg.shape);
    const std::size_t n_params = 2 + free_parameter_count(cfg.shape.g1) +
                                 free_parameter_count(cfg.shape.g2);
    if (data.size() < 10 * n_params)
        throw DomainError("fit: need at least " + std::to_string(10 * n_params) +
                          " observations for " + std::to_string(n_params) + " parameters");
    if (cfg.max_iters < 1) throw DomainError("fit: max_iters must be at least 1");
    if (!(cfg.tolerance > 0.0)) throw DomainError("fit: tolerance must be positive");
    if (!(cfg.step_size > 0.0)) throw DomainError("fit: step_size must be positive");
    for (double y : data)
        if (!std::isfinite(y)) throw DomainError("fit: data contains a non-finite value");

    const detail::PinballEvaluator eval(base, data, cfg.grid);
    const auto sorted = eval.sorted();

    // Start: median and IQR matched to the shape's slope at 0.
    const double width = g_value(cfg.shape.g1, 0.0) + g_value(cfg.shape.g2, 0.0) + 1.0;
    const double base_iqr = base.quantile(0.75) - base.quantile(0.25);
    const double sigma0 = (detail::sorted_quantile(sorted, 0.75) -
                           detail::sorted_quantile(sorted, 0.25)) /
                          (base_iqr * width);
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0))
        throw InitializationError("fit: interquartile range of the data is zero", "sigma");
    const double mu0 = detail::sorted_quantile(sorted, 0.5) - sigma0 * width * base.quantile(0.5);
    if (!std::isfinite(mu0)) throw InitializationError("fit: non-finite median", "mu");

    TransformSpec start = cfg.shape;
    start.mu = mu0;
    start.sigma = sigma0;
    const auto theta0 = to_unconstrained(start);
    if (!std::isfinite(detail::safe_objective(eval, cfg.shape, theta0))) {
        // Name the side whose family overflows at the outermost grid point.
        const auto levels = cfg.grid.levels();
        std::string culprit = "sigma";
        const std::pair<const GFamily*, double> sides[] = {
            {&start.g1, base.quantile(levels.back())}, {&start.g2, base.quantile(levels.front())}};
        for (const auto& [g, x] : sides) {
            try {
                if (std::isfinite(g_value(*g, x))) continue;
            } catch (const OverflowError&) {
            }
            culprit = free_parameter_name(*g);
            break;
        }
        throw InitializationError("fit: objective is not finite at the starting point (" +
                                      culprit + ")",
                                  culprit);
    }

    const std::size_t runs = std::max<std::size_t>(1, cfg.restarts);
    detail::RunOutcome best;
    best.objective = std::numeric_limits<double>::infinity();
    Xoshiro256 gen(cfg.seed);
    for (std::size_t r = 0; r < runs; ++r) {
        auto theta = theta0;
        if (r > 0) {
            theta[0] += 0.1 * sigma0 * special::normal_quantile(gen.uniform());
            theta[1] += 0.1 * special::normal_quantile(gen.uniform());
            for (std::size_t k = 2; k < theta.size(); ++k)
                theta[k] += 0.5 * special::normal_quantile(gen.uniform());
            if (!std::isfinite(detail::safe_objective(eval, cfg.shape, theta))) theta = theta0;
        }
        auto run = detail::adam_descent(eval, cfg.shape, std::move(theta), cfg);
        if (run.objective < best.objective) best = std::move(run);
    }

    FitResult result;
    result.spec = from_unconstrained(cfg.shape, best.theta);
    result.objective = pinball_objective(result.spec, base, data, cfg.grid);
    result.iterations = best.iterations;
    result.converged = best.converged;
    result.trace = std::move(best.trace);
    return result;
}

} // namespace heavytail
