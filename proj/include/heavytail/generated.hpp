#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "base_dist.hpp"
#include "errors.hpp"
#include "transform.hpp"

namespace heavytail {

struct NllResult {
    /// Mean of -log pdf over the finite-density points.
    double value = 0.0;
    /// Points whose log density was not finite; they are left out of value.
    std::size_t excluded = 0;
    std::size_t used = 0;
};

/// Y = f(X) with X ~ base. Quantile f(F^{-1}(a)), CDF F(f^{-1}(y)), density
/// by change of variables through the numerical inverse.
class GeneratedDistribution {
public:
    GeneratedDistribution(BaseDistribution base, TransformSpec spec)
        : base_(std::move(base)), spec_(std::move(spec)) {
        require_valid(spec_);
    }

    const BaseDistribution& base() const noexcept { return base_; }
    const TransformSpec& spec() const noexcept { return spec_; }

    double quantile(double alpha) const { return eval_f(spec_, base_.quantile(alpha)); }

    double cdf(double y) const { return base_.cdf(invert_f(spec_, y)); }

    double sf(double y) const { return base_.sf(invert_f(spec_, y)); }

    double pdf(double y) const {
        const double x = invert_f(spec_, y);
        const double density = base_.pdf(x);
        if (density == 0.0) return 0.0;
        return density / eval_f_prime(spec_, x);
    }

    double log_pdf(double y) const {
        const double x = invert_f(spec_, y);
        return base_.log_pdf(x) - std::log(eval_f_prime(spec_, x));
    }

    /// f mapped over base().sample(n, seed).
    std::vector<double> sample(std::size_t n, std::uint64_t seed) const {
        auto draws = base_.sample(n, seed);
        for (auto& v : draws) v = eval_f(spec_, v);
        return draws;
    }

    NllResult nll(std::span<const double> data) const {
        if (data.empty()) throw DomainError("nll: data must be nonempty");
        NllResult r;
        double sum = 0.0;
        for (double y : data) {
            double lp;
            try {
                lp = log_pdf(y);
            } catch (const OverflowError&) {
                lp = std::numeric_limits<double>::quiet_NaN();
            }
            if (std::isfinite(lp)) {
                sum -= lp;
                ++r.used;
            } else {
                ++r.excluded;
            }
        }
        r.value = r.used ? sum / static_cast<double>(r.used)
                         : std::numeric_limits<double>::quiet_NaN();
        return r;
    }

private:
    BaseDistribution base_;
    TransformSpec spec_;
};

} // namespace heavytail
