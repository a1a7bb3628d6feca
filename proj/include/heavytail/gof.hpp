#pragma once

// Goodness-of-fit battery: trimmed and binned chi-square, Kolmogorov-Smirnov
// and Kuiper measures, NLL, and a ranked comparison across models.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "baselines.hpp"
#include "errors.hpp"
#include "generated.hpp"
#include "special.hpp"

namespace heavytail {

struct ChiSquareResult {
    double statistic = 0.0;
    int dof = 0;
    double pvalue = 1.0;
    /// b + 3 edges, the first and last infinite.
    std::vector<double> edges;
    /// Observed counts E_i, b + 2 bins.
    std::vector<std::size_t> observed;
    /// Expected counts T_i.
    std::vector<double> expected;
};

/// Upper tail of the chi-square distribution by the Wilson-Hilferty cube-root
/// normal approximation (about 1e-3 accuracy for dof >= 3).
inline double chi_square_upper_tail(double x, int dof) {
    if (dof <= 0) throw DomainError("chi-square dof must be positive");
    if (x <= 0.0) return 1.0;
    const double k = dof;
    const double c = 2.0 / (9.0 * k);
    const double z = (std::cbrt(x / k) - (1.0 - c)) / std::sqrt(c);
    return special::normal_sf(z);
}

namespace detail {

inline double type7_quantile(std::span<const double> sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

} // namespace detail

/// Chi-square statistic over b + 2 bins: two open tail bins below and above
/// the `trim` and `1 - trim` empirical quantiles (trim per tail, type-7) and
/// b equal-width bins between them. Bins are left-closed. dof = b - p + 1.
template <class Cdf>
ChiSquareResult chi_square(std::span<const double> data, Cdf&& cdf, std::size_t p,
                           double trim = 0.05, std::size_t b = 10) {
    if (data.size() < 50) throw DomainError("chi_square: need at least 50 observations");
    if (b < 2) throw DomainError("chi_square: need at least 2 bins");
    if (!(trim > 0.0 && trim < 0.5)) throw DomainError("chi_square: trim must lie in (0, 0.5)");
    const long dof = static_cast<long>(b) - static_cast<long>(p) + 1;
    if (dof < 1) throw DomainError("chi_square: b - p + 1 must be positive");

    std::vector<double> sorted(data.begin(), data.end());
    std::sort(sorted.begin(), sorted.end());
    const double lo = detail::type7_quantile(sorted, trim);
    const double hi = detail::type7_quantile(sorted, 1.0 - trim);
    if (!(hi > lo)) throw DomainError("chi_square: trimmed range is empty");

    ChiSquareResult r;
    r.dof = static_cast<int>(dof);
    r.edges.reserve(b + 3);
    r.edges.push_back(-std::numeric_limits<double>::infinity());
    const double width = (hi - lo) / static_cast<double>(b);
    for (std::size_t k = 0; k < b; ++k) r.edges.push_back(lo + static_cast<double>(k) * width);
    r.edges.push_back(hi);
    r.edges.push_back(std::numeric_limits<double>::infinity());

    const std::size_t bins = b + 2;
    r.observed.assign(bins, 0);
    // Bin index = number of finite edges <= y.
    const auto finite_begin = r.edges.begin() + 1;
    const auto finite_end = r.edges.end() - 1;
    for (double y : sorted) {
        const auto idx = static_cast<std::size_t>(std::upper_bound(finite_begin, finite_end, y) -
                                                  finite_begin);
        ++r.observed[idx];
    }

    const double n = static_cast<double>(data.size());
    std::vector<double> cum(r.edges.size());
    cum.front() = 0.0;
    cum.back() = 1.0;
    for (std::size_t i = 1; i + 1 < r.edges.size(); ++i) cum[i] = cdf(r.edges[i]);
    r.expected.resize(bins);
    r.statistic = 0.0;
    for (std::size_t i = 0; i < bins; ++i) {
        const double t = n * (cum[i + 1] - cum[i]);
        if (!(t >= 1e-12))
            throw BinDegeneracyError("chi_square: expected count below 1e-12 in bin " +
                                         std::to_string(i),
                                     i);
        r.expected[i] = t;
        const double diff = static_cast<double>(r.observed[i]) - t;
        r.statistic += diff * diff / t;
    }
    r.pvalue = chi_square_upper_tail(r.statistic, r.dof);
    return r;
}

struct KsResult {
    double d_plus = 0.0;
    double d_minus = 0.0;
    double m_ks = 0.0;
};

/// D+ = max(i/n - F(y_i)), D- = max(F(y_i) - (i-1)/n) over sorted data.
template <class Cdf>
KsResult ks_measure(std::span<const double> data, Cdf&& cdf) {
    if (data.empty()) throw DomainError("ks_measure: data must be nonempty");
    std::vector<double> sorted(data.begin(), data.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    KsResult r;
    r.d_plus = -std::numeric_limits<double>::infinity();
    r.d_minus = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double f = cdf(sorted[i]);
        r.d_plus = std::max(r.d_plus, static_cast<double>(i + 1) / n - f);
        r.d_minus = std::max(r.d_minus, f - static_cast<double>(i) / n);
    }
    r.m_ks = std::max(r.d_plus, r.d_minus);
    return r;
}

/// m_K = D+ + D-.
template <class Cdf>
double kuiper_measure(std::span<const double> data, Cdf&& cdf) {
    const auto r = ks_measure(data, std::forward<Cdf>(cdf));
    return r.d_plus + r.d_minus;
}

// ---------------------------------------------------------------------------
// Comparison

/// A fitted model as seen by the comparison: a CDF, a mean-NLL evaluator and
/// the number of estimated parameters.
struct CandidateModel {
    std::string name;
    std::size_t parameter_count = 0;
    std::function<double(double)> cdf;
    std::function<NllResult(std::span<const double>)> nll;
};

inline CandidateModel make_candidate(const GeneratedDistribution& d, std::string name = "pgml") {
    const std::size_t p = 2 + free_parameter_count(d.spec().g1) + free_parameter_count(d.spec().g2);
    return {std::move(name), p, [d](double y) { return d.cdf(y); },
            [d](std::span<const double> data) { return d.nll(data); }};
}

inline CandidateModel make_candidate(const BaselineModel& m) {
    return {m.name(), m.parameter_count(), [m](double y) { return m.cdf(y); },
            [m](std::span<const double> data) {
                NllResult r;
                r.value = m.nll(data);
                r.used = data.size();
                return r;
            }};
}

struct GofOptions {
    double trim = 0.05;
    std::size_t bins = 10;
};

struct GofReport {
    std::string model_name;
    bool ok = true;
    std::string error;
    double chi2 = 0.0;
    int chi2_dof = 0;
    double chi2_pvalue = 0.0;
    double m_ks = 0.0;
    double m_kuiper = 0.0;
    double nll = 0.0;
    std::size_t nll_excluded = 0;
    std::size_t n = 0;
    std::size_t parameters = 0;
    double trim = 0.05;
    std::size_t bins = 10;
    // 1-based ranks among successful models (0 for failures). Chi-square is
    // ranked by p-value, larger first; the others smaller first.
    std::size_t rank_chi2 = 0;
    std::size_t rank_ks = 0;
    std::size_t rank_kuiper = 0;
    std::size_t rank_nll = 0;

    bool operator==(const GofReport&) const = default;
};

inline GofReport evaluate_model(std::span<const double> data, const CandidateModel& model,
                                const GofOptions& opt = {}) {
    GofReport r;
    r.model_name = model.name;
    r.n = data.size();
    r.parameters = model.parameter_count;
    r.trim = opt.trim;
    r.bins = opt.bins;
    try {
        const auto chi = chi_square(data, model.cdf, model.parameter_count, opt.trim, opt.bins);
        r.chi2 = chi.statistic;
        r.chi2_dof = chi.dof;
        r.chi2_pvalue = chi.pvalue;
        const auto ks = ks_measure(data, model.cdf);
        r.m_ks = ks.m_ks;
        r.m_kuiper = ks.d_plus + ks.d_minus;
        const auto nll = model.nll(data);
        r.nll = nll.value;
        r.nll_excluded = nll.excluded;
    } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
    }
    return r;
}

namespace detail {

template <class Key, class Assign>
void assign_ranks(std::vector<GofReport>& reports, Key key, Assign assign) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < reports.size(); ++i)
        if (reports[i].ok) idx.push_back(i);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const double ka = key(reports[a]), kb = key(reports[b]);
        const bool na = std::isnan(ka), nb = std::isnan(kb);
        if (na != nb) return nb;
        if (!na && ka != kb) return ka < kb;
        return reports[a].model_name < reports[b].model_name;
    });
    for (std::size_t r = 0; r < idx.size(); ++r) assign(reports[idx[r]], r + 1);
}

} // namespace detail

/// One report per model with per-metric ranks; ties broken by model name.
/// A model that throws becomes a failure entry instead of aborting. The list
/// is ordered by NLL rank, failures last.
inline std::vector<GofReport> gof_compare(std::span<const double> data,
                                          const std::vector<CandidateModel>& models,
                                          const GofOptions& opt = {}) {
    if (models.size() < 2) throw DomainError("gof_compare: need at least two models");
    std::vector<GofReport> reports;
    reports.reserve(models.size());
    for (const auto& m : models) reports.push_back(evaluate_model(data, m, opt));

    detail::assign_ranks(reports, [](const GofReport& r) { return -r.chi2_pvalue; },
                         [](GofReport& r, std::size_t k) { r.rank_chi2 = k; });
    detail::assign_ranks(reports, [](const GofReport& r) { return r.m_ks; },
                         [](GofReport& r, std::size_t k) { r.rank_ks = k; });
    detail::assign_ranks(reports, [](const GofReport& r) { return r.m_kuiper; },
                         [](GofReport& r, std::size_t k) { r.rank_kuiper = k; });
    detail::assign_ranks(reports, [](const GofReport& r) { return r.nll; },
                         [](GofReport& r, std::size_t k) { r.rank_nll = k; });

    std::stable_sort(reports.begin(), reports.end(), [](const GofReport& a, const GofReport& b) {
        if (a.ok != b.ok) return a.ok;
        if (a.rank_nll != b.rank_nll) return a.rank_nll < b.rank_nll;
        return a.model_name < b.model_name;
    });
    return reports;
}

} // namespace heavytail
