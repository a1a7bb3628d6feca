#pragma once

// JSON (de)serialization of specs, fitted models and reports. Non-finite
// numbers are written as the strings "nan", "inf" and "-inf".

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "baselines.hpp"
#include "errors.hpp"
#include "fit.hpp"
#include "gof.hpp"
#include "tail.hpp"
#include "transform.hpp"

namespace heavytail {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";

/// Raised for JSON that does not describe the expected object.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline Json number_to_json(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline double number_from_json(const Json& j, const char* what) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
    }
    throw FormatError(std::string("expected a number for '") + what + "'");
}

inline const Json& field(const Json& j, const char* key) {
    if (!j.is_object()) throw FormatError(std::string("expected an object holding '") + key + "'");
    const auto it = j.find(key);
    if (it == j.end()) throw FormatError(std::string("missing field '") + key + "'");
    return *it;
}

inline double real_field(const Json& j, const char* key) {
    return number_from_json(field(j, key), key);
}

template <class T>
T typed_field(const Json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw FormatError(std::string("field '") + key + "' has the wrong type");
    }
}

inline Json reals_to_json(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(number_to_json(x));
    return a;
}

inline std::vector<double> reals_from_json(const Json& j, const char* what) {
    if (!j.is_array()) throw FormatError(std::string("expected an array for '") + what + "'");
    std::vector<double> v;
    v.reserve(j.size());
    for (const auto& e : j) v.push_back(number_from_json(e, what));
    return v;
}

} // namespace detail

// ---------------------------------------------------------------------------
// TransformSpec

inline Json to_json(const GFamily& g) {
    Json params = Json::object();
    if (auto* p = std::get_if<PgmlUp>(&g)) {
        params["u"] = p->u;
        params["A"] = p->A;
    } else if (auto* p = std::get_if<PgmlDown>(&g)) {
        params["v"] = p->v;
        params["A"] = p->A;
    } else if (auto* p = std::get_if<ExpM1OverX>(&g)) {
        params["u"] = p->u;
    } else if (auto* p = std::get_if<IndicatorPower>(&g)) {
        params["u"] = p->u;
        params["A"] = p->A;
    } else if (auto* p = std::get_if<Tabulated>(&g)) {
        params["x"] = detail::reals_to_json(p->x);
        params["g"] = detail::reals_to_json(p->g);
        params["dg"] = detail::reals_to_json(p->dg);
    }
    return Json{{"family", family_name(g)}, {"params", params}};
}

inline GFamily gfamily_from_json(const Json& j) {
    const auto family = detail::typed_field<std::string>(j, "family");
    const Json empty = Json::object();
    const Json& p = j.contains("params") ? j["params"] : empty;
    if (family == "zero") return ZeroG{};
    if (family == "pgml_up") return PgmlUp{detail::real_field(p, "u"), detail::real_field(p, "A")};
    if (family == "pgml_down")
        return PgmlDown{detail::real_field(p, "v"), detail::real_field(p, "A")};
    if (family == "expm1_over_x") return ExpM1OverX{detail::real_field(p, "u")};
    if (family == "indicator_power")
        return IndicatorPower{detail::real_field(p, "u"), detail::real_field(p, "A")};
    if (family == "tabulated") {
        Tabulated t{detail::reals_from_json(detail::field(p, "x"), "x"),
                    detail::reals_from_json(detail::field(p, "g"), "g"),
                    detail::reals_from_json(detail::field(p, "dg"), "dg")};
        if (t.x.empty() || t.x.size() != t.g.size() || t.x.size() != t.dg.size())
            throw FormatError("tabulated family needs equal-length nonempty x, g, dg");
        return t;
    }
    throw FormatError("unknown g family '" + family + "'");
}

inline Json to_json(const TransformSpec& s) {
    return Json{{"mu", detail::number_to_json(s.mu)},
                {"sigma", detail::number_to_json(s.sigma)},
                {"g1", to_json(s.g1)},
                {"g2", to_json(s.g2)}};
}

/// Parses without validating; callers validate before use.
inline TransformSpec spec_from_json(const Json& j) {
    TransformSpec s;
    s.mu = detail::real_field(j, "mu");
    s.sigma = detail::real_field(j, "sigma");
    s.g1 = gfamily_from_json(detail::field(j, "g1"));
    s.g2 = gfamily_from_json(detail::field(j, "g2"));
    return s;
}

// ---------------------------------------------------------------------------
// Fits and baselines

inline Json to_json(const FitResult& r) {
    Json trace = Json::array();
    for (const auto& p : r.trace) trace.push_back(Json::array({p.iteration, detail::number_to_json(p.objective)}));
    return Json{{"spec", to_json(r.spec)},
                {"objective", detail::number_to_json(r.objective)},
                {"iterations", r.iterations},
                {"converged", r.converged},
                {"trace", trace}};
}

inline FitResult fit_result_from_json(const Json& j) {
    FitResult r;
    r.spec = spec_from_json(detail::field(j, "spec"));
    r.objective = detail::real_field(j, "objective");
    r.iterations = detail::typed_field<std::size_t>(j, "iterations");
    r.converged = detail::typed_field<bool>(j, "converged");
    if (j.contains("trace")) {
        for (const auto& p : j["trace"]) {
            if (!p.is_array() || p.size() != 2) throw FormatError("trace entries are [iteration, objective]");
            r.trace.push_back({p[0].get<std::size_t>(), detail::number_from_json(p[1], "trace")});
        }
    }
    return r;
}

inline Json to_json(const BaselineModel& m) {
    Json params = Json::object();
    if (auto* p = std::get_if<NormalModel>(&m.params())) {
        params["mu"] = detail::number_to_json(p->mu);
        params["sigma"] = detail::number_to_json(p->sigma);
    } else if (auto* p = std::get_if<LaplaceModel>(&m.params())) {
        params["mu"] = detail::number_to_json(p->mu);
        params["b"] = detail::number_to_json(p->b);
    } else if (auto* p = std::get_if<StudentTModel>(&m.params())) {
        params["mu"] = detail::number_to_json(p->mu);
        params["scale"] = detail::number_to_json(p->scale);
        params["dof"] = detail::number_to_json(p->dof);
    }
    return Json{{"kind", m.name()}, {"params", params}};
}

inline BaselineModel baseline_from_json(const Json& j) {
    const auto kind = detail::typed_field<std::string>(j, "kind");
    const Json& p = detail::field(j, "params");
    try {
        if (kind == "normal")
            return NormalModel{detail::real_field(p, "mu"), detail::real_field(p, "sigma")};
        if (kind == "laplace")
            return LaplaceModel{detail::real_field(p, "mu"), detail::real_field(p, "b")};
        if (kind == "t")
            return StudentTModel{detail::real_field(p, "mu"), detail::real_field(p, "scale"),
                                 detail::real_field(p, "dof")};
    } catch (const DomainError& e) {
        throw FormatError(std::string("invalid baseline parameters: ") + e.what());
    }
    throw FormatError("unknown baseline kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Reports

inline Json to_json(const GofReport& r) {
    using detail::number_to_json;
    return Json{{"model_name", r.model_name},
                {"ok", r.ok},
                {"error", r.error},
                {"chi2", number_to_json(r.chi2)},
                {"chi2_dof", r.chi2_dof},
                {"chi2_pvalue", number_to_json(r.chi2_pvalue)},
                {"m_ks", number_to_json(r.m_ks)},
                {"m_kuiper", number_to_json(r.m_kuiper)},
                {"nll", number_to_json(r.nll)},
                {"nll_excluded", r.nll_excluded},
                {"n", r.n},
                {"parameters", r.parameters},
                {"trim", number_to_json(r.trim)},
                {"bins", r.bins},
                {"rank_chi2", r.rank_chi2},
                {"rank_ks", r.rank_ks},
                {"rank_kuiper", r.rank_kuiper},
                {"rank_nll", r.rank_nll}};
}

inline GofReport gof_report_from_json(const Json& j) {
    using detail::real_field;
    using detail::typed_field;
    GofReport r;
    r.model_name = typed_field<std::string>(j, "model_name");
    r.ok = typed_field<bool>(j, "ok");
    r.error = typed_field<std::string>(j, "error");
    r.chi2 = real_field(j, "chi2");
    r.chi2_dof = typed_field<int>(j, "chi2_dof");
    r.chi2_pvalue = real_field(j, "chi2_pvalue");
    r.m_ks = real_field(j, "m_ks");
    r.m_kuiper = real_field(j, "m_kuiper");
    r.nll = real_field(j, "nll");
    r.nll_excluded = typed_field<std::size_t>(j, "nll_excluded");
    r.n = typed_field<std::size_t>(j, "n");
    r.parameters = typed_field<std::size_t>(j, "parameters");
    r.trim = real_field(j, "trim");
    r.bins = typed_field<std::size_t>(j, "bins");
    r.rank_chi2 = typed_field<std::size_t>(j, "rank_chi2");
    r.rank_ks = typed_field<std::size_t>(j, "rank_ks");
    r.rank_kuiper = typed_field<std::size_t>(j, "rank_kuiper");
    r.rank_nll = typed_field<std::size_t>(j, "rank_nll");
    return r;
}

inline Json to_json(const TailReport& r) {
    using detail::number_to_json;
    Json curve = Json::array();
    for (const auto& p : r.ratio_curve.points)
        curve.push_back(Json::array({number_to_json(p.x), number_to_json(p.ratio)}));
    Json stability = Json::array();
    for (const auto& h : r.hill_stability)
        stability.push_back(Json{{"k", h.k}, {"estimate", number_to_json(h.estimate)}});
    return Json{{"hill_estimate", number_to_json(r.hill_estimate)},
                {"k_used", r.k_used},
                {"predicted_index",
                 r.predicted_index ? number_to_json(*r.predicted_index) : Json(nullptr)},
                {"ratio_curve", curve},
                {"ratio_curve_truncated", r.ratio_curve.truncated},
                {"hill_stability", stability}};
}

inline TailReport tail_report_from_json(const Json& j) {
    TailReport r;
    r.hill_estimate = detail::real_field(j, "hill_estimate");
    r.k_used = detail::typed_field<std::size_t>(j, "k_used");
    const auto& pi = detail::field(j, "predicted_index");
    if (!pi.is_null()) r.predicted_index = detail::number_from_json(pi, "predicted_index");
    for (const auto& p : detail::field(j, "ratio_curve")) {
        if (!p.is_array() || p.size() != 2) throw FormatError("ratio_curve entries are [x, ratio]");
        r.ratio_curve.points.push_back(
            {detail::number_from_json(p[0], "x"), detail::number_from_json(p[1], "ratio")});
    }
    if (j.contains("ratio_curve_truncated"))
        r.ratio_curve.truncated = detail::typed_field<bool>(j, "ratio_curve_truncated");
    if (j.contains("hill_stability"))
        for (const auto& h : j["hill_stability"])
            r.hill_stability.push_back({detail::typed_field<std::size_t>(h, "k"),
                                        detail::real_field(h, "estimate")});
    return r;
}

/// Resolved settings of a fit run, echoed into its report.
struct RunConfig {
    std::string tool_version = kToolVersion;
    std::string input;
    std::vector<std::string> models;
    std::string frequency = "daily";
    std::string base = "gaussian";
    std::size_t grid = 99;
    std::size_t restarts = 3;
    std::uint64_t seed = 0;
    std::size_t max_iters = 5000;
    double step_size = 0.01;
    double tolerance = 1e-9;
    double trim = 0.05;
    std::size_t bins = 10;
    bool operator==(const RunConfig&) const = default;
};

struct RunReport {
    std::string series;
    std::size_t n = 0;
    RunConfig config;
    std::optional<FitResult> pgml;
    std::vector<BaselineModel> baselines;
    std::vector<GofReport> gof;
    std::optional<TailReport> tail;
    bool operator==(const RunReport&) const = default;
};

inline Json to_json(const RunConfig& c) {
    return Json{{"tool_version", c.tool_version},
                {"input", c.input},
                {"models", c.models},
                {"frequency", c.frequency},
                {"base", c.base},
                {"grid", c.grid},
                {"restarts", c.restarts},
                {"seed", c.seed},
                {"max_iters", c.max_iters},
                {"step_size", detail::number_to_json(c.step_size)},
                {"tolerance", detail::number_to_json(c.tolerance)},
                {"trim", detail::number_to_json(c.trim)},
                {"bins", c.bins}};
}

inline RunConfig run_config_from_json(const Json& j) {
    using detail::real_field;
    using detail::typed_field;
    RunConfig c;
    c.tool_version = typed_field<std::string>(j, "tool_version");
    c.input = typed_field<std::string>(j, "input");
    c.models = typed_field<std::vector<std::string>>(j, "models");
    c.frequency = typed_field<std::string>(j, "frequency");
    c.base = typed_field<std::string>(j, "base");
    c.grid = typed_field<std::size_t>(j, "grid");
    c.restarts = typed_field<std::size_t>(j, "restarts");
    c.seed = typed_field<std::uint64_t>(j, "seed");
    c.max_iters = typed_field<std::size_t>(j, "max_iters");
    c.step_size = real_field(j, "step_size");
    c.tolerance = real_field(j, "tolerance");
    c.trim = real_field(j, "trim");
    c.bins = typed_field<std::size_t>(j, "bins");
    return c;
}

inline Json to_json(const RunReport& r) {
    Json baselines = Json::array();
    for (const auto& b : r.baselines) baselines.push_back(to_json(b));
    Json gof = Json::array();
    for (const auto& g : r.gof) gof.push_back(to_json(g));
    Json j{{"series", r.series},
           {"n", r.n},
           {"config", to_json(r.config)},
           {"pgml", r.pgml ? to_json(*r.pgml) : Json(nullptr)},
           {"baselines", baselines},
           {"gof", gof}};
    if (r.tail) j["tail"] = to_json(*r.tail);
    return j;
}

inline RunReport run_report_from_json(const Json& j) {
    RunReport r;
    r.series = detail::typed_field<std::string>(j, "series");
    r.n = detail::typed_field<std::size_t>(j, "n");
    r.config = run_config_from_json(detail::field(j, "config"));
    const auto& pgml = detail::field(j, "pgml");
    if (!pgml.is_null()) r.pgml = fit_result_from_json(pgml);
    for (const auto& b : detail::field(j, "baselines")) r.baselines.push_back(baseline_from_json(b));
    for (const auto& g : detail::field(j, "gof")) r.gof.push_back(gof_report_from_json(g));
    if (j.contains("tail")) r.tail = tail_report_from_json(j["tail"]);
    return r;
}

/// Two-space indented text with a trailing newline.
inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Json parse_json(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("malformed JSON: ") + e.what());
    }
}

} // namespace heavytail
