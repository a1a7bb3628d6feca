#pragma once

// Command-line front end. run() parses arguments, dispatches to a command
// and maps failures to exit codes:
//   0 success, 2 usage error, 3 data error, 4 numerical failure.
// Failures are reported on stderr as {"error": {...}}.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "baselines.hpp"
#include "errors.hpp"
#include "fit.hpp"
#include "generated.hpp"
#include "gof.hpp"
#include "scenarios.hpp"
#include "serialize.hpp"
#include "series.hpp"
#include "tail.hpp"
#include "transform.hpp"

namespace heavytail::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

/// Bad flags or flag values.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMinObservations = 100;

namespace detail {

namespace fs = std::filesystem;

inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot open '" + p.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path() && !fs::exists(p.parent_path()))
        throw DataError("output directory '" + p.parent_path().string() + "' does not exist");
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + p.string() + "'");
    out << text;
    if (!out) throw DataError("failed writing '" + p.string() + "'");
}

inline std::vector<std::string> parse_models(const std::string& list) {
    std::vector<std::string> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item != "normal" && item != "laplace" && item != "t" && item != "pgml")
            throw UsageError("unknown model '" + item + "' (valid: normal, laplace, t, pgml)");
        if (std::find(out.begin(), out.end(), item) != out.end())
            throw UsageError("model '" + item + "' listed twice");
        out.push_back(item);
    }
    if (out.empty()) throw UsageError("--models must name at least one model");
    return out;
}

inline BaselineKind baseline_kind(const std::string& name) {
    if (name == "normal") return BaselineKind::Normal;
    if (name == "laplace") return BaselineKind::Laplace;
    return BaselineKind::StudentT;
}

inline BaseDistribution parse_base(const std::string& s) {
    if (s == "gaussian") return BaseDistribution::gaussian();
    if (s == "exponential") return BaseDistribution::exponential();
    if (s.rfind("t:", 0) == 0) {
        const auto dof = heavytail::detail::parse_real(std::string_view(s).substr(2));
        if (!dof || !(*dof > 0.0)) throw UsageError("bad t base '" + s + "'");
        return BaseDistribution::student_t(*dof);
    }
    throw UsageError("unknown base '" + s + "' (valid: gaussian, exponential, t:DOF)");
}

/// A spec file holds a TransformSpec object or a fit report whose pgml
/// entry carries one.
inline TransformSpec load_spec(const fs::path& p) {
    const auto j = parse_json(read_file(p));
    TransformSpec spec;
    try {
        if (j.is_object() && j.contains("pgml")) {
            if (j["pgml"].is_null()) throw DataError("report '" + p.string() + "' has no pgml fit");
            spec = spec_from_json(j["pgml"]["spec"]);
        } else {
            spec = spec_from_json(j);
        }
    } catch (const FormatError& e) {
        throw DataError("spec file '" + p.string() + "': " + e.what());
    }
    const auto report = validate_transform(spec);
    if (!report.passed) throw DataError("spec file '" + p.string() + "': " + report.message);
    return spec;
}

inline std::vector<double> load_returns(const fs::path& p, Frequency freq) {
    const auto series = read_series_csv(p);
    auto r = series_returns(series, freq);
    if (r.size() < kMinObservations)
        throw DataError("'" + p.string() + "' yields " + std::to_string(r.size()) +
                        " observations; at least " + std::to_string(kMinObservations) +
                        " are needed to support the 99-level quantile grid (use a longer "
                        "series or a higher frequency)");
    return r;
}

inline std::string gof_csv(const std::vector<GofReport>& reports) {
    std::string out = "model_name,ok,chi2,chi2_dof,chi2_pvalue,m_ks,m_kuiper,nll,n,rank_chi2,"
                      "rank_ks,rank_kuiper,rank_nll\n";
    for (const auto& r : reports) {
        out += r.model_name + "," + (r.ok ? "1" : "0") + "," + format_real(r.chi2) + "," +
               std::to_string(r.chi2_dof) + "," + format_real(r.chi2_pvalue) + "," +
               format_real(r.m_ks) + "," + format_real(r.m_kuiper) + "," + format_real(r.nll) +
               "," + std::to_string(r.n) + "," + std::to_string(r.rank_chi2) + "," +
               std::to_string(r.rank_ks) + "," + std::to_string(r.rank_kuiper) + "," +
               std::to_string(r.rank_nll) + "\n";
    }
    return out;
}

inline std::string ratio_csv(const RatioCurve& c) {
    std::string out = "x,ratio\n";
    for (const auto& p : c.points) out += format_real(p.x) + "," + format_real(p.ratio) + "\n";
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Commands

struct FitOptions {
    std::string input;
    std::string models = "normal,laplace,t,pgml";
    std::size_t grid = 99;
    std::size_t restarts = 3;
    std::uint64_t seed = 0;
    std::string frequency = "daily";
    std::string out;
};

/// Fits the requested models to one series and compares them.
inline RunReport fit_series(const std::string& id, std::span<const double> data,
                            const RunConfig& cfg) {
    RunReport report;
    report.series = id;
    report.n = data.size();
    report.config = cfg;

    std::vector<CandidateModel> candidates;
    std::optional<GeneratedDistribution> pgml;
    for (const auto& m : cfg.models) {
        if (m == "pgml") {
            FitConfig fc;
            fc.grid = QuantileGrid::evenly_spaced(cfg.grid);
            fc.restarts = cfg.restarts;
            fc.seed = cfg.seed;
            fc.max_iters = cfg.max_iters;
            fc.step_size = cfg.step_size;
            fc.tolerance = cfg.tolerance;
            report.pgml = fit_quantile_regression(BaseDistribution::gaussian(), data, fc);
            pgml.emplace(BaseDistribution::gaussian(), report.pgml->spec);
            candidates.push_back(make_candidate(*pgml));
        } else {
            report.baselines.push_back(mle_fit(detail::baseline_kind(m), data));
            candidates.push_back(make_candidate(report.baselines.back()));
        }
    }
    const GofOptions gopt{cfg.trim, cfg.bins};
    if (candidates.size() >= 2) {
        report.gof = gof_compare(data, candidates, gopt);
    } else {
        auto r = evaluate_model(data, candidates.front(), gopt);
        if (r.ok) r.rank_chi2 = r.rank_ks = r.rank_kuiper = r.rank_nll = 1;
        report.gof.push_back(r);
    }

    // Right-tail diagnostics of the data, plus the fitted PGML's divergence
    // from its matched Gaussian when it was fitted.
    try {
        TailReport tail;
        tail.k_used = default_hill_k(data.size());
        tail.hill_estimate = hill_estimator(data, tail.k_used);
        tail.hill_stability = hill_stability(data);
        if (pgml) {
            tail.predicted_index = predicted_index(pgml->base(), pgml->spec().g1);
            tail.ratio_curve = generated_ratio_curve(*pgml, 2.0 * pgml->quantile(1.0 - 1e-9), 200);
        }
        report.tail = std::move(tail);
    } catch (const DomainError&) {
        // Too few positive extremes for a Hill estimate; leave tail out.
    }
    return report;
}

// ---------------------------------------------------------------------------
// Error reporting

inline int report_error(std::ostream& err, int code, const std::string& kind,
                        const std::string& message, std::optional<std::size_t> row = {},
                        const std::string& file = {}) {
    Json e{{"code", code}, {"kind", kind}, {"message", message}};
    if (row && *row > 0) e["row"] = *row;
    if (!file.empty()) e["file"] = file;
    err << Json{{"error", e}}.dump() << "\n";
    return code;
}

/// Runs `body`, mapping exceptions to exit codes.
template <class Body>
int guarded(std::ostream& err, Body&& body, const std::string& file = {}) {
    try {
        body();
        return kOk;
    } catch (const UsageError& e) {
        return report_error(err, kUsage, "usage", e.what(), {}, file);
    } catch (const DataError& e) {
        return report_error(err, kData, "data", e.what(), e.row(), file);
    } catch (const FormatError& e) {
        return report_error(err, kData, "data", e.what(), {}, file);
    } catch (const DegenerateDataError& e) {
        return report_error(err, kData, "data", e.what(), {}, file);
    } catch (const std::exception& e) {
        return report_error(err, kNumerical, "numerical", e.what(), {}, file);
    }
}

inline int cmd_fit(const FitOptions& o, std::ostream& err) {
    namespace fs = std::filesystem;
    RunConfig cfg;
    int code = guarded(err, [&] {
        cfg.input = o.input;
        cfg.models = detail::parse_models(o.models);
        parse_frequency(o.frequency);
        cfg.frequency = o.frequency;
        if (o.grid < 1) throw UsageError("--grid must be at least 1");
        cfg.grid = o.grid;
        cfg.restarts = o.restarts;
        cfg.seed = o.seed;
    });
    if (code != kOk) return code;

    auto run_one = [&](const fs::path& in, const fs::path& out, std::ostream& e) {
        return guarded(
            e,
            [&] {
                const auto data = detail::load_returns(in, parse_frequency(cfg.frequency));
                RunConfig c = cfg;
                c.input = in.string();
                const auto report = fit_series(in.stem().string(), data, c);
                detail::write_file(out, dump(to_json(report)));
            },
            in.string());
    };

    std::error_code ec;
    if (!fs::is_directory(o.input, ec)) return run_one(o.input, o.out, err);

    // One series per worker; reports are independent files.
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(o.input))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
        return report_error(err, kData, "data", "no .csv files in '" + o.input + "'");
    if (!fs::is_directory(o.out, ec))
        return report_error(err, kUsage, "usage",
                            "--out must be an existing directory when --input is one");

    std::vector<int> codes(files.size(), kOk);
    std::vector<std::string> messages(files.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < files.size(); i = next++) {
            std::ostringstream e;
            codes[i] = run_one(files[i], fs::path(o.out) / (files[i].stem().string() + ".json"), e);
            messages[i] = e.str();
        }
    };
    const std::size_t n_threads =
        std::min<std::size_t>(files.size(), std::max(1u, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    int result = kOk;
    for (std::size_t i = 0; i < files.size(); ++i) {
        err << messages[i];
        if (result == kOk) result = codes[i];
    }
    return result;
}

struct SampleOptions {
    std::string spec;
    std::string base = "gaussian";
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string out;
};

inline int cmd_sample(const SampleOptions& o, std::ostream& err) {
    return guarded(err, [&] {
        if (o.n < 1) throw UsageError("--n must be at least 1");
        const auto base = detail::parse_base(o.base);
        const GeneratedDistribution d(base, detail::load_spec(o.spec));
        std::string text = "return\n";
        for (double v : d.sample(o.n, o.seed)) text += detail::format_real(v) + "\n";
        detail::write_file(o.out, text);
    });
}

struct QqOptions {
    std::string spec;
    std::string base = "gaussian";
    std::size_t levels = 99;
    std::string out;
};

inline int cmd_qq(const QqOptions& o, std::ostream& err) {
    return guarded(err, [&] {
        if (o.levels < 1) throw UsageError("--levels must be at least 1");
        const auto base = detail::parse_base(o.base);
        const GeneratedDistribution d(base, detail::load_spec(o.spec));
        const auto grid = QuantileGrid::evenly_spaced(o.levels);
        std::string text = "alpha,base_quantile,quantile\n";
        for (double a : grid.levels()) {
            const double x = base.quantile(a);
            text += detail::format_real(a) + "," + detail::format_real(x) + "," +
                    detail::format_real(eval_f(d.spec(), x)) + "\n";
        }
        detail::write_file(o.out, text);
    });
}

struct GofCmdOptions {
    std::string input;
    std::string spec;
    std::string models = "normal,laplace,t,pgml";
    std::string frequency = "daily";
    std::string out;
};

/// Scores a given spec (not refitted) against MLE baselines. The report is
/// CSV unless --out ends in .json.
inline int cmd_gof(const GofCmdOptions& o, std::ostream& err) {
    return guarded(err, [&] {
        const auto models = detail::parse_models(o.models);
        const bool wants_pgml = std::find(models.begin(), models.end(), "pgml") != models.end();
        if (wants_pgml && o.spec.empty()) throw UsageError("model pgml needs --spec");
        const auto data = detail::load_returns(o.input, parse_frequency(o.frequency));
        std::optional<GeneratedDistribution> pgml;
        std::vector<BaselineModel> baselines;
        std::vector<CandidateModel> candidates;
        for (const auto& m : models) {
            if (m == "pgml") {
                pgml.emplace(BaseDistribution::gaussian(), detail::load_spec(o.spec));
                candidates.push_back(make_candidate(*pgml));
            } else {
                baselines.push_back(mle_fit(detail::baseline_kind(m), data));
                candidates.push_back(make_candidate(baselines.back()));
            }
        }
        std::vector<GofReport> reports;
        if (candidates.size() >= 2) {
            reports = gof_compare(data, candidates);
        } else {
            reports.push_back(evaluate_model(data, candidates.front()));
            if (reports.front().ok)
                reports.front().rank_chi2 = reports.front().rank_ks = reports.front().rank_kuiper =
                    reports.front().rank_nll = 1;
        }
        if (std::filesystem::path(o.out).extension() == ".json") {
            Json a = Json::array();
            for (const auto& r : reports) a.push_back(to_json(r));
            detail::write_file(o.out, dump(a));
        } else {
            detail::write_file(o.out, detail::gof_csv(reports));
        }
    });
}

struct TailcheckOptions {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string out;
};

/// Path of the ratio CSV written next to a tailcheck report.
inline std::string ratio_csv_path(const std::string& out) {
    std::filesystem::path p(out);
    p.replace_extension();
    return p.string() + ".ratio.csv";
}

inline int cmd_tailcheck(const TailcheckOptions& o, std::ostream& err) {
    return guarded(err, [&] {
        TailScenario sc;
        try {
            sc = make_scenario(o.scenario);
        } catch (const DomainError& e) {
            throw UsageError(e.what());
        }
        if (scenario_needs_seed(sc) && !o.seed)
            throw UsageError("scenario '" + sc.name + "' is randomized; pass --seed");
        const auto r = run_scenario(sc, o.seed);
        using heavytail::detail::number_to_json;
        Json j{{"scenario", r.scenario},
               {"tool_version", kToolVersion},
               {"seed", r.seed ? Json(*r.seed) : Json(nullptr)},
               {"samples", r.samples},
               {"spec", to_json(sc.spec)},
               {"base", sc.base.name()},
               {"passed", r.passed},
               {"hill_tolerance", number_to_json(sc.hill_tolerance)},
               {"relative_error", number_to_json(r.relative_error)},
               {"hill_within_tolerance", r.hill_within_tolerance},
               {"monotone_from", number_to_json(r.monotone_from)},
               {"ratio_increasing", r.ratio_increasing},
               {"max_ratio", number_to_json(r.max_ratio)},
               {"tail", to_json(r.report)}};
        detail::write_file(o.out, dump(j));
        detail::write_file(ratio_csv_path(o.out), detail::ratio_csv(r.report.ratio_curve));
    });
}

struct ReturnsOptions {
    std::string input;
    std::string frequency = "daily";
    std::string out;
};

inline int cmd_returns(const ReturnsOptions& o, std::ostream& err) {
    return guarded(err, [&] {
        Frequency freq;
        try {
            freq = parse_frequency(o.frequency);
        } catch (const DomainError& e) {
            throw UsageError(e.what());
        }
        const auto series = read_series_csv(o.input);
        std::string text = "return\n";
        for (double r : series_returns(series, freq)) text += detail::format_real(r) + "\n";
        detail::write_file(o.out, text);
    });
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Heavy-tailed distributions by monotone quantile transforms", "heavytail"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    FitOptions fit;
    auto* fit_cmd = app.add_subcommand("fit", "Fit PGML and baselines to a series (or a directory)");
    fit_cmd->add_option("--input", fit.input, "CSV file or directory of CSV files")->required();
    fit_cmd->add_option("--models", fit.models, "Comma-separated subset of normal,laplace,t,pgml");
    fit_cmd->add_option("--grid", fit.grid, "Number of quantile levels i/(N+1)");
    fit_cmd->add_option("--restarts", fit.restarts, "Optimizer restarts");
    fit_cmd->add_option("--seed", fit.seed, "Restart seed")->required();
    fit_cmd->add_option("--frequency", fit.frequency, "daily, weekly or monthly");
    fit_cmd->add_option("--out", fit.out, "Report file (directory when --input is one)")->required();

    SampleOptions sample;
    auto* sample_cmd = app.add_subcommand("sample", "Draw samples from a spec");
    sample_cmd->add_option("--spec", sample.spec, "Spec or fit report JSON")->required();
    sample_cmd->add_option("--base", sample.base, "gaussian, exponential or t:DOF");
    sample_cmd->add_option("--n", sample.n, "Sample size")->required();
    sample_cmd->add_option("--seed", sample.seed, "Sampling seed")->required();
    sample_cmd->add_option("--out", sample.out, "Output CSV")->required();

    QqOptions qq;
    auto* qq_cmd = app.add_subcommand("qq", "Emit Q-Q points of a spec");
    qq_cmd->add_option("--spec", qq.spec, "Spec or fit report JSON")->required();
    qq_cmd->add_option("--base", qq.base, "gaussian, exponential or t:DOF");
    qq_cmd->add_option("--levels", qq.levels, "Number of levels i/(N+1)");
    qq_cmd->add_option("--out", qq.out, "Output CSV")->required();

    GofCmdOptions gof;
    auto* gof_cmd = app.add_subcommand("gof", "Score a spec against fitted baselines");
    gof_cmd->add_option("--input", gof.input, "CSV series")->required();
    gof_cmd->add_option("--spec", gof.spec, "Spec or fit report JSON for pgml");
    gof_cmd->add_option("--models", gof.models, "Comma-separated subset of normal,laplace,t,pgml");
    gof_cmd->add_option("--frequency", gof.frequency, "daily, weekly or monthly");
    gof_cmd->add_option("--out", gof.out, "Output CSV (JSON if it ends in .json)")->required();

    TailcheckOptions tail;
    std::uint64_t tail_seed = 0;
    auto* tail_cmd = app.add_subcommand("tailcheck", "Run a built-in tail verification scenario");
    tail_cmd->add_option("--scenario", tail.scenario, scenario_list())->required();
    auto* tail_seed_opt = tail_cmd->add_option("--seed", tail_seed, "Seed (randomized scenarios)");
    tail_cmd->add_option("--out", tail.out, "Report JSON; ratio CSV goes beside it")->required();

    ReturnsOptions ret;
    auto* ret_cmd = app.add_subcommand("returns", "Compute log-returns from a price series");
    ret_cmd->add_option("--input", ret.input, "CSV series")->required();
    ret_cmd->add_option("--frequency", ret.frequency, "daily, weekly or monthly")->required();
    ret_cmd->add_option("--out", ret.out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        return report_error(err, kUsage, "usage", e.what());
    }

    if (*fit_cmd) return cmd_fit(fit, err);
    if (*sample_cmd) return cmd_sample(sample, err);
    if (*qq_cmd) return cmd_qq(qq, err);
    if (*gof_cmd) return cmd_gof(gof, err);
    if (*tail_cmd) {
        if (tail_seed_opt->count() > 0) tail.seed = tail_seed;
        return cmd_tailcheck(tail, err);
    }
    if (*ret_cmd) return cmd_returns(ret, err);
    return report_error(err, kUsage, "usage", "no command given");
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    std::vector<const char*> argv;
    argv.push_back("heavytail");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace heavytail::cli
