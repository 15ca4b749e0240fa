#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <thread>
#include <tuple>
#include <vector>

#include "dropin/cohort.hpp"
#include "dropin/error.hpp"
#include "dropin/ipw.hpp"
#include "dropin/metrics.hpp"
#include "dropin/rng.hpp"
#include "dropin/scenario.hpp"
#include "dropin/strategies.hpp"

namespace dropin {

enum class Setting { MT, NBT, NTT };

inline constexpr std::array<Setting, 3> kAllSettings{Setting::MT, Setting::NBT, Setting::NTT};

inline std::string_view to_string(Setting s) {
    switch (s) {
        case Setting::MT: return "MT";
        case Setting::NBT: return "NBT";
        case Setting::NTT: return "NTT";
    }
    return "?";
}

inline Setting parse_setting(std::string_view s) {
    for (auto v : kAllSettings)
        if (to_string(v) == s) return v;
    throw SchemaError("unknown performance setting '" + std::string(s) + "'");
}

inline std::vector<double> default_gamma_grid() { return {-3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.0}; }

struct ExperimentPlan {
    std::vector<ScenarioConfig> scenarios;
    std::vector<double> gamma_grid = default_gamma_grid();
    int iterations = 200;
    Seed master_seed = 20190601;
    std::vector<double> thresholds = default_thresholds();
    int workers = 1;
    InterceptSolverSettings intercept_solver;
    /// When false, intercepts are solved once at gamma = 0 and reused for every gamma.
    bool resolve_intercepts_per_gamma = true;
    StrategyOptions strategy_options;

    void validate() const {
        if (iterations < 1) throw ConfigError("plan: iterations must be >= 1");
        if (scenarios.empty()) throw ConfigError("plan: no scenarios");
        for (double g : gamma_grid)
            if (!(g <= 0.0)) throw ConfigError("plan: gamma values must be <= 0");
        for (std::size_t i = 0; i < scenarios.size(); ++i) {
            scenarios[i].validate();
            if (scenarios[i].name.empty() || scenarios[i].name.find_first_of(",\"\n\r") != std::string::npos)
                throw ConfigError("plan: scenario names must be non-empty and free of commas, quotes and newlines");
            for (std::size_t j = 0; j < i; ++j)
                if (scenarios[j].name == scenarios[i].name) throw ConfigError("plan: duplicate scenario '" + scenarios[i].name + "'");
        }
        for (std::size_t i = 0; i < thresholds.size(); ++i)
            if (!(thresholds[i] >= 0.0 && thresholds[i] <= 1.0) || (i > 0 && !(thresholds[i] > thresholds[i - 1])))
                throw ConfigError("plan: thresholds must be strictly increasing within [0,1]");
    }
};

inline std::vector<ScenarioConfig> default_scenarios() {
    return {rct_scenario(0.9), observational_scenario(0.5), observational_scenario(0.2)};
}

struct ResultRecord {
    std::string scenario;
    double gamma = 0.0;
    int iteration = 0;
    StrategyKind strategy = StrategyKind::IgnoreTreatment;
    Setting setting = Setting::MT;
    MetricValue metric;
};

struct IterationFailure {
    std::string scenario;
    double gamma = 0.0;
    int iteration = 0;
    std::string error_class;
    std::string message;
};

struct IterationOutcome {
    std::vector<ResultRecord> records;
    std::optional<IterationFailure> failure;
    std::optional<WeightSummary> msm_weights;
};

struct IterationOptions {
    std::vector<double> thresholds = default_thresholds();
    StrategyOptions strategy_options;
};

// ---------------------------------------------------------------------------
// Seeds

/// FNV-1a, used to fold scenario names into seeds.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Seed of one (scenario, gamma, iteration) cell. Depends on values, not plan
/// positions, so a cell reproduces in any plan that contains it.
inline Seed iteration_seed(Seed master, std::string_view scenario, double gamma, int iteration) {
    const double g = gamma == 0.0 ? 0.0 : gamma;  // fold -0 into +0
    return derive_seed(master, {fnv1a(scenario), std::bit_cast<std::uint64_t>(g), static_cast<std::uint64_t>(iteration)});
}

// ---------------------------------------------------------------------------
// One iteration

/// Scenario with gamma set and intercepts solved for it.
inline ScenarioConfig prepare_scenario(ScenarioConfig c, double gamma, const InterceptSolverSettings& solver,
                                       bool resolve_per_gamma = true) {
    c.gamma = gamma;
    if (resolve_per_gamma) return solve_intercepts(c, solver);
    ScenarioConfig reference = c;
    reference.gamma = 0.0;
    reference = solve_intercepts(reference, solver);
    reference.gamma = gamma;
    return reference;
}

namespace detail {

inline void evaluate_setting(std::vector<ResultRecord>& out, const ResultRecord& proto, PredictionSet preds) {
    const auto cal = calibration(preds);
    auto push = [&](MetricName m, double v) {
        ResultRecord r = proto;
        r.metric = {m, v, std::nullopt};
        out.push_back(std::move(r));
    };
    push(MetricName::CalibrationIntercept, cal.intercept);
    push(MetricName::CalibrationSlope, cal.slope);
    push(MetricName::CITL_offset, cal.citl_offset);
    push(MetricName::AUC, auc(preds));
    push(MetricName::Brier, brier(preds));
}

}  // namespace detail

/// Generates the development and test cohorts of one iteration, fits every
/// strategy and evaluates it in MT, NBT and NTT plus NTT allocation.
///
/// MT and NBT use each model's prediction on observed covariates; NTT uses
/// the E3 prediction. Any toolkit error becomes a failure record.
inline IterationOutcome run_iteration(const ScenarioConfig& scenario, int iteration, Seed master_seed,
                                      const IterationOptions& options = {}) {
    IterationOutcome out;
    try {
        if (!scenario.intercepts_solved()) throw ConfigError("run_iteration: intercepts not solved");
        const Seed seed = iteration_seed(master_seed, scenario.name, scenario.gamma, iteration);
        const Cohort dev = generate_development(scenario, derive_seed(seed, {0}));
        const Cohort mt = generate_test_mt(scenario, derive_seed(seed, {1}));
        const Cohort ntt = generate_test_ntt(scenario, derive_seed(seed, {2}));
        const Cohort nbt = filter_nbt(mt);
        if (nbt.size() == 0) throw EvaluationError("run_iteration: NBT subset is empty");

        auto outcomes_of = [](const Cohort& c) {
            std::vector<int> y;
            y.reserve(c.size());
            for (const auto& r : c.rows) y.push_back(r.y);
            return y;
        };
        const auto y_mt = outcomes_of(mt), y_nbt = outcomes_of(nbt), y_ntt = outcomes_of(ntt);

        for (auto kind : kAllStrategies) {
            const FittedCPM model = fit_strategy(kind, dev, options.strategy_options);
            if (model.weights_used) out.msm_weights = model.weights_used;

            auto observed_lp = [&](const Cohort& c) {
                std::vector<double> lp;
                lp.reserve(c.size());
                for (const auto& r : c.rows) lp.push_back(model.linear_predictor(r.x0, r.a0, r.a1));
                return lp;
            };
            std::vector<double> e3_lp;
            e3_lp.reserve(ntt.size());
            for (const auto& r : ntt.rows) e3_lp.push_back(model.linear_predictor(r.x0, 0, 0));

            ResultRecord proto{scenario.name, scenario.gamma, iteration, kind, Setting::MT, {}};
            detail::evaluate_setting(out.records, proto, PredictionSet::from_linear_predictors(observed_lp(mt), y_mt));
            proto.setting = Setting::NBT;
            detail::evaluate_setting(out.records, proto, PredictionSet::from_linear_predictors(observed_lp(nbt), y_nbt));
            proto.setting = Setting::NTT;
            auto ntt_preds = PredictionSet::from_linear_predictors(std::move(e3_lp), y_ntt);
            detail::evaluate_setting(out.records, proto, ntt_preds);

            if (!options.thresholds.empty())
                for (const auto& [t, share] : allocation_curve(ntt_preds.predictions, options.thresholds)) {
                    ResultRecord r = proto;
                    r.metric = {MetricName::AllocationProportion, share, t};
                    out.records.push_back(std::move(r));
                }
        }
    } catch (const Error& e) {
        out.records.clear();
        out.failure = IterationFailure{scenario.name, scenario.gamma, iteration, e.kind(), e.what()};
    }
    return out;
}

// ---------------------------------------------------------------------------
// Summaries

struct SummaryRecord {
    std::string scenario;
    double gamma = 0.0;
    StrategyKind strategy = StrategyKind::IgnoreTreatment;
    Setting setting = Setting::MT;
    MetricName metric = MetricName::AUC;
    std::optional<double> threshold;
    double mean = 0.0;
    double empirical_sd = 0.0;
    double se_of_mean = 0.0;
    int n_iterations = 0;
};

/// Groups by (scenario, gamma, strategy, setting, metric, threshold).
/// Scenarios keep first-appearance order; values are accumulated in record
/// order, so the same records always give bit-identical summaries.
inline std::vector<SummaryRecord> summarize(const std::vector<ResultRecord>& records) {
    std::map<std::string, std::size_t, std::less<>> scenario_order;
    for (const auto& r : records) scenario_order.try_emplace(r.scenario, scenario_order.size());

    using Key = std::tuple<std::size_t, double, int, int, int, bool, double>;
    std::map<Key, std::vector<double>> groups;
    std::map<std::size_t, std::string> scenario_names;
    for (const auto& r : records) {
        const auto si = scenario_order.at(r.scenario);
        scenario_names.try_emplace(si, r.scenario);
        groups[Key{si, r.gamma, static_cast<int>(r.strategy), static_cast<int>(r.setting), static_cast<int>(r.metric.name),
                   r.metric.threshold.has_value(), r.metric.threshold.value_or(0.0)}]
            .push_back(r.metric.value);
    }

    std::vector<SummaryRecord> out;
    out.reserve(groups.size());
    for (const auto& [key, values] : groups) {
        SummaryRecord s;
        s.scenario = scenario_names.at(std::get<0>(key));
        s.gamma = std::get<1>(key);
        s.strategy = static_cast<StrategyKind>(std::get<2>(key));
        s.setting = static_cast<Setting>(std::get<3>(key));
        s.metric = static_cast<MetricName>(std::get<4>(key));
        if (std::get<5>(key)) s.threshold = std::get<6>(key);
        s.n_iterations = static_cast<int>(values.size());
        double total = 0.0;
        for (double v : values) total += v;
        s.mean = total / static_cast<double>(values.size());
        if (values.size() > 1) {
            double ss = 0.0;
            for (double v : values) ss += (v - s.mean) * (v - s.mean);
            s.empirical_sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
        }
        s.se_of_mean = s.empirical_sd / std::sqrt(static_cast<double>(values.size()));
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Experiment

struct CellReport {
    std::string scenario;
    double gamma = 0.0;
    std::optional<double> alpha0, alpha1, alphaY;
    int completed = 0;
    int failed = 0;
    std::optional<std::string> setup_error;
    /// Mean of per-iteration MSM weight means and the largest weight seen.
    double weight_mean = 0.0;
    double weight_max = 0.0;

    bool degraded() const {
        const int total = completed + failed;
        return setup_error.has_value() || (total > 0 && static_cast<double>(failed) > 0.05 * total);
    }
};

struct ExperimentResult {
    std::vector<ResultRecord> records;  // canonical (scenario, gamma, iteration, ...) order
    std::vector<SummaryRecord> summary;
    std::vector<IterationFailure> failures;
    std::vector<CellReport> cells;
    double wall_seconds = 0.0;

    bool degraded() const {
        return std::any_of(cells.begin(), cells.end(), [](const CellReport& c) { return c.degraded(); });
    }
};

namespace detail {

/// Runs task(i) for i in [0, n) on `workers` threads; results are indexed,
/// so scheduling never affects output order.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task) {
    const auto hw = std::max(1u, std::thread::hardware_concurrency());
    const auto count = static_cast<std::size_t>(workers > 0 ? workers : static_cast<int>(hw));
    if (count <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(count, n); ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) task(i);
        });
    for (auto& th : pool) th.join();
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentPlan& plan) {
    plan.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n_gamma = plan.gamma_grid.size();
    const std::size_t n_cells = plan.scenarios.size() * n_gamma;

    std::vector<std::optional<ScenarioConfig>> prepared(n_cells);
    ExperimentResult result;
    result.cells.resize(n_cells);
    detail::parallel_for(n_cells, plan.workers, [&](std::size_t cell) {
        const auto& sc = plan.scenarios[cell / n_gamma];
        auto& report = result.cells[cell];
        report.scenario = sc.name;
        report.gamma = plan.gamma_grid[cell % n_gamma];
        try {
            prepared[cell] = prepare_scenario(sc, report.gamma, plan.intercept_solver, plan.resolve_intercepts_per_gamma);
            report.alpha0 = prepared[cell]->alpha0;
            report.alpha1 = prepared[cell]->alpha1;
            report.alphaY = prepared[cell]->alphaY;
        } catch (const Error& e) {
            report.setup_error = std::string(e.kind()) + ": " + e.what();
        }
    });

    const auto iters = static_cast<std::size_t>(plan.iterations);
    std::vector<IterationOutcome> outcomes(n_cells * iters);
    const IterationOptions options{plan.thresholds, plan.strategy_options};
    detail::parallel_for(outcomes.size(), plan.workers, [&](std::size_t unit) {
        const auto cell = unit / iters;
        const int iteration = static_cast<int>(unit % iters);
        if (!prepared[cell]) return;
        outcomes[unit] = run_iteration(*prepared[cell], iteration, plan.master_seed, options);
    });

    for (std::size_t unit = 0; unit < outcomes.size(); ++unit) {
        auto& o = outcomes[unit];
        auto& cell = result.cells[unit / iters];
        if (cell.setup_error) continue;
        if (o.failure) {
            ++cell.failed;
            result.failures.push_back(std::move(*o.failure));
            continue;
        }
        ++cell.completed;
        if (o.msm_weights) {
            cell.weight_mean += o.msm_weights->mean;
            cell.weight_max = std::max(cell.weight_max, o.msm_weights->max);
        }
        std::move(o.records.begin(), o.records.end(), std::back_inserter(result.records));
    }
    for (auto& c : result.cells)
        if (c.completed > 0) c.weight_mean /= c.completed;

    result.summary = summarize(result.records);
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

// ---------------------------------------------------------------------------
// CSV

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
    if (v == 0.0) return "0";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw SchemaError("not a number: '" + std::string(s) + "'");
    return v;
}

inline constexpr std::string_view kResultsHeader = "scenario,gamma,iteration,strategy,setting,metric,threshold,value";
inline constexpr std::string_view kSummaryHeader = "scenario,gamma,strategy,setting,metric,threshold,mean,sd,se,n";

inline void write_results_csv(const std::vector<ResultRecord>& records, std::ostream& os) {
    os << kResultsHeader << '\n';
    for (const auto& r : records)
        os << r.scenario << ',' << format_double(r.gamma) << ',' << r.iteration << ',' << to_string(r.strategy) << ','
           << to_string(r.setting) << ',' << to_string(r.metric.name) << ','
           << (r.metric.threshold ? format_double(*r.metric.threshold) : "") << ',' << format_double(r.metric.value) << '\n';
}

inline void write_summary_csv(const std::vector<SummaryRecord>& rows, std::ostream& os) {
    os << kSummaryHeader << '\n';
    for (const auto& s : rows)
        os << s.scenario << ',' << format_double(s.gamma) << ',' << to_string(s.strategy) << ',' << to_string(s.setting)
           << ',' << to_string(s.metric) << ',' << (s.threshold ? format_double(*s.threshold) : "") << ','
           << format_double(s.mean) << ',' << format_double(s.empirical_sd) << ',' << format_double(s.se_of_mean) << ','
           << s.n_iterations << '\n';
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

inline std::vector<std::vector<std::string>> read_csv(std::istream& is, std::string_view header, std::size_t fields) {
    std::string line;
    if (!std::getline(is, line) || strip_cr(line) != header)
        throw SchemaError("CSV header mismatch; expected '" + std::string(header) + "'");
    std::vector<std::vector<std::string>> rows;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto parts = split_csv_line(line);
        if (parts.size() != fields)
            throw SchemaError("CSV line " + std::to_string(line_no) + ": expected " + std::to_string(fields) + " fields");
        rows.emplace_back(parts.begin(), parts.end());
    }
    return rows;
}

}  // namespace detail

inline std::vector<ResultRecord> read_results_csv(std::istream& is) {
    std::vector<ResultRecord> out;
    for (const auto& f : detail::read_csv(is, kResultsHeader, 8)) {
        ResultRecord r;
        r.scenario = f[0];
        r.gamma = parse_double(f[1]);
        r.iteration = static_cast<int>(parse_double(f[2]));
        r.strategy = parse_strategy(f[3]);
        r.setting = parse_setting(f[4]);
        r.metric.name = parse_metric(f[5]);
        if (!f[6].empty()) r.metric.threshold = parse_double(f[6]);
        r.metric.value = parse_double(f[7]);
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<SummaryRecord> read_summary_csv(std::istream& is) {
    std::vector<SummaryRecord> out;
    for (const auto& f : detail::read_csv(is, kSummaryHeader, 10)) {
        SummaryRecord s;
        s.scenario = f[0];
        s.gamma = parse_double(f[1]);
        s.strategy = parse_strategy(f[2]);
        s.setting = parse_setting(f[3]);
        s.metric = parse_metric(f[4]);
        if (!f[5].empty()) s.threshold = parse_double(f[5]);
        s.mean = parse_double(f[6]);
        s.empirical_sd = parse_double(f[7]);
        s.se_of_mean = parse_double(f[8]);
        s.n_iterations = static_cast<int>(parse_double(f[9]));
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Figure plot data

enum class Figure { F3, F4, F5, S1, S2, S3 };

inline std::string_view to_string(Figure f) {
    switch (f) {
        case Figure::F3: return "3";
        case Figure::F4: return "4";
        case Figure::F5: return "5";
        case Figure::S1: return "S1";
        case Figure::S2: return "S2";
        case Figure::S3: return "S3";
    }
    return "?";
}

inline Figure parse_figure(std::string_view s) {
    for (auto f : {Figure::F3, Figure::F4, Figure::F5, Figure::S1, Figure::S2, Figure::S3})
        if (to_string(f) == s) return f;
    throw ConfigError("unknown figure '" + std::string(s) + "' (expected 3, 4, 5, S1, S2 or S3)");
}

inline constexpr std::array<Figure, 6> kAllFigures{Figure::F3, Figure::F4, Figure::F5, Figure::S1, Figure::S2, Figure::S3};

inline std::string figure_filename(Figure f) { return "figure_" + std::string(to_string(f)) + ".csv"; }

/// Allocation figures show this gamma subset.
inline bool in_allocation_gamma_subset(double g) { return g == -3.0 || g == -2.0 || g == -1.0 || g == 0.0; }

/// Summary rows behind one figure:
///   3  calibration intercept, every scenario, setting and gamma
///   4  calibration slope, likewise
///   5  NTT allocation, "Observational: 50% treated", gamma in {-3,-2,-1,0}
///   S1 AUC and Brier, "RCT: 10% dropout"
///   S2 as 5 for "RCT: 10% dropout"
///   S3 as 5 for "Observational: 20% treated"
inline std::vector<SummaryRecord> figure_rows(const std::vector<SummaryRecord>& summary, Figure f) {
    auto select = [&](auto&& pred) {
        std::vector<SummaryRecord> out;
        for (const auto& s : summary)
            if (pred(s)) out.push_back(s);
        return out;
    };
    auto allocation_for = [&](std::string_view scenario) {
        return select([&](const SummaryRecord& s) {
            return s.scenario == scenario && s.metric == MetricName::AllocationProportion &&
                   in_allocation_gamma_subset(s.gamma);
        });
    };
    switch (f) {
        case Figure::F3: return select([](const SummaryRecord& s) { return s.metric == MetricName::CalibrationIntercept; });
        case Figure::F4: return select([](const SummaryRecord& s) { return s.metric == MetricName::CalibrationSlope; });
        case Figure::F5: return allocation_for("Observational: 50% treated");
        case Figure::S1:
            return select([](const SummaryRecord& s) {
                return s.scenario == "RCT: 10% dropout" && (s.metric == MetricName::AUC || s.metric == MetricName::Brier);
            });
        case Figure::S2: return allocation_for("RCT: 10% dropout");
        case Figure::S3: return allocation_for("Observational: 20% treated");
    }
    return {};
}

inline void write_figure_csv(const std::vector<SummaryRecord>& summary, Figure f, std::ostream& os) {
    write_summary_csv(figure_rows(summary, f), os);
}

// ---------------------------------------------------------------------------
// Output files

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p);
    if (!os) throw IoError("cannot open '" + p.string() + "' for writing");
    return os;
}

inline void close_out(std::ofstream& os, const std::filesystem::path& p) {
    os.close();
    if (!os) throw IoError("write failed for '" + p.string() + "'");
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

}  // namespace detail

inline void write_figure_files(const std::vector<SummaryRecord>& summary, const std::filesystem::path& out_dir,
                               std::span<const Figure> figures = kAllFigures) {
    detail::ensure_dir(out_dir);
    for (auto f : figures) {
        const auto p = out_dir / figure_filename(f);
        auto os = detail::open_out(p);
        write_figure_csv(summary, f, os);
        detail::close_out(os, p);
    }
}

inline void write_run_report(const ExperimentResult& r, std::string_view plan_echo, Seed master_seed, std::ostream& os) {
    os << "dropin run report\n";
    os << "master_seed: " << master_seed << '\n';
    os << "records: " << r.records.size() << '\n';
    int completed = 0;
    for (const auto& c : r.cells) completed += c.completed;
    os << "iterations completed: " << completed << '\n';
    os << "iterations failed: " << r.failures.size() << '\n';
    if (r.cells.empty() || completed == 0) os << "note: zero iterations contributed results\n";
    if (r.degraded()) os << "\n*** RUN DEGRADED: a cell failed setup or more than 5% of its iterations ***\n";
    os << "wall_seconds: " << format_double(r.wall_seconds) << "\n\n";

    os << "cells (scenario | gamma | alpha0 alpha1 alphaY | completed failed | mean sw, max sw)\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("-"); };
    for (const auto& c : r.cells) {
        os << "  " << c.scenario << " | " << format_double(c.gamma) << " | " << opt(c.alpha0) << ' ' << opt(c.alpha1) << ' '
           << opt(c.alphaY) << " | " << c.completed << ' ' << c.failed << " | " << format_double(c.weight_mean) << ", "
           << format_double(c.weight_max);
        if (c.degraded()) os << "  DEGRADED";
        if (c.setup_error) os << "  setup error: " << *c.setup_error;
        os << '\n';
    }
    if (!r.failures.empty()) {
        os << "\nfailures\n";
        for (const auto& f : r.failures)
            os << "  " << f.scenario << " | " << format_double(f.gamma) << " | iteration " << f.iteration << " | "
               << f.error_class << ": " << f.message << '\n';
    }
    os << "\nplan\n" << plan_echo << '\n';
}

/// Writes results.csv, summary.csv, run_report.txt and the figure CSVs.
inline void emit_outputs(const ExperimentResult& r, std::string_view plan_echo, Seed master_seed,
                         const std::filesystem::path& out_dir) {
    detail::ensure_dir(out_dir);
    {
        const auto p = out_dir / "results.csv";
        auto os = detail::open_out(p);
        write_results_csv(r.records, os);
        detail::close_out(os, p);
    }
    {
        const auto p = out_dir / "summary.csv";
        auto os = detail::open_out(p);
        write_summary_csv(r.summary, os);
        detail::close_out(os, p);
    }
    {
        const auto p = out_dir / "run_report.txt";
        auto os = detail::open_out(p);
        write_run_report(r, plan_echo, master_seed, os);
        detail::close_out(os, p);
    }
    write_figure_files(r.summary, out_dir);
}

}  // namespace dropin
