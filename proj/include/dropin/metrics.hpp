#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dropin/error.hpp"
#include "dropin/logistic.hpp"

namespace dropin {

struct PredictionSet {
    std::vector<double> predictions;
    std::vector<int> outcomes;
    std::vector<double> linear_predictors;

    /// Builds the set from linear predictors; predictions are their expit.
    static PredictionSet from_linear_predictors(std::vector<double> lp, std::vector<int> y) {
        if (lp.size() != y.size()) throw SchemaError("prediction set: length mismatch");
        PredictionSet s;
        s.predictions.reserve(lp.size());
        for (double v : lp) s.predictions.push_back(expit(v));
        s.linear_predictors = std::move(lp);
        s.outcomes = std::move(y);
        return s;
    }

    std::size_t size() const noexcept { return predictions.size(); }
};

enum class MetricName { CalibrationIntercept, CalibrationSlope, CITL_offset, AUC, Brier, AllocationProportion };

inline std::string_view to_string(MetricName m) {
    switch (m) {
        case MetricName::CalibrationIntercept: return "cal_intercept";
        case MetricName::CalibrationSlope: return "cal_slope";
        case MetricName::CITL_offset: return "citl_offset";
        case MetricName::AUC: return "auc";
        case MetricName::Brier: return "brier";
        case MetricName::AllocationProportion: return "allocation";
    }
    return "?";
}

inline MetricName parse_metric(std::string_view s) {
    for (auto m : {MetricName::CalibrationIntercept, MetricName::CalibrationSlope, MetricName::CITL_offset,
                   MetricName::AUC, MetricName::Brier, MetricName::AllocationProportion})
        if (to_string(m) == s) return m;
    throw SchemaError("unknown metric '" + std::string(s) + "'");
}

struct MetricValue {
    MetricName name = MetricName::AUC;
    double value = 0.0;
    std::optional<double> threshold;  // AllocationProportion only
};

namespace detail {

inline void require_both_classes(std::span<const int> y, const char* what) {
    std::size_t cases = 0;
    for (int v : y) {
        if (v != 0 && v != 1) throw SchemaError(std::string(what) + ": outcomes must be binary");
        cases += static_cast<std::size_t>(v);
    }
    if (cases == 0 || cases == y.size()) throw EvaluationError(std::string(what) + ": outcomes contain a single class");
}

}  // namespace detail

struct Calibration {
    double intercept = 0.0;
    double slope = 1.0;
    double citl_offset = 0.0;
};

/// Logistic recalibration of outcomes on the linear predictor: (intercept,
/// slope) from y ~ 1 + LP, and the calibration-in-the-large intercept from
/// y ~ 1 with LP as offset.
inline Calibration calibration(const PredictionSet& s) {
    if (s.size() < 2 || s.linear_predictors.size() != s.size() || s.outcomes.size() != s.size())
        throw SchemaError("calibration: need >= 2 aligned predictions");
    detail::require_both_classes(s.outcomes, "calibration");
    const auto [lo, hi] = std::minmax_element(s.linear_predictors.begin(), s.linear_predictors.end());
    if (*lo == *hi) throw EvaluationError("calibration: constant linear predictor, slope undefined");

    const std::vector<double> y(s.outcomes.begin(), s.outcomes.end());
    const std::vector<double> w(s.size(), 1.0);

    // Perfect calibration is the natural starting point.
    const double identity[] = {0.0, 1.0};
    LogisticOptions joint_opts;
    joint_opts.start = identity;
    joint_opts.report_log_likelihood = false;
    const auto joint =
        fit_weighted_logistic(DesignMatrix::with_intercept(s.size(), {{"lp", s.linear_predictors}}), y, w, joint_opts);
    LogisticOptions offset_opts;
    offset_opts.offset = s.linear_predictors;
    offset_opts.start = std::span<const double>(identity, 1);
    offset_opts.report_log_likelihood = false;
    const auto citl = fit_weighted_logistic(DesignMatrix::with_intercept(s.size(), {}), y, w, offset_opts);
    if (!joint.converged || !citl.converged) throw ConvergenceError("calibration: recalibration fit did not converge");
    return {joint.at(kInterceptTerm), joint.at("lp"), citl.at(kInterceptTerm)};
}

/// Mann-Whitney concordance with midranks: P(case > control) + P(tie) / 2.
inline double auc(std::span<const double> predictions, std::span<const int> outcomes) {
    if (predictions.size() != outcomes.size()) throw SchemaError("auc: length mismatch");
    detail::require_both_classes(outcomes, "auc");
    const std::size_t n = predictions.size();
    std::vector<std::pair<double, int>> sorted(n);
    for (std::size_t i = 0; i < n; ++i) sorted[i] = {predictions[i], outcomes[i]};
    std::sort(sorted.begin(), sorted.end(), [](const auto& l, const auto& r) { return l.first < r.first; });

    // Sum of midranks (1-based) of the cases.
    double case_rank_sum = 0.0;
    std::size_t n_cases = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && sorted[j].first == sorted[i].first) ++j;
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t t = i; t < j; ++t)
            if (sorted[t].second == 1) {
                case_rank_sum += midrank;
                ++n_cases;
            }
        i = j;
    }
    const double n1 = static_cast<double>(n_cases), n0 = static_cast<double>(n - n_cases);
    return (case_rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

inline double auc(const PredictionSet& s) { return auc(s.predictions, s.outcomes); }

inline double brier(std::span<const double> predictions, std::span<const int> outcomes) {
    if (predictions.size() != outcomes.size() || predictions.empty()) throw SchemaError("brier: need aligned, non-empty input");
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - outcomes[i];
        total += d * d;
    }
    return total / static_cast<double>(predictions.size());
}

inline double brier(const PredictionSet& s) { return brier(s.predictions, s.outcomes); }

inline std::vector<double> default_thresholds() {
    std::vector<double> t;
    for (int pct = 5; pct <= 70; pct += 5) t.push_back(pct / 100.0);
    return t;
}

/// Share of risks strictly above each threshold.
inline std::vector<std::pair<double, double>> allocation_curve(std::span<const double> risks,
                                                               std::span<const double> thresholds) {
    if (risks.empty()) throw EvaluationError("allocation_curve: no risks");
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (!(thresholds[i] >= 0.0 && thresholds[i] <= 1.0)) throw ConfigError("allocation_curve: threshold outside [0,1]");
        if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
            throw ConfigError("allocation_curve: thresholds must be strictly increasing");
    }
    // counts[j] = risks whose first threshold at or above them is j, i.e.
    // risks above exactly j thresholds.
    std::vector<std::size_t> counts(thresholds.size() + 1, 0);
    for (double r : risks)
        ++counts[static_cast<std::size_t>(std::lower_bound(thresholds.begin(), thresholds.end(), r) - thresholds.begin())];
    std::vector<std::pair<double, double>> out;
    out.reserve(thresholds.size());
    std::size_t above = risks.size();
    for (std::size_t j = 0; j < thresholds.size(); ++j) {
        above -= counts[j];
        out.emplace_back(thresholds[j], static_cast<double>(above) / static_cast<double>(risks.size()));
    }
    return out;
}

}  // namespace dropin
