#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dropin/cohort.hpp"
#include "dropin/error.hpp"
#include "dropin/ipw.hpp"
#include "dropin/logistic.hpp"

namespace dropin {

enum class StrategyKind { IgnoreTreatment, TreatmentNaive, BaselineTreatment, MSM };

inline constexpr std::array<StrategyKind, 4> kAllStrategies{StrategyKind::IgnoreTreatment, StrategyKind::TreatmentNaive,
                                                            StrategyKind::BaselineTreatment, StrategyKind::MSM};

inline std::string_view to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::IgnoreTreatment: return "IgnoreTreatment";
        case StrategyKind::TreatmentNaive: return "TreatmentNaive";
        case StrategyKind::BaselineTreatment: return "BaselineTreatment";
        case StrategyKind::MSM: return "MSM";
    }
    return "?";
}

inline StrategyKind parse_strategy(std::string_view s) {
    for (auto k : kAllStrategies)
        if (to_string(k) == s) return k;
    throw SchemaError("unknown strategy '" + std::string(s) + "'");
}

enum class EstimandKind { E1, E2, E3, E4, E5 };

/// Outcome-model terms a strategy may carry.
namespace term {
inline constexpr const char* x0 = "x0";
inline constexpr const char* a0 = "a0";
inline constexpr const char* a1 = "a1";
inline constexpr const char* a0x0 = "a0:x0";
inline constexpr const char* a1x0 = "a1:x0";
}  // namespace term

struct FittedCPM {
    StrategyKind strategy = StrategyKind::IgnoreTreatment;
    FitResult fit;
    /// Terms the strategy asked for; a term absent from `fit` was dropped as
    /// constant in the development data and predicts as 0.
    std::vector<std::string> schema;
    std::optional<WeightSummary> weights_used;

    bool in_schema(std::string_view t) const {
        for (const auto& s : schema)
            if (s == t) return true;
        return false;
    }

    double coefficient(std::string_view t) const { return fit.find(t).value_or(0.0); }

    /// Linear predictor for baseline covariate x0 and treatment path (a0, a1).
    double linear_predictor(double x0, int a0, int a1) const {
        return coefficient(kInterceptTerm) + coefficient(term::x0) * x0 + coefficient(term::a0) * a0 +
               coefficient(term::a1) * a1 + coefficient(term::a0x0) * a0 * x0 + coefficient(term::a1x0) * a1 * x0;
    }
};

struct StrategyOptions {
    bool msm_interactions = false;
    /// Optional [lower, upper] quantile truncation of the MSM weights.
    std::optional<std::pair<double, double>> weight_truncation;
};

inline std::vector<std::string> strategy_schema(StrategyKind k, bool interactions) {
    switch (k) {
        case StrategyKind::IgnoreTreatment:
        case StrategyKind::TreatmentNaive: return {term::x0};
        case StrategyKind::BaselineTreatment: return {term::x0, term::a0};
        case StrategyKind::MSM:
            if (interactions) return {term::x0, term::a0, term::a1, term::a0x0, term::a1x0};
            return {term::x0, term::a0, term::a1};
    }
    return {};
}

namespace detail {

inline double term_value(std::string_view t, const CohortRow& r) {
    if (t == term::x0) return r.x0;
    if (t == term::a0) return r.a0;
    if (t == term::a1) return r.a1;
    if (t == term::a0x0) return r.a0 * r.x0;
    if (t == term::a1x0) return r.a1 * r.x0;
    throw SchemaError("unknown outcome term '" + std::string(t) + "'");
}

inline bool is_treatment_term(std::string_view t) { return t != term::x0; }

}  // namespace detail

/// Fits one prediction-model strategy on a development cohort.
///
/// IgnoreTreatment: y ~ x0, all rows. TreatmentNaive: y ~ x0, rows with a0 = 0.
/// BaselineTreatment: y ~ x0 + a0. MSM: y ~ x0 + a0 + a1 (+ a0:x0 + a1:x0)
/// weighted by stabilized inverse-probability weights.
inline FittedCPM fit_strategy(StrategyKind kind, const Cohort& dev, const StrategyOptions& options = {}) {
    if (dev.meta.mode != GenerationMode::Development) throw SchemaError("fit_strategy: expects a development cohort");

    std::vector<const CohortRow*> rows;
    rows.reserve(dev.size());
    for (const auto& r : dev.rows)
        if (kind != StrategyKind::TreatmentNaive || r.a0 == 0) rows.push_back(&r);
    if (rows.empty()) throw EvaluationError("fit_strategy: treatment-naive subset is empty");

    FittedCPM out;
    out.strategy = kind;
    out.schema = strategy_schema(kind, options.msm_interactions);

    std::vector<NamedColumn> cols;
    for (const auto& t : out.schema) {
        NamedColumn c{t, {}};
        c.values.reserve(rows.size());
        for (const auto* r : rows) c.values.push_back(detail::term_value(t, *r));
        bool constant = true;
        for (double v : c.values) constant = constant && v == c.values.front();
        if (constant && detail::is_treatment_term(t)) continue;
        cols.push_back(std::move(c));
    }

    std::vector<double> y, w(rows.size(), 1.0);
    y.reserve(rows.size());
    for (const auto* r : rows) y.push_back(r->y);

    if (kind == StrategyKind::MSM) {
        const auto history = TreatmentHistoryTable::from_cohort(dev);
        auto weights = compute_stabilized_weights(history, fit_treatment_models(history));
        if (options.weight_truncation)
            weights = truncate_weights(std::move(weights), options.weight_truncation->first,
                                       options.weight_truncation->second);
        w = std::move(weights.sw);
        out.weights_used = weights.summary;
    }

    out.fit = fit_weighted_logistic(DesignMatrix::with_intercept(rows.size(), cols), y, w);
    if (!out.fit.converged) throw ConvergenceError("fit_strategy: " + std::string(to_string(kind)) + " did not converge");
    return out;
}

/// Risk for baseline covariate x0 under an estimand.
///
/// Treatment indicators fixed by the estimand: E2 and E3 set a0 = 0, E3 also
/// a1 = 0, E5 sets a0 = a1 = 1. A model can evaluate an estimand when every
/// treatment term it carries is fixed by it. E4 leaves future treatment free
/// and has no single model-implied value; see msm_e4_envelope.
inline double predict_risk(const FittedCPM& m, double x0, EstimandKind e) {
    const bool has_a0 = m.fit.has(term::a0) || m.fit.has(term::a0x0);
    const bool has_a1 = m.fit.has(term::a1) || m.fit.has(term::a1x0);
    const auto name = std::string(to_string(m.strategy));
    switch (e) {
        case EstimandKind::E1:
            if (has_a0 || has_a1) throw UnsupportedEstimandError("E1 needs observed treatment for " + name);
            return expit(m.linear_predictor(x0, 0, 0));
        case EstimandKind::E2:
            if (has_a1) throw UnsupportedEstimandError("E2 leaves future treatment free; " + name + " models it");
            return expit(m.linear_predictor(x0, 0, 0));
        case EstimandKind::E3: return expit(m.linear_predictor(x0, 0, 0));
        case EstimandKind::E4:
            if (!m.in_schema(term::a1))
                throw UnsupportedEstimandError("E4 needs a future-treatment term; " + name + " has none");
            throw UnsupportedEstimandError("E4 has no single value; use msm_e4_envelope");
        case EstimandKind::E5: return expit(m.linear_predictor(x0, 1, 1));
    }
    throw UnsupportedEstimandError("unknown estimand");
}

struct RiskEnvelope {
    double lower = 0.0;
    double upper = 0.0;
};

/// E4 bounds from the two future paths after treating now: (1,0) and (1,1).
inline RiskEnvelope msm_e4_envelope(const FittedCPM& m, double x0) {
    if (m.strategy != StrategyKind::MSM) throw UnsupportedEstimandError("E4 envelope requires the MSM");
    const double r10 = expit(m.linear_predictor(x0, 1, 0)), r11 = expit(m.linear_predictor(x0, 1, 1));
    return {std::min(r10, r11), std::max(r10, r11)};
}

/// Prediction on observed data with the model's own covariate schema.
inline double predict_observed(const FittedCPM& m, const CohortRow& r) {
    return expit(m.linear_predictor(r.x0, r.a0, r.a1));
}

/// Absolute risk reduction of sustained treatment: E3 risk minus E5 risk.
inline double counterfactual_effect(const FittedCPM& m, double x0) {
    if (m.strategy != StrategyKind::MSM) throw UnsupportedEstimandError("counterfactual_effect requires the MSM");
    return predict_risk(m, x0, EstimandKind::E3) - predict_risk(m, x0, EstimandKind::E5);
}

/// Flat audit record, e.g. "MSM intercept:-1.2 x0:0.61 a0:-0.69 a1:-0.7".
inline std::string to_record(const FittedCPM& m) {
    std::ostringstream os;
    os.precision(17);
    os << to_string(m.strategy);
    for (const auto& c : m.fit.coefficients) os << ' ' << c.term << ':' << c.value;
    return os.str();
}

}  // namespace dropin
