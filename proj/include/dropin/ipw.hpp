#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dropin/cohort.hpp"
#include "dropin/error.hpp"
#include "dropin/logistic.hpp"

namespace dropin {

/// Treatment and covariate histories over timepoints 0..K, stored column-wise.
class TreatmentHistoryTable {
public:
    TreatmentHistoryTable(std::vector<std::vector<double>> treatments, std::vector<std::vector<double>> covariates)
        : a_(std::move(treatments)), x_(std::move(covariates)) {
        if (a_.empty() || a_.size() != x_.size())
            throw SchemaError("history: need the same number (>= 1) of treatment and covariate timepoints");
        const auto n = a_.front().size();
        for (std::size_t k = 0; k < a_.size(); ++k) {
            if (a_[k].size() != n || x_[k].size() != n) throw SchemaError("history: ragged timepoint columns");
            for (double v : a_[k])
                if (v != 0.0 && v != 1.0) throw SchemaError("history: treatments must be binary");
        }
        if (n == 0) throw SchemaError("history: no individuals");
    }

    static TreatmentHistoryTable from_cohort(const Cohort& c) {
        std::vector<std::vector<double>> a(2), x(2);
        for (auto& v : a) v.reserve(c.size());
        for (auto& v : x) v.reserve(c.size());
        for (const auto& r : c.rows) {
            a[0].push_back(r.a0);
            a[1].push_back(r.a1);
            x[0].push_back(r.x0);
            x[1].push_back(r.x1);
        }
        return {std::move(a), std::move(x)};
    }

    std::size_t K() const noexcept { return a_.size() - 1; }
    std::size_t size() const noexcept { return a_.front().size(); }
    const std::vector<double>& a(std::size_t k) const { return a_.at(k); }
    const std::vector<double>& x(std::size_t k) const { return x_.at(k); }

    /// a_{k-1}, with a_{-1} = 0.
    double a_prev(std::size_t k, std::size_t i) const { return k == 0 ? 0.0 : a_[k - 1][i]; }

private:
    std::vector<std::vector<double>> a_;
    std::vector<std::vector<double>> x_;
};

/// Numerator and denominator treatment models at one timepoint.
///
/// Rows are stratified by a_{k-1}. A stratum in which a_k never varies is
/// structural: both models assign it the empirical rate, so its weight factor
/// is 1, and it is left out of the fits.
struct TimepointModels {
    std::size_t k = 0;
    std::optional<FitResult> numerator;    // a_k ~ [a_{k-1}] + x0
    std::optional<FitResult> denominator;  // a_k ~ [a_{k-1}] + x0 + ... + x_k
    std::array<std::optional<double>, 2> structural_rate{};  // indexed by a_{k-1}

    bool is_structural(int prev) const { return structural_rate[static_cast<std::size_t>(prev)].has_value(); }
};

struct TreatmentModelPair {
    std::vector<TimepointModels> timepoints;  // size K+1
};

struct WeightSummary {
    double mean = 0.0, min = 0.0, max = 0.0, p01 = 0.0, p99 = 0.0;
};

struct StabilizedWeightVector {
    std::vector<double> sw;
    WeightSummary summary;
};

/// Linear-interpolated quantile of sorted data (type 7).
inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw SchemaError("quantile of empty data");
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline WeightSummary summarize_weights(std::span<const double> sw) {
    if (sw.empty()) throw SchemaError("weight summary of empty vector");
    std::vector<double> s(sw.begin(), sw.end());
    std::sort(s.begin(), s.end());
    WeightSummary out;
    double total = 0.0;
    for (double v : sw) total += v;
    out.mean = total / static_cast<double>(sw.size());
    out.min = s.front();
    out.max = s.back();
    out.p01 = quantile_sorted(s, 0.01);
    out.p99 = quantile_sorted(s, 0.99);
    return out;
}

namespace detail {

inline constexpr const char* kPrevTerm = "a_prev";

inline std::string covariate_term(std::size_t j) { return "x" + std::to_string(j); }

/// Column for a treatment-model term at timepoint k.
inline std::vector<double> history_column(const TreatmentHistoryTable& h, std::size_t k, const std::string& term) {
    if (term == kPrevTerm) {
        std::vector<double> v(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) v[i] = h.a_prev(k, i);
        return v;
    }
    for (std::size_t j = 0; j <= k; ++j)
        if (term == covariate_term(j)) return h.x(j);
    throw SchemaError("treatment model: unknown term '" + term + "'");
}

inline std::vector<double> history_linear_predictor(const TreatmentHistoryTable& h, std::size_t k, const FitResult& fit) {
    std::vector<double> eta(h.size(), 0.0);
    for (const auto& c : fit.coefficients) {
        if (c.term == kInterceptTerm) {
            for (auto& e : eta) e += c.value;
            continue;
        }
        const auto col = history_column(h, k, c.term);
        for (std::size_t i = 0; i < eta.size(); ++i) eta[i] += c.value * col[i];
    }
    return eta;
}

inline FitResult fit_unit_weighted(const TreatmentHistoryTable& h, std::size_t k, const std::vector<std::size_t>& rows,
                                   const std::vector<std::string>& terms) {
    std::vector<NamedColumn> cols;
    for (const auto& t : terms) {
        const auto full = history_column(h, k, t);
        NamedColumn c{t, {}};
        c.values.reserve(rows.size());
        for (auto i : rows) c.values.push_back(full[i]);
        cols.push_back(std::move(c));
    }
    std::vector<double> y, w(rows.size(), 1.0);
    y.reserve(rows.size());
    for (auto i : rows) y.push_back(h.a(k)[i]);
    auto fit = fit_weighted_logistic(DesignMatrix::with_intercept(rows.size(), cols), y, w);
    if (!fit.converged)
        throw ConvergenceError("treatment model at k=" + std::to_string(k) + " did not converge");
    return fit;
}

}  // namespace detail

/// Fits, for each k, the numerator model on (a_{k-1}, x0) and the denominator
/// model on (a_{k-1}, x0..x_k). At k = 0 both regress a0 on x0.
inline TreatmentModelPair fit_treatment_models(const TreatmentHistoryTable& h) {
    TreatmentModelPair out;
    for (std::size_t k = 0; k <= h.K(); ++k) {
        TimepointModels tm;
        tm.k = k;
        std::array<std::size_t, 2> count{}, treated{};
        for (std::size_t i = 0; i < h.size(); ++i) {
            const auto s = static_cast<std::size_t>(h.a_prev(k, i));
            ++count[s];
            treated[s] += static_cast<std::size_t>(h.a(k)[i]);
        }
        for (std::size_t s = 0; s < 2; ++s)
            if (count[s] > 0 && (treated[s] == 0 || treated[s] == count[s]))
                tm.structural_rate[s] = static_cast<double>(treated[s]) / static_cast<double>(count[s]);

        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < h.size(); ++i)
            if (!tm.is_structural(static_cast<int>(h.a_prev(k, i)))) rows.push_back(i);

        if (!rows.empty()) {
            std::vector<std::string> numerator_terms, denominator_terms;
            const bool prev_varies = k > 0 && count[0] > 0 && count[1] > 0 && !tm.structural_rate[0] && !tm.structural_rate[1];
            if (prev_varies) {
                numerator_terms.emplace_back(detail::kPrevTerm);
                denominator_terms.emplace_back(detail::kPrevTerm);
            }
            numerator_terms.push_back(detail::covariate_term(0));
            for (std::size_t j = 0; j <= k; ++j) denominator_terms.push_back(detail::covariate_term(j));
            tm.numerator = detail::fit_unit_weighted(h, k, rows, numerator_terms);
            tm.denominator = detail::fit_unit_weighted(h, k, rows, denominator_terms);
        }
        out.timepoints.push_back(std::move(tm));
    }
    return out;
}

/// Stabilized weight of one individual from fitted probabilities:
/// prod_k num_k^a_k (1 - num_k)^(1 - a_k) / prod_k den_k^a_k (1 - den_k)^(1 - a_k),
/// accumulated in log space.
inline double stabilized_weight(std::span<const int> a, std::span<const double> p_numerator,
                                std::span<const double> p_denominator) {
    if (a.size() != p_numerator.size() || a.size() != p_denominator.size())
        throw SchemaError("stabilized_weight: length mismatch");
    double log_sw = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double num = a[k] ? p_numerator[k] : 1.0 - p_numerator[k];
        const double den = a[k] ? p_denominator[k] : 1.0 - p_denominator[k];
        if (!(den > 0.0) || !(p_denominator[k] > 0.0 && p_denominator[k] < 1.0))
            throw PositivityError("positivity violation at timepoint k=" + std::to_string(k));
        log_sw += std::log(num) - std::log(den);
    }
    return std::exp(log_sw);
}

/// Per-timepoint log weight factors, indexed [k][i]. Structural strata give 0.
inline std::vector<std::vector<double>> log_weight_factors(const TreatmentHistoryTable& h, const TreatmentModelPair& m) {
    if (m.timepoints.size() != h.K() + 1) throw SchemaError("weights: models do not match history length");
    std::vector<std::vector<double>> out(h.K() + 1, std::vector<double>(h.size(), 0.0));
    for (std::size_t k = 0; k <= h.K(); ++k) {
        const auto& tm = m.timepoints[k];
        std::vector<double> eta_num, eta_den;
        if (tm.numerator) {
            eta_num = detail::history_linear_predictor(h, k, *tm.numerator);
            eta_den = detail::history_linear_predictor(h, k, *tm.denominator);
        }
        for (std::size_t i = 0; i < h.size(); ++i) {
            if (tm.is_structural(static_cast<int>(h.a_prev(k, i)))) continue;
            const int ak = static_cast<int>(h.a(k)[i]);
            const double pn = expit(eta_num[i]), pd = expit(eta_den[i]);
            const double num = ak ? pn : 1.0 - pn;
            const double den = ak ? pd : 1.0 - pd;
            if (!(den > 0.0) || !(pd > 0.0 && pd < 1.0))
                throw PositivityError("positivity violation at timepoint k=" + std::to_string(k) + " for individual " +
                                      std::to_string(i));
            out[k][i] = std::log(num) - std::log(den);
        }
    }
    return out;
}

inline StabilizedWeightVector compute_stabilized_weights(const TreatmentHistoryTable& h, const TreatmentModelPair& m) {
    const auto factors = log_weight_factors(h, m);
    StabilizedWeightVector out;
    out.sw.assign(h.size(), 0.0);
    for (std::size_t i = 0; i < h.size(); ++i) {
        double log_sw = 0.0;
        for (const auto& fk : factors) log_sw += fk[i];
        out.sw[i] = std::exp(log_sw);
    }
    out.summary = summarize_weights(out.sw);
    return out;
}

/// Clamps weights to their [lower_q, upper_q] empirical quantiles.
inline StabilizedWeightVector truncate_weights(StabilizedWeightVector w, double lower_q, double upper_q) {
    if (!(0.0 <= lower_q && lower_q < upper_q && upper_q <= 1.0))
        throw ConfigError("weight truncation quantiles must satisfy 0 <= lower < upper <= 1");
    std::vector<double> s = w.sw;
    std::sort(s.begin(), s.end());
    const double lo = quantile_sorted(s, lower_q), hi = quantile_sorted(s, upper_q);
    for (auto& v : w.sw) v = std::clamp(v, lo, hi);
    w.summary = summarize_weights(w.sw);
    return w;
}

inline void write_weights_csv(const StabilizedWeightVector& w, std::ostream& os) {
    os << "id,sw\n";
    os.precision(17);
    for (std::size_t i = 0; i < w.sw.size(); ++i) os << i << ',' << w.sw[i] << '\n';
}

inline void write_weights_csv(const StabilizedWeightVector& w, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_weights_csv(w, os);
}

}  // namespace dropin
