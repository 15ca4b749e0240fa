#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "dropin/cohort.hpp"
#include "dropin/ipw.hpp"
#include "oracles.hpp"

using namespace dropin;

namespace {

ScenarioConfig solved(ScenarioConfig c, std::size_t n_dev = 10'000) {
    c.n_dev = n_dev;
    return solve_intercepts(c, {.n_mc = 200'000});
}

/// Model-based standard errors of a unit-weight fit on the given rows.
std::vector<double> standard_errors(const FitResult& fit, const std::vector<std::vector<double>>& rows) {
    const std::size_t p = fit.coefficients.size();
    std::vector<std::vector<double>> info(p, std::vector<double>(p, 0.0));
    for (const auto& r : rows) {
        double eta = 0.0;
        for (std::size_t j = 0; j < p; ++j) eta += r[j] * fit.coefficients[j].value;
        const double v = oracle::sigmoid(eta) * (1.0 - oracle::sigmoid(eta));
        for (std::size_t j = 0; j < p; ++j)
            for (std::size_t k = 0; k < p; ++k) info[j][k] += v * r[j] * r[k];
    }
    std::vector<double> se(p);
    for (std::size_t j = 0; j < p; ++j) {
        std::vector<double> e(p, 0.0);
        e[j] = 1.0;
        se[j] = std::sqrt(oracle::solve(info, e)[j]);
    }
    return se;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

}  // namespace

TEST(StabilizedWeight, HandInstantiation) {
    const int a[] = {0, 0};
    const double p_num[] = {0.4, 0.2}, p_den[] = {0.3, 0.5};
    EXPECT_DOUBLE_EQ(stabilized_weight(a, p_num, p_den), 48.0 / 35.0);

    const int treated[] = {1, 1};
    EXPECT_DOUBLE_EQ(stabilized_weight(treated, p_num, p_den), (0.4 * 0.2) / (0.3 * 0.5));
}

TEST(StabilizedWeight, PositivityViolationNamesTimepoint) {
    const int a[] = {1, 0};
    const double p_num[] = {0.5, 0.5}, p_den[] = {0.5, 1.0};
    try {
        stabilized_weight(a, p_num, p_den);
        FAIL() << "expected PositivityError";
    } catch (const PositivityError& e) {
        EXPECT_NE(std::string(e.what()).find("k=1"), std::string::npos);
    }
    const double short_den[] = {0.5};
    EXPECT_THROW(stabilized_weight(a, p_num, short_den), SchemaError);
}

TEST(StabilizedWeight, IdenticalModelsGiveUnitWeights) {
    const auto c = solved(observational_scenario(0.5), 2000);
    const auto h = TreatmentHistoryTable::from_cohort(generate_development(c, 3));
    auto m = fit_treatment_models(h);
    for (auto& tm : m.timepoints) tm.numerator = tm.denominator;
    const auto w = compute_stabilized_weights(h, m);
    for (double v : w.sw) ASSERT_EQ(v, 1.0);
}

TEST(StabilizedWeight, MeanNearOneAndTightensWithN) {
    const auto big = solved(observational_scenario(0.5), 10'000);
    const auto small = solved(observational_scenario(0.5), 2000);
    for (Seed seed : {1u, 2u, 3u}) {
        const auto hb = TreatmentHistoryTable::from_cohort(generate_development(big, seed));
        const auto wb = compute_stabilized_weights(hb, fit_treatment_models(hb));
        EXPECT_GE(wb.summary.mean, 0.95);
        EXPECT_LE(wb.summary.mean, 1.05);
        EXPECT_NEAR(wb.summary.mean, mean(wb.sw), 1e-12);

        const auto hs = TreatmentHistoryTable::from_cohort(generate_development(small, seed));
        const auto ws = compute_stabilized_weights(hs, fit_treatment_models(hs));
        EXPECT_GE(ws.summary.mean, 0.9);
        EXPECT_LE(ws.summary.mean, 1.1);
    }
}

TEST(StabilizedWeight, BaselineFactorIsNearOne) {
    const auto c = solved(observational_scenario(0.5));
    const auto h = TreatmentHistoryTable::from_cohort(generate_development(c, 5));
    const auto m = fit_treatment_models(h);
    const auto f = log_weight_factors(h, m);
    for (double l : f[0]) {
        ASSERT_GE(std::exp(l), 0.999);
        ASSERT_LE(std::exp(l), 1.001);
    }
}

TEST(StabilizedWeight, InvariantUnderRowPermutation) {
    const auto c = solved(observational_scenario(0.2), 3000);
    const auto dev = generate_development(c, 8);
    auto shuffled = dev;
    std::reverse(shuffled.rows.begin(), shuffled.rows.end());
    const auto h1 = TreatmentHistoryTable::from_cohort(dev), h2 = TreatmentHistoryTable::from_cohort(shuffled);
    const auto w1 = compute_stabilized_weights(h1, fit_treatment_models(h1));
    const auto w2 = compute_stabilized_weights(h2, fit_treatment_models(h2));
    const std::size_t n = w1.sw.size();
    for (std::size_t i = 0; i < n; ++i) ASSERT_NEAR(w1.sw[i], w2.sw[n - 1 - i], 1e-9);
}

TEST(StabilizedWeight, NoConfoundingConcentratesNearOne) {
    auto c = observational_scenario(0.5);
    c.phi = 0.0;
    c.theta_obs = 0.0;
    c = solved(c);
    const auto h = TreatmentHistoryTable::from_cohort(generate_development(c, 9));
    const auto w = compute_stabilized_weights(h, fit_treatment_models(h));
    EXPECT_LT(w.summary.p99, 1.5);
    EXPECT_GT(w.summary.p01, 1.0 / 1.5);
}

TEST(TreatmentModels, RctBaselineModelsShowNoCovariateEffect) {
    const auto c = solved(rct_scenario(0.9));
    const auto h = TreatmentHistoryTable::from_cohort(generate_development(c, 10));
    const auto m = fit_treatment_models(h);
    ASSERT_EQ(m.timepoints.size(), 2u);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < h.size(); ++i) rows.push_back({1.0, h.x(0)[i]});
    for (const auto& fit : {*m.timepoints[0].numerator, *m.timepoints[0].denominator}) {
        const auto se = standard_errors(fit, rows);
        EXPECT_LT(std::abs(fit.at("x0")), 3.0 * se[1]);
    }
}

TEST(TreatmentModels, RctStructuralZeroStratum) {
    const auto c = solved(rct_scenario(0.9));
    const auto h = TreatmentHistoryTable::from_cohort(generate_development(c, 11));
    const auto m = fit_treatment_models(h);
    const auto& k1 = m.timepoints[1];
    ASSERT_TRUE(k1.structural_rate[0].has_value());
    EXPECT_EQ(*k1.structural_rate[0], 0.0);
    EXPECT_FALSE(k1.structural_rate[1].has_value());
    // Fitted within the treated stratum only, so a_prev is not a term.
    ASSERT_TRUE(k1.denominator.has_value());
    EXPECT_FALSE(k1.denominator->has("a_prev"));

    const auto f = log_weight_factors(h, m);
    for (std::size_t i = 0; i < h.size(); ++i)
        if (h.a(0)[i] == 0.0) {
            ASSERT_EQ(f[1][i], 0.0);
        }
    const auto w = compute_stabilized_weights(h, m);
    for (double v : w.sw) ASSERT_TRUE(std::isfinite(v) && v > 0.0);
}

TEST(TreatmentModels, ObservationalFollowUpDenominatorRecoversTruth) {
    const auto c = solved(observational_scenario(0.5));
    const auto h = TreatmentHistoryTable::from_cohort(generate_development(c, 12));
    const auto m = fit_treatment_models(h);
    const auto& den = *m.timepoints[1].denominator;
    ASSERT_EQ(den.coefficients.size(), 4u);  // intercept, a_prev, x0, x1
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < h.size(); ++i) rows.push_back({1.0, h.a(0)[i], h.x(0)[i], h.x(1)[i]});
    const auto se = standard_errors(den, rows);
    EXPECT_LT(std::abs(den.at("intercept") - *c.alpha1), 3.0 * se[0]);
    EXPECT_LT(std::abs(den.at("a_prev") - *c.theta_obs), 3.0 * se[1]);
    EXPECT_LT(std::abs(den.at("x0")), 3.0 * se[2]);
    EXPECT_LT(std::abs(den.at("x1") - c.phi), 3.0 * se[3]);

    // Numerator conditions on baseline only.
    EXPECT_TRUE(m.timepoints[1].numerator->has("x0"));
    EXPECT_FALSE(m.timepoints[1].numerator->has("x1"));
}

TEST(TreatmentModels, SingleTimepointHistory) {
    std::vector<std::vector<double>> a{{0, 1, 0, 1, 1, 0, 0, 1, 1, 0}}, x{{-1.2, 0.3, -0.4, 1.1, 0.2, 0.5, -0.9, 2.0, -0.1, 0.0}};
    const TreatmentHistoryTable h(a, x);
    EXPECT_EQ(h.K(), 0u);
    const auto m = fit_treatment_models(h);
    ASSERT_EQ(m.timepoints.size(), 1u);
    const auto& tm = m.timepoints[0];
    ASSERT_EQ(tm.numerator->coefficients.size(), tm.denominator->coefficients.size());
    for (std::size_t j = 0; j < tm.numerator->coefficients.size(); ++j)
        EXPECT_EQ(tm.numerator->coefficients[j].term, tm.denominator->coefficients[j].term);
    for (double v : compute_stabilized_weights(h, m).sw) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(TreatmentHistory, Validation) {
    EXPECT_THROW(TreatmentHistoryTable({}, {}), SchemaError);
    EXPECT_THROW(TreatmentHistoryTable({{0, 1}}, {{0.0}}), SchemaError);
    EXPECT_THROW(TreatmentHistoryTable({{0, 2}}, {{0.0, 1.0}}), SchemaError);
    EXPECT_THROW(TreatmentHistoryTable({{0, 1}}, {{0.0, 1.0}, {0.0, 1.0}}), SchemaError);
    const TreatmentHistoryTable h({{1, 0}, {1, 1}}, {{0.0, 1.0}, {0.5, 0.5}});
    EXPECT_EQ(h.a_prev(0, 0), 0.0);
    EXPECT_EQ(h.a_prev(1, 0), 1.0);
}

TEST(Weights, TruncationClampsToQuantiles) {
    StabilizedWeightVector w;
    for (int i = 1; i <= 101; ++i) w.sw.push_back(i);
    const auto t = truncate_weights(w, 0.01, 0.99);
    EXPECT_DOUBLE_EQ(t.summary.min, 2.0);
    EXPECT_DOUBLE_EQ(t.summary.max, 100.0);
    EXPECT_THROW(truncate_weights(w, 0.5, 0.5), ConfigError);
    EXPECT_THROW(truncate_weights(w, -0.1, 0.9), ConfigError);
}

TEST(Weights, SummaryQuantiles) {
    const std::vector<double> v{4, 1, 3, 2, 5};
    const auto s = summarize_weights(v);
    EXPECT_DOUBLE_EQ(s.mean, 3.0);
    EXPECT_DOUBLE_EQ(s.min, 1.0);
    EXPECT_DOUBLE_EQ(s.max, 5.0);
    EXPECT_DOUBLE_EQ(s.p01, 1.04);
    EXPECT_DOUBLE_EQ(s.p99, 4.96);
}

TEST(Weights, CsvDump) {
    StabilizedWeightVector w;
    w.sw = {1.0, 0.5};
    std::ostringstream os;
    write_weights_csv(w, os);
    EXPECT_EQ(os.str(), "id,sw\n0,1\n1,0.5\n");
}
