#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dropin/cohort.hpp"
#include "dropin/strategies.hpp"
#include "oracles.hpp"

using namespace dropin;

namespace {

ScenarioConfig solved(ScenarioConfig c, double gamma, std::size_t n_dev = 10'000) {
    c.gamma = gamma;
    c.n_dev = n_dev;
    return solve_intercepts(c, {.n_mc = 200'000});
}

FittedCPM fixed_msm(double b0, double bx0, double ba0, double ba1) {
    FittedCPM m;
    m.strategy = StrategyKind::MSM;
    m.schema = strategy_schema(StrategyKind::MSM, false);
    m.fit.coefficients = {{"intercept", b0}, {"x0", bx0}, {"a0", ba0}, {"a1", ba1}};
    m.fit.converged = true;
    return m;
}

}  // namespace

TEST(Strategies, Labels) {
    EXPECT_EQ(to_string(StrategyKind::IgnoreTreatment), "IgnoreTreatment");
    EXPECT_EQ(to_string(StrategyKind::TreatmentNaive), "TreatmentNaive");
    EXPECT_EQ(to_string(StrategyKind::BaselineTreatment), "BaselineTreatment");
    EXPECT_EQ(to_string(StrategyKind::MSM), "MSM");
    for (auto k : kAllStrategies) EXPECT_EQ(parse_strategy(to_string(k)), k);
    EXPECT_THROW(parse_strategy("msm"), SchemaError);
}

TEST(Strategies, SchemasMatchStrategy) {
    const auto dev = generate_development(solved(observational_scenario(0.5), -1.0, 3000), 1);
    const auto ignore = fit_strategy(StrategyKind::IgnoreTreatment, dev);
    const auto naive = fit_strategy(StrategyKind::TreatmentNaive, dev);
    const auto baseline = fit_strategy(StrategyKind::BaselineTreatment, dev);
    const auto msm = fit_strategy(StrategyKind::MSM, dev);
    EXPECT_EQ(ignore.fit.coefficients.size(), 2u);
    EXPECT_EQ(naive.fit.coefficients.size(), 2u);
    EXPECT_EQ(baseline.fit.coefficients.size(), 3u);
    EXPECT_EQ(msm.fit.coefficients.size(), 4u);
    EXPECT_FALSE(ignore.weights_used.has_value());
    EXPECT_FALSE(baseline.weights_used.has_value());
    EXPECT_TRUE(msm.weights_used.has_value());

    StrategyOptions with_interactions;
    with_interactions.msm_interactions = true;
    const auto inter = fit_strategy(StrategyKind::MSM, dev, with_interactions);
    EXPECT_EQ(inter.fit.coefficients.size(), 6u);
    EXPECT_TRUE(inter.fit.has("a1:x0"));
}

TEST(Strategies, NaiveFitsUntreatedRowsOnly) {
    const auto dev = generate_development(solved(observational_scenario(0.5), -1.0, 3000), 2);
    Cohort untreated = dev;
    std::erase_if(untreated.rows, [](const CohortRow& r) { return r.a0 == 1; });
    const auto naive = fit_strategy(StrategyKind::TreatmentNaive, dev);
    const auto ignore_on_subset = fit_strategy(StrategyKind::IgnoreTreatment, untreated);
    for (std::size_t j = 0; j < 2; ++j)
        EXPECT_DOUBLE_EQ(naive.fit.coefficients[j].value, ignore_on_subset.fit.coefficients[j].value);

    Cohort all_treated = dev;
    for (auto& r : all_treated.rows) r.a0 = 1;
    EXPECT_THROW(fit_strategy(StrategyKind::TreatmentNaive, all_treated), EvaluationError);
}

TEST(Strategies, RequiresDevelopmentCohort) {
    auto c = solved(rct_scenario(0.9), 0.0);
    c.n_test = 500;
    EXPECT_THROW(fit_strategy(StrategyKind::IgnoreTreatment, generate_test_mt(c, 1)), SchemaError);
}

TEST(Strategies, MsmMatchesIndependentWeightedOracle) {
    const auto dev = generate_development(solved(observational_scenario(0.5), -1.0), 3);
    std::vector<double> x0, a0, x1, a1, y;
    for (const auto& r : dev.rows) {
        x0.push_back(r.x0);
        a0.push_back(r.a0);
        x1.push_back(r.x1);
        a1.push_back(r.a1);
        y.push_back(r.y);
    }
    const auto ref = oracle::msm_fit(x0, a0, x1, a1, y);
    const auto msm = fit_strategy(StrategyKind::MSM, dev);
    EXPECT_NEAR(msm.coefficient("intercept"), ref[0], 1e-7);
    EXPECT_NEAR(msm.coefficient("x0"), ref[1], 1e-7);
    EXPECT_NEAR(msm.coefficient("a0"), ref[2], 1e-7);
    EXPECT_NEAR(msm.coefficient("a1"), ref[3], 1e-7);
}

TEST(Strategies, UntreatedCohortCollapsesAllStrategies) {
    auto dev = generate_development(solved(observational_scenario(0.5), 0.0, 4000), 4);
    for (auto& r : dev.rows) r.a0 = r.a1 = 0;
    const auto ref = fit_strategy(StrategyKind::IgnoreTreatment, dev);
    for (auto k : kAllStrategies) {
        const auto m = fit_strategy(k, dev);
        ASSERT_EQ(m.fit.coefficients.size(), 2u) << to_string(k);
        EXPECT_NEAR(m.coefficient("intercept"), ref.coefficient("intercept"), 1e-10);
        EXPECT_NEAR(m.coefficient("x0"), ref.coefficient("x0"), 1e-10);
        if (m.weights_used) {
            EXPECT_EQ(m.weights_used->min, 1.0);
            EXPECT_EQ(m.weights_used->max, 1.0);
        }
    }
}

TEST(Strategies, MsmRemovesBaselineConfoundingByFutureTreatment) {
    auto c = observational_scenario(0.5);
    c.phi = 0.0;
    c.theta_obs = 0.0;
    c = solved(c, 0.0, 50'000);
    const auto dev = generate_development(c, 5);
    const double baseline = fit_strategy(StrategyKind::BaselineTreatment, dev).coefficient("a0");
    const double msm = fit_strategy(StrategyKind::MSM, dev).coefficient("a0");
    EXPECT_LT(baseline, 0.0);
    EXPECT_LT(std::abs(msm - std::log(0.5)), std::abs(baseline - std::log(0.5)));
}

TEST(Estimands, FixedMsmInstantiation) {
    const auto m = fixed_msm(-2.0, 0.4, -0.7, -0.7);
    EXPECT_NEAR(predict_risk(m, 0.0, EstimandKind::E3), 0.1192, 5e-5);
    EXPECT_NEAR(predict_risk(m, 0.0, EstimandKind::E5), 0.0323, 5e-5);
    EXPECT_NEAR(counterfactual_effect(m, 0.0), 0.0869, 5e-5);
    EXPECT_DOUBLE_EQ(counterfactual_effect(m, 0.0),
                     predict_risk(m, 0.0, EstimandKind::E3) - predict_risk(m, 0.0, EstimandKind::E5));

    const auto env = msm_e4_envelope(m, 0.0);
    EXPECT_DOUBLE_EQ(env.lower, expit(-3.4));
    EXPECT_DOUBLE_EQ(env.upper, expit(-2.7));
    EXPECT_THROW(predict_risk(m, 0.0, EstimandKind::E4), UnsupportedEstimandError);
    EXPECT_THROW(predict_risk(m, 0.0, EstimandKind::E1), UnsupportedEstimandError);
    EXPECT_THROW(predict_risk(m, 0.0, EstimandKind::E2), UnsupportedEstimandError);

    EXPECT_EQ(counterfactual_effect(fixed_msm(-2.0, 0.4, 0.0, 0.0), 1.3), 0.0);
}

TEST(Estimands, SupportByStrategy) {
    const auto dev = generate_development(solved(observational_scenario(0.5), -1.0, 3000), 6);
    const auto ignore = fit_strategy(StrategyKind::IgnoreTreatment, dev);
    const auto baseline = fit_strategy(StrategyKind::BaselineTreatment, dev);

    // x0-only models give one formula for every estimand they are credited with.
    EXPECT_DOUBLE_EQ(predict_risk(ignore, 0.3, EstimandKind::E1), predict_risk(ignore, 0.3, EstimandKind::E3));
    EXPECT_DOUBLE_EQ(predict_risk(ignore, 0.3, EstimandKind::E2), predict_risk(ignore, 0.3, EstimandKind::E3));
    EXPECT_THROW(predict_risk(ignore, 0.3, EstimandKind::E4), UnsupportedEstimandError);

    EXPECT_THROW(predict_risk(baseline, 0.3, EstimandKind::E1), UnsupportedEstimandError);
    EXPECT_DOUBLE_EQ(predict_risk(baseline, 0.3, EstimandKind::E2), predict_risk(baseline, 0.3, EstimandKind::E3));
    EXPECT_THROW(predict_risk(baseline, 0.3, EstimandKind::E4), UnsupportedEstimandError);
    EXPECT_THROW(msm_e4_envelope(baseline, 0.3), UnsupportedEstimandError);
    EXPECT_THROW(counterfactual_effect(baseline, 0.3), UnsupportedEstimandError);

    // E3 of the baseline-treatment model is its prediction with a0 = 0.
    EXPECT_NEAR(predict_risk(baseline, 0.3, EstimandKind::E3), predict_prob(baseline.fit, {{"x0", 0.3}, {"a0", 0.0}}),
                1e-15);
}

TEST(Estimands, MonotoneAndOrdered) {
    const auto dev = generate_development(solved(observational_scenario(0.5), -1.0, 3000), 7);
    for (auto k : kAllStrategies) {
        const auto m = fit_strategy(k, dev);
        ASSERT_GT(m.coefficient("x0"), 0.0);
        double last = 0.0;
        for (double x = -3.0; x <= 3.0; x += 0.25) {
            const double r = predict_risk(m, x, EstimandKind::E3);
            EXPECT_GT(r, last);
            last = r;
            if (m.coefficient("a0") < 0.0 && m.coefficient("a1") <= 0.0) {
                EXPECT_GE(r, predict_risk(m, x, EstimandKind::E5));
            }
        }
    }
}

TEST(Estimands, TreatmentBlindModelsIgnoreTreatmentColumns) {
    const auto dev = generate_development(solved(observational_scenario(0.5), -1.0, 3000), 8);
    for (auto k : {StrategyKind::IgnoreTreatment, StrategyKind::TreatmentNaive}) {
        const auto m = fit_strategy(k, dev);
        for (const auto& r : dev.rows) {
            CohortRow flipped = r;
            flipped.a0 = 1 - r.a0;
            flipped.a1 = 1 - r.a1;
            ASSERT_EQ(predict_observed(m, r), predict_observed(m, flipped));
        }
    }
}

TEST(Estimands, CounterfactualEffectMatchesTwoWorldSimulation) {
    const auto c = solved(observational_scenario(0.5), -1.0, 100'000);
    const auto msm = fit_strategy(StrategyKind::MSM, generate_development(c, 9));
    auto test = c;
    test.n_test = 100'000;
    const auto ntt = generate_test_ntt(test, 10);
    double effect = 0.0;
    for (const auto& r : ntt.rows) effect += counterfactual_effect(msm, r.x0);
    effect /= static_cast<double>(ntt.size());
    const double brute = oracle::two_world_effect(*c.alphaY, c.beta_x0, c.beta_x1, c.beta_a0, c.beta_a1, c.gamma, 400'000, 11);
    EXPECT_NEAR(effect, brute, 0.01);
}

TEST(Strategies, AuditRecord) {
    const auto m = fixed_msm(-2.0, 0.5, -0.75, -0.25);
    EXPECT_EQ(to_record(m), "MSM intercept:-2 x0:0.5 a0:-0.75 a1:-0.25");
}
