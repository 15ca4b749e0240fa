// One development cohort from the "Observational: 50% treated" scenario:
// fit the four strategies, then compare their no-treatment-throughout risks
// on a counterfactual test cohort.

#include <cstdio>

#include "dropin/dropin.hpp"

int main() {
    using namespace dropin;

    const ScenarioConfig scenario = prepare_scenario(observational_scenario(0.5), /*gamma=*/-1.0, {});
    const Cohort dev = generate_development(scenario, 1);
    const Cohort ntt = generate_test_ntt(scenario, 2);

    std::printf("alpha0=%.4f alpha1=%.4f alphaY=%.4f\n", *scenario.alpha0, *scenario.alpha1, *scenario.alphaY);
    for (auto kind : kAllStrategies) {
        const FittedCPM m = fit_strategy(kind, dev);
        std::vector<double> risks;
        for (const auto& r : ntt.rows) risks.push_back(predict_risk(m, r.x0, EstimandKind::E3));
        const double above_40 = allocation_curve(risks, std::vector<double>{0.4}).front().second;
        std::printf("%s\n  treated at a 40%% threshold: %.1f%%\n", to_record(m).c_str(), 100.0 * above_40);
        if (kind == StrategyKind::MSM)
            std::printf("  weights: mean %.3f, max %.3f; effect of sustained treatment at x0=0: %.4f\n",
                        m.weights_used->mean, m.weights_used->max, counterfactual_effect(m, 0.0));
    }
}
