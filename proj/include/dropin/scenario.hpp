#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "dropin/error.hpp"

namespace dropin {

enum class ScenarioKind { RCT, Observational };

inline std::string_view to_string(ScenarioKind k) { return k == ScenarioKind::RCT ? "rct" : "observational"; }

/// Parameters of the two-timepoint data-generating mechanism
///
///   X0 ~ N(0,1)
///   A0 ~ Bernoulli(expit(alpha0 + phi x0))
///   X1 ~ N(x0 + gamma a0, 1)
///   A1 ~ Bernoulli(theta_rct a0)                              (RCT)
///      ~ Bernoulli(expit(alpha1 + phi x1 + theta_obs a0))     (observational)
///   Y  ~ Bernoulli(expit(alphaY + bx0 x0 + bx1 x1 + ba0 a0 + ba1 a1))
///
/// The intercepts are unset until solved against the prevalence targets.
struct ScenarioConfig {
    std::string name;
    ScenarioKind kind = ScenarioKind::Observational;
    double phi = 0.0;
    std::optional<double> theta_rct;  // retention probability, RCT only
    std::optional<double> theta_obs;  // log-odds of prior treatment, observational only
    double gamma = 0.0;

    std::optional<double> alpha0;
    std::optional<double> alpha1;  // observational only
    std::optional<double> alphaY;

    double target_pA0 = 0.5;
    double target_pA1 = 0.5;
    double target_pY = 0.2;

    double beta_x0 = std::log(1.5);
    double beta_x1 = std::log(1.5);
    double beta_a0 = std::log(0.5);
    double beta_a1 = std::log(0.5);

    std::size_t n_dev = 10'000;
    std::size_t n_test = 100'000;

    bool intercepts_solved() const {
        return alpha0 && alphaY && (kind == ScenarioKind::RCT || alpha1);
    }

    void validate() const {
        auto fail = [&](const std::string& msg) { throw ConfigError("scenario '" + name + "': " + msg); };
        auto in_open_unit = [](double p) { return p > 0.0 && p < 1.0; };
        if (kind == ScenarioKind::RCT) {
            if (!theta_rct || theta_obs) fail("RCT scenarios take theta_rct and not theta_obs");
            if (!(*theta_rct >= 0.0 && *theta_rct <= 1.0)) fail("theta_rct must lie in [0,1]");
        } else {
            if (!theta_obs || theta_rct) fail("observational scenarios take theta_obs and not theta_rct");
            if (!std::isfinite(*theta_obs)) fail("theta_obs must be finite");
            if (!in_open_unit(target_pA1)) fail("target_pA1 must lie in (0,1)");
        }
        if (!(gamma <= 0.0)) fail("gamma must be <= 0");
        if (!in_open_unit(target_pA0) || !in_open_unit(target_pY)) fail("prevalence targets must lie in (0,1)");
        if (!std::isfinite(phi) || !std::isfinite(beta_x0) || !std::isfinite(beta_x1) || !std::isfinite(beta_a0) ||
            !std::isfinite(beta_a1))
            fail("coefficients must be finite");
        if (n_dev == 0 || n_test == 0) fail("cohort sizes must be positive");
    }
};

inline ScenarioConfig rct_scenario(double retention = 0.9) {
    ScenarioConfig c;
    const auto dropout = static_cast<int>(std::lround((1.0 - retention) * 100.0));
    c.name = "RCT: " + std::to_string(dropout) + "% dropout";
    c.kind = ScenarioKind::RCT;
    c.phi = 0.0;
    c.theta_rct = retention;
    c.target_pA0 = 0.5;
    return c;
}

inline ScenarioConfig observational_scenario(double treated_share) {
    ScenarioConfig c;
    const auto pct = static_cast<int>(std::lround(treated_share * 100.0));
    c.name = "Observational: " + std::to_string(pct) + "% treated";
    c.kind = ScenarioKind::Observational;
    c.phi = std::log(2.0);
    c.theta_obs = std::log(2.0);
    c.target_pA0 = treated_share;
    c.target_pA1 = treated_share;
    return c;
}

}  // namespace dropin
