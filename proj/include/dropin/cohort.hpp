#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "dropin/error.hpp"
#include "dropin/logistic.hpp"
#include "dropin/rng.hpp"
#include "dropin/scenario.hpp"

namespace dropin {

struct CohortRow {
    double x0 = 0.0;
    int a0 = 0;
    double x1 = 0.0;
    int a1 = 0;
    int y = 0;
};

enum class GenerationMode { Development, TestMT, TestNTT };

struct CohortMeta {
    std::string scenario;
    double gamma = 0.0;
    Seed seed = 0;
    GenerationMode mode = GenerationMode::Development;
};

struct Cohort {
    std::vector<CohortRow> rows;
    CohortMeta meta;

    std::size_t size() const noexcept { return rows.size(); }
};

// ---------------------------------------------------------------------------
// Intercept calibration

struct InterceptSolverSettings {
    std::size_t n_mc = 1'000'000;
    double tol = 0.002;
    Seed seed = 0x51A7E5EEDULL;
};

/// Finds alpha with mean(expit(alpha + L)) = target over n_mc draws of L.
///
/// The draws are made once from a fixed seed; the Monte Carlo mean is then
/// monotone in alpha and bisection converges to its root. Throws ConfigError
/// when no bracket is found or the root misses the target by more than tol.
template <class Sampler>
    requires std::invocable<Sampler&, Engine&>
double solve_intercept(double target, Sampler&& sampler, std::size_t n_mc, double tol, Seed seed = InterceptSolverSettings{}.seed) {
    if (!(target > 0.0 && target < 1.0)) throw ConfigError("solve_intercept: target must lie in (0,1)");
    if (n_mc < 100'000) throw ConfigError("solve_intercept: n_mc must be at least 1e5");

    Engine eng = make_engine(seed);
    std::vector<double> draws(n_mc);
    for (auto& d : draws) d = static_cast<double>(sampler(eng));

    auto excess = [&](double alpha) {
        double s = 0.0;
        for (double l : draws) s += expit(alpha + l);
        return s / static_cast<double>(draws.size()) - target;
    };

    double lo = -10.0, hi = 10.0;
    for (int expand = 0; expand < 8 && (excess(lo) > 0.0 || excess(hi) < 0.0); ++expand) {
        lo *= 2.0;
        hi *= 2.0;
    }
    if (excess(lo) > 0.0 || excess(hi) < 0.0) throw ConfigError("solve_intercept: could not bracket the target");

    for (int iter = 0; iter < 200 && hi - lo > 1e-9; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) < 0.0 ? lo : hi) = mid;
    }
    const double alpha = 0.5 * (lo + hi);
    if (hi - lo > 1e-9 || std::abs(excess(alpha)) > tol)
        throw ConfigError("solve_intercept: bisection did not converge to the target");
    return alpha;
}

namespace detail {

/// Draws one development-process row from a single engine; used as the
/// intercept-solving sampler, where one stream per row is sufficient.
struct ChainDraw {
    double x0, x1;
    int a0, a1;
};

inline ChainDraw draw_chain(const ScenarioConfig& c, Engine& eng, std::normal_distribution<double>& z, double alpha0,
                            double alpha1) {
    ChainDraw d{};
    d.x0 = z(eng);
    d.a0 = uniform01(eng) < expit(alpha0 + c.phi * d.x0) ? 1 : 0;
    d.x1 = d.x0 + c.gamma * d.a0 + z(eng);
    const double p1 = c.kind == ScenarioKind::RCT ? *c.theta_rct * d.a0 : expit(alpha1 + c.phi * d.x1 + *c.theta_obs * d.a0);
    d.a1 = uniform01(eng) < p1 ? 1 : 0;
    return d;
}

}  // namespace detail

/// Solves alpha0, then alpha1 (observational), then alphaY, each against a
/// sampler that uses the intercepts already solved upstream.
inline ScenarioConfig solve_intercepts(ScenarioConfig c, const InterceptSolverSettings& s = {}) {
    c.validate();
    std::normal_distribution<double> z;

    c.alpha0 = solve_intercept(
        c.target_pA0, [&](Engine& e) { return c.phi * z(e); }, s.n_mc, s.tol, derive_seed(s.seed, {0}));

    if (c.kind == ScenarioKind::Observational) {
        z.reset();
        c.alpha1 = solve_intercept(
            c.target_pA1,
            [&](Engine& e) {
                const double x0 = z(e);
                const int a0 = uniform01(e) < expit(*c.alpha0 + c.phi * x0) ? 1 : 0;
                const double x1 = x0 + c.gamma * a0 + z(e);
                return c.phi * x1 + *c.theta_obs * a0;
            },
            s.n_mc, s.tol, derive_seed(s.seed, {1}));
    }

    z.reset();
    c.alphaY = solve_intercept(
        c.target_pY,
        [&](Engine& e) {
            const auto d = detail::draw_chain(c, e, z, *c.alpha0, c.alpha1.value_or(0.0));
            return c.beta_x0 * d.x0 + c.beta_x1 * d.x1 + c.beta_a0 * d.a0 + c.beta_a1 * d.a1;
        },
        s.n_mc, s.tol, derive_seed(s.seed, {2}));
    return c;
}

// ---------------------------------------------------------------------------
// Cohort generation

/// Substream index of each simulated variable.
enum class Substream : std::uint64_t { X0 = 0, A0 = 1, X1 = 2, A1 = 3, Y = 4 };

namespace detail {

inline Cohort generate(const ScenarioConfig& c, Seed seed, std::size_t n, GenerationMode mode) {
    c.validate();
    if (!c.intercepts_solved()) throw ConfigError("scenario '" + c.name + "': intercepts have not been solved");

    auto stream = [&](Substream s) { return make_engine(derive_seed(seed, {static_cast<std::uint64_t>(s)})); };
    Engine ex0 = stream(Substream::X0), ea0 = stream(Substream::A0), ex1 = stream(Substream::X1),
           ea1 = stream(Substream::A1), ey = stream(Substream::Y);
    std::normal_distribution<double> zx0, zx1;

    const bool withhold = mode == GenerationMode::TestNTT;
    const double alpha0 = *c.alpha0, alphaY = *c.alphaY, alpha1 = c.alpha1.value_or(0.0);

    Cohort out;
    out.meta = {c.name, c.gamma, seed, mode};
    out.rows.resize(n);
    for (auto& r : out.rows) {
        // Every row consumes the same draws from every substream regardless of
        // mode, so row i is a function of the seed and i alone.
        r.x0 = zx0(ex0);
        const double u0 = uniform01(ea0);
        r.a0 = !withhold && u0 < expit(alpha0 + c.phi * r.x0) ? 1 : 0;
        r.x1 = r.x0 + c.gamma * r.a0 + zx1(ex1);
        const double u1 = uniform01(ea1);
        const double p1 = c.kind == ScenarioKind::RCT ? *c.theta_rct * r.a0
                                                      : expit(alpha1 + c.phi * r.x1 + *c.theta_obs * r.a0);
        r.a1 = !withhold && u1 < p1 ? 1 : 0;
        const double eta = alphaY + c.beta_x0 * r.x0 + c.beta_x1 * r.x1 + c.beta_a0 * r.a0 + c.beta_a1 * r.a1;
        r.y = uniform01(ey) < expit(eta) ? 1 : 0;
    }
    return out;
}

}  // namespace detail

inline Cohort generate_development(const ScenarioConfig& c, Seed seed) {
    return detail::generate(c, seed, c.n_dev, GenerationMode::Development);
}

inline Cohort generate_test_mt(const ScenarioConfig& c, Seed seed) {
    return detail::generate(c, seed, c.n_test, GenerationMode::TestMT);
}

/// Treatment withheld at both timepoints; covariates follow X1 ~ N(x0, 1).
inline Cohort generate_test_ntt(const ScenarioConfig& c, Seed seed) {
    return detail::generate(c, seed, c.n_test, GenerationMode::TestNTT);
}

/// Rows untreated at baseline, in their original order.
inline Cohort filter_nbt(const Cohort& cohort) {
    if (cohort.meta.mode != GenerationMode::TestMT) throw SchemaError("filter_nbt: expects a TestMT cohort");
    Cohort out;
    out.meta = cohort.meta;
    for (const auto& r : cohort.rows)
        if (r.a0 == 0) out.rows.push_back(r);
    return out;
}

inline void write_csv(const Cohort& cohort, std::ostream& os) {
    os << "x0,a0,x1,a1,y\n";
    os.precision(17);
    for (const auto& r : cohort.rows) os << r.x0 << ',' << r.a0 << ',' << r.x1 << ',' << r.a1 << ',' << r.y << '\n';
}

inline void write_csv(const Cohort& cohort, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_csv(cohort, os);
    if (!os) throw IoError("write failed for '" + path + "'");
}

}  // namespace dropin
