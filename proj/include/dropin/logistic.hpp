#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dropin/error.hpp"

namespace dropin {

/// Linear predictors are clamped to this magnitude before exponentiating.
inline constexpr double kLinearPredictorClamp = 36.0;
inline constexpr std::string_view kInterceptTerm = "intercept";

inline double expit(double eta) noexcept {
    eta = std::clamp(eta, -kLinearPredictorClamp, kLinearPredictorClamp);
    return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

inline double logit(double p) noexcept { return std::log(p / (1.0 - p)); }

/// log(1 + exp(eta)) without overflow.
inline double softplus(double eta) noexcept {
    return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

struct NamedColumn {
    std::string name;
    std::vector<double> values;
};

/// Dense design with an explicit leading intercept column.
class DesignMatrix {
public:
    DesignMatrix(Eigen::MatrixXd values, std::vector<std::string> labels)
        : values_(std::move(values)), labels_(std::move(labels)) {
        if (static_cast<std::size_t>(values_.cols()) != labels_.size())
            throw SchemaError("design: label count does not match column count");
        if (values_.cols() == 0) throw SchemaError("design: no columns");
        if (values_.rows() < values_.cols())
            throw RankError("design: fewer rows (" + std::to_string(values_.rows()) + ") than columns (" +
                            std::to_string(values_.cols()) + ")");
        if (!values_.allFinite()) throw SchemaError("design: non-finite entry");
        if (labels_.front() != kInterceptTerm || !(values_.col(0).array() == 1.0).all())
            throw SchemaError("design: first column must be an all-ones intercept");
    }

    /// Prepends the intercept column to `columns`.
    static DesignMatrix with_intercept(std::size_t n_rows, const std::vector<NamedColumn>& columns) {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(columns.size() + 1));
        std::vector<std::string> labels{std::string(kInterceptTerm)};
        m.col(0).setOnes();
        for (std::size_t j = 0; j < columns.size(); ++j) {
            if (columns[j].values.size() != n_rows)
                throw SchemaError("design: column '" + columns[j].name + "' has wrong length");
            m.col(static_cast<Eigen::Index>(j + 1)) =
                Eigen::Map<const Eigen::VectorXd>(columns[j].values.data(), static_cast<Eigen::Index>(n_rows));
            labels.push_back(columns[j].name);
        }
        return DesignMatrix(std::move(m), std::move(labels));
    }

    std::size_t n_rows() const noexcept { return static_cast<std::size_t>(values_.rows()); }
    std::size_t n_cols() const noexcept { return static_cast<std::size_t>(values_.cols()); }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

private:
    Eigen::MatrixXd values_;
    std::vector<std::string> labels_;
};

struct Coefficient {
    std::string term;
    double value = 0.0;
};

struct FitResult {
    std::vector<Coefficient> coefficients;  // design column order
    bool converged = false;
    int iterations = 0;
    double final_gradient_norm = 0.0;
    double log_likelihood = 0.0;  // 0 when not requested

    std::optional<double> find(std::string_view term) const {
        for (const auto& c : coefficients)
            if (c.term == term) return c.value;
        return std::nullopt;
    }

    double at(std::string_view term) const {
        if (auto v = find(term)) return *v;
        throw SchemaError("fit has no term '" + std::string(term) + "'");
    }

    bool has(std::string_view term) const { return find(term).has_value(); }

    Eigen::VectorXd vector() const {
        Eigen::VectorXd b(static_cast<Eigen::Index>(coefficients.size()));
        for (std::size_t j = 0; j < coefficients.size(); ++j) b(static_cast<Eigen::Index>(j)) = coefficients[j].value;
        return b;
    }
};

struct LogisticOptions {
    int max_iterations = 100;
    double gradient_tolerance = 1e-8;
    double step_tolerance = 1e-4;
    /// Any |coefficient| above this during iteration is reported as separation.
    double separation_bound = 30.0;
    /// Optional fixed offset added to the linear predictor (empty = none).
    std::span<const double> offset{};
    /// Optional starting coefficients (empty = intercept at the weighted mean).
    std::span<const double> start{};
    /// Report the final log-likelihood (one extra pass when step-halving
    /// did not already need it).
    bool report_log_likelihood = true;
};

namespace detail {

/// Stable expit given e = exp(-|eta|).
inline double expit_from(double eta, double e) { return (eta >= 0.0 ? 1.0 : e) / (1.0 + e); }

/// Weighted log-likelihood at eta.
inline double log_likelihood(std::span<const double> eta, std::span<const double> y, std::span<const double> w) {
    double ll = 0.0;
    for (std::size_t i = 0; i < eta.size(); ++i) {
        if (w[i] == 0.0) continue;
        const double a = std::min(std::abs(eta[i]), kLinearPredictorClamp);
        ll += w[i] * (y[i] * eta[i] - (std::max(eta[i], 0.0) + std::log1p(std::exp(-a))));
    }
    return ll;
}

/// Score and information at eta in a single pass over the rows. P is the
/// column count when known at compile time (0 = runtime), which lets the
/// small inner loops unroll.
template <int P>
void score_and_information_kernel(const Eigen::MatrixXd& X, std::span<const double> eta, std::span<const double> y,
                                  std::span<const double> w, Eigen::VectorXd& grad, Eigen::MatrixXd& info) {
    const Eigen::Index n = X.rows();
    const int p = P > 0 ? P : static_cast<int>(X.cols());
    constexpr int kMax = 8;
    const double* col[kMax];
    for (int j = 0; j < p; ++j) col[j] = X.col(j).data();
    double g[kMax] = {}, h[kMax * kMax] = {};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (w[k] == 0.0) continue;
        const double a = std::min(std::abs(eta[k]), kLinearPredictorClamp);
        const double mu = expit_from(eta[k], std::exp(-a));
        const double r = w[k] * (y[k] - mu), v = w[k] * mu * (1.0 - mu);
        for (int j = 0; j < p; ++j) {
            const double xj = col[j][i];
            g[j] += xj * r;
            const double vx = v * xj;
            for (int l = 0; l <= j; ++l) h[j * kMax + l] += vx * col[l][i];
        }
    }
    grad.resize(p);
    info.resize(p, p);
    for (int j = 0; j < p; ++j) {
        grad(j) = g[j];
        for (int l = 0; l <= j; ++l) info(j, l) = info(l, j) = h[j * kMax + l];
    }
}

inline void score_and_information(const Eigen::MatrixXd& X, std::span<const double> eta, std::span<const double> y,
                                  std::span<const double> w, Eigen::VectorXd& grad, Eigen::MatrixXd& info) {
    switch (X.cols()) {
        case 1: return score_and_information_kernel<1>(X, eta, y, w, grad, info);
        case 2: return score_and_information_kernel<2>(X, eta, y, w, grad, info);
        case 3: return score_and_information_kernel<3>(X, eta, y, w, grad, info);
        case 4: return score_and_information_kernel<4>(X, eta, y, w, grad, info);
        case 5: return score_and_information_kernel<5>(X, eta, y, w, grad, info);
        case 6: return score_and_information_kernel<6>(X, eta, y, w, grad, info);
        default: break;
    }
    // Wide designs: plain Eigen products.
    const Eigen::Index n = X.rows();
    Eigen::VectorXd r(n), v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double a = std::min(std::abs(eta[k]), kLinearPredictorClamp);
        const double mu = expit_from(eta[k], std::exp(-a));
        r(i) = w[k] * (y[k] - mu);
        v(i) = w[k] * mu * (1.0 - mu);
    }
    grad = X.transpose() * r;
    info = X.transpose() * v.asDiagonal() * X;
}

}  // namespace detail

/// Maximizes sum_i w_i [y_i log(pi_i) + (1 - y_i) log(1 - pi_i)] with
/// logit(pi_i) = x_i' beta (+ offset_i) by Newton steps with step-halving.
inline FitResult fit_weighted_logistic(const DesignMatrix& design, std::span<const double> y, std::span<const double> w,
                                       const LogisticOptions& options = {}) {
    const auto n = static_cast<Eigen::Index>(design.n_rows());
    const auto p = static_cast<Eigen::Index>(design.n_cols());
    if (y.size() != design.n_rows() || w.size() != design.n_rows())
        throw SchemaError("logistic: outcome/weight length does not match design rows");
    if (!options.offset.empty() && options.offset.size() != design.n_rows())
        throw SchemaError("logistic: offset length does not match design rows");

    Eigen::VectorXd off = Eigen::VectorXd::Zero(n);
    std::size_t n_positive = 0;
    double wsum = 0.0, wy = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (y[k] != 0.0 && y[k] != 1.0) throw SchemaError("logistic: outcome must be binary");
        if (!(w[k] >= 0.0) || !std::isfinite(w[k])) throw SchemaError("logistic: weights must be finite and >= 0");
        if (!options.offset.empty()) off(i) = options.offset[k];
        if (w[k] > 0.0) {
            ++n_positive;
            wsum += w[k];
            wy += w[k] * y[k];
        }
    }
    if (n_positive < design.n_cols())
        throw RankError("logistic: fewer positively weighted rows than coefficients");
    if (wy <= 0.0 || wy >= wsum) throw DegenerateOutcomeError("logistic: outcome is constant among weighted rows");

    const Eigen::MatrixXd& X = design.values();
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (!options.start.empty()) {
        if (options.start.size() != design.n_cols()) throw SchemaError("logistic: start has wrong length");
        for (Eigen::Index j = 0; j < p; ++j) beta(j) = options.start[static_cast<std::size_t>(j)];
    } else if (options.offset.empty()) {
        beta(0) = logit(wy / wsum);
    }

    FitResult out;
    std::vector<double> eta(static_cast<std::size_t>(n)), trial_eta(eta.size());
    Eigen::Map<Eigen::VectorXd>(eta.data(), n) = X * beta + off;
    Eigen::VectorXd grad, trial_grad;
    Eigen::MatrixXd info, trial_info;
    detail::score_and_information(X, eta, y, w, grad, info);
    std::optional<double> ll;

    for (int iter = 0;; ++iter) {
        out.final_gradient_norm = grad.norm();
        out.iterations = iter;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        const Eigen::VectorXd d = ldlt.vectorD();
        if (ldlt.info() != Eigen::Success || !(d.minCoeff() > 1e-12 * d.cwiseAbs().maxCoeff()))
            throw RankError("logistic: weighted information matrix is singular");
        const Eigen::VectorXd step = ldlt.solve(grad);
        // Under separation the gradient vanishes while Newton steps stay O(1);
        // only a small gradient with a small step counts as convergence.
        if (out.final_gradient_norm < options.gradient_tolerance &&
            step.cwiseAbs().maxCoeff() < options.step_tolerance) {
            out.converged = true;
            break;
        }
        if (iter >= options.max_iterations) break;
        const Eigen::VectorXd x_step = X * step;

        // The log-likelihood is concave along the step, so a non-negative
        // directional derivative at the trial point already guarantees ascent;
        // the likelihood itself is only evaluated when that test fails.
        double scale = 1.0;
        std::optional<double> trial_ll;
        for (int halving = 0; halving < 50; ++halving, scale *= 0.5) {
            for (Eigen::Index i = 0; i < n; ++i)
                trial_eta[static_cast<std::size_t>(i)] = eta[static_cast<std::size_t>(i)] + scale * x_step(i);
            detail::score_and_information(X, trial_eta, y, w, trial_grad, trial_info);
            trial_ll.reset();
            if (trial_grad.dot(step) >= 0.0) break;
            if (!ll) ll = detail::log_likelihood(eta, y, w);
            trial_ll = detail::log_likelihood(trial_eta, y, w);
            if (*trial_ll >= *ll - 1e-12 * std::abs(*ll)) break;
        }
        beta += scale * step;
        eta.swap(trial_eta);
        grad.swap(trial_grad);
        info.swap(trial_info);
        ll = trial_ll;
        if (beta.cwiseAbs().maxCoeff() > options.separation_bound)
            throw SeparationError("logistic: coefficient magnitude exceeded " +
                                  std::to_string(options.separation_bound) + " (separation)");
    }

    if (ll)
        out.log_likelihood = *ll;
    else if (options.report_log_likelihood)
        out.log_likelihood = detail::log_likelihood(eta, y, w);

    out.coefficients.reserve(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j)
        out.coefficients.push_back({design.labels()[static_cast<std::size_t>(j)], beta(j)});
    return out;
}

/// Row of covariate values keyed by term name; the intercept is implicit.
using TermRow = std::map<std::string, double, std::less<>>;

inline double linear_predictor(const FitResult& fit, const TermRow& row) {
    double eta = 0.0;
    for (const auto& c : fit.coefficients) {
        if (c.term == kInterceptTerm) {
            eta += c.value;
            continue;
        }
        auto it = row.find(c.term);
        if (it == row.end()) throw SchemaError("predict: row is missing term '" + c.term + "'");
        eta += c.value * it->second;
    }
    return eta;
}

inline double predict_prob(const FitResult& fit, const TermRow& row) { return expit(linear_predictor(fit, row)); }

}  // namespace dropin
