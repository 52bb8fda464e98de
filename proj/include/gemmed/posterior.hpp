#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gemmed/kernel.hpp"

namespace gemmed {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Hyperparameters of the separable prior: exponential slack rate c and the
/// Bernoulli nominality prior with success probability sigmoid(a_eta).
struct PriorConfig {
    double c = 10.0;
    double a_eta = 0.0;
    double prior_eta1() const { return sigmoid(a_eta); }

    void validate() const {
        if (c <= 0.0) throw std::invalid_argument("prior: c must be positive");
    }
};

/// Nonnegative dual variables: one lambda per sample, mu/kappa per class.
struct DualState {
    Eigen::VectorXd lambda;
    PerClass mu;
    PerClass kappa;

    static DualState zeros(Eigen::Index n) {
        DualState d;
        d.lambda = Eigen::VectorXd::Zero(n);
        return d;
    }
};

/// The printed conditional and the self-consistent joint differ in a constant
/// -lambda_n margin offset inside the nominality logit; both are kept. The
/// multiplicative form scales the whole bracket by the prior log-odds factor
/// instead of adding it.
struct PosteriorVariant {
    enum class Form { additive, multiplicative };
    Form form = Form::additive;
    bool margin_offset = false;
    bool kappa_unscaled = false;  // coverage weights without the 1/count factor

    /// The conditional exactly as printed: additive with the margin offset.
    static PosteriorVariant printed() {
        PosteriorVariant v;
        v.margin_offset = true;
        return v;
    }
};

namespace detail {

inline double eta_logit_impl(double a_eta, double lambda_n, double yf, double mu_y,
                             double d_term, double kappa_y, double e_term,
                             const PosteriorVariant& v) {
    const double bracket = lambda_n * (yf - (v.margin_offset ? 1.0 : 0.0)) -
                           mu_y * d_term + kappa_y * e_term;
    if (v.form == PosteriorVariant::Form::additive) return a_eta + bracket;
    // prior log-odds of eta_n = 0 over eta_n = 1
    return -a_eta * bracket;
}

} // namespace detail

/// Log-odds of eta_n = 1 given the decision value f_n:
///   a_eta + lambda_n (y_n f_n - 1) - mu_{y_n} d_n + kappa_{y_n} / T
/// under the printed variant; the additive no-offset variant drops the -1.
inline double eta_logit(Eigen::Index n, double f_n, const DualState& dual,
                        const PriorConfig& prior, double d_n, int y_n, double t_count,
                        const PosteriorVariant& v = PosteriorVariant::printed()) {
    return detail::eta_logit_impl(prior.a_eta, dual.lambda(n), y_n * f_n,
                                  dual.mu.of_label(y_n), d_n, dual.kappa.of_label(y_n),
                                  1.0 / t_count, v);
}

/// Conditional mean of the decision values: values * (lambda (*) eta (*) y).
inline Eigen::VectorXd f_mean(const DualState& dual, const Eigen::VectorXd& eta,
                              const std::vector<int>& labels, const GramMatrix& g) {
    if (eta.size() != g.size() || dual.lambda.size() != g.size() ||
        static_cast<Eigen::Index>(labels.size()) != g.size())
        throw std::invalid_argument("f_mean: length mismatch");
    Eigen::VectorXd a(g.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
        a(i) = dual.lambda(i) * eta(i) * labels[static_cast<std::size_t>(i)];
    return g.values() * a;
}

/// Expectation families consumed by the dual ascent. entropy/coverage hold
/// E[sum_{n in class} eta_n * weight_n] with the caller's per-sample weights.
struct PosteriorExpectations {
    Eigen::VectorXd margin;    // E[eta_n y_n f_n]
    Eigen::VectorXd eta_mean;  // E[eta_n]
    PerClass entropy;
    PerClass coverage;
};

/// Output of one chain: running means across sweeps plus the final sweep's
/// replicate mean.
struct PosteriorEstimate {
    Eigen::VectorXd eta_hat;   // running mean of per-sweep replicate means
    Eigen::VectorXd eta_last;  // final sweep's replicate mean
    Eigen::VectorXd f_hat;     // running mean of sampled decision values
    PosteriorExpectations expectations;
    int sweeps = 0;
    int inner_replicates = 0;
};

/// Blocked chain over (f, eta): starting from eta = 1, each sweep draws the
/// decision values around the mean built from the previous sweep's eta
/// estimate, then averages inner_replicates independent Bernoulli draws of
/// eta given those values. Requested expectations are accumulated as running
/// means over sweeps. entropy_weights/coverage_weights carry the per-sample
/// scaling of the entropy and coverage terms.
inline PosteriorEstimate gibbs_run(const GramMatrix& g, const DualState& dual,
                                   const PriorConfig& prior, const std::vector<int>& labels,
                                   const Eigen::VectorXd& entropy_weights,
                                   const Eigen::VectorXd& coverage_weights, int sweeps,
                                   int inner_replicates, std::mt19937_64& rng,
                                   const PosteriorVariant& variant = {}) {
    const Eigen::Index n = g.size();
    if (sweeps < 1 || inner_replicates < 1)
        throw std::invalid_argument("gibbs_run: sweeps and inner_replicates must be >= 1");
    if (dual.lambda.size() != n || static_cast<Eigen::Index>(labels.size()) != n ||
        entropy_weights.size() != n || coverage_weights.size() != n)
        throw std::invalid_argument("gibbs_run: length mismatch");
    prior.validate();

    // Per-sample logit pieces that do not change across sweeps.
    Eigen::VectorXd base(n), slope(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        const double bracket_const = -dual.lambda(i) * (variant.margin_offset ? 1.0 : 0.0) -
                                     dual.mu.of_label(y) * entropy_weights(i) +
                                     dual.kappa.of_label(y) * coverage_weights(i);
        if (variant.form == PosteriorVariant::Form::additive) {
            base(i) = prior.a_eta + bracket_const;
            slope(i) = dual.lambda(i) * y;
        } else {
            base(i) = -prior.a_eta * bracket_const;
            slope(i) = -prior.a_eta * dual.lambda(i) * y;
        }
    }

    Eigen::VectorXd eta_hat = Eigen::VectorXd::Ones(n);
    Eigen::VectorXd acc_eta = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd acc_f = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd acc_margin = Eigen::VectorXd::Zero(n);
    PerClass acc_entropy, acc_coverage;

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd p(n);
    std::vector<int> counts(static_cast<std::size_t>(n));

    for (int t = 1; t <= sweeps; ++t) {
        const Eigen::VectorXd mean = f_mean(dual, eta_hat, labels, g);
        const Eigen::VectorXd f = sample_gp(g, mean, rng);
        if (!f.allFinite())
            throw std::runtime_error("gibbs_run: non-finite decision values at sweep " +
                                     std::to_string(t));
        for (Eigen::Index i = 0; i < n; ++i) p(i) = sigmoid(base(i) + slope(i) * f(i));

        std::fill(counts.begin(), counts.end(), 0);
        for (int r = 0; r < inner_replicates; ++r)
            for (Eigen::Index i = 0; i < n; ++i)
                if (unit(rng) < p(i)) ++counts[static_cast<std::size_t>(i)];
        for (Eigen::Index i = 0; i < n; ++i)
            eta_hat(i) = static_cast<double>(counts[static_cast<std::size_t>(i)]) /
                         static_cast<double>(inner_replicates);

        // Running means G_t = ((t-1)/t) G_{t-1} + (1/t) G(f_t, eta_t).
        const double w = 1.0 / static_cast<double>(t);
        PerClass entropy_t, coverage_t;
        for (Eigen::Index i = 0; i < n; ++i) {
            const int y = labels[static_cast<std::size_t>(i)];
            acc_margin(i) += (eta_hat(i) * y * f(i) - acc_margin(i)) * w;
            entropy_t.of_label(y) += eta_hat(i) * entropy_weights(i);
            coverage_t.of_label(y) += eta_hat(i) * coverage_weights(i);
        }
        acc_eta += (eta_hat - acc_eta) * w;
        acc_f += (f - acc_f) * w;
        acc_entropy.neg += (entropy_t.neg - acc_entropy.neg) * w;
        acc_entropy.pos += (entropy_t.pos - acc_entropy.pos) * w;
        acc_coverage.neg += (coverage_t.neg - acc_coverage.neg) * w;
        acc_coverage.pos += (coverage_t.pos - acc_coverage.pos) * w;
    }

    PosteriorEstimate out;
    out.eta_hat = acc_eta;
    out.eta_last = eta_hat;
    out.f_hat = acc_f;
    out.expectations.margin = acc_margin;
    out.expectations.eta_mean = acc_eta;
    out.expectations.entropy = acc_entropy;
    out.expectations.coverage = acc_coverage;
    out.sweeps = sweeps;
    out.inner_replicates = inner_replicates;
    return out;
}

/// Exact expectations and the dual objective by enumerating eta over {0,1}^N.
struct ExactPosterior {
    PosteriorExpectations expectations;
    double dual_objective = 0.0;  // dual-dependent part, Theorem-2 form
};

/// For each configuration the decision values integrate out in closed form:
/// the weight is prior(eta) * exp(0.5 * a'Ka) * exp(sum eta_n g_n) with
/// a = lambda(*)eta(*)y, and the conditional mean of f is K a. gamma_hat and
/// beta_hat only enter the reported objective.
inline ExactPosterior exact_posterior(const GramMatrix& g, const DualState& dual,
                                      const PriorConfig& prior, const std::vector<int>& labels,
                                      const Eigen::VectorXd& entropy_weights,
                                      const Eigen::VectorXd& coverage_weights,
                                      const PerClass& gamma_hat, double beta_hat,
                                      const PosteriorVariant& variant = {}) {
    const Eigen::Index n = g.size();
    if (n > 12) throw std::invalid_argument("exact_posterior: N > 12 refused");
    if (dual.lambda.size() != n || static_cast<Eigen::Index>(labels.size()) != n ||
        entropy_weights.size() != n || coverage_weights.size() != n)
        throw std::invalid_argument("exact_posterior: length mismatch");
    prior.validate();
    if (variant.form == PosteriorVariant::Form::multiplicative)
        throw std::invalid_argument(
            "exact_posterior: the multiplicative conditional has no joint density");
    for (Eigen::Index i = 0; i < n; ++i)
        if (dual.lambda(i) >= prior.c)
            throw std::invalid_argument("exact_posterior: lambda must stay below c");

    const double p1 = prior.prior_eta1();
    const double log_p1 = std::log(p1);
    const double log_p0 = std::log1p(-p1);

    // Per-sample eta_n = 1 exponent, f integrated out separately per config.
    Eigen::VectorXd gain(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        double v = -dual.mu.of_label(y) * entropy_weights(i) +
                   dual.kappa.of_label(y) * coverage_weights(i);
        if (variant.margin_offset) v -= dual.lambda(i);
        gain(i) = v;
    }

    const auto n_configs = static_cast<std::size_t>(1) << static_cast<unsigned>(n);
    std::vector<double> logw(n_configs);
    Eigen::VectorXd a(n);
    double logw_max = -std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < n_configs; ++s) {
        double lw = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool on = (s >> static_cast<unsigned>(i)) & 1u;
            a(i) = on ? dual.lambda(i) * labels[static_cast<std::size_t>(i)] : 0.0;
            lw += on ? (log_p1 + gain(i)) : log_p0;
        }
        lw += 0.5 * a.dot(g.values() * a);
        logw[s] = lw;
        logw_max = std::max(logw_max, lw);
    }

    double total = 0.0;
    Eigen::VectorXd margin = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd eta_mean = Eigen::VectorXd::Zero(n);
    PerClass entropy, coverage;
    for (std::size_t s = 0; s < n_configs; ++s) {
        const double w = std::exp(logw[s] - logw_max);
        total += w;
        for (Eigen::Index i = 0; i < n; ++i)
            a(i) = ((s >> static_cast<unsigned>(i)) & 1u)
                       ? dual.lambda(i) * labels[static_cast<std::size_t>(i)]
                       : 0.0;
        const Eigen::VectorXd fbar = g.values() * a;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!((s >> static_cast<unsigned>(i)) & 1u)) continue;
            const int y = labels[static_cast<std::size_t>(i)];
            eta_mean(i) += w;
            margin(i) += w * y * fbar(i);
            entropy.of_label(y) += w * entropy_weights(i);
            coverage.of_label(y) += w * coverage_weights(i);
        }
    }
    const double log_partition = logw_max + std::log(total);
    margin /= total;
    eta_mean /= total;
    entropy.neg /= total;
    entropy.pos /= total;
    coverage.neg /= total;
    coverage.pos /= total;

    double objective = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        objective += dual.lambda(i) + std::log1p(-dual.lambda(i) / prior.c);
    objective -= dual.mu.neg * gamma_hat.neg + dual.mu.pos * gamma_hat.pos;
    objective += beta_hat * (dual.kappa.neg + dual.kappa.pos);
    objective -= log_partition;

    ExactPosterior out;
    out.expectations.margin = margin;
    out.expectations.eta_mean = eta_mean;
    out.expectations.entropy = entropy;
    out.expectations.coverage = coverage;
    out.dual_objective = objective;
    return out;
}

} // namespace gemmed
