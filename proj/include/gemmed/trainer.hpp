#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gemmed/dataset.hpp"
#include "gemmed/gem.hpp"
#include "gemmed/kernel.hpp"
#include "gemmed/posterior.hpp"
#include "gemmed/rng.hpp"

namespace gemmed {

enum class PosteriorBackend { gibbs, exact };

struct TrainConfig {
    double C1 = 1.0;          // lambda clip ceiling, must stay below prior.c
    double lr_lambda = 2e-3;  // phi
    double lr_mu = 2e-2;      // psi
    double lr_kappa = 3e-2;   // tau
    double beta_hat = 0.8;    // coverage target
    int max_iters = 300;
    double tol = 1e-4;        // stop when the largest dual update falls below
    int sweeps = 200;
    int inner_replicates = 50;
    std::uint64_t seed = 0;
    PosteriorBackend backend = PosteriorBackend::gibbs;
    PosteriorVariant variant{};
    bool freeze_eta = false;      // eta pinned to 1 (plain large-margin baseline)
    bool freeze_mu_kappa = false; // mu and kappa pinned to 0

    void validate(const PriorConfig& prior) const {
        prior.validate();
        if (C1 <= 0.0 || C1 >= prior.c)
            throw std::invalid_argument("train: need 0 < C1 < c");
        if (lr_lambda <= 0.0 || lr_mu <= 0.0 || lr_kappa <= 0.0)
            throw std::invalid_argument("train: learning rates must be positive");
        if (beta_hat <= 0.0 || beta_hat >= 1.0)
            throw std::invalid_argument("train: beta_hat must lie in (0,1)");
        if (max_iters < 1) throw std::invalid_argument("train: max_iters must be >= 1");
        if (tol <= 0.0) throw std::invalid_argument("train: tol must be positive");
        if (sweeps < 1 || inner_replicates < 1)
            throw std::invalid_argument("train: sweeps and inner_replicates must be >= 1");
    }
};

struct DualGradients {
    Eigen::VectorXd lambda;
    PerClass mu;
    PerClass kappa;

    double linf() const {
        double m = lambda.size() ? lambda.cwiseAbs().maxCoeff() : 0.0;
        m = std::max({m, std::abs(mu.neg), std::abs(mu.pos)});
        m = std::max({m, std::abs(kappa.neg), std::abs(kappa.pos)});
        return m;
    }
};

/// Ascent directions of the dual objective:
///   d/dlambda_n : 1 - E[eta_n y_n f_n] - 1/(c - lambda_n)
///   d/dmu_z     : E[entropy sum, class z] - gamma_hat_z
///   d/dkappa_z  : beta_hat - E[coverage sum, class z]
inline DualGradients dual_gradients(const PosteriorExpectations& exp, const DualState& dual,
                                    const TrainConfig& cfg, const GemModel& gem,
                                    const PriorConfig& prior) {
    DualGradients g;
    g.lambda.resize(dual.lambda.size());
    for (Eigen::Index i = 0; i < dual.lambda.size(); ++i) {
        if (dual.lambda(i) >= prior.c)
            throw std::invalid_argument("dual_gradients: lambda reached the barrier at c");
        g.lambda(i) = 1.0 - exp.margin(i) - 1.0 / (prior.c - dual.lambda(i));
    }
    g.mu.neg = exp.entropy.neg - gem.gamma_hat.neg;
    g.mu.pos = exp.entropy.pos - gem.gamma_hat.pos;
    g.kappa.neg = cfg.beta_hat - exp.coverage.neg;
    g.kappa.pos = cfg.beta_hat - exp.coverage.pos;
    return g;
}

/// One projected step: lambda clipped to [0, C1], mu and kappa to [0, inf).
inline DualState psgd_step(const DualState& dual, const DualGradients& g,
                           const TrainConfig& cfg) {
    DualState next = dual;
    for (Eigen::Index i = 0; i < dual.lambda.size(); ++i)
        next.lambda(i) =
            std::clamp(dual.lambda(i) + cfg.lr_lambda * g.lambda(i), 0.0, cfg.C1);
    next.mu.neg = std::max(0.0, dual.mu.neg + cfg.lr_mu * g.mu.neg);
    next.mu.pos = std::max(0.0, dual.mu.pos + cfg.lr_mu * g.mu.pos);
    next.kappa.neg = std::max(0.0, dual.kappa.neg + cfg.lr_kappa * g.kappa.neg);
    next.kappa.pos = std::max(0.0, dual.kappa.pos + cfg.lr_kappa * g.kappa.pos);
    return next;
}

struct IterationStats {
    double objective = 0.0;  // exact dual value (exact backend) or modal estimate
    double grad_linf = 0.0;
    double update_linf = 0.0;
};

struct TrainedModel {
    Dataset train;
    KernelSpec kernel;
    GemModel gem;
    PriorConfig prior;
    TrainConfig config;
    DualState dual;
    Eigen::VectorXd eta_hat;   // per-sample nominality scores
    Eigen::VectorXd f_hat;     // posterior-mean decision values at training rows
    std::vector<Eigen::Index> source_indices;  // rows of the original training set
    std::vector<IterationStats> history;
};

namespace detail {

inline double modal_objective(const DualState& dual, const PriorConfig& prior,
                              const GemModel& gem, double beta_hat, const GramMatrix& g,
                              const Eigen::VectorXd& eta, const std::vector<int>& labels,
                              const Eigen::VectorXd& entropy_w, const Eigen::VectorXd& coverage_w,
                              const PosteriorVariant& variant) {
    double obj = 0.0;
    for (Eigen::Index i = 0; i < dual.lambda.size(); ++i)
        obj += dual.lambda(i) + std::log1p(-dual.lambda(i) / prior.c);
    obj -= dual.mu.neg * gem.gamma_hat.neg + dual.mu.pos * gem.gamma_hat.pos;
    obj += beta_hat * (dual.kappa.neg + dual.kappa.pos);
    Eigen::VectorXd a(dual.lambda.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
        a(i) = dual.lambda(i) * eta(i) * labels[static_cast<std::size_t>(i)];
    obj += 0.5 * a.dot(g.values() * a);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        double gain = -dual.mu.of_label(y) * entropy_w(i) +
                      dual.kappa.of_label(y) * coverage_w(i);
        if (variant.margin_offset) gain -= dual.lambda(i);
        obj += eta(i) * gain;
    }
    return obj;
}

} // namespace detail

using TrainProgress = std::function<void(int, const IterationStats&)>;

/// Projected stochastic gradient ascent on (lambda, mu, kappa). Each
/// iteration re-estimates the posterior expectations with a fresh chain
/// seeded from the master seed, computes the gradients and applies the
/// clipped step. Stops at max_iters or when the largest dual update drops
/// below tol. Deterministic given the seed.
inline TrainedModel train(const Dataset& ds, const KernelSpec& spec, const GemModel& gem,
                          const PriorConfig& prior, const TrainConfig& cfg,
                          const TrainProgress& progress = {}) {
    cfg.validate(prior);
    const auto counts = ds.class_counts();
    if (counts[0] == 0 || counts[1] == 0)
        throw std::invalid_argument("train: both labels must be present");
    if (!cfg.freeze_mu_kappa && gem.distances.size() != ds.size())
        throw std::invalid_argument("train: gem model does not match the dataset");

    const GramMatrix g = gram(spec, ds);
    const auto& labels = ds.labels();
    Eigen::VectorXd entropy_w, coverage_w;
    if (gem.distances.size() == ds.size()) {
        entropy_w = gem.entropy_weights(labels);
        coverage_w = gem.coverage_weights(labels, cfg.variant.kappa_unscaled);
    } else {
        entropy_w = Eigen::VectorXd::Zero(ds.size());
        coverage_w = Eigen::VectorXd::Zero(ds.size());
    }

    DualState dual;
    dual.lambda = Eigen::VectorXd::Constant(ds.size(), cfg.C1 / 2.0);

    TrainedModel model;
    model.train = ds;
    model.kernel = spec;
    model.gem = gem;
    model.prior = prior;
    model.config = cfg;
    model.source_indices.resize(static_cast<std::size_t>(ds.size()));
    for (Eigen::Index i = 0; i < ds.size(); ++i)
        model.source_indices[static_cast<std::size_t>(i)] = i;
    model.eta_hat = Eigen::VectorXd::Ones(ds.size());
    model.f_hat = Eigen::VectorXd::Zero(ds.size());

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        PosteriorExpectations exp;
        double objective = 0.0;
        if (cfg.freeze_eta) {
            // eta pinned to 1: the decision values are Gaussian around
            // values * (lambda (*) y), so the margin expectation is exact.
            Eigen::VectorXd eta = Eigen::VectorXd::Ones(ds.size());
            const Eigen::VectorXd fbar = f_mean(dual, eta, labels, g);
            exp.margin.resize(ds.size());
            for (Eigen::Index i = 0; i < ds.size(); ++i)
                exp.margin(i) = labels[static_cast<std::size_t>(i)] * fbar(i);
            exp.eta_mean = eta;
            for (Eigen::Index i = 0; i < ds.size(); ++i) {
                const int y = labels[static_cast<std::size_t>(i)];
                exp.entropy.of_label(y) += entropy_w(i);
                exp.coverage.of_label(y) += coverage_w(i);
            }
            model.eta_hat = eta;
            model.f_hat = fbar;
            objective = detail::modal_objective(dual, prior, gem, cfg.beta_hat, g, eta,
                                                labels, entropy_w, coverage_w, cfg.variant);
        } else if (cfg.backend == PosteriorBackend::exact) {
            const ExactPosterior exact =
                exact_posterior(g, dual, prior, labels, entropy_w, coverage_w,
                                gem.gamma_hat, cfg.beta_hat, cfg.variant);
            exp = exact.expectations;
            model.eta_hat = exp.eta_mean;
            model.f_hat = f_mean(dual, exp.eta_mean, labels, g);
            objective = exact.dual_objective;
        } else {
            auto rng = make_rng(cfg.seed, "train/gibbs", static_cast<std::uint64_t>(iter));
            const PosteriorEstimate est =
                gibbs_run(g, dual, prior, labels, entropy_w, coverage_w, cfg.sweeps,
                          cfg.inner_replicates, rng, cfg.variant);
            exp = est.expectations;
            model.eta_hat = est.eta_hat;
            model.f_hat = est.f_hat;
            objective = detail::modal_objective(dual, prior, gem, cfg.beta_hat, g,
                                                est.eta_hat, labels, entropy_w,
                                                coverage_w, cfg.variant);
        }

        DualGradients grads = dual_gradients(exp, dual, cfg, gem, prior);
        if (!grads.lambda.allFinite() || !std::isfinite(grads.mu.neg) ||
            !std::isfinite(grads.mu.pos) || !std::isfinite(grads.kappa.neg) ||
            !std::isfinite(grads.kappa.pos))
            throw std::runtime_error("train: non-finite gradient at iteration " +
                                     std::to_string(iter));
        if (cfg.freeze_mu_kappa) {
            grads.mu = PerClass{};
            grads.kappa = PerClass{};
        }

        const DualState next = psgd_step(dual, grads, cfg);
        double update = (next.lambda - dual.lambda).cwiseAbs().maxCoeff();
        update = std::max({update, std::abs(next.mu.neg - dual.mu.neg),
                           std::abs(next.mu.pos - dual.mu.pos),
                           std::abs(next.kappa.neg - dual.kappa.neg),
                           std::abs(next.kappa.pos - dual.kappa.pos)});
        dual = next;
        model.history.push_back({objective, grads.linf(), update});
        if (progress) progress(iter, model.history.back());
        if (update < cfg.tol) break;
    }

    model.dual = dual;
    return model;
}

} // namespace gemmed
