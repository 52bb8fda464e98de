#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gemmed/dataset.hpp"
#include "gemmed/gem.hpp"
#include "gemmed/kernel.hpp"
#include "gemmed/trainer.hpp"

namespace gemmed {

/// Weighted kernel expansion sum_n eta_n lambda_n y_n K(x, x_n).
template <class X>
double decision_value(const TrainedModel& model, const Eigen::MatrixBase<X>& x) {
    if (x.size() != model.train.dim())
        throw std::invalid_argument("predict: dimension mismatch with the trained model");
    double score = 0.0;
    for (Eigen::Index i = 0; i < model.train.size(); ++i)
        score += model.eta_hat(i) * model.dual.lambda(i) * model.train.label(i) *
                 kernel_eval(model.kernel, x, model.train.x(i));
    return score;
}

/// Sign of the decision value; an exact zero maps to +1.
template <class X>
int predict(const TrainedModel& model, const Eigen::MatrixBase<X>& x) {
    return decision_value(model, x) < 0.0 ? -1 : +1;
}

inline double misclassification(const TrainedModel& model, const Dataset& test) {
    Eigen::Index wrong = 0;
    for (Eigen::Index i = 0; i < test.size(); ++i)
        if (predict(model, test.x(i)) != test.label(i)) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(test.size());
}

struct PrecisionRecallPoint {
    double cutoff = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

/// Sweep of the rule "flag sample n when eta_hat_n <= cutoff". Precision of
/// an empty flagged set is 1 by convention.
inline std::vector<PrecisionRecallPoint> precision_recall(
    const Eigen::VectorXd& eta_hat, const std::vector<bool>& anomaly_truth,
    const std::vector<double>& cutoffs) {
    if (static_cast<Eigen::Index>(anomaly_truth.size()) != eta_hat.size())
        throw std::invalid_argument("precision_recall: length mismatch");
    const auto n_true = static_cast<double>(
        std::count(anomaly_truth.begin(), anomaly_truth.end(), true));
    if (n_true == 0.0)
        throw std::invalid_argument("precision_recall: no true anomalies, recall undefined");

    std::vector<PrecisionRecallPoint> curve;
    curve.reserve(cutoffs.size());
    for (double cut : cutoffs) {
        double flagged = 0.0, hits = 0.0;
        for (Eigen::Index i = 0; i < eta_hat.size(); ++i) {
            if (eta_hat(i) <= cut) {
                flagged += 1.0;
                if (anomaly_truth[static_cast<std::size_t>(i)]) hits += 1.0;
            }
        }
        curve.push_back({cut, flagged == 0.0 ? 1.0 : hits / flagged, hits / n_true});
    }
    return curve;
}

/// ROC area of an anomaly score (higher = more anomalous) against the truth,
/// via midranks so ties count one half. Matches pairwise counting exactly.
inline double auc(const Eigen::VectorXd& scores, const std::vector<bool>& truth) {
    if (static_cast<Eigen::Index>(truth.size()) != scores.size())
        throw std::invalid_argument("auc: length mismatch");
    const auto n = static_cast<std::size_t>(scores.size());
    const auto n_pos = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
    if (n_pos == 0 || n_pos == n)
        throw std::invalid_argument("auc: truth must contain both classes");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b));
    });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores(static_cast<Eigen::Index>(order[j + 1])) ==
                                scores(static_cast<Eigen::Index>(order[i])))
            ++j;
        // midrank of the tie group [i, j], 1-based ranks
        const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t)
            if (truth[order[t]]) rank_sum_pos += midrank;
        i = j + 1;
    }
    const auto np = static_cast<double>(n_pos);
    const auto nn = static_cast<double>(n - n_pos);
    const double u = rank_sum_pos - np * (np + 1.0) / 2.0;
    return u / (np * nn);
}

/// Anomaly-ranking quality of the nominality scores: low eta ranks first.
inline double anomaly_auc(const Eigen::VectorXd& eta_hat, const std::vector<bool>& truth) {
    return auc(-eta_hat, truth);
}

/// Plain large-margin baseline: the trainer with eta pinned to 1 and the
/// entropy/coverage multipliers pinned to 0 (lambda-only ascent).
inline TrainedModel baseline_med(const Dataset& ds, const KernelSpec& spec,
                                 const PriorConfig& prior, TrainConfig cfg,
                                 const TrainProgress& progress = {}) {
    cfg.freeze_eta = true;
    cfg.freeze_mu_kappa = true;
    GemModel no_gem;  // unused under the frozen configuration
    no_gem.beta_hat = cfg.beta_hat;
    return train(ds, spec, no_gem, prior, cfg, progress);
}

/// Screen-then-train baseline: remove rows whose leave-one-out k-NN distance
/// exceeds the (1-alpha) quantile, then run the plain baseline on the rest.
/// source_indices of the result map back into ds.
inline TrainedModel baseline_two_stage(const Dataset& ds, const KernelSpec& spec,
                                       const GemModel& gem, const PriorConfig& prior,
                                       const TrainConfig& cfg, double alpha) {
    const double cutoff = loo_threshold(ds, gem.k, alpha);
    const Eigen::VectorXd loo = loo_distances(ds, gem.k);
    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = 0; i < ds.size(); ++i)
        if (loo(i) <= cutoff) kept.push_back(i);
    if (kept.empty())
        throw std::runtime_error("baseline_two_stage: every sample was flagged anomalous");
    const Dataset reduced = ds.subset(kept);
    const auto counts = reduced.class_counts();
    if (counts[0] == 0 || counts[1] == 0)
        throw std::runtime_error("baseline_two_stage: screening removed an entire class");
    TrainedModel model = baseline_med(reduced, spec, prior, cfg);
    model.source_indices = kept;
    return model;
}

/// Picks the rbf width from a grid by stratified k-fold cross-validation of
/// the plain baseline's misclassification; ties resolve to the smaller gamma.
inline double cv_gamma(const Dataset& ds, const std::vector<double>& gamma_grid, int folds,
                       const PriorConfig& prior, const TrainConfig& cfg) {
    if (folds < 2) throw std::invalid_argument("cv_gamma: folds must be >= 2");
    if (gamma_grid.empty()) throw std::invalid_argument("cv_gamma: empty grid");
    const auto counts = ds.class_counts();
    if (std::min(counts[0], counts[1]) < folds)
        throw std::invalid_argument("cv_gamma: a fold would be missing a class");

    // Deterministic stratified assignment: class members dealt round-robin.
    std::vector<int> fold_of(static_cast<std::size_t>(ds.size()), 0);
    for (int z : {-1, +1}) {
        int f = 0;
        for (auto i : ds.class_members(z))
            fold_of[static_cast<std::size_t>(i)] = f++ % folds;
    }

    double best_gamma = 0.0, best_err = std::numeric_limits<double>::infinity();
    for (double gamma : gamma_grid) {
        KernelSpec spec{KernelSpec::Kind::rbf, gamma};
        double err_sum = 0.0;
        for (int f = 0; f < folds; ++f) {
            std::vector<Eigen::Index> hold, rest;
            for (Eigen::Index i = 0; i < ds.size(); ++i)
                (fold_of[static_cast<std::size_t>(i)] == f ? hold : rest).push_back(i);
            const TrainedModel model = baseline_med(ds.subset(rest), spec, prior, cfg);
            err_sum += misclassification(model, ds.subset(hold));
        }
        const double err = err_sum / folds;
        if (err < best_err || (err == best_err && gamma < best_gamma)) {
            best_err = err;
            best_gamma = gamma;
        }
    }
    return best_gamma;
}

} // namespace gemmed
