#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gemmed/dataset.hpp"

namespace gemmed {

/// Normalization applied to the per-class entropy bound and to the
/// per-sample entropy/coverage weights used during training.
///   total:     divide by the full training count |T|
///   per_class: divide by class/candidate counts instead
enum class GemScale { total, per_class };

/// The k-th smallest Euclidean distance from query to the reference rows.
template <class Q>
double knn_distance(const Eigen::MatrixBase<Q>& query, const Eigen::MatrixXd& reference,
                    int k) {
    if (k < 1 || k > reference.rows())
        throw std::invalid_argument("knn_distance: k out of range for reference set");
    std::vector<double> sq(static_cast<std::size_t>(reference.rows()));
    for (Eigen::Index i = 0; i < reference.rows(); ++i) {
        double s = 0.0;
        for (Eigen::Index c = 0; c < reference.cols(); ++c) {
            const double d = query(c) - reference(i, c);
            s += d * d;
        }
        sq[static_cast<std::size_t>(i)] = s;
    }
    std::nth_element(sq.begin(), sq.begin() + (k - 1), sq.end());
    return std::sqrt(sq[static_cast<std::size_t>(k - 1)]);
}

/// Indices of the K smallest entries (ties broken by lowest index), i.e. the
/// minimizer of the selected-distance sum under a minimum-count constraint.
inline std::vector<Eigen::Index> me_set_select(const Eigen::VectorXd& distances, Eigen::Index K) {
    const Eigen::Index n = distances.size();
    if (K < 1 || K > n)
        throw std::invalid_argument("me_set_select: K out of range");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        if (distances(a) != distances(b)) return distances(a) < distances(b);
        return a < b;
    });
    order.resize(static_cast<std::size_t>(K));
    std::sort(order.begin(), order.end());
    return order;
}

/// Fitted BP-kNN minimal-entropy-set detector. distances/selected are indexed
/// by dataset row; gamma_hat is the per-class entropy bound and threshold the
/// per-class detection cutoff (largest selected distance).
struct GemModel {
    int k = 5;
    double beta_hat = 0.8;       // target coverage (fraction of candidates kept)
    PerClass epsilon;            // slack added to the optimal value
    GemScale scale = GemScale::total;

    Eigen::VectorXd distances;   // d_n per dataset row
    std::vector<std::uint8_t> selected;   // candidate rows in the ME-set estimate
    std::vector<std::uint8_t> reference;  // rows belonging to the reference part
    PerClass raw_optimum;        // selected-distance sum per class, unnormalized
    PerClass gamma_hat;
    PerClass threshold;
    PerClass class_count;
    PerClass candidate_count;
    Eigen::Index n_total = 0;

    double norm_for(int label) const {
        return scale == GemScale::total ? static_cast<double>(n_total)
                                        : class_count.of_label(label);
    }

    /// Per-sample weight multiplying d_n in the entropy term.
    Eigen::VectorXd entropy_weights(const std::vector<int>& labels) const {
        Eigen::VectorXd w(distances.size());
        for (Eigen::Index i = 0; i < w.size(); ++i)
            w(i) = distances(i) / norm_for(labels[static_cast<std::size_t>(i)]);
        return w;
    }

    /// Per-sample weight in the coverage term.
    Eigen::VectorXd coverage_weights(const std::vector<int>& labels, bool unscaled = false) const {
        Eigen::VectorXd w(distances.size());
        for (Eigen::Index i = 0; i < w.size(); ++i)
            w(i) = unscaled ? 1.0 : 1.0 / norm_for(labels[static_cast<std::size_t>(i)]);
        return w;
    }
};

/// Fits the detector: per class, k-NN distances of candidates against the
/// class reference part, selection of the round(beta_hat * #candidates)
/// smallest, and the entropy bound gamma_hat = optimum/normalizer + epsilon.
/// Reference rows receive a distance against the reference part excluding
/// themselves so every training row carries a d_n.
/// epsilon = nullopt applies a relative slack of 1e-3 per class.
inline GemModel fit_gem(const Dataset& ds, const BipartiteSplit& split, int k,
                        double beta_hat, std::optional<double> epsilon = std::nullopt,
                        GemScale scale = GemScale::total) {
    if (beta_hat <= 0.0 || beta_hat >= 1.0)
        throw std::invalid_argument("fit_gem: beta_hat must lie in (0,1)");
    if (k < 1) throw std::invalid_argument("fit_gem: k must be positive");

    GemModel model;
    model.k = k;
    model.beta_hat = beta_hat;
    model.scale = scale;
    model.n_total = ds.size();
    model.distances = Eigen::VectorXd::Zero(ds.size());
    model.selected.assign(static_cast<std::size_t>(ds.size()), 0);
    model.reference.assign(static_cast<std::size_t>(ds.size()), 0);

    for (int z : {-1, +1}) {
        const auto slot = static_cast<std::size_t>(class_index(z));
        const auto& ref_idx = split.reference[slot];
        const auto& cand_idx = split.candidates[slot];
        if (ref_idx.empty() || cand_idx.empty())
            throw std::invalid_argument("fit_gem: degenerate bipartite split");
        if (static_cast<int>(ref_idx.size()) < k)
            throw std::invalid_argument("fit_gem: class reference part smaller than k");
        model.class_count.of_label(z) =
            static_cast<double>(ref_idx.size() + cand_idx.size());
        model.candidate_count.of_label(z) = static_cast<double>(cand_idx.size());

        Eigen::MatrixXd ref(static_cast<Eigen::Index>(ref_idx.size()), ds.dim());
        for (std::size_t i = 0; i < ref_idx.size(); ++i)
            ref.row(static_cast<Eigen::Index>(i)) = ds.x(ref_idx[i]);
        for (auto r : ref_idx) model.reference[static_cast<std::size_t>(r)] = 1;

        for (auto i : cand_idx)
            model.distances(i) = knn_distance(ds.x(i), ref, k);

        // Reference rows: leave-self-out distance when the part is large
        // enough, otherwise fall back to the self-inclusive distance.
        for (std::size_t r = 0; r < ref_idx.size(); ++r) {
            if (static_cast<int>(ref_idx.size()) - 1 >= k) {
                Eigen::MatrixXd others(ref.rows() - 1, ref.cols());
                Eigen::Index w = 0;
                for (Eigen::Index j = 0; j < ref.rows(); ++j)
                    if (j != static_cast<Eigen::Index>(r)) others.row(w++) = ref.row(j);
                model.distances(ref_idx[r]) = knn_distance(ds.x(ref_idx[r]), others, k);
            } else {
                model.distances(ref_idx[r]) = knn_distance(ds.x(ref_idx[r]), ref, k);
            }
        }

        Eigen::VectorXd cand_d(static_cast<Eigen::Index>(cand_idx.size()));
        for (std::size_t i = 0; i < cand_idx.size(); ++i)
            cand_d(static_cast<Eigen::Index>(i)) = model.distances(cand_idx[i]);
        auto K_z = static_cast<Eigen::Index>(
            std::lround(beta_hat * static_cast<double>(cand_idx.size())));
        K_z = std::clamp<Eigen::Index>(K_z, 1, static_cast<Eigen::Index>(cand_idx.size()));

        const auto chosen = me_set_select(cand_d, K_z);
        double raw = 0.0, largest = 0.0;
        for (auto c : chosen) {
            raw += cand_d(c);
            largest = std::max(largest, cand_d(c));
            model.selected[static_cast<std::size_t>(cand_idx[static_cast<std::size_t>(c)])] = 1;
        }
        model.raw_optimum.of_label(z) = raw;
        const double norm = scale == GemScale::total
                                ? static_cast<double>(ds.size())
                                : static_cast<double>(cand_idx.size());
        const double base = raw / norm;
        const double eps = epsilon ? *epsilon : 1e-3 * base;
        model.epsilon.of_label(z) = eps;
        model.gamma_hat.of_label(z) = base + eps;
        model.threshold.of_label(z) = largest;
    }
    return model;
}

enum class Detection { nominal, anomalous };

/// Flags a query whose k-NN distance to the reference exceeds the detection
/// cutoff. With an unknown class the larger of the two class cutoffs applies.
inline Detection detect(const GemModel& model, const Eigen::VectorXd& query,
                        const Eigen::MatrixXd& reference,
                        std::optional<int> label = std::nullopt) {
    const double d = knn_distance(query, reference, model.k);
    const double cutoff = label ? model.threshold.of_label(*label) : model.threshold.max();
    return d > cutoff ? Detection::anomalous : Detection::nominal;
}

/// Per-sample leave-one-out k-NN distances (each row against all others).
inline Eigen::VectorXd loo_distances(const Dataset& ds, int k) {
    const Eigen::Index n = ds.size();
    if (n < k + 1)
        throw std::invalid_argument("loo_distances: dataset smaller than k+1");
    Eigen::VectorXd d(n);
    Eigen::MatrixXd others(n - 1, ds.dim());
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index w = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) others.row(w++) = ds.x(j);
        d(i) = knn_distance(ds.x(i), others, k);
    }
    return d;
}

/// Leave-one-out detection threshold: the (1-alpha) quantile of the
/// loo_distances list. alpha = 0 yields the maximum.
inline double loo_threshold(const Dataset& ds, int k, double alpha) {
    if (alpha < 0.0 || alpha >= 1.0)
        throw std::invalid_argument("loo_threshold: alpha must lie in [0,1)");
    const Eigen::VectorXd loo = loo_distances(ds, k);
    std::vector<double> d(loo.data(), loo.data() + loo.size());
    std::sort(d.begin(), d.end());
    auto rank = static_cast<std::size_t>(
        std::ceil((1.0 - alpha) * static_cast<double>(d.size())));
    rank = std::clamp<std::size_t>(rank, 1, d.size());
    return d[rank - 1];
}

} // namespace gemmed
