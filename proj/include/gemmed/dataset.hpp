#pragma once

#include <array>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gemmed/rng.hpp"

namespace gemmed {

// Index convention used throughout: class slot 0 holds label -1, slot 1 holds +1.
inline int class_index(int label) { return label > 0 ? 1 : 0; }
inline int class_label(int index) { return index > 0 ? +1 : -1; }

/// A pair of values keyed by class label.
struct PerClass {
    double neg = 0.0;
    double pos = 0.0;
    double& of_label(int y) { return y > 0 ? pos : neg; }
    double of_label(int y) const { return y > 0 ? pos : neg; }
    double max() const { return neg > pos ? neg : pos; }
};

/// Labeled feature vectors, optionally carrying ground-truth anomaly flags
/// (used for evaluation only, never for training). Immutable after
/// construction; rows share a common dimension and labels are +/-1.
class Dataset {
public:
    Dataset() = default;  // empty placeholder, populated by move assignment

    Dataset(Eigen::MatrixXd features, std::vector<int> labels,
            std::vector<std::uint8_t> anomaly_truth = {})
        : features_(std::move(features)),
          labels_(std::move(labels)),
          anomaly_(std::move(anomaly_truth)) {
        if (features_.rows() == 0)
            throw std::invalid_argument("dataset: empty");
        if (static_cast<Eigen::Index>(labels_.size()) != features_.rows())
            throw std::invalid_argument("dataset: label count does not match row count");
        for (int y : labels_)
            if (y != -1 && y != 1)
                throw std::invalid_argument("dataset: labels must be -1 or +1");
        if (!anomaly_.empty() &&
            static_cast<Eigen::Index>(anomaly_.size()) != features_.rows())
            throw std::invalid_argument("dataset: anomaly flag count does not match row count");
    }

    Eigen::Index size() const { return features_.rows(); }
    Eigen::Index dim() const { return features_.cols(); }
    const Eigen::MatrixXd& features() const { return features_; }
    auto x(Eigen::Index i) const { return features_.row(i); }
    int label(Eigen::Index i) const { return labels_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& labels() const { return labels_; }

    bool has_anomaly_truth() const { return !anomaly_.empty(); }
    bool anomaly_truth(Eigen::Index i) const {
        if (anomaly_.empty()) throw std::logic_error("dataset: no anomaly truth recorded");
        return anomaly_[static_cast<std::size_t>(i)] != 0;
    }
    const std::vector<std::uint8_t>& anomaly_flags() const { return anomaly_; }

    std::array<Eigen::Index, 2> class_counts() const {
        std::array<Eigen::Index, 2> counts{0, 0};
        for (int y : labels_) ++counts[static_cast<std::size_t>(class_index(y))];
        return counts;
    }

    /// Row indices of one class, in dataset order.
    std::vector<Eigen::Index> class_members(int label) const {
        std::vector<Eigen::Index> out;
        for (Eigen::Index i = 0; i < size(); ++i)
            if (labels_[static_cast<std::size_t>(i)] == label) out.push_back(i);
        return out;
    }

    Dataset subset(const std::vector<Eigen::Index>& rows) const {
        if (rows.empty()) throw std::invalid_argument("dataset: empty subset");
        Eigen::MatrixXd f(static_cast<Eigen::Index>(rows.size()), dim());
        std::vector<int> y;
        std::vector<std::uint8_t> a;
        y.reserve(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            f.row(static_cast<Eigen::Index>(r)) = features_.row(rows[r]);
            y.push_back(labels_[static_cast<std::size_t>(rows[r])]);
            if (!anomaly_.empty()) a.push_back(anomaly_[static_cast<std::size_t>(rows[r])]);
        }
        return Dataset(std::move(f), std::move(y), std::move(a));
    }

private:
    Eigen::MatrixXd features_;
    std::vector<int> labels_;
    std::vector<std::uint8_t> anomaly_;
};

/// Two-dimensional synthetic benchmark: one Gaussian blob per class at
/// +/-mean_plus with shared covariance, corrupted by randomly labeled
/// points drawn uniformly from an annulus around the origin.
struct SyntheticConfig {
    Eigen::Vector2d mean_plus{3.0, 3.0};
    Eigen::Matrix2d covariance{{20.0, 16.0}, {16.0, 20.0}};
    int n_per_class = 100;
    double corruption_rate = 0.2;     // fraction of each class replaced by ring points
    double ring_inner_radius = 55.0;
    double ring_width = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_per_class <= 0) throw std::invalid_argument("synthetic: n_per_class must be positive");
        if (corruption_rate < 0.0 || corruption_rate >= 1.0)
            throw std::invalid_argument("synthetic: corruption_rate must lie in [0,1)");
        if (ring_inner_radius <= 0.0 || ring_width <= 0.0)
            throw std::invalid_argument("synthetic: ring radius and width must be positive");
        if (covariance(0, 1) != covariance(1, 0))
            throw std::invalid_argument("synthetic: covariance must be symmetric");
        Eigen::LLT<Eigen::Matrix2d> llt(covariance);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("synthetic: covariance must be positive definite");
    }
};

inline Dataset generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    Eigen::LLT<Eigen::Matrix2d> llt(cfg.covariance);
    const Eigen::Matrix2d chol = llt.matrixL();

    const int nominal_per_class =
        static_cast<int>(std::lround(cfg.n_per_class * (1.0 - cfg.corruption_rate)));
    const int total = 2 * cfg.n_per_class;
    const int n_ring = total - 2 * nominal_per_class;

    Eigen::MatrixXd features(total, 2);
    std::vector<int> labels;
    std::vector<std::uint8_t> anomaly;
    labels.reserve(static_cast<std::size_t>(total));
    anomaly.reserve(static_cast<std::size_t>(total));

    auto rng = make_rng(cfg.seed, "synthetic");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    Eigen::Index row = 0;
    for (int z : {+1, -1}) {
        const Eigen::Vector2d mean = static_cast<double>(z) * cfg.mean_plus;
        for (int i = 0; i < nominal_per_class; ++i, ++row) {
            Eigen::Vector2d g(normal(rng), normal(rng));
            features.row(row) = (mean + chol * g).transpose();
            labels.push_back(z);
            anomaly.push_back(0);
        }
    }
    // Annulus points: area-uniform radius, uniform angle, label a fair coin.
    const double r0 = cfg.ring_inner_radius;
    const double r1 = cfg.ring_inner_radius + cfg.ring_width;
    for (int i = 0; i < n_ring; ++i, ++row) {
        const double r = std::sqrt(r0 * r0 + unit(rng) * (r1 * r1 - r0 * r0));
        const double theta = 2.0 * std::numbers::pi * unit(rng);
        features.row(row) << r * std::cos(theta), r * std::sin(theta);
        labels.push_back(unit(rng) < 0.5 ? -1 : +1);
        anomaly.push_back(1);
    }
    return Dataset(std::move(features), std::move(labels), std::move(anomaly));
}

/// Disjoint per-class partition into reference points (k-NN targets) and
/// candidate points (scored against the reference part).
struct BipartiteSplit {
    std::array<std::vector<Eigen::Index>, 2> reference;   // per class slot
    std::array<std::vector<Eigen::Index>, 2> candidates;  // per class slot
    double split_fraction = 0.5;

    bool is_reference(Eigen::Index i, int label) const {
        const auto& r = reference[static_cast<std::size_t>(class_index(label))];
        return std::binary_search(r.begin(), r.end(), i);
    }
};

inline BipartiteSplit bipartite_split(const Dataset& ds, double split_fraction,
                                      std::uint64_t seed) {
    if (split_fraction <= 0.0 || split_fraction >= 1.0)
        throw std::invalid_argument("bipartite_split: split_fraction must lie in (0,1)");
    BipartiteSplit split;
    split.split_fraction = split_fraction;
    for (int z : {-1, +1}) {
        auto members = ds.class_members(z);
        if (members.size() < 2)
            throw std::invalid_argument("bipartite_split: each class needs at least 2 samples");
        auto rng = make_rng(seed, z > 0 ? "split/pos" : "split/neg");
        std::shuffle(members.begin(), members.end(), rng);
        auto m = static_cast<std::size_t>(
            std::lround(split_fraction * static_cast<double>(members.size())));
        m = std::clamp<std::size_t>(m, 1, members.size() - 1);
        const auto slot = static_cast<std::size_t>(class_index(z));
        split.reference[slot].assign(members.begin(), members.begin() + static_cast<long>(m));
        split.candidates[slot].assign(members.begin() + static_cast<long>(m), members.end());
        std::sort(split.reference[slot].begin(), split.reference[slot].end());
        std::sort(split.candidates[slot].begin(), split.candidates[slot].end());
    }
    return split;
}

// ---------------------------------------------------------------------------
// CSV ingestion.  Header row required; every column other than the named
// label/anomaly columns is a numeric feature column.  '.' decimal separator,
// UTF-8, no quoting.

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline double parse_double_strict(const std::string& s, std::size_t row) {
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
        throw std::runtime_error("csv: malformed numeric value '" + s + "' in row " +
                                 std::to_string(row));
    return v;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

/// Loads a labeled dataset from CSV. Label values {-1,+1} are taken as-is;
/// {0,1} are mapped 0 -> -1, 1 -> +1. Row numbers in error messages count
/// data rows starting at 1.
inline Dataset load_csv(const std::string& path, const std::string& label_column,
                        const std::optional<std::string>& anomaly_column = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path);

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("csv: missing header in " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);

    std::ptrdiff_t label_idx = -1, anomaly_idx = -1;
    std::vector<std::size_t> feature_idx;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) label_idx = static_cast<std::ptrdiff_t>(i);
        else if (anomaly_column && header[i] == *anomaly_column)
            anomaly_idx = static_cast<std::ptrdiff_t>(i);
        else feature_idx.push_back(i);
    }
    if (label_idx < 0)
        throw std::runtime_error("csv: label column '" + label_column + "' not found");
    if (anomaly_column && anomaly_idx < 0)
        throw std::runtime_error("csv: anomaly column '" + *anomaly_column + "' not found");
    if (feature_idx.empty()) throw std::runtime_error("csv: no feature columns");

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<std::uint8_t> anomaly;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row_no;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw std::runtime_error("csv: row " + std::to_string(row_no) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(header.size()));
        std::vector<double> feat;
        feat.reserve(feature_idx.size());
        for (auto i : feature_idx)
            feat.push_back(detail::parse_double_strict(fields[i], row_no));
        const double raw = detail::parse_double_strict(fields[static_cast<std::size_t>(label_idx)], row_no);
        int y = 0;
        if (raw == -1.0 || raw == 0.0) y = -1;
        else if (raw == 1.0) y = +1;
        else
            throw std::runtime_error("csv: unknown label value '" +
                                     fields[static_cast<std::size_t>(label_idx)] + "' in row " +
                                     std::to_string(row_no));
        labels.push_back(y);
        if (anomaly_idx >= 0) {
            const double a = detail::parse_double_strict(fields[static_cast<std::size_t>(anomaly_idx)], row_no);
            if (a != 0.0 && a != 1.0)
                throw std::runtime_error("csv: anomaly flag must be 0 or 1 in row " +
                                         std::to_string(row_no));
            anomaly.push_back(a != 0.0 ? 1 : 0);
        }
        rows.push_back(std::move(feat));
    }
    if (rows.empty()) throw std::runtime_error("csv: no data rows in " + path);

    const auto dim = rows.front().size();
    Eigen::MatrixXd features(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != dim)
            throw std::runtime_error("csv: inconsistent dimension in row " + std::to_string(r + 1));
        for (std::size_t c = 0; c < dim; ++c)
            features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return Dataset(std::move(features), std::move(labels), std::move(anomaly));
}

/// Writes columns x1..xp, y and (when truth is recorded) anomaly. Floating
/// point values round-trip bit-exactly through load_csv.
inline void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("csv: cannot write " + path);
    for (Eigen::Index c = 0; c < ds.dim(); ++c)
        out << "x" << (c + 1) << ",";
    out << "y";
    if (ds.has_anomaly_truth()) out << ",anomaly";
    out << "\n";
    for (Eigen::Index r = 0; r < ds.size(); ++r) {
        for (Eigen::Index c = 0; c < ds.dim(); ++c)
            out << detail::format_double(ds.features()(r, c)) << ",";
        out << ds.label(r);
        if (ds.has_anomaly_truth()) out << "," << (ds.anomaly_truth(r) ? 1 : 0);
        out << "\n";
    }
    if (!out) throw std::runtime_error("csv: write failed for " + path);
}

} // namespace gemmed
