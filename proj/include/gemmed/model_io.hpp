#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gemmed/trainer.hpp"

namespace gemmed {

inline constexpr const char* kModelHeader = "gemmed-model v1";

/// Self-describing text format. One keyword per line, then one "sample" line
/// per training row carrying label, lambda, eta, distance, the selection and
/// reference flags, and the features. Doubles are written with 17 significant
/// digits and reload bit-exactly.
inline void save_model(const TrainedModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("model: cannot write " + path);
    const auto d = [](double v) { return detail::format_double(v); };

    out << kModelHeader << "\n";
    if (model.kernel.kind == KernelSpec::Kind::linear)
        out << "kernel linear\n";
    else
        out << "kernel rbf " << d(model.kernel.gamma) << "\n";
    out << "n " << model.train.size() << "\n";
    out << "dim " << model.train.dim() << "\n";
    out << "c " << d(model.prior.c) << "\n";
    out << "a_eta " << d(model.prior.a_eta) << "\n";
    out << "C1 " << d(model.config.C1) << "\n";
    out << "beta_hat " << d(model.config.beta_hat) << "\n";
    out << "scaling " << (model.gem.scale == GemScale::total ? "total" : "per_class") << "\n";
    out << "variant "
        << (model.config.variant.form == PosteriorVariant::Form::additive ? "additive"
                                                                          : "multiplicative")
        << " " << (model.config.variant.margin_offset ? 1 : 0) << " "
        << (model.config.variant.kappa_unscaled ? 1 : 0) << "\n";
    out << "k " << model.gem.k << "\n";
    out << "epsilon " << d(model.gem.epsilon.neg) << " " << d(model.gem.epsilon.pos) << "\n";
    out << "gamma_hat " << d(model.gem.gamma_hat.neg) << " " << d(model.gem.gamma_hat.pos) << "\n";
    out << "threshold " << d(model.gem.threshold.neg) << " " << d(model.gem.threshold.pos) << "\n";
    out << "raw_optimum " << d(model.gem.raw_optimum.neg) << " " << d(model.gem.raw_optimum.pos)
        << "\n";
    out << "class_count " << d(model.gem.class_count.neg) << " " << d(model.gem.class_count.pos)
        << "\n";
    out << "candidate_count " << d(model.gem.candidate_count.neg) << " "
        << d(model.gem.candidate_count.pos) << "\n";
    out << "mu " << d(model.dual.mu.neg) << " " << d(model.dual.mu.pos) << "\n";
    out << "kappa " << d(model.dual.kappa.neg) << " " << d(model.dual.kappa.pos) << "\n";

    const bool has_gem = model.gem.distances.size() == model.train.size();
    for (Eigen::Index i = 0; i < model.train.size(); ++i) {
        out << "sample " << model.train.label(i) << " " << d(model.dual.lambda(i)) << " "
            << d(model.eta_hat(i)) << " " << d(has_gem ? model.gem.distances(i) : 0.0) << " "
            << (has_gem ? int(model.gem.selected[static_cast<std::size_t>(i)]) : 0) << " "
            << (has_gem ? int(model.gem.reference[static_cast<std::size_t>(i)]) : 0);
        for (Eigen::Index c = 0; c < model.train.dim(); ++c)
            out << " " << d(model.train.features()(i, c));
        out << "\n";
    }
    out << "end\n";
    if (!out) throw std::runtime_error("model: write failed for " + path);
}

namespace detail {

inline std::runtime_error model_error(const std::string& path, const std::string& what) {
    return std::runtime_error("model: " + path + ": " + what);
}

} // namespace detail

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("model: cannot open " + path);

    std::string line;
    if (!std::getline(in, line) || line != kModelHeader)
        throw detail::model_error(path, "bad version line, expected '" +
                                            std::string(kModelHeader) + "'");

    TrainedModel model;
    Eigen::Index n = -1, dim = -1;
    Eigen::MatrixXd features;
    std::vector<int> labels;
    Eigen::Index row = 0;
    bool done = false;

    auto need = [&](std::istringstream& s, auto& v, const std::string& key) {
        if (!(s >> v)) throw detail::model_error(path, "malformed '" + key + "' line");
    };

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream s(line);
        std::string key;
        s >> key;
        if (key == "end") {
            done = true;
            break;
        } else if (key == "kernel") {
            std::string kind;
            need(s, kind, key);
            if (kind == "linear") model.kernel.kind = KernelSpec::Kind::linear;
            else if (kind == "rbf") {
                model.kernel.kind = KernelSpec::Kind::rbf;
                need(s, model.kernel.gamma, key);
            } else throw detail::model_error(path, "unknown kernel '" + kind + "'");
        } else if (key == "n") {
            need(s, n, key);
            if (n <= 0) throw detail::model_error(path, "n must be positive");
        } else if (key == "dim") {
            need(s, dim, key);
            if (dim <= 0) throw detail::model_error(path, "dim must be positive");
        } else if (key == "c") need(s, model.prior.c, key);
        else if (key == "a_eta") need(s, model.prior.a_eta, key);
        else if (key == "C1") need(s, model.config.C1, key);
        else if (key == "beta_hat") {
            need(s, model.config.beta_hat, key);
            model.gem.beta_hat = model.config.beta_hat;
        } else if (key == "scaling") {
            std::string v;
            need(s, v, key);
            if (v == "total") model.gem.scale = GemScale::total;
            else if (v == "per_class") model.gem.scale = GemScale::per_class;
            else throw detail::model_error(path, "unknown scaling '" + v + "'");
        } else if (key == "variant") {
            std::string form;
            int offset = 0, unscaled = 0;
            need(s, form, key);
            need(s, offset, key);
            need(s, unscaled, key);
            model.config.variant.form = form == "multiplicative"
                                            ? PosteriorVariant::Form::multiplicative
                                            : PosteriorVariant::Form::additive;
            model.config.variant.margin_offset = offset != 0;
            model.config.variant.kappa_unscaled = unscaled != 0;
        } else if (key == "k") need(s, model.gem.k, key);
        else if (key == "epsilon") { need(s, model.gem.epsilon.neg, key); need(s, model.gem.epsilon.pos, key); }
        else if (key == "gamma_hat") { need(s, model.gem.gamma_hat.neg, key); need(s, model.gem.gamma_hat.pos, key); }
        else if (key == "threshold") { need(s, model.gem.threshold.neg, key); need(s, model.gem.threshold.pos, key); }
        else if (key == "raw_optimum") { need(s, model.gem.raw_optimum.neg, key); need(s, model.gem.raw_optimum.pos, key); }
        else if (key == "class_count") { need(s, model.gem.class_count.neg, key); need(s, model.gem.class_count.pos, key); }
        else if (key == "candidate_count") { need(s, model.gem.candidate_count.neg, key); need(s, model.gem.candidate_count.pos, key); }
        else if (key == "mu") { need(s, model.dual.mu.neg, key); need(s, model.dual.mu.pos, key); }
        else if (key == "kappa") { need(s, model.dual.kappa.neg, key); need(s, model.dual.kappa.pos, key); }
        else if (key == "sample") {
            if (n < 0 || dim < 0)
                throw detail::model_error(path, "sample line before n/dim were declared");
            if (row == 0) {
                features.resize(n, dim);
                model.dual.lambda.resize(n);
                model.eta_hat.resize(n);
                model.gem.distances.resize(n);
                model.gem.selected.assign(static_cast<std::size_t>(n), 0);
                model.gem.reference.assign(static_cast<std::size_t>(n), 0);
            }
            if (row >= n) throw detail::model_error(path, "more sample lines than n");
            int y = 0, sel = 0, ref = 0;
            double lambda = 0, eta = 0, dist = 0;
            need(s, y, key);
            need(s, lambda, key);
            need(s, eta, key);
            need(s, dist, key);
            need(s, sel, key);
            need(s, ref, key);
            labels.push_back(y);
            model.dual.lambda(row) = lambda;
            model.eta_hat(row) = eta;
            model.gem.distances(row) = dist;
            model.gem.selected[static_cast<std::size_t>(row)] = sel ? 1 : 0;
            model.gem.reference[static_cast<std::size_t>(row)] = ref ? 1 : 0;
            for (Eigen::Index c = 0; c < dim; ++c) {
                double v = 0;
                need(s, v, key);
                features(row, c) = v;
            }
            ++row;
        } else {
            throw detail::model_error(path, "unknown keyword '" + key + "'");
        }
    }
    if (!done) throw detail::model_error(path, "missing 'end' line");
    if (row != n) throw detail::model_error(path, "expected " + std::to_string(n) +
                                                      " sample lines, found " +
                                                      std::to_string(row));

    model.gem.n_total = n;
    model.train = Dataset(std::move(features), std::move(labels));
    model.f_hat = Eigen::VectorXd::Zero(n);
    model.source_indices.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
        model.source_indices[static_cast<std::size_t>(i)] = i;
    return model;
}

} // namespace gemmed
