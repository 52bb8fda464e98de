#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gemmed/benchmark.hpp"
#include "gemmed/dataset.hpp"
#include "gemmed/evaluate.hpp"
#include "gemmed/gem.hpp"
#include "gemmed/model_io.hpp"
#include "gemmed/trainer.hpp"

namespace gemmed::cli {

inline bool csv_has_column(const std::string& path, const std::string& name) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("csv: missing header in " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    for (const auto& h : detail::split_csv_line(line))
        if (h == name) return true;
    return false;
}

/// Feature matrix of a CSV, skipping the named label/anomaly columns when
/// present. Used for prediction/detection inputs that may be unlabeled.
inline Eigen::MatrixXd load_features(const std::string& path, const std::string& label_column,
                                     const std::string& anomaly_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("csv: missing header in " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = detail::split_csv_line(line);
    std::vector<std::size_t> feature_idx;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] != label_column && header[i] != anomaly_column) feature_idx.push_back(i);
    if (feature_idx.empty()) throw std::runtime_error("csv: no feature columns in " + path);

    std::vector<std::vector<double>> rows;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++row_no;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw std::runtime_error("csv: row " + std::to_string(row_no) +
                                     " has the wrong field count");
        std::vector<double> feat;
        feat.reserve(feature_idx.size());
        for (auto i : feature_idx)
            feat.push_back(detail::parse_double_strict(fields[i], row_no));
        rows.push_back(std::move(feat));
    }
    if (rows.empty()) throw std::runtime_error("csv: no data rows in " + path);
    Eigen::MatrixXd features(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return features;
}

// ---------------------------------------------------------------------------

struct GenerateOptions {
    SyntheticConfig synthetic;
    std::string out = "synthetic.csv";
};

inline int cmd_generate(const GenerateOptions& opt, std::ostream& log = std::cout) {
    const Dataset ds = generate_synthetic(opt.synthetic);
    save_csv(ds, opt.out);
    const auto counts = ds.class_counts();
    Eigen::Index anomalies = 0;
    for (Eigen::Index i = 0; i < ds.size(); ++i)
        if (ds.anomaly_truth(i)) ++anomalies;
    log << "wrote " << opt.out << ": " << ds.size() << " samples (" << counts[1]
        << " labeled +1, " << counts[0] << " labeled -1, " << anomalies << " anomalous)\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainOptions {
    std::string data;
    std::string out = "model.gemmed";
    std::string label_column = "y";
    std::string anomaly_column = "anomaly";
    KernelSpec kernel{};
    PriorConfig prior{};
    TrainConfig train{};
    int gem_k = 5;
    double split_fraction = 0.5;
    double epsilon = -1.0;  // negative: relative default inside fit_gem
    GemScale scale = GemScale::total;
    std::string baseline;   // "", "med"
    std::string posterior = "gibbs";  // or "exact"
};

inline int cmd_train(const TrainOptions& opt, std::ostream& log = std::cout) {
    const bool with_anomaly = csv_has_column(opt.data, opt.anomaly_column);
    const Dataset ds = load_csv(opt.data, opt.label_column,
                                with_anomaly ? std::optional<std::string>(opt.anomaly_column)
                                             : std::nullopt);
    TrainConfig cfg = opt.train;
    if (opt.posterior == "exact") cfg.backend = PosteriorBackend::exact;
    else if (opt.posterior == "gibbs") cfg.backend = PosteriorBackend::gibbs;
    else throw std::invalid_argument("train: unknown posterior backend '" + opt.posterior + "'");

    const auto t0 = std::chrono::steady_clock::now();
    auto progress = [&](int iter, const IterationStats& stats) {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        char buf[160];
        std::snprintf(buf, sizeof(buf), "iter=%d objective=%.6f grad_max=%.6g update=%.6g wall_s=%.3f",
                      iter, stats.objective, stats.grad_linf, stats.update_linf, wall);
        log << buf << "\n";
    };

    TrainedModel model;
    if (opt.baseline == "med") {
        model = baseline_med(ds, opt.kernel, opt.prior, cfg, progress);
    } else if (opt.baseline.empty()) {
        const auto split = bipartite_split(ds, opt.split_fraction,
                                           derive_seed(cfg.seed, "train/split"));
        const GemModel gem =
            fit_gem(ds, split, opt.gem_k, cfg.beta_hat,
                    opt.epsilon >= 0.0 ? std::optional<double>(opt.epsilon) : std::nullopt,
                    opt.scale);
        model = train(ds, opt.kernel, gem, opt.prior, cfg, progress);
    } else {
        throw std::invalid_argument("train: unknown baseline '" + opt.baseline + "'");
    }
    save_model(model, opt.out);
    log << "wrote " << opt.out << " after " << model.history.size() << " iterations\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct PredictOptions {
    std::string model;
    std::string data;
    std::string out = "predictions.csv";
    std::string label_column = "y";
    std::string anomaly_column = "anomaly";
};

inline int cmd_predict(const PredictOptions& opt, std::ostream& log = std::cout) {
    const TrainedModel model = load_model(opt.model);
    const Eigen::MatrixXd x = load_features(opt.data, opt.label_column, opt.anomaly_column);
    if (x.cols() != model.train.dim())
        throw std::runtime_error("predict: input dimension " + std::to_string(x.cols()) +
                                 " does not match model dimension " +
                                 std::to_string(model.train.dim()));
    std::ofstream out(opt.out);
    if (!out) throw std::runtime_error("predict: cannot write " + opt.out);
    out << "index,score,decision\n";
    char buf[64];
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double score = decision_value(model, x.row(i));
        std::snprintf(buf, sizeof(buf), "%.17g", score);
        out << i << "," << buf << "," << (score < 0.0 ? -1 : +1) << "\n";
    }
    log << "wrote " << opt.out << " (" << x.rows() << " rows)\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct DetectOptions {
    std::string model;
    std::string data;
    std::string out = "detections.csv";
    std::string label_column = "y";
    std::string anomaly_column = "anomaly";
    double alpha = -1.0;  // >= 0: leave-one-out threshold at this false-alarm level
};

/// With --alpha, flags rows whose k-NN distance to the stored training set
/// exceeds the leave-one-out (1-alpha) quantile. Otherwise a row is anomalous
/// only if it exceeds the fitted cutoff of both class reference parts; the
/// reported distance/threshold pair belongs to the best-matching class.
inline int cmd_detect(const DetectOptions& opt, std::ostream& log = std::cout) {
    const TrainedModel model = load_model(opt.model);
    const Eigen::MatrixXd x = load_features(opt.data, opt.label_column, opt.anomaly_column);
    if (x.cols() != model.train.dim())
        throw std::runtime_error("detect: input dimension does not match the model");

    std::ofstream out(opt.out);
    if (!out) throw std::runtime_error("detect: cannot write " + opt.out);
    out << "index,distance,threshold,decision\n";
    char b1[64], b2[64];
    Eigen::Index flagged = 0;

    if (opt.alpha >= 0.0) {
        const double threshold = loo_threshold(model.train, model.gem.k, opt.alpha);
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double d = knn_distance(x.row(i), model.train.features(), model.gem.k);
            const bool anomalous = d > threshold;
            flagged += anomalous;
            std::snprintf(b1, sizeof(b1), "%.17g", d);
            std::snprintf(b2, sizeof(b2), "%.17g", threshold);
            out << i << "," << b1 << "," << b2 << ","
                << (anomalous ? "anomalous" : "nominal") << "\n";
        }
        log << "threshold " << threshold << " (leave-one-out, alpha=" << opt.alpha << "); "
            << flagged << "/" << x.rows() << " flagged\n";
        return 0;
    }

    // Per-class reference parts from the stored flags.
    std::array<std::vector<Eigen::Index>, 2> ref_rows;
    for (Eigen::Index i = 0; i < model.train.size(); ++i)
        if (model.gem.reference[static_cast<std::size_t>(i)])
            ref_rows[static_cast<std::size_t>(class_index(model.train.label(i)))].push_back(i);
    std::array<Eigen::MatrixXd, 2> refs;
    for (int s = 0; s < 2; ++s) {
        if (ref_rows[static_cast<std::size_t>(s)].empty())
            throw std::runtime_error("detect: the model carries no reference part; use --alpha");
        refs[static_cast<std::size_t>(s)].resize(
            static_cast<Eigen::Index>(ref_rows[static_cast<std::size_t>(s)].size()),
            model.train.dim());
        for (std::size_t r = 0; r < ref_rows[static_cast<std::size_t>(s)].size(); ++r)
            refs[static_cast<std::size_t>(s)].row(static_cast<Eigen::Index>(r)) =
                model.train.x(ref_rows[static_cast<std::size_t>(s)][r]);
    }

    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double best_margin = std::numeric_limits<double>::infinity();
        double best_d = 0.0, best_thr = 0.0;
        for (int s = 0; s < 2; ++s) {
            const double d = knn_distance(x.row(i), refs[static_cast<std::size_t>(s)],
                                          model.gem.k);
            const double thr = model.gem.threshold.of_label(class_label(s));
            if (d - thr < best_margin) {
                best_margin = d - thr;
                best_d = d;
                best_thr = thr;
            }
        }
        const bool anomalous = best_margin > 0.0;  // beyond the cutoff of every class
        flagged += anomalous;
        std::snprintf(b1, sizeof(b1), "%.17g", best_d);
        std::snprintf(b2, sizeof(b2), "%.17g", best_thr);
        out << i << "," << b1 << "," << b2 << "," << (anomalous ? "anomalous" : "nominal")
            << "\n";
    }
    log << "thresholds neg=" << model.gem.threshold.neg << " pos=" << model.gem.threshold.pos
        << "; " << flagged << "/" << x.rows() << " flagged\n";
    return 0;
}

// ---------------------------------------------------------------------------

struct BenchmarkOptions {
    BenchmarkGrid grid;
    std::string out = "benchmark";  // writes <out>.csv and <out>.json
};

inline int cmd_benchmark(const BenchmarkOptions& opt, std::ostream& log = std::cout) {
    const auto results = run_benchmark(opt.grid);
    write_benchmark_csv(results, opt.grid.timings, opt.out + ".csv");
    const auto summary = summarize_benchmark(results);
    std::ofstream js(opt.out + ".json");
    if (!js) throw std::runtime_error("benchmark: cannot write " + opt.out + ".json");
    js << summary.dump(2) << "\n";

    int failures = 0;
    for (const auto& r : results)
        if (!r.ok) {
            ++failures;
            log << "cell failed: " << r.method << " R=" << r.ring_radius
                << " r_a=" << r.corruption_rate << " seed=" << r.seed << ": " << r.message
                << "\n";
        }
    log << "wrote " << opt.out << ".csv and " << opt.out << ".json (" << results.size()
        << " rows, " << failures << " failures)\n";
    return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct CvGammaOptions {
    std::string data;
    std::string label_column = "y";
    std::string anomaly_column = "anomaly";
    std::vector<double> grid{1e-3, 1e-2, 1e-1, 1.0, 10.0};
    int folds = 5;
    PriorConfig prior{};
    TrainConfig train{};
};

inline int cmd_cv_gamma(const CvGammaOptions& opt, std::ostream& log = std::cout) {
    const bool with_anomaly = csv_has_column(opt.data, opt.anomaly_column);
    const Dataset ds = load_csv(opt.data, opt.label_column,
                                with_anomaly ? std::optional<std::string>(opt.anomaly_column)
                                             : std::nullopt);
    const double gamma = cv_gamma(ds, opt.grid, opt.folds, opt.prior, opt.train);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", gamma);
    log << "gamma " << buf << "\n";
    return 0;
}

} // namespace gemmed::cli
