#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gemmed/dataset.hpp"
#include "gemmed/evaluate.hpp"
#include "gemmed/gem.hpp"
#include "gemmed/rng.hpp"
#include "gemmed/trainer.hpp"

namespace gemmed {

/// One grid cell of the synthetic sweep: ring radius R, corruption rate r_a,
/// seed index and method. Methods train on a shared corrupted training set
/// and are scored on a fresh uncorrupted test set.
struct BenchmarkGrid {
    std::vector<double> ring_radii{15.0, 35.0, 55.0, 75.0};
    std::vector<double> corruption_rates{0.2, 0.3, 0.4, 0.5};
    int seeds = 10;
    std::vector<std::string> methods{"gem-med", "med", "gem+med"};
    int n_train_per_class = 100;
    int n_test_per_class = 2000;
    double two_stage_alpha = 0.05;
    int gem_k = 5;
    double split_fraction = 0.5;
    GemScale scale = GemScale::total;
    KernelSpec kernel{};
    PriorConfig prior{};
    TrainConfig train{};
    std::uint64_t master_seed = 0;
    int threads = 1;
    bool timings = false;  // fill runtime_s (breaks byte-for-byte determinism)

    void validate() const {
        if (ring_radii.empty() || corruption_rates.empty() || methods.empty() || seeds < 1)
            throw std::invalid_argument("benchmark: empty grid");
        if (n_train_per_class < 2 || n_test_per_class < 1)
            throw std::invalid_argument("benchmark: invalid sample counts");
        if (threads < 1) throw std::invalid_argument("benchmark: threads must be >= 1");
        for (const auto& m : methods)
            if (m != "gem-med" && m != "med" && m != "gem+med")
                throw std::invalid_argument("benchmark: unknown method '" + m + "'");
    }
};

struct CellResult {
    std::string method;
    int seed = 0;
    double ring_radius = 0.0;
    double corruption_rate = 0.0;
    double error = 0.0;
    double auc = 0.0;
    double runtime_s = 0.0;
    bool ok = false;
    std::string message;
};

namespace detail {

inline std::string cell_tag(double R, double ra, int seed) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "cell/R=%g/ra=%g/seed=%d", R, ra, seed);
    return buf;
}

} // namespace detail

/// Runs one cell. The training set is shared across methods of the same
/// (R, r_a, seed) coordinate; only the method-specific training randomness
/// differs.
inline CellResult run_benchmark_cell(const BenchmarkGrid& grid, double R, double ra,
                                     int seed, const std::string& method) {
    CellResult out;
    out.method = method;
    out.seed = seed;
    out.ring_radius = R;
    out.corruption_rate = ra;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const std::string tag = detail::cell_tag(R, ra, seed);

        SyntheticConfig train_cfg;
        train_cfg.n_per_class = grid.n_train_per_class;
        train_cfg.corruption_rate = ra;
        train_cfg.ring_inner_radius = R;
        train_cfg.seed = derive_seed(grid.master_seed, tag + "/train-data");
        const Dataset train_ds = generate_synthetic(train_cfg);

        SyntheticConfig test_cfg = train_cfg;
        test_cfg.n_per_class = grid.n_test_per_class;
        test_cfg.corruption_rate = 0.0;  // uncorrupted test set
        test_cfg.seed = derive_seed(grid.master_seed, tag + "/test-data");
        const Dataset test_ds = generate_synthetic(test_cfg);

        TrainConfig tcfg = grid.train;
        tcfg.seed = derive_seed(grid.master_seed, tag + "/" + method);

        std::vector<bool> truth(static_cast<std::size_t>(train_ds.size()));
        for (Eigen::Index i = 0; i < train_ds.size(); ++i)
            truth[static_cast<std::size_t>(i)] = train_ds.anomaly_truth(i);

        if (method == "gem-med") {
            const auto split = bipartite_split(train_ds, grid.split_fraction,
                                               derive_seed(grid.master_seed, tag + "/split"));
            const GemModel gem = fit_gem(train_ds, split, grid.gem_k, tcfg.beta_hat,
                                         std::nullopt, grid.scale);
            const TrainedModel model = train(train_ds, grid.kernel, gem, grid.prior, tcfg);
            out.error = misclassification(model, test_ds);
            out.auc = anomaly_auc(model.eta_hat, truth);
        } else if (method == "med") {
            const TrainedModel model = baseline_med(train_ds, grid.kernel, grid.prior, tcfg);
            out.error = misclassification(model, test_ds);
            out.auc = anomaly_auc(model.eta_hat, truth);  // constant scores: 0.5
        } else if (method == "gem+med") {
            GemModel gem;
            gem.k = grid.gem_k;
            const TrainedModel model = baseline_two_stage(train_ds, grid.kernel, gem,
                                                          grid.prior, tcfg,
                                                          grid.two_stage_alpha);
            Eigen::VectorXd kept_score = Eigen::VectorXd::Zero(train_ds.size());
            for (auto i : model.source_indices) kept_score(i) = 1.0;
            out.error = misclassification(model, test_ds);
            out.auc = anomaly_auc(kept_score, truth);
        } else {
            throw std::invalid_argument("unknown method " + method);
        }
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.message = e.what();
    }
    out.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

/// Expands the grid in (R, r_a, seed, method) order.
struct CellSpec {
    double ring_radius;
    double corruption_rate;
    int seed;
    std::string method;
};

inline std::vector<CellSpec> expand_grid(const BenchmarkGrid& grid) {
    grid.validate();
    std::vector<CellSpec> cells;
    for (double R : grid.ring_radii)
        for (double ra : grid.corruption_rates)
            for (int s = 0; s < grid.seeds; ++s)
                for (const auto& m : grid.methods)
                    cells.push_back({R, ra, s, m});
    return cells;
}

/// Runs all cells on a bounded worker pool. Results come back in grid order
/// regardless of scheduling, so output files are reproducible byte-for-byte.
inline std::vector<CellResult> run_benchmark(const BenchmarkGrid& grid) {
    const auto cells = expand_grid(grid);
    std::vector<CellResult> results(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) break;
            results[i] = run_benchmark_cell(grid, cells[i].ring_radius,
                                            cells[i].corruption_rate, cells[i].seed,
                                            cells[i].method);
        }
    };
    const int n_threads = std::min<int>(grid.threads, static_cast<int>(cells.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_threads));
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return results;
}

/// CSV rows: method,seed,R,r_a,error,auc,runtime_s,status. runtime_s stays
/// empty unless timings were requested, keeping the file deterministic.
inline void write_benchmark_csv(const std::vector<CellResult>& results, bool timings,
                                std::ostream& out) {
    out << "method,seed,R,r_a,error,auc,runtime_s,status\n";
    char buf[64];
    for (const auto& r : results) {
        out << r.method << "," << r.seed << ",";
        std::snprintf(buf, sizeof(buf), "%g", r.ring_radius);
        out << buf << ",";
        std::snprintf(buf, sizeof(buf), "%g", r.corruption_rate);
        out << buf << ",";
        if (r.ok) {
            std::snprintf(buf, sizeof(buf), "%.6f", r.error);
            out << buf << ",";
            std::snprintf(buf, sizeof(buf), "%.6f", r.auc);
            out << buf << ",";
        } else {
            out << ",,";
        }
        if (timings) {
            std::snprintf(buf, sizeof(buf), "%.3f", r.runtime_s);
            out << buf;
        }
        out << "," << (r.ok ? "ok" : "error") << "\n";
    }
}

inline void write_benchmark_csv(const std::vector<CellResult>& results, bool timings,
                                const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("benchmark: cannot write " + path);
    write_benchmark_csv(results, timings, out);
}

/// Per-(method, R, r_a) means and standard errors over seeds.
inline nlohmann::ordered_json summarize_benchmark(const std::vector<CellResult>& results) {
    struct Acc {
        std::vector<double> error, auc;
        int failures = 0;
    };
    std::map<std::tuple<std::string, double, double>, Acc> groups;
    for (const auto& r : results) {
        auto& acc = groups[{r.method, r.ring_radius, r.corruption_rate}];
        if (r.ok) {
            acc.error.push_back(r.error);
            acc.auc.push_back(r.auc);
        } else {
            ++acc.failures;
        }
    }
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    auto stderr_of = [&](const std::vector<double>& v) {
        if (v.size() < 2) return 0.0;
        const double m = mean(v);
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::sqrt(s / static_cast<double>(v.size() - 1)) /
               std::sqrt(static_cast<double>(v.size()));
    };

    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const auto& [key, acc] : groups) {
        nlohmann::ordered_json row;
        row["method"] = std::get<0>(key);
        row["R"] = std::get<1>(key);
        row["r_a"] = std::get<2>(key);
        row["n_seeds"] = acc.error.size();
        row["failures"] = acc.failures;
        row["error_mean"] = mean(acc.error);
        row["error_stderr"] = stderr_of(acc.error);
        row["auc_mean"] = mean(acc.auc);
        row["auc_stderr"] = stderr_of(acc.auc);
        cells.push_back(row);
    }
    nlohmann::ordered_json summary;
    summary["cells"] = cells;
    return summary;
}

} // namespace gemmed
