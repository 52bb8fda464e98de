#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gemmed/dataset.hpp"

using namespace gemmed;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / name;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

} // namespace

TEST_CASE("load_csv parses a two-row file") {
    const auto p = temp_file("gemmed_ds_basic.csv");
    write_file(p, "x1,x2,y\n0,0,1\n1,1,-1\n");
    const Dataset ds = load_csv(p.string(), "y");
    REQUIRE(ds.size() == 2);
    REQUIRE(ds.dim() == 2);
    REQUIRE(ds.label(0) == 1);
    REQUIRE(ds.label(1) == -1);
    REQUIRE(ds.features()(1, 0) == 1.0);
    REQUIRE_FALSE(ds.has_anomaly_truth());
}

TEST_CASE("load_csv maps 0/1 labels onto -1/+1") {
    const auto p = temp_file("gemmed_ds_01.csv");
    write_file(p, "a,b,lab\n0.5,2,0\n1.5,3,1\n");
    const Dataset ds = load_csv(p.string(), "lab");
    REQUIRE(ds.label(0) == -1);
    REQUIRE(ds.label(1) == +1);
}

TEST_CASE("load_csv errors name the offending data row") {
    const auto p = temp_file("gemmed_ds_bad.csv");
    write_file(p, "x1,x2,y\na,b,1\n");
    REQUIRE_THROWS_WITH(load_csv(p.string(), "y"), Catch::Matchers::ContainsSubstring("row 1"));
}

TEST_CASE("load_csv rejects inconsistent field counts and unknown labels") {
    const auto p = temp_file("gemmed_ds_dim.csv");
    write_file(p, "x1,x2,y\n1,2,1\n1,2,3,1\n");
    REQUIRE_THROWS_WITH(load_csv(p.string(), "y"), Catch::Matchers::ContainsSubstring("row 2"));

    const auto q = temp_file("gemmed_ds_lab.csv");
    write_file(q, "x1,x2,y\n1,2,7\n");
    REQUIRE_THROWS_WITH(load_csv(q.string(), "y"),
                        Catch::Matchers::ContainsSubstring("unknown label"));
}

TEST_CASE("load_csv reads anomaly flags when the column is named") {
    const auto p = temp_file("gemmed_ds_anom.csv");
    write_file(p, "x1,y,anomaly\n1,1,0\n2,-1,1\n");
    const Dataset ds = load_csv(p.string(), "y", std::string("anomaly"));
    REQUIRE(ds.has_anomaly_truth());
    REQUIRE_FALSE(ds.anomaly_truth(0));
    REQUIRE(ds.anomaly_truth(1));
}

TEST_CASE("csv round-trip is bit-exact") {
    Eigen::MatrixXd f(3, 2);
    f << 0.1, -3.141592653589793, 1e-17, 55.123456789012345, -0.0, 7.0;
    const Dataset ds(f, {1, -1, 1}, {0, 1, 0});
    const auto p = temp_file("gemmed_ds_rt.csv");
    save_csv(ds, p.string());
    const Dataset back = load_csv(p.string(), "y", std::string("anomaly"));
    REQUIRE(back.size() == ds.size());
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        for (Eigen::Index c = 0; c < ds.dim(); ++c)
            REQUIRE(back.features()(i, c) == ds.features()(i, c));
        REQUIRE(back.label(i) == ds.label(i));
        REQUIRE(back.anomaly_truth(i) == ds.anomaly_truth(i));
    }
}

TEST_CASE("generate_synthetic matches the benchmark protocol counts") {
    SyntheticConfig cfg;  // defaults: means (3,3), 100 per class, r_a 0.2, R 55
    cfg.seed = 7;
    const Dataset ds = generate_synthetic(cfg);
    REQUIRE(ds.size() == 200);
    Eigen::Index anomalies = 0;
    for (Eigen::Index i = 0; i < ds.size(); ++i)
        if (ds.anomaly_truth(i)) ++anomalies;
    REQUIRE(anomalies == 40);

    SECTION("ring points land inside the annulus") {
        for (Eigen::Index i = 0; i < ds.size(); ++i) {
            if (!ds.anomaly_truth(i)) continue;
            const double r = ds.x(i).norm();
            REQUIRE(r >= cfg.ring_inner_radius);
            REQUIRE(r <= cfg.ring_inner_radius + cfg.ring_width);
        }
    }
}

TEST_CASE("generate_synthetic with zero corruption is all nominal") {
    SyntheticConfig cfg;
    cfg.corruption_rate = 0.0;
    cfg.seed = 3;
    const Dataset ds = generate_synthetic(cfg);
    REQUIRE(ds.size() == 200);
    for (Eigen::Index i = 0; i < ds.size(); ++i) REQUIRE_FALSE(ds.anomaly_truth(i));
}

TEST_CASE("generate_synthetic is deterministic in the seed") {
    SyntheticConfig cfg;
    cfg.seed = 123;
    const Dataset a = generate_synthetic(cfg);
    const Dataset b = generate_synthetic(cfg);
    REQUIRE(a.features() == b.features());
    REQUIRE(a.labels() == b.labels());
}

TEST_CASE("generate_synthetic nominal means converge") {
    SyntheticConfig cfg;
    cfg.n_per_class = 10000;
    cfg.corruption_rate = 0.0;
    cfg.seed = 11;
    const Dataset ds = generate_synthetic(cfg);
    Eigen::Vector2d sum_pos = Eigen::Vector2d::Zero(), sum_neg = Eigen::Vector2d::Zero();
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        if (ds.label(i) > 0) sum_pos += ds.x(i).transpose();
        else sum_neg += ds.x(i).transpose();
    }
    const Eigen::Vector2d mean_pos = sum_pos / cfg.n_per_class;
    const Eigen::Vector2d mean_neg = sum_neg / cfg.n_per_class;
    const double tol = 3.0 * std::sqrt(20.0 / cfg.n_per_class);  // 3 standard errors
    for (int c = 0; c < 2; ++c) {
        REQUIRE(std::abs(mean_pos(c) - cfg.mean_plus(c)) < tol);
        REQUIRE(std::abs(mean_neg(c) + cfg.mean_plus(c)) < tol);
    }
}

TEST_CASE("bipartite_split partitions each class") {
    SyntheticConfig cfg;
    cfg.n_per_class = 20;
    cfg.seed = 5;
    const Dataset ds = generate_synthetic(cfg);
    const BipartiteSplit split = bipartite_split(ds, 0.5, 42);
    for (int z : {-1, +1}) {
        const auto slot = static_cast<std::size_t>(class_index(z));
        auto members = ds.class_members(z);
        std::vector<Eigen::Index> merged = split.reference[slot];
        merged.insert(merged.end(), split.candidates[slot].begin(),
                      split.candidates[slot].end());
        std::sort(merged.begin(), merged.end());
        REQUIRE(merged == members);  // disjoint union covers the class
        const auto expected_ref = static_cast<std::size_t>(
            std::lround(0.5 * static_cast<double>(members.size())));
        REQUIRE(split.reference[slot].size() == std::max<std::size_t>(1, expected_ref));
    }
}

TEST_CASE("bipartite_split clamps a zero-rounding reference part to one point") {
    Eigen::MatrixXd f(10, 1);
    for (int i = 0; i < 10; ++i) f(i, 0) = i;
    std::vector<int> y(10, 1);
    for (int i = 0; i < 5; ++i) y[static_cast<std::size_t>(i)] = -1;
    const Dataset ds(f, y);
    const BipartiteSplit split = bipartite_split(ds, 0.05, 1);  // round(0.25) == 0
    REQUIRE(split.reference[0].size() == 1);
    REQUIRE(split.reference[1].size() == 1);
    REQUIRE(split.candidates[0].size() == 4);
}

TEST_CASE("bipartite_split is deterministic and rejects tiny classes") {
    SyntheticConfig cfg;
    cfg.n_per_class = 15;
    cfg.seed = 9;
    const Dataset ds = generate_synthetic(cfg);
    const BipartiteSplit a = bipartite_split(ds, 0.4, 77);
    const BipartiteSplit b = bipartite_split(ds, 0.4, 77);
    REQUIRE(a.reference == b.reference);
    REQUIRE(a.candidates == b.candidates);

    Eigen::MatrixXd f(3, 1);
    f << 0, 1, 2;
    const Dataset tiny(f, {1, 1, -1});
    REQUIRE_THROWS(bipartite_split(tiny, 0.5, 0));
}
