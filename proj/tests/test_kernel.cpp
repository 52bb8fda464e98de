#include <catch2/catch_amalgamated.hpp>

#include "gemmed/kernel.hpp"
#include "gemmed/rng.hpp"

using namespace gemmed;

TEST_CASE("kernel_eval pinned values") {
    const KernelSpec rbf{KernelSpec::Kind::rbf, 1.0};
    const KernelSpec lin{KernelSpec::Kind::linear, 0.0};
    Eigen::VectorXd a(2), b(2);

    a << 0.7, -0.3;
    REQUIRE(kernel_eval(rbf, a, a) == 1.0);  // zero distance

    a << 0, 0;
    b << 1, 0;
    REQUIRE_THAT(kernel_eval(rbf, a, b),
                 Catch::Matchers::WithinAbs(0.36787944117144233, 1e-15));

    a << 1, 2;
    b << 3, 4;
    REQUIRE(kernel_eval(lin, a, b) == 11.0);

    Eigen::VectorXd c(3);
    c << 1, 2, 3;
    REQUIRE_THROWS(kernel_eval(lin, a, c));
}

TEST_CASE("rbf kernel stays in (0,1]") {
    auto rng = make_rng(4, "kern");
    std::normal_distribution<double> normal(0.0, 5.0);
    const KernelSpec rbf{KernelSpec::Kind::rbf, 0.3};
    for (int t = 0; t < 200; ++t) {
        Eigen::VectorXd a(3), b(3);
        for (int i = 0; i < 3; ++i) {
            a(i) = normal(rng);
            b(i) = normal(rng);
        }
        const double v = kernel_eval(rbf, a, b);
        REQUIRE(v > 0.0);
        REQUIRE(v <= 1.0);
    }
}

TEST_CASE("gram: rbf unit diagonal and exact symmetry") {
    SyntheticConfig cfg;
    cfg.n_per_class = 10;
    cfg.seed = 21;
    const Dataset ds = generate_synthetic(cfg);
    const GramMatrix g = gram({KernelSpec::Kind::rbf, 0.5}, ds);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        REQUIRE(g.values()(i, i) == 1.0);
        for (Eigen::Index j = 0; j < g.size(); ++j)
            REQUIRE(g.values()(i, j) == g.values()(j, i));
    }
}

TEST_CASE("gram: single linear sample") {
    Eigen::MatrixXd f(1, 1);
    f << 2.0;
    const Dataset ds(f, {1});
    const GramMatrix g = gram({KernelSpec::Kind::linear, 0.0}, ds);
    REQUIRE(g.size() == 1);
    REQUIRE(g.values()(0, 0) == 4.0);
    REQUIRE(g.jitter() == 0.0);
}

TEST_CASE("gram: duplicated rows force a positive jitter but still factor") {
    Eigen::MatrixXd f(4, 2);
    f << 1, 2, 1, 2, 3, 4, 3, 4;  // two exact duplicates
    const Dataset ds(f, {1, 1, -1, -1});
    const GramMatrix g = gram({KernelSpec::Kind::rbf, 1.0}, ds);
    REQUIRE(g.jitter() > 0.0);

    Eigen::MatrixXd shifted = g.values();
    shifted.diagonal().array() += g.jitter();
    const Eigen::MatrixXd recon = g.factor() * g.factor().transpose();
    REQUIRE((recon - shifted).norm() / shifted.norm() < 1e-8);
}

TEST_CASE("quadratic_form pinned and against the explicit double loop") {
    Eigen::MatrixXd f(1, 1);
    f << 2.0;
    const GramMatrix g1 = gram({KernelSpec::Kind::linear, 0.0}, Dataset(f, {1}));
    Eigen::VectorXd v1(1);
    v1 << 3.0;
    REQUIRE(quadratic_form(g1, v1) == 36.0);
    v1 << 0.0;
    REQUIRE(quadratic_form(g1, v1) == 0.0);

    SyntheticConfig cfg;
    cfg.n_per_class = 8;
    cfg.seed = 2;
    const Dataset ds = generate_synthetic(cfg);
    const GramMatrix g = gram({KernelSpec::Kind::rbf, 0.2}, ds);
    auto rng = make_rng(9, "qf");
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd v(g.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);

    double naive = 0.0;
    for (Eigen::Index i = 0; i < g.size(); ++i)
        for (Eigen::Index j = 0; j < g.size(); ++j)
            naive += v(i) * g.values()(i, j) * v(j);
    REQUIRE_THAT(quadratic_form(g, v), Catch::Matchers::WithinRel(naive, 1e-10));

    REQUIRE_THROWS(quadratic_form(g, v1));  // wrong length

    SECTION("near positive semidefinite with the jitter included") {
        for (int t = 0; t < 50; ++t) {
            for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
            REQUIRE(quadratic_form(g, v) + g.jitter() * v.squaredNorm() >=
                    -1e-8 * v.squaredNorm());
        }
    }
}

TEST_CASE("sample_gp is deterministic and matches its moments") {
    SyntheticConfig cfg;
    cfg.n_per_class = 2;
    cfg.seed = 31;
    const Dataset ds = generate_synthetic(cfg);
    const GramMatrix g = gram({KernelSpec::Kind::rbf, 0.4}, ds);
    const Eigen::Index n = g.size();
    Eigen::VectorXd mean(n);
    mean << 1.0, -2.0, 0.5, 3.0;

    auto r1 = make_rng(5, "gp");
    auto r2 = make_rng(5, "gp");
    REQUIRE(sample_gp(g, mean, r1) == sample_gp(g, mean, r2));

    const int draws = 50000;
    auto rng = make_rng(6, "gp-moments");
    Eigen::MatrixXd sum_outer = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
    for (int t = 0; t < draws; ++t) {
        const Eigen::VectorXd x = sample_gp(g, mean, rng);
        sum += x;
        sum_outer += (x - mean) * (x - mean).transpose();
    }
    const Eigen::VectorXd sample_mean = sum / draws;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double tol = 4.0 * std::sqrt((g.values()(i, i) + g.jitter()) / draws);
        REQUIRE(std::abs(sample_mean(i) - mean(i)) < tol);
    }
    Eigen::MatrixXd target = g.values();
    target.diagonal().array() += g.jitter();
    const Eigen::MatrixXd sample_cov = sum_outer / draws;
    REQUIRE((sample_cov - target).norm() / target.norm() < 0.05);
}
