#include <catch2/catch_amalgamated.hpp>

#include "gemmed/posterior.hpp"
#include "gemmed/rng.hpp"

using namespace gemmed;

namespace {

// Small random instance with an rbf gram matrix and feasible duals.
struct Instance {
    Dataset ds;
    GramMatrix g;
    DualState dual;
    PriorConfig prior;
    std::vector<int> labels;
    Eigen::VectorXd entropy_w;
    Eigen::VectorXd coverage_w;
};

Instance make_instance(int n, std::uint64_t seed, double lambda_scale = 0.9) {
    auto rng = make_rng(seed, "instance");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Eigen::MatrixXd f(n, 2);
    std::vector<int> y;
    for (int i = 0; i < n; ++i) {
        f(i, 0) = normal(rng);
        f(i, 1) = normal(rng);
        y.push_back(unif(rng) < 0.5 ? -1 : +1);
    }
    if (n >= 2) {  // keep both classes present
        y[0] = -1;
        y[1] = +1;
    }
    Dataset ds(f, y);
    GramMatrix g = gram({KernelSpec::Kind::rbf, 0.7}, ds);

    DualState dual;
    dual.lambda.resize(n);
    for (int i = 0; i < n; ++i) dual.lambda(i) = 0.05 + lambda_scale * unif(rng);
    dual.mu.neg = unif(rng);
    dual.mu.pos = unif(rng);
    dual.kappa.neg = unif(rng);
    dual.kappa.pos = unif(rng);

    Eigen::VectorXd ew(n), cw(n);
    for (int i = 0; i < n; ++i) {
        ew(i) = 2.0 * unif(rng);       // stands in for d_n on the constraint scale
        cw(i) = 1.0 / n;
    }
    return {std::move(ds), std::move(g), std::move(dual), PriorConfig{}, std::move(y),
            std::move(ew), std::move(cw)};
}

} // namespace

TEST_CASE("prior_eta1 is exactly the sigmoid of a_eta") {
    PriorConfig prior;
    prior.a_eta = 0.37;
    REQUIRE(prior.prior_eta1() == sigmoid(0.37));
    prior.a_eta = 0.0;
    REQUIRE(prior.prior_eta1() == 0.5);
}

TEST_CASE("eta_logit pinned values (printed form)") {
    DualState dual;
    dual.lambda = Eigen::VectorXd::Zero(1);
    PriorConfig prior;

    // all duals zero, a_eta = 0 -> logit 0, probability one half
    REQUIRE(eta_logit(0, 1.7, dual, prior, 0.4, +1, 10.0) == 0.0);
    REQUIRE(sigmoid(eta_logit(0, 1.7, dual, prior, 0.4, +1, 10.0)) == 0.5);

    // margin exactly met cancels under the printed form
    dual.lambda(0) = 1.0;
    REQUIRE(eta_logit(0, 1.0, dual, prior, 0.0, +1, 10.0) == 0.0);

    // lambda=2, y f=1.5, mu=1, d=0.3, kappa=0.5, T=10
    dual.lambda(0) = 2.0;
    dual.mu.pos = 1.0;
    dual.kappa.pos = 0.5;
    const double logit = eta_logit(0, 1.5, dual, prior, 0.3, +1, 10.0);
    REQUIRE_THAT(logit, Catch::Matchers::WithinAbs(0.75, 1e-12));
    REQUIRE_THAT(sigmoid(logit), Catch::Matchers::WithinAbs(0.6792, 5e-5));
}

TEST_CASE("eta_logit is monotone in the margin and antitone in the distance") {
    DualState dual;
    dual.lambda = Eigen::VectorXd::Constant(1, 0.8);
    dual.mu.pos = 0.7;
    PriorConfig prior;
    prior.a_eta = 0.3;
    for (const auto variant : {PosteriorVariant{}, PosteriorVariant::printed()}) {
        double prev = -1e9;
        for (double yf : {-2.0, -0.5, 0.0, 0.5, 2.0}) {
            const double v = detail::eta_logit_impl(prior.a_eta, 0.8, yf, 0.7, 0.4, 0.2,
                                                    0.1, variant);
            REQUIRE(v > prev);
            prev = v;
        }
        prev = 1e9;
        for (double d : {0.0, 0.3, 0.9, 2.5}) {
            const double v =
                detail::eta_logit_impl(prior.a_eta, 0.8, 0.5, 0.7, d, 0.2, 0.1, variant);
            REQUIRE(v < prev);
            prev = v;
        }
    }
}

TEST_CASE("eta_logit probability stays strictly inside (0,1) on sane inputs") {
    auto inst = make_instance(4, 99);
    for (Eigen::Index i = 0; i < 4; ++i) {
        const double p = sigmoid(eta_logit(i, -3.0 + 2.0 * i, inst.dual, inst.prior, 0.7,
                                           inst.labels[static_cast<std::size_t>(i)], 4.0));
        REQUIRE(p > 0.0);
        REQUIRE(p < 1.0);
    }
}

TEST_CASE("f_mean pinned values and the summation oracle") {
    // eta = 0 gives a zero mean
    auto inst = make_instance(5, 7);
    const Eigen::VectorXd zero =
        f_mean(inst.dual, Eigen::VectorXd::Zero(5), inst.labels, inst.g);
    REQUIRE(zero.norm() == 0.0);

    // N=1: K=[1], lambda=2, eta=1, y=+1 -> mean (2)
    Eigen::MatrixXd f1(1, 1);
    f1 << 1.0;
    const Dataset d1(f1, {1});
    const GramMatrix g1 = gram({KernelSpec::Kind::rbf, 1.0}, d1);
    DualState dual1;
    dual1.lambda = Eigen::VectorXd::Constant(1, 2.0);
    REQUIRE(f_mean(dual1, Eigen::VectorXd::Ones(1), {1}, g1)(0) == 2.0);

    // random instance vs the explicit double sum
    const Eigen::VectorXd eta = Eigen::VectorXd::Constant(5, 0.6);
    const Eigen::VectorXd got = f_mean(inst.dual, eta, inst.labels, inst.g);
    for (Eigen::Index i = 0; i < 5; ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < 5; ++j)
            s += inst.g.values()(i, j) * inst.dual.lambda(j) * eta(j) *
                 inst.labels[static_cast<std::size_t>(j)];
        REQUIRE_THAT(got(i), Catch::Matchers::WithinRel(s, 1e-12));
    }
}

TEST_CASE("exact_posterior, zero duals: prior factorizes and the margin vanishes") {
    auto inst = make_instance(5, 13);
    inst.dual = DualState::zeros(5);
    inst.prior.a_eta = 0.8;
    const auto exact = exact_posterior(inst.g, inst.dual, inst.prior, inst.labels,
                                       inst.entropy_w, inst.coverage_w, PerClass{}, 0.8);
    for (Eigen::Index i = 0; i < 5; ++i) {
        REQUIRE_THAT(exact.expectations.eta_mean(i),
                     Catch::Matchers::WithinAbs(inst.prior.prior_eta1(), 1e-12));
        REQUIRE_THAT(exact.expectations.margin(i), Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
}

TEST_CASE("exact_posterior N=1 hand enumeration") {
    Eigen::MatrixXd f1(1, 1);
    f1 << 0.0;
    const Dataset d1(f1, {1});
    const GramMatrix g1 = gram({KernelSpec::Kind::rbf, 1.0}, d1);  // K = [1]
    DualState dual;
    dual.lambda = Eigen::VectorXd::Ones(1);
    PriorConfig prior;  // a_eta = 0 -> prior one half
    const Eigen::VectorXd w0 = Eigen::VectorXd::Zero(1);
    const auto exact =
        exact_posterior(g1, dual, prior, {1}, w0, w0, PerClass{}, 0.8);
    const double expect = std::exp(0.5) / (1.0 + std::exp(0.5));
    REQUIRE_THAT(exact.expectations.eta_mean(0), Catch::Matchers::WithinAbs(expect, 1e-12));
    REQUIRE_THAT(exact.expectations.margin(0), Catch::Matchers::WithinAbs(expect, 1e-12));
    REQUIRE_THAT(exact.expectations.eta_mean(0), Catch::Matchers::WithinAbs(0.6225, 5e-5));
}

TEST_CASE("exact_posterior refuses large instances") {
    auto inst = make_instance(5, 1);
    Eigen::MatrixXd f(13, 2);
    f.setRandom();
    std::vector<int> y(13, 1);
    y[0] = -1;
    const Dataset big(f, y);
    const GramMatrix g = gram({KernelSpec::Kind::rbf, 0.5}, big);
    DualState dual = DualState::zeros(13);
    REQUIRE_THROWS(exact_posterior(g, dual, inst.prior, y, Eigen::VectorXd::Zero(13),
                                   Eigen::VectorXd::Zero(13), PerClass{}, 0.8));
}

TEST_CASE("gibbs_run: a strong prior pins eta near one") {
    auto inst = make_instance(5, 21);
    inst.dual = DualState::zeros(5);
    inst.prior.a_eta = 20.0;
    auto rng = make_rng(2, "gibbs");
    const auto est = gibbs_run(inst.g, inst.dual, inst.prior, inst.labels, inst.entropy_w,
                               inst.coverage_w, 3, 10000, rng);
    for (Eigen::Index i = 0; i < 5; ++i) REQUIRE(est.eta_hat(i) >= 0.999);
}

TEST_CASE("gibbs_run: N=1 fair-coin limit") {
    Eigen::MatrixXd f1(1, 1);
    f1 << 0.3;
    const Dataset d1(f1, {1});
    const GramMatrix g1 = gram({KernelSpec::Kind::rbf, 1.0}, d1);
    DualState dual = DualState::zeros(1);
    PriorConfig prior;
    auto rng = make_rng(5, "gibbs-coin");
    const int sweeps = 20000, n_r = 1;
    const auto est = gibbs_run(g1, dual, prior, {1}, Eigen::VectorXd::Zero(1),
                               Eigen::VectorXd::Zero(1), sweeps, n_r, rng);
    const double tol = 3.0 * std::sqrt(0.25 / (sweeps * n_r));
    REQUIRE_THAT(est.eta_hat(0), Catch::Matchers::WithinAbs(0.5, tol));
}

TEST_CASE("gibbs_run tracks the exact enumeration") {
    auto inst = make_instance(5, 31);
    const auto exact =
        exact_posterior(inst.g, inst.dual, inst.prior, inst.labels, inst.entropy_w,
                        inst.coverage_w, PerClass{}, 0.8);
    auto rng = make_rng(6, "gibbs-exact");
    const auto est = gibbs_run(inst.g, inst.dual, inst.prior, inst.labels, inst.entropy_w,
                               inst.coverage_w, 200000, 1, rng);
    auto close = [](double got, double want) {
        return std::abs(got - want) <= std::max(0.05 * std::abs(want), 0.02);
    };
    for (Eigen::Index i = 0; i < 5; ++i)
        REQUIRE(close(est.expectations.margin(i), exact.expectations.margin(i)));
    REQUIRE(close(est.expectations.entropy.neg, exact.expectations.entropy.neg));
    REQUIRE(close(est.expectations.entropy.pos, exact.expectations.entropy.pos));
    REQUIRE(close(est.expectations.coverage.neg, exact.expectations.coverage.neg));
    REQUIRE(close(est.expectations.coverage.pos, exact.expectations.coverage.pos));
}

TEST_CASE("gibbs_run is deterministic given the rng state") {
    auto inst = make_instance(6, 41);
    auto r1 = make_rng(9, "det");
    auto r2 = make_rng(9, "det");
    const auto a = gibbs_run(inst.g, inst.dual, inst.prior, inst.labels, inst.entropy_w,
                             inst.coverage_w, 50, 8, r1);
    const auto b = gibbs_run(inst.g, inst.dual, inst.prior, inst.labels, inst.entropy_w,
                             inst.coverage_w, 50, 8, r2);
    REQUIRE(a.eta_hat == b.eta_hat);
    REQUIRE(a.f_hat == b.f_hat);
    REQUIRE(a.expectations.margin == b.expectations.margin);
}

TEST_CASE("frozen-f conditional frequencies match the logit") {
    auto inst = make_instance(4, 55);
    auto rng = make_rng(10, "frozen");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Eigen::VectorXd f = Eigen::VectorXd::Random(4) * 2.0;
    const int draws = 100000;
    for (Eigen::Index i = 0; i < 4; ++i) {
        const double p = sigmoid(eta_logit(i, f(i), inst.dual, inst.prior, inst.entropy_w(i),
                                           inst.labels[static_cast<std::size_t>(i)], 4.0,
                                           PosteriorVariant{}));
        int hits = 0;
        for (int t = 0; t < draws; ++t)
            if (unif(rng) < p) ++hits;
        const double freq = static_cast<double>(hits) / draws;
        const double se = std::sqrt(p * (1.0 - p) / draws);
        REQUIRE(std::abs(freq - p) <= 4.0 * se + 1e-12);
    }
}

TEST_CASE("multiplicative conditional form is exposed but off by default") {
    PosteriorVariant mult;
    mult.form = PosteriorVariant::Form::multiplicative;
    mult.margin_offset = true;
    // rho = -a_eta scales the bracket
    const double bracket = 2.0 * (1.5 - 1.0) - 0.3 + 0.05;
    const double got = detail::eta_logit_impl(0.7, 2.0, 1.5, 1.0, 0.3, 0.5, 0.1, mult);
    REQUIRE_THAT(got, Catch::Matchers::WithinAbs(-0.7 * bracket, 1e-12));

    auto inst = make_instance(3, 77);
    REQUIRE_THROWS(exact_posterior(inst.g, inst.dual, inst.prior, inst.labels,
                                   inst.entropy_w, inst.coverage_w, PerClass{}, 0.8, mult));
}
