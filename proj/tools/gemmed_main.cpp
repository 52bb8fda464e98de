// Command-line front end: generate / train / predict / detect / benchmark /
// cv-gamma. Every command is deterministic given --seed; see README for the
// stream-derivation scheme and file formats.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gemmed/cli.hpp"

namespace {

using namespace gemmed;

void add_prior_train_flags(CLI::App* cmd, PriorConfig& prior, TrainConfig& train) {
    cmd->add_option("--c", prior.c, "slack prior rate c (barrier ceiling for lambda)");
    cmd->add_option("--a-eta", prior.a_eta, "nominality prior logit");
    cmd->add_option("--c1", train.C1, "lambda clip ceiling");
    cmd->add_option("--lr-lambda", train.lr_lambda, "lambda step size");
    cmd->add_option("--lr-mu", train.lr_mu, "mu step size");
    cmd->add_option("--lr-kappa", train.lr_kappa, "kappa step size");
    cmd->add_option("--beta-hat", train.beta_hat, "coverage target in (0,1)");
    cmd->add_option("--max-iters", train.max_iters, "ascent iteration cap");
    cmd->add_option("--tol", train.tol, "stop when the largest dual update is below");
    cmd->add_option("--sweeps", train.sweeps, "chain sweeps per iteration");
    cmd->add_option("--replicates", train.inner_replicates, "Bernoulli replicates per sweep");
}

void add_kernel_flags(CLI::App* cmd, std::string& kernel_kind, double& gamma) {
    cmd->add_option("--kernel", kernel_kind, "kernel kind: linear or rbf")
        ->check(CLI::IsMember({"linear", "rbf"}));
    cmd->add_option("--gamma", gamma, "rbf width");
}

KernelSpec make_kernel(const std::string& kind, double gamma) {
    KernelSpec spec;
    spec.kind = kind == "rbf" ? KernelSpec::Kind::rbf : KernelSpec::Kind::linear;
    spec.gamma = gamma;
    return spec;
}

GemScale parse_scale(const std::string& s) {
    if (s == "total") return GemScale::total;
    if (s == "class") return GemScale::per_class;
    throw CLI::ValidationError("--scaling must be 'total' or 'class'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"GEM-MED: robust large-margin training on minimal-entropy sets"};
    app.require_subcommand(1);

    // generate ---------------------------------------------------------------
    cli::GenerateOptions gen;
    double mean_x = 3.0, mean_y = 3.0;
    std::vector<double> cov{20.0, 16.0, 16.0, 20.0};
    auto* cgen = app.add_subcommand("generate", "write a synthetic benchmark CSV");
    cgen->set_config("--config");
    cgen->add_option("--out", gen.out, "output CSV path");
    cgen->add_option("--seed", gen.synthetic.seed, "master seed");
    cgen->add_option("--n-per-class", gen.synthetic.n_per_class, "samples per class");
    cgen->add_option("--corruption", gen.synthetic.corruption_rate, "anomaly fraction r_a");
    cgen->add_option("--ring-radius", gen.synthetic.ring_inner_radius, "inner ring radius R");
    cgen->add_option("--ring-width", gen.synthetic.ring_width, "ring width");
    cgen->add_option("--mean-x", mean_x, "class +1 mean, first coordinate");
    cgen->add_option("--mean-y", mean_y, "class +1 mean, second coordinate");
    cgen->add_option("--cov", cov, "covariance entries a11,a12,a21,a22")
        ->delimiter(',')
        ->expected(4);

    // train ------------------------------------------------------------------
    cli::TrainOptions tr;
    std::string tr_kernel = "linear", tr_scaling = "total";
    double tr_gamma = 1.0;
    auto* ctrain = app.add_subcommand("train", "fit a model on a labeled CSV");
    ctrain->set_config("--config");
    ctrain->add_option("--data", tr.data, "training CSV")->required();
    ctrain->add_option("--out", tr.out, "model output path");
    ctrain->add_option("--label-column", tr.label_column, "label column name");
    ctrain->add_option("--anomaly-column", tr.anomaly_column, "anomaly column name (ignored if absent)");
    ctrain->add_option("--seed", tr.train.seed, "master seed");
    add_kernel_flags(ctrain, tr_kernel, tr_gamma);
    add_prior_train_flags(ctrain, tr.prior, tr.train);
    ctrain->add_option("--k", tr.gem_k, "k-NN order");
    ctrain->add_option("--split-fraction", tr.split_fraction, "reference part fraction");
    ctrain->add_option("--epsilon", tr.epsilon, "entropy bound slack (negative: relative 1e-3)");
    ctrain->add_option("--scaling", tr_scaling, "entropy/coverage normalization: total or class")
        ->check(CLI::IsMember({"total", "class"}));
    ctrain->add_option("--baseline", tr.baseline, "train a baseline instead: med")
        ->check(CLI::IsMember({"med"}));
    ctrain->add_option("--posterior", tr.posterior, "expectation backend: gibbs or exact")
        ->check(CLI::IsMember({"gibbs", "exact"}));

    // predict ----------------------------------------------------------------
    cli::PredictOptions pr;
    auto* cpred = app.add_subcommand("predict", "classify rows of a CSV with a model");
    cpred->set_config("--config");
    cpred->add_option("--model", pr.model, "model file")->required();
    cpred->add_option("--data", pr.data, "input CSV")->required();
    cpred->add_option("--out", pr.out, "output CSV path");
    cpred->add_option("--label-column", pr.label_column, "label column to skip if present");
    cpred->add_option("--anomaly-column", pr.anomaly_column, "anomaly column to skip if present");

    // detect -----------------------------------------------------------------
    cli::DetectOptions de;
    auto* cdet = app.add_subcommand("detect", "flag anomalous rows of a CSV with a model");
    cdet->set_config("--config");
    cdet->add_option("--model", de.model, "model file")->required();
    cdet->add_option("--data", de.data, "input CSV")->required();
    cdet->add_option("--out", de.out, "output CSV path");
    cdet->add_option("--alpha", de.alpha,
                     "leave-one-out false-alarm level (omit to use the fitted per-class cutoffs)");
    cdet->add_option("--label-column", de.label_column, "label column to skip if present");
    cdet->add_option("--anomaly-column", de.anomaly_column, "anomaly column to skip if present");

    // benchmark ----------------------------------------------------------------
    cli::BenchmarkOptions bm;
    std::string bm_kernel = "linear", bm_scaling = "total";
    double bm_gamma = 1.0;
    auto* cbench = app.add_subcommand("benchmark", "sweep the synthetic grid and emit metrics");
    cbench->set_config("--config");
    cbench->add_option("--out", bm.out, "output prefix (<out>.csv, <out>.json)");
    cbench->add_option("--R", bm.grid.ring_radii, "ring radii")->delimiter(',');
    cbench->add_option("--ra", bm.grid.corruption_rates, "corruption rates")->delimiter(',');
    cbench->add_option("--seeds", bm.grid.seeds, "seeds per cell");
    cbench->add_option("--methods", bm.grid.methods, "methods: gem-med, med, gem+med")
        ->delimiter(',');
    cbench->add_option("--n-train", bm.grid.n_train_per_class, "training samples per class");
    cbench->add_option("--n-test", bm.grid.n_test_per_class, "test samples per class");
    cbench->add_option("--alpha", bm.grid.two_stage_alpha, "screening level for gem+med");
    cbench->add_option("--k", bm.grid.gem_k, "k-NN order");
    cbench->add_option("--split-fraction", bm.grid.split_fraction, "reference part fraction");
    cbench->add_option("--threads", bm.grid.threads, "worker threads");
    cbench->add_flag("--timings", bm.grid.timings, "fill runtime_s (not byte-reproducible)");
    add_kernel_flags(cbench, bm_kernel, bm_gamma);
    add_prior_train_flags(cbench, bm.grid.prior, bm.grid.train);
    cbench->add_option("--scaling", bm_scaling, "entropy/coverage normalization")
        ->check(CLI::IsMember({"total", "class"}));
    cbench->add_option("--seed", bm.grid.master_seed, "master seed");

    // cv-gamma -----------------------------------------------------------------
    cli::CvGammaOptions cv;
    auto* ccv = app.add_subcommand("cv-gamma", "pick the rbf width by cross-validation");
    ccv->set_config("--config");
    ccv->add_option("--data", cv.data, "training CSV")->required();
    ccv->add_option("--grid", cv.grid, "gamma candidates")->delimiter(',');
    ccv->add_option("--folds", cv.folds, "fold count");
    ccv->add_option("--label-column", cv.label_column, "label column name");
    ccv->add_option("--anomaly-column", cv.anomaly_column, "anomaly column name");
    ccv->add_option("--seed", cv.train.seed, "master seed");
    add_prior_train_flags(ccv, cv.prior, cv.train);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cgen->parsed()) {
            gen.synthetic.mean_plus = Eigen::Vector2d(mean_x, mean_y);
            gen.synthetic.covariance << cov[0], cov[1], cov[2], cov[3];
            return cli::cmd_generate(gen);
        }
        if (ctrain->parsed()) {
            tr.kernel = make_kernel(tr_kernel, tr_gamma);
            tr.scale = parse_scale(tr_scaling);
            return cli::cmd_train(tr);
        }
        if (cpred->parsed()) return cli::cmd_predict(pr);
        if (cdet->parsed()) return cli::cmd_detect(de);
        if (cbench->parsed()) {
            bm.grid.kernel = make_kernel(bm_kernel, bm_gamma);
            bm.grid.scale = parse_scale(bm_scaling);
            return cli::cmd_benchmark(bm);
        }
        if (ccv->parsed()) return cli::cmd_cv_gamma(cv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
