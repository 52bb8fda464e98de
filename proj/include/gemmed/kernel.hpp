#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "gemmed/dataset.hpp"

namespace gemmed {

struct KernelSpec {
    enum class Kind { linear, rbf };
    Kind kind = Kind::linear;
    double gamma = 1.0;  // rbf width, K(x,y) = exp(-gamma * |x-y|^2)

    void validate() const {
        if (kind == Kind::rbf && gamma <= 0.0)
            throw std::invalid_argument("kernel: rbf gamma must be positive");
    }
};

template <class A, class B>
double kernel_eval(const KernelSpec& spec, const Eigen::MatrixBase<A>& x,
                   const Eigen::MatrixBase<B>& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("kernel_eval: dimension mismatch");
    spec.validate();
    switch (spec.kind) {
        case KernelSpec::Kind::linear: {
            double s = 0.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) s += x(i) * y(i);
            return s;
        }
        case KernelSpec::Kind::rbf: {
            double sq = 0.0;
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                const double d = x(i) - y(i);
                sq += d * d;
            }
            return std::exp(-spec.gamma * sq);
        }
    }
    throw std::logic_error("kernel_eval: unknown kernel kind");
}

/// Kernel matrix over a training set, kept alongside the lower-triangular
/// factor of values + jitter*I used for Gaussian sampling. The jitter is the
/// smallest decade in {0, 1e-10, ..., 1e-2} for which the factorization
/// succeeds; duplicated inputs under an rbf kernel need a positive one.
class GramMatrix {
public:
    GramMatrix(Eigen::MatrixXd values, Eigen::MatrixXd factor, double jitter)
        : values_(std::move(values)), factor_(std::move(factor)), jitter_(jitter) {}

    const Eigen::MatrixXd& values() const { return values_; }
    const Eigen::MatrixXd& factor() const { return factor_; }
    double jitter() const { return jitter_; }
    Eigen::Index size() const { return values_.rows(); }

private:
    Eigen::MatrixXd values_;
    Eigen::MatrixXd factor_;  // lower triangular, L * L^T = values + jitter * I
    double jitter_;
};

inline GramMatrix gram(const KernelSpec& spec, const Dataset& ds) {
    spec.validate();
    const Eigen::Index n = ds.size();
    Eigen::MatrixXd values(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double v = kernel_eval(spec, ds.x(i), ds.x(j));
            values(i, j) = v;
            values(j, i) = v;  // mirrored assignment keeps exact symmetry
        }
    }

    double jitter = 0.0;
    while (true) {
        Eigen::MatrixXd shifted = values;
        if (jitter > 0.0) shifted.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(shifted);
        if (llt.info() == Eigen::Success)
            return GramMatrix(std::move(values), llt.matrixL(), jitter);
        if (jitter >= 1e-2)
            throw std::runtime_error("gram: kernel matrix not factorizable even at jitter 1e-2");
        jitter = (jitter == 0.0) ? 1e-10 : jitter * 10.0;
    }
}

/// v' * values * v, jitter excluded.
inline double quadratic_form(const GramMatrix& g, const Eigen::VectorXd& v) {
    if (v.size() != g.size())
        throw std::invalid_argument("quadratic_form: length mismatch");
    return v.dot(g.values() * v);
}

/// One draw from N(mean, values + jitter*I).
inline Eigen::VectorXd sample_gp(const GramMatrix& g, const Eigen::VectorXd& mean,
                                 std::mt19937_64& rng) {
    if (mean.size() != g.size())
        throw std::invalid_argument("sample_gp: mean length mismatch");
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(g.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    return mean + g.factor() * z;
}

inline std::string to_string(const KernelSpec& spec) {
    if (spec.kind == KernelSpec::Kind::linear) return "linear";
    return "rbf gamma=" + std::to_string(spec.gamma);
}

} // namespace gemmed
