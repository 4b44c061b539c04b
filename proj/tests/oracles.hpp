#ifndef EOFLOW_TESTS_ORACLES_HPP
#define EOFLOW_TESTS_ORACLES_HPP

// Test-only numerical oracles, independent of the autodiff implementation
// they are used to check: central finite differences for gradients and
// Jacobians, and a tiny deterministic RNG helper.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "eoflow/tensor.hpp"

namespace eoflow::oracle {

inline constexpr double kFdStep = 1e-5;

// Central-difference gradient of a scalar function of a flat parameter
// vector.
inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       std::vector<double> x, double h = kFdStep) {
    std::vector<double> g(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        double orig = x[i];
        x[i] = orig + h;
        double fp = f(x);
        x[i] = orig - h;
        double fm = f(x);
        x[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Central-difference Jacobian (rows = outputs, cols = inputs) of a vector
// function.
inline std::vector<std::vector<double>> fd_jacobian(
    const std::function<std::vector<double>(const std::vector<double>&)>& f,
    std::vector<double> x, double h = kFdStep) {
    std::vector<double> base = f(x);
    std::vector<std::vector<double>> jac(base.size(), std::vector<double>(x.size()));
    for (size_t j = 0; j < x.size(); ++j) {
        double orig = x[j];
        x[j] = orig + h;
        std::vector<double> fp = f(x);
        x[j] = orig - h;
        std::vector<double> fm = f(x);
        x[j] = orig;
        for (size_t i = 0; i < base.size(); ++i) jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
    }
    return jac;
}

inline double rel_err(double got, double want) {
    double denom = std::max(1.0, std::abs(want));
    return std::abs(got - want) / denom;
}

inline double max_rel_err(const std::vector<double>& got, const std::vector<double>& want) {
    double m = 0.0;
    for (size_t i = 0; i < got.size(); ++i) m = std::max(m, rel_err(got[i], want[i]));
    return m;
}

inline std::vector<double> random_values(size_t n, std::mt19937_64& rng, double scl = 1.0) {
    std::normal_distribution<double> dist(0.0, scl);
    std::vector<double> out(n);
    for (double& v : out) v = dist(rng);
    return out;
}

inline Tensor random_tensor(std::vector<int64_t> shape, std::mt19937_64& rng, double scl = 1.0) {
    int64_t n = 1;
    for (int64_t e : shape) n *= e;
    return Tensor(std::move(shape), random_values(static_cast<size_t>(n), rng, scl));
}

}  // namespace eoflow::oracle

#endif
