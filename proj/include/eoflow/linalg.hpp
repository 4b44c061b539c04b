#ifndef EOFLOW_LINALG_HPP
#define EOFLOW_LINALG_HPP

#include <cstdint>
#include <random>

#include "eoflow/tensor.hpp"

namespace eoflow::linalg {

// Orthogonal matrix from the QR factorisation of a seeded Gaussian matrix,
// with signs fixed so the result is a deterministic function of the rng state.
Tensor random_orthogonal(int64_t dim, std::mt19937_64& rng);

Tensor gaussian(std::vector<int64_t> shape, std::mt19937_64& rng, double scl = 1.0);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matvec(const Tensor& a, const Tensor& x);
Tensor transpose(const Tensor& a);
Tensor inverse(const Tensor& a);
double log_abs_det(const Tensor& a);

// Cholesky factor L (lower) of a symmetric positive-definite matrix;
// throws numeric_error when the matrix is not PD.
Tensor cholesky(const Tensor& a);

}  // namespace eoflow::linalg

#endif
