#ifndef EOFLOW_LINEAR_HPP
#define EOFLOW_LINEAR_HPP

#include <cstdint>
#include <random>
#include <vector>

#include "eoflow/flow.hpp"
#include "eoflow/index_set.hpp"
#include "eoflow/tensor.hpp"

namespace eoflow::linear {

// Eigendecomposition of the sample covariance: Sigma = Q Lambda Q^T with
// eigenvalues descending and a fixed sign convention (largest-magnitude
// entry of each eigenvector positive). Ties are kept in solver order, so
// the decomposition is only unique up to rotation within tied eigenspaces.
struct PCAResult {
    Tensor mean;     // D
    Tensor eigvecs;  // D x D, columns are eigenvectors
    Tensor eigvals;  // D, descending
};

PCAResult pca_fit(const Tensor& data);  // data: N x D

// Affine decoder g(z) = A z + b with cached SVD A = U diag(S) V^T.
struct LinearFlow {
    Tensor A;
    Tensor b;
    Tensor U;
    Tensor S;  // singular values, descending, positive
    Tensor V;
    Tensor A_inv;

    Tensor encode(const Tensor& x) const;  // A^-1 (x - b)
    Tensor decode(const Tensor& z) const;  // A z + b
};

LinearFlow make_linear_flow(Tensor A, Tensor b);

// PCA as a linear normalizing flow: A = Q Lambda^{1/2}, b = mean.
LinearFlow linear_flow_from_pca(const PCAResult& pca);

// Expected ML loss of an affine decoder against a Gaussian target:
// 0.5 [ tr((AA^T)^-1 Sigma) + (mu-b)^T (AA^T)^-1 (mu-b) + 2 log|A| + D log 2pi ]
double linear_ml_loss(const Tensor& A, const Tensor& b, const Tensor& mu, const Tensor& Sigma);

// Expected total correlation of an affine decoder:
// 0.5 sum_i log( V_i S^2 V_i^T / s_i^2 ), zero iff V is a signed permutation.
double linear_tc_loss(const Tensor& A);

// Expected subspace entropy under the covariance-matching solution
// (b = mu, AA^T = Sigma): 0.5|S| + 0.5 log det(A_S^T A_S) + (|S|/2) log 2pi.
double linear_subspace_entropy(const Tensor& A, const IndexSet& S);

// Sum over nested tails D_C = {C..D-1} of tail_weights[C-1] * L_{D_C}(A);
// minimised over permutations by the descending eigenvalue order.
double linear_nested_compression_loss(const Tensor& A, const std::vector<double>& tail_weights);

// Witness for the equivalence of the detail compression loss and the scaled
// L2 reconstruction loss on a constructed decoder g(z) = ghat(z_C) + sigma
// U_D z_D (random affine ghat, semi-orthonormal U_D).
struct CompressionReconReport {
    int64_t n_points = 0;
    double max_abs_residual = 0.0;
    double tolerance = 0.0;
    bool passed = false;
};

CompressionReconReport verify_compression_equals_reconstruction(double sigma, int64_t dim,
                                                                int64_t core_dim, uint64_t seed,
                                                                int64_t n_points = 1000,
                                                                double tolerance = 1e-8);

// Single-affine-layer FlowModel sharing the linear flow's parameters.
flow::FlowModel wrap_linear_flow(const LinearFlow& lf);

}  // namespace eoflow::linear

#endif
